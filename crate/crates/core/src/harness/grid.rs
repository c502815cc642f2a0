use crate::error::{Error, Result};

/// `k` geometrically spaced values from `lo` to `hi`, endpoints exact.
pub fn grid_logspace(lo: f64, hi: f64, k: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::invalid(format!("log grid needs 0 < lo < hi, got [{lo}, {hi}]")));
    }
    if k < 2 {
        return Err(Error::invalid("log grid needs at least 2 points"));
    }
    let ratio = hi / lo;
    let last = (k - 1) as f64;
    Ok((0..k)
        .map(|i| match i {
            0 => lo,
            i if i == k - 1 => hi,
            i => lo * ratio.powf(i as f64 / last),
        })
        .collect())
}

/// One evaluated hyperparameter combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    /// Inner bandwidth (MMD only).
    pub inner_gamma: Option<f64>,
    pub gamma: f64,
    pub lambda: f64,
    /// Validation loss; lower is better. Failed cells carry `+∞`.
    pub badness: f64,
}

/// Index of the winning cell: lowest badness, ties broken toward larger λ,
/// then toward the earlier cell.
pub fn select_best(cells: &[Cell]) -> Option<usize> {
    let key = |c: &Cell| if c.badness.is_nan() { f64::INFINITY } else { c.badness };
    let mut best: Option<usize> = None;
    for (i, c) in cells.iter().enumerate() {
        best = match best {
            None => Some(i),
            Some(b) => {
                let (kb, kc) = (key(&cells[b]), key(c));
                if kc < kb || (kc == kb && c.lambda > cells[b].lambda) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_grid() {
        let g = grid_logspace(1e-8, 100.0, 25).unwrap();
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], 1e-8);
        assert_eq!(g[24], 100.0);
        let r0 = g[1] / g[0];
        assert!(g.windows(2).all(|w| ((w[1] / w[0]) / r0 - 1.0).abs() < 1e-12));
    }

    #[test]
    fn small_grids() {
        let g = grid_logspace(1.0, 100.0, 3).unwrap();
        assert_eq!(g[0], 1.0);
        assert!((g[1] - 10.0).abs() < 1e-12);
        assert_eq!(g[2], 100.0);
        let e = grid_logspace(1e-3, 1.0, 14).unwrap();
        assert_eq!((e.len(), e[0], e[13]), (14, 1e-3, 1.0));
        assert!(grid_logspace(0.0, 1.0, 3).is_err());
        assert!(grid_logspace(2.0, 1.0, 3).is_err());
        assert!(grid_logspace(1.0, 2.0, 1).is_err());
    }

    fn cell(lambda: f64, badness: f64) -> Cell {
        Cell {
            inner_gamma: None,
            gamma: 1.0,
            lambda,
            badness,
        }
    }

    #[test]
    fn selection_prefers_low_badness_then_large_lambda() {
        let cells = [cell(1e-3, 0.5), cell(1e-1, 0.2), cell(1.0, 0.2), cell(1e-2, f64::INFINITY)];
        assert_eq!(select_best(&cells), Some(2));
        let nan = [cell(1.0, f64::NAN), cell(1e-3, 3.0)];
        assert_eq!(select_best(&nan), Some(1));
        assert_eq!(select_best(&[]), None);
        let same = [cell(1.0, 0.1), cell(1.0, 0.1)];
        assert_eq!(select_best(&same), Some(0));
    }
}
