#!/usr/bin/env python3
"""Convert the digits bundled with the npm `mnist` package into gzipped IDX files.

Usage: mnist_from_npm.py <package-dir> <out-dir>

The package stores 10000 MNIST digits as per-class JSON arrays of intensities
scaled to [0, 1] with three decimals; multiplying by 255 and rounding recovers
the original bytes exactly.
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path


def main() -> None:
    pkg, out = Path(sys.argv[1]), Path(sys.argv[2])
    images, labels = [], []
    for digit in range(10):
        data = json.loads((pkg / "src" / "digits" / f"{digit}.json").read_text())["data"]
        assert len(data) % 784 == 0
        for k in range(len(data) // 784):
            px = data[k * 784:(k + 1) * 784]
            images.append(bytes(min(255, max(0, round(v * 255))) for v in px))
            labels.append(digit)
    order = list(range(len(labels)))
    random.Random(0).shuffle(order)
    out.mkdir(parents=True, exist_ok=True)
    with gzip.GzipFile(out / "images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, len(order), 28, 28))
        for i in order:
            f.write(images[i])
    with gzip.GzipFile(out / "labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, len(order)))
        f.write(bytes(labels[i] for i in order))
    print(f"wrote {len(order)} images to {out}")


if __name__ == "__main__":
    main()
