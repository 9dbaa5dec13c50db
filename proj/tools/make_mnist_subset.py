#!/usr/bin/env python3
"""Write an IDX-format MNIST subset from the 5000-sample CSV bundled with mlxtend.

Usage: make_mnist_subset.py <mlxtend wheel or mnist_5k.csv.gz> <out dir> [count]

Produces train-images-idx3-ubyte and train-labels-idx1-ubyte in <out dir>.
"""
import gzip
import struct
import sys
import zipfile
from pathlib import Path


def read_rows(src: Path):
    if src.suffix == ".whl":
        with zipfile.ZipFile(src) as z:
            raw = z.read("mlxtend/data/data/mnist_5k.csv.gz")
    else:
        raw = src.read_bytes()
    for line in gzip.decompress(raw).decode().splitlines():
        vals = [int(float(v)) for v in line.split(",")]
        yield vals[:-1], vals[-1]


def main() -> int:
    if len(sys.argv) < 3:
        print(__doc__, file=sys.stderr)
        return 2
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    count = int(sys.argv[3]) if len(sys.argv) > 3 else 1000
    # The CSV is sorted by label; interleave classes so any prefix is balanced.
    by_label = {}
    for pixels, label in read_rows(src):
        by_label.setdefault(label, []).append((pixels, label))
    rows = []
    for i in range(max(len(v) for v in by_label.values())):
        for label in sorted(by_label):
            if i < len(by_label[label]):
                rows.append(by_label[label][i])
    rows = rows[:count]
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "train-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(rows), 28, 28))
        for pixels, _ in rows:
            f.write(bytes(pixels))
    with open(out / "train-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(rows)))
        f.write(bytes(label for _, label in rows))
    print(f"wrote {len(rows)} images to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
