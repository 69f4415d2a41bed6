#!/usr/bin/env python3
"""Convert the 5,000-sample MNIST subset shipped inside the mlxtend wheel to gzip IDX.

Usage:
    pip download --no-deps -d /tmp/wheels mlxtend
    python3 tools/scripts/mnist5k_to_idx.py /tmp/wheels/mlxtend-*.whl data/mnist5k
"""
import gzip
import struct
import sys
import zipfile
from pathlib import Path


def main() -> int:
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        return 2
    wheel, out_dir = Path(sys.argv[1]), Path(sys.argv[2])
    with zipfile.ZipFile(wheel) as z:
        text = gzip.decompress(z.read("mlxtend/data/data/mnist_5k.csv.gz")).decode()

    pixels = bytearray()
    labels = bytearray()
    for line in text.splitlines():
        values = [int(float(v)) for v in line.split(",")]
        if len(values) != 785:
            raise ValueError(f"unexpected row width {len(values)}")
        pixels.extend(values[:-1])
        labels.append(values[-1])

    n = len(labels)
    out_dir.mkdir(parents=True, exist_ok=True)
    # mtime=0 keeps the archives byte-reproducible
    with gzip.GzipFile(out_dir / "images-idx3-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">IIII", 0x00000803, n, 28, 28))
        f.write(bytes(pixels))
    with gzip.GzipFile(out_dir / "labels-idx1-ubyte.gz", "wb", mtime=0) as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(bytes(labels))
    print(f"wrote {n} samples to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
