#!/usr/bin/env python3
"""Write a 5000-digit MNIST subset as the four standard gzipped IDX files.

The subset is the one bundled with the `mlxtend` wheel (data/mnist_5k.csv.gz,
one row per image: 784 pixel bytes followed by the label). The first 4000
rows become the train files, the last 1000 the t10k files.

    pip download mlxtend --no-deps -d /tmp/mlx
    python3 scripts/mnist_subset_to_idx.py /tmp/mlx/mlxtend-*.whl data/mnist
"""
import gzip
import struct
import sys
import zipfile
from pathlib import Path

CSV_MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"
N_TRAIN = 4000


def write_idx(path, magic, dims, payload):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", d) for d in dims)
    # mtime=0 keeps the output byte-stable
    with open(path, "wb") as raw:
        with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as gz:
            gz.write(header + payload)


def main():
    wheel, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(wheel) as z:
        rows = gzip.decompress(z.read(CSV_MEMBER)).decode().splitlines()
    images, labels = [], []
    for row in rows:
        vals = [int(float(v)) for v in row.split(",")]
        assert len(vals) == 785
        images.append(bytes(vals[:784]))
        labels.append(vals[784])
    for prefix, lo, hi in (("train", 0, N_TRAIN), ("t10k", N_TRAIN, len(rows))):
        n = hi - lo
        write_idx(out / f"{prefix}-images-idx3-ubyte.gz", 0x803, (n, 28, 28), b"".join(images[lo:hi]))
        write_idx(out / f"{prefix}-labels-idx1-ubyte.gz", 0x801, (n,), bytes(labels[lo:hi]))
    print(f"wrote {len(rows)} digits to {out}")


if __name__ == "__main__":
    main()
