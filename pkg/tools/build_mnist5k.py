"""Rebuild data/mnist5k/ from the 5000-digit MNIST sample shipped in the mlxtend wheel.

The sample holds 500 digits per class as raw 0-255 bytes, so the IDX files
written here are bit-exact MNIST pixels. 400 digits per class go to the train
files and the remaining 100 per class to the test files; each split is
shuffled with a fixed seed so labels are not sorted.

    pip download --no-deps mlxtend -d /tmp/mlxtend
    python tools/build_mnist5k.py /tmp/mlxtend/mlxtend-*.whl data/mnist5k
"""
import gzip
import io
import sys
import zipfile
from pathlib import Path

import numpy as np

from qsfusion.data import write_idx

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main(wheel, out_dir):
    with zipfile.ZipFile(wheel) as zf:
        raw = gzip.decompress(zf.read(MEMBER))
    table = np.loadtxt(io.BytesIO(raw), delimiter=",", dtype=np.int64)
    images = table[:, :-1].astype(np.uint8).reshape(-1, 28, 28)
    labels = table[:, -1].astype(np.uint8)

    train_idx, test_idx = [], []
    for c in range(10):
        idx = np.flatnonzero(labels == c)
        train_idx.extend(idx[:400])
        test_idx.extend(idx[400:])
    rng = np.random.default_rng(20240501)
    train_idx = rng.permutation(train_idx)
    test_idx = rng.permutation(test_idx)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_idx(images[train_idx], labels[train_idx],
              out / "train-images-idx3-ubyte.gz", out / "train-labels-idx1-ubyte.gz")
    write_idx(images[test_idx], labels[test_idx],
              out / "t10k-images-idx3-ubyte.gz", out / "t10k-labels-idx1-ubyte.gz")
    print(f"wrote {len(train_idx)} train / {len(test_idx)} test digits to {out}")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
