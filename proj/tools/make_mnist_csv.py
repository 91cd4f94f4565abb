#!/usr/bin/env python3
"""Convert MNIST IDX files into the dense CSV layout read by `ina --format csv`.

Writes gzipped CSV with a `label` column followed by 784 byte-valued pixel
columns. The IDX files ship in the `mnist-data` npm package:

    npm pack mnist-data && tar xzf mnist-data-*.tgz
    python3 tools/make_mnist_csv.py package/data data/mnist
"""
import argparse
import gzip
import pathlib
import struct


def read_idx(path):
    raw = pathlib.Path(path).read_bytes()
    magic = struct.unpack(">I", raw[:4])[0]
    ndim = magic & 0xFF
    dims = struct.unpack(">" + "I" * ndim, raw[4:4 + 4 * ndim])
    return dims, raw[4 + 4 * ndim:]


def write_csv(images, labels, count, out):
    (n, rows, cols), pixels = images
    _, label_bytes = labels
    size = rows * cols
    count = min(count, n)
    with gzip.GzipFile(out, "wb", mtime=0) as fh:
        header = ["label"] + [f"px{k}" for k in range(size)]
        fh.write((",".join(header) + "\n").encode())
        for r in range(count):
            row = pixels[r * size:(r + 1) * size]
            fh.write((str(label_bytes[r]) + "," + ",".join(map(str, row)) + "\n").encode())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("idx_dir")
    ap.add_argument("out_dir")
    ap.add_argument("--train", type=int, default=10000)
    ap.add_argument("--test", type=int, default=2000)
    args = ap.parse_args()
    src = pathlib.Path(args.idx_dir)
    dst = pathlib.Path(args.out_dir)
    dst.mkdir(parents=True, exist_ok=True)
    write_csv(read_idx(src / "train-images-idx3-ubyte"), read_idx(src / "train-labels-idx1-ubyte"),
              args.train, dst / f"mnist_train_{args.train // 1000}k.csv.gz")
    write_csv(read_idx(src / "t10k-images-idx3-ubyte"), read_idx(src / "t10k-labels-idx1-ubyte"),
              args.test, dst / f"mnist_test_{args.test // 1000}k.csv.gz")


if __name__ == "__main__":
    main()
