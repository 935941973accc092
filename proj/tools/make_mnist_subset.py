#!/usr/bin/env python3
"""Write a 5000-image MNIST subset as standard IDX files.

The subset ships inside the mlxtend wheel (mlxtend/data/data/mnist_5k.csv.gz,
784 pixel columns followed by the label, 500 images per digit, sorted by
label). Each digit contributes its first 400 images to the train split and
the remaining 100 to the t10k split; both splits are then shuffled with a
fixed seed.

usage: make_mnist_subset.py [--wheel PATH] [--out DIR]
"""
import argparse
import glob
import gzip
import os
import random
import struct
import subprocess
import sys
import tempfile
import zipfile

TRAIN_PER_DIGIT = 400


def find_wheel(explicit):
    if explicit:
        return explicit
    tmp = tempfile.mkdtemp()
    subprocess.check_call([sys.executable, "-m", "pip", "download", "--no-deps",
                           "-q", "mlxtend", "-d", tmp])
    return glob.glob(os.path.join(tmp, "mlxtend-*.whl"))[0]


def write_images(path, rows):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(rows), 28, 28))
        for pixels, _ in rows:
            f.write(bytes(pixels))


def write_labels(path, rows):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(rows)))
        f.write(bytes(label for _, label in rows))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--wheel")
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "mnist"))
    args = ap.parse_args()

    wheel = zipfile.ZipFile(find_wheel(args.wheel))
    text = gzip.decompress(wheel.read("mlxtend/data/data/mnist_5k.csv.gz")).decode()
    rows = []
    for line in text.splitlines():
        values = [int(float(v)) for v in line.split(",")]
        rows.append((values[:784], values[784]))

    os.makedirs(args.out, exist_ok=True)
    train, test = [], []
    for digit in range(10):
        same = [r for r in rows if r[1] == digit]
        train += same[:TRAIN_PER_DIGIT]
        test += same[TRAIN_PER_DIGIT:]
    random.Random(20240601).shuffle(train)
    random.Random(20240602).shuffle(test)
    write_images(os.path.join(args.out, "train-images-idx3-ubyte"), train)
    write_labels(os.path.join(args.out, "train-labels-idx1-ubyte"), train)
    write_images(os.path.join(args.out, "t10k-images-idx3-ubyte"), test)
    write_labels(os.path.join(args.out, "t10k-labels-idx1-ubyte"), test)
    print(f"wrote {len(train)} train / {len(test)} test images to {args.out}")


if __name__ == "__main__":
    main()
