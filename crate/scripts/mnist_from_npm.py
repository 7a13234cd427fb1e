#!/usr/bin/env python3
"""Build gzipped IDX files from the digit JSON bundled in the npm `mnist` package.

The canonical MNIST archives are not reachable from offline build machines; the
npm package (https://www.npmjs.com/package/mnist) ships 10 000 MNIST digits as
JSON arrays of pixel/255 values rounded to three decimals. Three decimals keep
enough precision to recover the original bytes exactly.

Usage: npm pack mnist && tar xzf mnist-*.tgz
       python3 scripts/mnist_from_npm.py package/src/digits data/mnist
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path


def main(src: Path, dst: Path) -> None:
    train, test = [], []
    for digit in range(10):
        raw = json.loads((src / f"{digit}.json").read_text())["data"]
        assert len(raw) % 784 == 0
        for i in range(len(raw) // 784):
            pixels = bytes(round(v * 255) for v in raw[i * 784:(i + 1) * 784])
            (test if i % 7 == 0 else train).append((pixels, digit))
    rng = random.Random(20190123)
    rng.shuffle(train)
    rng.shuffle(test)
    dst.mkdir(parents=True, exist_ok=True)
    for prefix, rows in (("train", train), ("t10k", test)):
        images = struct.pack(">IIII", 0x803, len(rows), 28, 28) + b"".join(p for p, _ in rows)
        labels = struct.pack(">II", 0x801, len(rows)) + bytes(d for _, d in rows)
        for name, blob in ((f"{prefix}-images-idx3-ubyte.gz", images),
                           (f"{prefix}-labels-idx1-ubyte.gz", labels)):
            with gzip.GzipFile(dst / name, "wb", mtime=0) as fh:
                fh.write(blob)
        print(prefix, len(rows))


if __name__ == "__main__":
    main(Path(sys.argv[1]), Path(sys.argv[2]))
