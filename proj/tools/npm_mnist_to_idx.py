#!/usr/bin/env python3
# Copyright 2026 The ddpsgd Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Converts the digits bundled in the `mnist` npm package to IDX files.

The package (https://github.com/cazala/mnist) ships 10000 MNIST digits as
per-class JSON arrays of pixel intensities in [0, 1]. Usage:

  npm pack mnist && tar xzf mnist-*.tgz
  tools/npm_mnist_to_idx.py package/src/digits data/mnist
"""

import json
import pathlib
import struct
import sys


def main(argv):
    if len(argv) != 3:
        sys.exit(f"usage: {argv[0]} DIGITS_DIR OUT_DIR")
    src, out = pathlib.Path(argv[1]), pathlib.Path(argv[2])
    out.mkdir(parents=True, exist_ok=True)
    per_class = []
    for digit in range(10):
        data = json.loads((src / f"{digit}.json").read_text())["data"]
        if len(data) % 784:
            sys.exit(f"{digit}.json: length {len(data)} is not a multiple of 784")
        per_class.append([data[i:i + 784] for i in range(0, len(data), 784)])

    # Round-robin over classes so any prefix is roughly class balanced.
    images, labels = [], []
    cursor = [0] * 10
    while any(cursor[d] < len(per_class[d]) for d in range(10)):
        for d in range(10):
            if cursor[d] < len(per_class[d]):
                images.append(per_class[d][cursor[d]])
                labels.append(d)
                cursor[d] += 1

    with open(out / "images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 2051, len(images), 28, 28))
        for img in images:
            f.write(bytes(min(255, max(0, round(v * 255))) for v in img))
    with open(out / "labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(bytes(labels))
    print(f"wrote {len(images)} records to {out}")


if __name__ == "__main__":
    main(sys.argv)
