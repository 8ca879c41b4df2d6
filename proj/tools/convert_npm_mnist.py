#!/usr/bin/env python3
"""Convert the digit JSON files shipped in the npm `mnist` package to an IDX pair.

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/convert_npm_mnist.py package/src/digits data/mnist-subset

The package stores 1000 MNIST digits per class with pixels pre-scaled to
[0,1] (three decimals); they are rescaled to bytes with round(v * 255).
"""
import json
import struct
import sys
from pathlib import Path


def main(src: Path, dst: Path) -> None:
    images, labels = [], []
    for digit in range(10):
        raw = json.loads((src / f"{digit}.json").read_text())["data"]
        count = len(raw) // 784
        for i in range(count):
            images.append(bytes(min(255, max(0, round(v * 255))) for v in raw[i * 784:(i + 1) * 784]))
            labels.append(digit)
    dst.mkdir(parents=True, exist_ok=True)
    with open(dst / "images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(img)
    with open(dst / "labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))
    print(f"wrote {len(images)} images to {dst}")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit("usage: convert_npm_mnist.py <digits-dir> <out-dir>")
    main(Path(sys.argv[1]), Path(sys.argv[2]))
