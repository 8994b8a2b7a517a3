#!/usr/bin/env python3
"""Write torchvision's ImageNet VGG16 conv weights in the perceptual weights
format read by the C++ library (magic INPVGG16, version 1, little-endian)."""

import argparse
import struct

import torchvision

NAMES = [f"conv{b}_{i}" for b, n in ((1, 2), (2, 2), (3, 3), (4, 3), (5, 3)) for i in range(1, n + 1)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", help="output path, e.g. weights/vgg16.bin")
    args = ap.parse_args()
    model = torchvision.models.vgg16(weights=torchvision.models.VGG16_Weights.IMAGENET1K_V1)
    convs = [m for m in model.features if m.__class__.__name__ == "Conv2d"]
    assert len(convs) == len(NAMES)
    with open(args.out, "wb") as f:
        f.write(b"INPVGG16")
        f.write(struct.pack("<II", 1, len(convs)))
        for name, conv in zip(NAMES, convs):
            w = conv.weight.detach().float().contiguous()
            b = conv.bias.detach().float().contiguous()
            f.write(struct.pack("<I", len(name)) + name.encode())
            f.write(struct.pack("<4I", *w.shape))
            f.write(w.numpy().astype("<f4").tobytes())
            f.write(b.numpy().astype("<f4").tobytes())


if __name__ == "__main__":
    main()
