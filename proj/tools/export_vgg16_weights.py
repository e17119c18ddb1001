#!/usr/bin/env python3
"""Export torchvision's ImageNet VGG16 convolutions to a BGVGG16 weights file.

File layout (little endian): magic b"BGVGG16\\x01", u32 conv count (13), then per
convolution u32 out, u32 in, float32 weights [out][in][3][3], float32 bias[out].
"""

import argparse
import hashlib
import struct
import sys

MAGIC = b"BGVGG16\x01"


def export(model, path):
    convs = [m for m in model.features if m.__class__.__name__ == "Conv2d"]
    if len(convs) != 13:
        sys.exit(f"expected 13 convolutions, found {len(convs)}")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(convs)))
        for conv in convs:
            w = conv.weight.detach().to("cpu").float().contiguous()
            b = conv.bias.detach().to("cpu").float().contiguous()
            out_ch, in_ch, kh, kw = w.shape
            if (kh, kw) != (3, 3):
                sys.exit(f"unexpected kernel size {kh}x{kw}")
            f.write(struct.pack("<II", out_ch, in_ch))
            f.write(w.numpy().astype("<f4").tobytes())
            f.write(b.numpy().astype("<f4").tobytes())


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out", help="output weights file")
    parser.add_argument("--untrained", action="store_true",
                        help="random initialisation instead of the ImageNet weights (format checks)")
    args = parser.parse_args()

    import torchvision

    weights = None if args.untrained else torchvision.models.VGG16_Weights.IMAGENET1K_V1
    model = torchvision.models.vgg16(weights=weights)
    export(model, args.out)

    digest = hashlib.sha256(open(args.out, "rb").read()).hexdigest()
    print(f"wrote {args.out}")
    print(f"descriptor_sha256 = {digest}")


if __name__ == "__main__":
    main()
