#!/usr/bin/env python3
"""Convert pretrained torchvision / lpips weights into the .swa tensor archive.

  export_weights.py vgg19  out/vgg19.swa        # perceptual-loss extractor
  export_weights.py alexnet-lpips out/lpips.swa # learned perceptual metric (needs `pip install lpips`)

Archive layout matches include/swinifs/archive.hpp.
"""
import argparse
import json
import struct

import numpy as np


def write_archive(path, tensors, meta):
    with open(path, "wb") as f:
        f.write(b"SWIFSARC")
        f.write(struct.pack("<I", 1))
        m = json.dumps(meta).encode()
        f.write(struct.pack("<Q", len(m)))
        f.write(m)
        f.write(struct.pack("<Q", len(tensors)))
        for name in sorted(tensors):
            a = np.ascontiguousarray(tensors[name], dtype=np.float32)
            n = name.encode()
            f.write(struct.pack("<I", len(n)))
            f.write(n)
            f.write(struct.pack("<B", 0))
            f.write(struct.pack("<I", a.ndim))
            for d in a.shape:
                f.write(struct.pack("<q", d))
            f.write(a.astype("<f4").tobytes())


def conv_layers(features, names):
    import torch.nn as nn

    convs = [m for m in features if isinstance(m, nn.Conv2d)]
    if len(convs) != len(names):
        raise SystemExit(f"expected {len(names)} convs, found {len(convs)}")
    out = {}
    for name, conv in zip(names, convs):
        out[name + ".weight"] = conv.weight.detach().numpy()
        out[name + ".bias"] = conv.bias.detach().numpy()
    return out


def vgg19_names():
    names = []
    for b, n in enumerate([2, 2, 4, 4, 4]):
        names += [f"conv{b + 1}_{i + 1}" for i in range(n)]
    return names


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("net", choices=["vgg19", "alexnet-lpips"])
    p.add_argument("out")
    args = p.parse_args()

    if args.net == "vgg19":
        from torchvision.models import VGG19_Weights, vgg19

        model = vgg19(weights=VGG19_Weights.IMAGENET1K_V1).eval()
        tensors = conv_layers(model.features, vgg19_names())
        meta = {"source": "torchvision vgg19 IMAGENET1K_V1"}
    else:
        import lpips

        metric = lpips.LPIPS(net="alex", verbose=False).eval()
        tensors = conv_layers(metric.net.slice1, ["conv1"])
        names = ["conv2", "conv3", "conv4", "conv5"]
        for sl, name in zip([metric.net.slice2, metric.net.slice3, metric.net.slice4, metric.net.slice5], names):
            tensors.update(conv_layers(sl, [name]))
        for i, lin in enumerate(metric.lins):
            tensors[f"lin{i}.weight"] = lin.model[-1].weight.detach().numpy().reshape(-1)
        meta = {"source": "lpips alex v0.1"}
    write_archive(args.out, tensors, meta)
    print(f"wrote {len(tensors)} tensors to {args.out}")


if __name__ == "__main__":
    main()
