#!/usr/bin/env python3
"""Regenerates the model zoo JSON files under core/data/zoo.

Each of the six model families is expressed with the four layer
primitives (conv / pool / fc / activation).  Composite blocks are
flattened: batch-norm and residual adds become activation layers of
kind "other" with an ops-per-element alpha, branch entry points carry
"chain": false because their input is not the preceding layer's output.

Encoding conventions:
  - "same"-padded convolutions use the padded output grid for (l, w).
  - Factorized 1xN / Nx1 convolutions (InceptionV3) are approximated by
    square kernels of similar tap count (7-tap -> f=3, 3-tap -> f=2).
  - Depthwise convolutions are encoded as c=1, n=<channels>, which gives
    the correct multiply/add count; they are chain-exempt.
  - The InceptionV3 input grid is 288x288 (instead of 299) so that every
    stride divides its input exactly.
"""

import json
import os

OUT = os.path.join(os.path.dirname(__file__), "..", "core", "data", "zoo")


def conv(c, l, w, s, n, f, chain=True):
    d = {"kind": "conv", "c": c, "l": l, "w": w, "s": s, "n": n, "f": f}
    if not chain:
        d["chain"] = False
    return d


def pool(c, l, w, s, f, chain=True):
    d = {"kind": "pool", "c": c, "l": l, "w": w, "s": s, "f": f}
    if not chain:
        d["chain"] = False
    return d


def fc(x, y):
    return {"kind": "fc", "x": x, "y": y}


def act(kind, c, l, w, alpha=None, chain=True):
    d = {"kind": "activation", "c": c, "l": l, "w": w, "act": kind}
    if alpha is not None:
        d["alpha"] = alpha
    if not chain:
        d["chain"] = False
    return d


def bn(c, l, w, chain=True):
    # scale + shift per element
    return act("other", c, l, w, alpha=2, chain=chain)


def relu(c, l, w):
    return act("relu", c, l, w)


def residual_add(c, l, w):
    return act("other", c, l, w, alpha=1)


# ---------------------------------------------------------------- Alexnet

def alexnet(fc1, fc2, out):
    L = []
    L += [conv(3, 224, 224, 4, 96, 11), relu(96, 56, 56), pool(96, 56, 56, 2, 3)]
    L += [conv(96, 28, 28, 1, 256, 5), relu(256, 28, 28), pool(256, 28, 28, 2, 3)]
    L += [conv(256, 14, 14, 1, 384, 3), relu(384, 14, 14)]
    L += [conv(384, 14, 14, 1, 384, 3), relu(384, 14, 14)]
    L += [conv(384, 14, 14, 1, 256, 3), relu(256, 14, 14), pool(256, 14, 14, 2, 3)]
    L += [fc(256 * 7 * 7, fc1), relu(fc1, 1, 1)]
    L += [fc(fc1, fc2), relu(fc2, 1, 1)]
    L += [fc(fc2, out), act("softmax", out, 1, 1)]
    return L


# ----------------------------------------------------------------- ResNet

def conv_bn(c, l, s, n, f, chain=True, with_relu=True):
    ls = l // s
    out = [conv(c, l, l, s, n, f, chain=chain), bn(n, ls, ls)]
    if with_relu:
        out.append(relu(n, ls, ls))
    return out


def bottleneck(in_ch, mid, l, stride):
    ls = l // stride
    out_ch = mid * 4
    L = []
    L += conv_bn(in_ch, l, 1, mid, 1)
    L += conv_bn(mid, l, stride, mid, 3)
    L += conv_bn(mid, ls, 1, out_ch, 1, with_relu=False)
    if stride != 1 or in_ch != out_ch:
        L += conv_bn(in_ch, l, stride, out_ch, 1, chain=False, with_relu=False)
    L += [residual_add(out_ch, ls, ls), relu(out_ch, ls, ls)]
    return L, out_ch


def resnet(blocks, out):
    L = []
    L += conv_bn(3, 224, 2, 64, 7)
    L += [pool(64, 112, 112, 2, 3)]
    ch = 64
    size = 56
    for stage, nblk in enumerate(blocks):
        mid = 64 * (1 << stage)
        for b in range(nblk):
            stride = 2 if (stage > 0 and b == 0) else 1
            blk, ch = bottleneck(ch, mid, size, stride)
            size //= stride
            L += blk
    L += [pool(ch, size, size, size, size)]
    L += [fc(ch, out), act("softmax", out, 1, 1)]
    return L


# ------------------------------------------------------------ InceptionV3

def inception_a(in_ch, pool_ch, l):
    L = []
    L += conv_bn(in_ch, l, 1, 64, 1, chain=False)
    L += conv_bn(in_ch, l, 1, 48, 1, chain=False)
    L += conv_bn(48, l, 1, 64, 5)
    L += conv_bn(in_ch, l, 1, 64, 1, chain=False)
    L += conv_bn(64, l, 1, 96, 3)
    L += conv_bn(96, l, 1, 96, 3)
    L += [pool(in_ch, l, l, 1, 3, chain=False)]
    L += conv_bn(in_ch, l, 1, pool_ch, 1)
    return L, 64 + 64 + 96 + pool_ch


def reduction_a(in_ch, l):
    ls = l // 2
    L = []
    L += conv_bn(in_ch, l, 2, 384, 3, chain=False)
    L += conv_bn(in_ch, l, 1, 64, 1, chain=False)
    L += conv_bn(64, l, 1, 96, 3)
    L += conv_bn(96, l, 2, 96, 3)
    L += [pool(in_ch, l, l, 2, 3, chain=False)]
    return L, 384 + 96 + in_ch, ls


def inception_b(in_ch, c7, l):
    # 1x7/7x1 pairs approximated by f=3 square kernels
    L = []
    L += conv_bn(in_ch, l, 1, 192, 1, chain=False)
    L += conv_bn(in_ch, l, 1, c7, 1, chain=False)
    L += conv_bn(c7, l, 1, c7, 3)
    L += conv_bn(c7, l, 1, 192, 3)
    L += conv_bn(in_ch, l, 1, c7, 1, chain=False)
    L += conv_bn(c7, l, 1, c7, 3)
    L += conv_bn(c7, l, 1, c7, 3)
    L += conv_bn(c7, l, 1, c7, 3)
    L += conv_bn(c7, l, 1, 192, 3)
    L += [pool(in_ch, l, l, 1, 3, chain=False)]
    L += conv_bn(in_ch, l, 1, 192, 1)
    return L, 768


def reduction_b(in_ch, l):
    ls = l // 2
    L = []
    L += conv_bn(in_ch, l, 1, 192, 1, chain=False)
    L += conv_bn(192, l, 2, 320, 3)
    L += conv_bn(in_ch, l, 1, 192, 1, chain=False)
    L += conv_bn(192, l, 1, 192, 3)
    L += conv_bn(192, l, 1, 192, 3)
    L += conv_bn(192, l, 2, 192, 3)
    L += [pool(in_ch, l, l, 2, 3, chain=False)]
    return L, 320 + 192 + in_ch, ls


def inception_c(in_ch, l):
    # 1x3/3x1 pairs approximated by f=2 square kernels
    L = []
    L += conv_bn(in_ch, l, 1, 320, 1, chain=False)
    L += conv_bn(in_ch, l, 1, 384, 1, chain=False)
    L += conv_bn(384, l, 1, 384, 2)
    L += conv_bn(384, l, 1, 384, 2, chain=False)
    L += conv_bn(in_ch, l, 1, 448, 1, chain=False)
    L += conv_bn(448, l, 1, 384, 3)
    L += conv_bn(384, l, 1, 384, 2)
    L += conv_bn(384, l, 1, 384, 2, chain=False)
    L += [pool(in_ch, l, l, 1, 3, chain=False)]
    L += conv_bn(in_ch, l, 1, 192, 1)
    return L, 320 + 768 + 768 + 192


def inception_v3(out):
    L = []
    L += conv_bn(3, 288, 2, 32, 3)
    L += conv_bn(32, 144, 1, 32, 3)
    L += conv_bn(32, 144, 1, 64, 3)
    L += [pool(64, 144, 144, 2, 3)]
    L += conv_bn(64, 72, 1, 80, 1)
    L += conv_bn(80, 72, 1, 192, 3)
    L += [pool(192, 72, 72, 2, 3)]
    ch, l = 192, 36
    for pool_ch in (32, 64, 64):
        blk, ch = inception_a(ch, pool_ch, l)
        L += blk
    blk, ch, l = reduction_a(ch, l)
    L += blk
    for c7 in (128, 160, 160, 192):
        blk, ch = inception_b(ch, c7, l)
        L += blk
    blk, ch, l = reduction_b(ch, l)
    L += blk
    for _ in range(2):
        blk, ch = inception_c(ch, l)
        L += blk
    L += [pool(ch, l, l, l, l, chain=False)]
    L += [fc(ch, out), act("softmax", out, 1, 1)]
    return L


# -------------------------------------------------------------- MobileNet

def depthwise(ch, l, s):
    ls = l // s
    return [conv(1, l, l, s, ch, 3, chain=False), bn(ch, ls, ls), relu(ch, ls, ls)]


def mobilenet_v1(out):
    cfg = [(1, 64), (2, 128), (1, 128), (2, 256), (1, 256), (2, 512),
           (1, 512), (1, 512), (1, 512), (1, 512), (1, 512), (2, 1024), (1, 1024)]
    L = []
    L += conv_bn(3, 224, 2, 32, 3)
    ch, l = 32, 112
    for s, out_ch in cfg:
        L += depthwise(ch, l, s)
        l //= s
        L += conv_bn(ch, l, 1, out_ch, 1)
        ch = out_ch
    L += [pool(ch, l, l, l, l)]
    L += [fc(ch, out), act("softmax", out, 1, 1)]
    return L


def inverted_residual(in_ch, out_ch, l, s, t):
    L = []
    exp = in_ch * t
    if t != 1:
        L += conv_bn(in_ch, l, 1, exp, 1)
    L += depthwise(exp, l, s)
    ls = l // s
    L += conv_bn(exp, ls, 1, out_ch, 1, with_relu=False)
    if s == 1 and in_ch == out_ch:
        L += [residual_add(out_ch, ls, ls)]
    return L, ls


def mobilenet_v2(out):
    cfg = [(1, 16, 1, 1), (6, 24, 2, 2), (6, 32, 3, 2), (6, 64, 4, 2),
           (6, 96, 3, 1), (6, 160, 3, 2), (6, 320, 1, 1)]
    L = []
    L += conv_bn(3, 224, 2, 32, 3)
    ch, l = 32, 112
    for t, c, n, s in cfg:
        for b in range(n):
            stride = s if b == 0 else 1
            blk, l = inverted_residual(ch, c, l, stride, t)
            L += blk
            ch = c
    L += conv_bn(ch, l, 1, 1280, 1)
    ch = 1280
    L += [pool(ch, l, l, l, l)]
    L += [fc(ch, out), act("softmax", out, 1, 1)]
    return L


# ------------------------------------------------------------------- main

def entries():
    e = []
    for v in ("4096*4096*1000", "4096*4096*500", "4096*2048*500", "2048*2048*500"):
        a, b, c = (int(x) for x in v.split("*"))
        e.append(("Alexnet", v, alexnet(a, b, c)))
    for v in ("1000", "750", "500", "250"):
        e.append(("InceptionV3", v, inception_v3(int(v))))
    for v in ("1000,(3,4,6,3)", "1000,(3,6,4,3)", "500,(3,6,4,3)", "500,(3,5,5,3)"):
        out, blocks = v.split(",", 1)
        e.append(("Resnet50", v, resnet(tuple(int(x) for x in blocks.strip("()").split(",")), int(out))))
    for v in ("1000,(3,4,23,3)", "1000,(3,7,20,3)", "500,(3,14,13,3)", "500,(3,17,10,3)"):
        out, blocks = v.split(",", 1)
        e.append(("Resnet101", v, resnet(tuple(int(x) for x in blocks.strip("()").split(",")), int(out))))
    for v in ("1000", "750", "500", "250"):
        e.append(("MobilenetV1", v, mobilenet_v1(int(v))))
    for v in ("1000", "750", "500", "250"):
        e.append(("MobilenetV2", v, mobilenet_v2(int(v))))
    return e


def filename(name, variant):
    safe = variant.replace("*", "x").replace(",", "-").replace("(", "").replace(")", "")
    return f"{name}__{safe}.json"


def main():
    os.makedirs(OUT, exist_ok=True)
    for name, variant, layers in entries():
        doc = {"name": name, "variant": variant, "layers": layers}
        path = os.path.join(OUT, filename(name, variant))
        with open(path, "w") as f:
            json.dump(doc, f, indent=1)
            f.write("\n")
        print(f"{path}: {len(layers)} layers")


if __name__ == "__main__":
    main()
