"""Masks, the compressed-RLE codec, and run-native geometry.

Shows how masks round-trip through the compact string format and how
IoU, subtraction, and flow warping behave on small examples.
"""

import numpy as np

from motskit import (
    Box,
    FlowField,
    Mask,
    decode_rle,
    encode_rle,
    iou,
    rasterize_box_ellipse,
    rasterize_box_fill,
    subtract,
    warp,
)


def show(title, mask):
    print(f"{title}  (area {mask.area}, rle {encode_rle(mask)!r})")
    for row in mask.to_dense():
        print("   " + "".join("#" if v else "." for v in row))


print("== decoding a compact string ==")
m = decode_rle("022", 2, 2)
show("decode_rle('022', 2, 2):", m)
print("round trip:", decode_rle(encode_rle(m), 2, 2) == m)

print("\n== IoU on partially overlapping bands ==")
a = Mask.from_dense(np.array([[1, 1, 0, 0], [1, 1, 0, 0]], dtype=bool))
b = Mask.from_dense(np.array([[0, 1, 1, 0], [0, 1, 1, 0]], dtype=bool))
show("A:", a)
show("B:", b)
print("iou(A, B) =", iou(a, b))
show("A minus B:", subtract(a, b))

print("\n== forward warping by a flow field ==")
flow = FlowField(2, 4, np.full((2, 4), 2, np.float32), np.zeros((2, 4), np.float32))
show("A pushed 2 px right:", warp(a, flow))

print("\n== box rasterisers ==")
box = Box(1, 1, 7, 5)
show("filled box:", rasterize_box_fill(box, 8, 10))
show("inscribed ellipse:", rasterize_box_ellipse(box, 8, 10))
