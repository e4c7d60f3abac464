"""Articulated object reconstruction from a shape prior.

Grids are exchanged as ``(res, res, res)`` float arrays indexed ``[z, y, x]``;
points as ``(N, 3)`` arrays in the unit cube.
"""

from ._core import (
    ArticfitError,
    InitEstimate,
    JointParams,
    JointType,
    __version__,
    axis_error,
    chamfer,
    decode,
    encode,
    estimate_prismatic,
    estimate_revolute,
    forward_transform,
    fscore,
    generate_scene,
    inverse_transform,
    iou,
    pivot_error,
    reconstruct,
)

__all__ = [
    "ArticfitError",
    "InitEstimate",
    "JointParams",
    "JointType",
    "__version__",
    "axis_error",
    "chamfer",
    "decode",
    "encode",
    "estimate_prismatic",
    "estimate_revolute",
    "forward_transform",
    "fscore",
    "generate_scene",
    "inverse_transform",
    "iou",
    "pivot_error",
    "reconstruct",
]
