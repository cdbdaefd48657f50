"""Discrete regular-group convolution reference operations.

These are the sampled-grid counterparts of the continuous definitions: the
left-regular action moves a field by evaluating it at g^{-1} x, the SE(2)
lifting correlation template-matches an image against rotated copies of a 2-D
kernel, and the SE(2) group correlation acts on the lifted (theta, y, x)
stack with a 3-D kernel that is rotated spatially and shifted cyclically in
theta.

Resampling is nearest-neighbor, so quarter-turn rotations and integer
translations are exact lattice bijections; the equivariance contracts are
exact in that discrete sense (and approximate otherwise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .liegroup import Pose, Rotation


@dataclass(frozen=True)
class GridField:
    """Scalar field sampled on a regular 3-D lattice: value[i, j, k] sits at
    origin + spacing * (i, j, k).  Outside the lattice the field is zero."""

    values: np.ndarray
    origin: np.ndarray
    spacing: float

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=float).reshape(3))
        if self.values.ndim != 3:
            raise ShapeMismatch("grid field values must be 3-D")

    def coords(self) -> np.ndarray:
        idx = np.stack(np.meshgrid(*(np.arange(s) for s in self.values.shape),
                                   indexing="ij"), axis=-1)
        return self.origin + self.spacing * idx


def left_regular_apply(g, field: GridField) -> GridField:
    """(L_g f)(x) = f(g^{-1} x), resampled on the same lattice by nearest
    neighbor (exact when g preserves the lattice)."""
    if isinstance(g, Rotation):
        g = Pose(g, np.zeros(3))
    ginv = g.inverse()
    xs = field.coords().reshape(-1, 3)
    ys = xs @ ginv.r.m.T + ginv.p
    idx = np.rint((ys - field.origin) / field.spacing).astype(int)
    out = np.zeros_like(field.values)
    shape = field.values.shape
    ok = np.all((idx >= 0) & (idx < np.array(shape)), axis=1)
    flat_out = out.reshape(-1)
    lin_in = np.ravel_multi_index(tuple(idx[ok].T), shape)
    flat_out[np.flatnonzero(ok)] = field.values.reshape(-1)[lin_in]
    return GridField(out, field.origin, field.spacing)


def rotate_image(a: np.ndarray, angle: float) -> np.ndarray:
    """Rotate image content counterclockwise about the array center; exact
    np.rot90 for quarter turns, nearest-neighbor otherwise (square arrays)."""
    a = np.asarray(a, dtype=float)
    quarter = angle / (math.pi / 2.0)
    if abs(quarter - round(quarter)) < 1e-12:
        return np.rot90(a, int(round(quarter)) % 4)
    if a.shape[0] != a.shape[1]:
        raise ShapeMismatch("free-angle rotation needs a square image")
    n = a.shape[0]
    c = (n - 1) / 2.0
    out = np.zeros_like(a)
    cos, sin = math.cos(angle), math.sin(angle)
    for i in range(n):
        for j in range(n):
            # rotate the sample location backwards (rows are -y, columns +x)
            y, x = c - i, j - c
            xs = cos * x + sin * y
            ys = -sin * x + cos * y
            ii = int(round(c - ys))
            jj = int(round(xs + c))
            if 0 <= ii < n and 0 <= jj < n:
                out[i, j] = a[ii, jj]
    return out


def correlate2d_same(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Zero-padded cross-correlation centered on the kernel midpoint."""
    image = np.asarray(image, dtype=float)
    kernel = np.asarray(kernel, dtype=float)
    kh, kw = kernel.shape
    ch, cw = (kh - 1) // 2, (kw - 1) // 2
    padded = np.pad(image, ((ch, kh - 1 - ch), (cw, kw - 1 - cw)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kh, kw))
    return np.einsum("ijkl,kl->ij", windows, kernel)


def lifting_correlation_se2(image: np.ndarray, kernel: np.ndarray,
                            n_theta: int) -> np.ndarray:
    """Lift an image to (theta, y, x): channel k correlates against the
    kernel rotated by 2 pi k / n_theta."""
    if n_theta < 1:
        raise ShapeMismatch("n_theta must be >= 1")
    image = np.asarray(image, dtype=float)
    kernel = np.asarray(kernel, dtype=float)
    out = np.empty((n_theta,) + image.shape)
    for k in range(n_theta):
        rk = rotate_image(kernel, 2.0 * math.pi * k / n_theta)
        out[k] = correlate2d_same(image, rk)
    return out


def group_correlation_se2(lifted: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Group correlation on the lifted stack:

        y[t] = sum_s correlate2d(lifted[s], rot_t(kernel[(s - t) mod T]))

    i.e. the 3-D kernel is rotated spatially by theta_t and shifted
    cyclically along its own theta axis."""
    lifted = np.asarray(lifted, dtype=float)
    kernel = np.asarray(kernel, dtype=float)
    if lifted.ndim != 3 or kernel.ndim != 3:
        raise ShapeMismatch("lifted map and kernel must be 3-D (theta, y, x)")
    n_theta = lifted.shape[0]
    if kernel.shape[0] != n_theta:
        raise ShapeMismatch("kernel theta axis must match the lifted map")
    out = np.zeros((n_theta,) + lifted.shape[1:])
    for t in range(n_theta):
        angle = 2.0 * math.pi * t / n_theta
        for s in range(n_theta):
            k2 = rotate_image(kernel[(s - t) % n_theta], angle)
            out[t] += correlate2d_same(lifted[s], k2)
    return out
