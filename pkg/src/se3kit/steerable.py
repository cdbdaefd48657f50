"""Steerable kernels and equivariant point-cloud convolution.

Feature vectors are direct sums of degree-l blocks acted on by block-diagonal
real Wigner-D matrices.  The convolution kernel block between input degree l
and output degree l' is

    W^{(n',n)}(x)[m', m] = sum_J phi_J(|x|) sum_k C^{(l',m')}_{(l,m)(J,k)} Y^J_k(x/|x|)

with J running over |l'-l| .. l'+l, so W(Rx) = D^{l'}(R) W(x) D^{l}(R)^T.

``escn_kernel_apply`` evaluates the same map by aligning the displacement
with the +y axis, where Y^J collapses to its m=0 slot and each kernel block
becomes diagonal + antidiagonal; the block action is then a pointwise complex
multiplication (an SO(2) spectral convolution) between the complexified
feature and kernel vectors.  Both paths agree to float precision and the
aligned path's work grows only cubically with the degree cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, QueryOnPoint, ZeroDisplacement
from .harmonics import CGTable, default_cg_table, sph_harm_stack, wigner_d_stack
from .liegroup import Pose, Rotation

_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class IrrepLayout:
    """Ordered degrees (with multiplicity) of a steerable feature vector."""

    degrees: tuple

    def __post_init__(self):
        object.__setattr__(self, "degrees", tuple(int(l) for l in self.degrees))
        if any(l < 0 for l in self.degrees):
            raise DimensionMismatch("degrees must be non-negative")

    @property
    def dim(self) -> int:
        return sum(2 * l + 1 for l in self.degrees)

    @property
    def max_degree(self) -> int:
        return max(self.degrees) if self.degrees else 0

    def slices(self) -> list[slice]:
        out = []
        at = 0
        for l in self.degrees:
            out.append(slice(at, at + 2 * l + 1))
            at += 2 * l + 1
        return out

    def wigner(self, r: Rotation) -> np.ndarray:
        stack = wigner_d_stack(self.max_degree, r)
        out = np.zeros((self.dim, self.dim))
        at = 0
        for l in self.degrees:
            d = 2 * l + 1
            out[at:at + d, at:at + d] = stack[l]
            at += d
        return out


@dataclass(frozen=True)
class SteerableVector:
    layout: IrrepLayout
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float).reshape(-1)
        if data.shape[0] != self.layout.dim:
            raise DimensionMismatch("data length does not match layout dimension")
        object.__setattr__(self, "data", data)

    @staticmethod
    def zeros(layout: IrrepLayout) -> "SteerableVector":
        return SteerableVector(layout, np.zeros(layout.dim))

    @staticmethod
    def random(layout: IrrepLayout, rng: np.random.Generator) -> "SteerableVector":
        return SteerableVector(layout, rng.standard_normal(layout.dim))

    def block(self, n: int) -> np.ndarray:
        return self.data[self.layout.slices()[n]]

    def rotate(self, r: Rotation) -> "SteerableVector":
        return SteerableVector(self.layout, self.layout.wigner(r) @ self.data)


@dataclass(frozen=True)
class FeaturedPointCloud:
    points: np.ndarray          # (M, 3)
    layout: IrrepLayout
    features: np.ndarray        # (M, layout.dim)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        feats = np.asarray(self.features, dtype=float)
        feats = feats.reshape(pts.shape[0], -1) if feats.size else feats.reshape(0, self.layout.dim)
        if feats.shape != (pts.shape[0], self.layout.dim):
            raise DimensionMismatch("features must be (n_points, layout.dim)")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "features", feats)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def transform(self, g: Pose) -> "FeaturedPointCloud":
        """Group action: points by g, features by the block-diagonal D(R)."""
        d = self.layout.wigner(g.r)
        return FeaturedPointCloud(self.points @ g.r.m.T + g.p, self.layout,
                                  self.features @ d.T)

    @staticmethod
    def random(layout: IrrepLayout, n_points: int, rng: np.random.Generator,
               scale: float = 1.0) -> "FeaturedPointCloud":
        return FeaturedPointCloud(scale * rng.standard_normal((n_points, 3)),
                                  layout, rng.standard_normal((n_points, layout.dim)))

    @staticmethod
    def from_json_dict(doc: dict) -> "FeaturedPointCloud":
        """{"points": [[x,y,z]...], "layout": [l...], "features": [[...]...]}"""
        layout = IrrepLayout(tuple(doc["layout"]))
        return FeaturedPointCloud(np.array(doc["points"], dtype=float), layout,
                                  np.array(doc["features"], dtype=float))


class RadialProfile:
    """Learnable radial functions phi^{(n',n)}_J as weighted sums of
    ``n_basis`` Gaussians with centers uniform on [0, r_max] and width equal
    to the center spacing."""

    def __init__(self, out_layout: IrrepLayout, in_layout: IrrepLayout,
                 weights: dict, r_max: float = 3.0, n_basis: int = 8):
        self.out_layout = out_layout
        self.in_layout = in_layout
        self.r_max = float(r_max)
        self.n_basis = int(n_basis)
        self.centers = np.linspace(0.0, self.r_max, self.n_basis)
        self.width = self.r_max / (self.n_basis - 1)
        self.weights = {}
        for np_i, lp in enumerate(out_layout.degrees):
            for n_i, l in enumerate(in_layout.degrees):
                for j in range(abs(lp - l), lp + l + 1):
                    w = np.asarray(weights[(np_i, n_i, j)], dtype=float).reshape(self.n_basis)
                    self.weights[(np_i, n_i, j)] = w

    @staticmethod
    def random(out_layout: IrrepLayout, in_layout: IrrepLayout,
               rng: np.random.Generator, r_max: float = 3.0,
               n_basis: int = 8) -> "RadialProfile":
        weights = {}
        for np_i, lp in enumerate(out_layout.degrees):
            for n_i, l in enumerate(in_layout.degrees):
                for j in range(abs(lp - l), lp + l + 1):
                    weights[(np_i, n_i, j)] = rng.standard_normal(n_basis)
        return RadialProfile(out_layout, in_layout, weights, r_max, n_basis)

    def basis(self, r: float) -> np.ndarray:
        return np.exp(-0.5 * ((r - self.centers) / self.width) ** 2)

    def __call__(self, n_out: int, n_in: int, j: int, r: float) -> float:
        return float(self.weights[(n_out, n_in, j)] @ self.basis(r))


@dataclass
class TfnKernel:
    """Steerable convolution kernel between two irrep layouts.

    ``cutoff`` is an optional neighborhood radius: the kernel is exactly zero
    beyond it (default: no truncation).
    """

    in_layout: IrrepLayout
    out_layout: IrrepLayout
    radial: RadialProfile
    cg: CGTable = field(default_factory=default_cg_table)
    cutoff: float | None = None

    @staticmethod
    def random(in_layout: IrrepLayout, out_layout: IrrepLayout,
               rng: np.random.Generator, r_max: float = 3.0,
               cutoff: float | None = None, cg: CGTable | None = None) -> "TfnKernel":
        radial = RadialProfile.random(out_layout, in_layout, rng, r_max)
        return TfnKernel(in_layout, out_layout, radial,
                         cg or default_cg_table(), cutoff)


def _check_displacement(kernel: TfnKernel, x) -> tuple[np.ndarray, float]:
    x = np.asarray(x, dtype=float).reshape(3)
    r = float(np.linalg.norm(x))
    if r < _ZERO_TOL:
        raise ZeroDisplacement("steerable kernel is undefined at x = 0")
    return x, r


def tfn_kernel_eval(kernel: TfnKernel, x) -> np.ndarray:
    """Dense kernel matrix W(x) of shape (out_dim, in_dim)."""
    x, r = _check_displacement(kernel, x)
    out = np.zeros((kernel.out_layout.dim, kernel.in_layout.dim))
    if kernel.cutoff is not None and r > kernel.cutoff:
        return out
    n = x / r
    lmax_j = kernel.out_layout.max_degree + kernel.in_layout.max_degree
    ys = sph_harm_stack(lmax_j, n)
    out_slices = kernel.out_layout.slices()
    in_slices = kernel.in_layout.slices()
    for np_i, lp in enumerate(kernel.out_layout.degrees):
        for n_i, l in enumerate(kernel.in_layout.degrees):
            block = np.zeros((2 * lp + 1, 2 * l + 1))
            for j in range(abs(lp - l), lp + l + 1):
                phi = kernel.radial(np_i, n_i, j, r)
                cg = kernel.cg.block(l, j, lp)  # axes (m', m, k)
                block += phi * (cg @ ys[j])
            out[out_slices[np_i], in_slices[n_i]] = block
    return out


def tfn_convolve(kernel: TfnKernel, cloud: FeaturedPointCloud, query,
                 method: str = "direct") -> SteerableVector:
    """Output feature at a query point: sum_j W(query - x_j) f_j."""
    query = np.asarray(query, dtype=float).reshape(3)
    if cloud.layout.degrees != kernel.in_layout.degrees:
        raise DimensionMismatch("cloud layout does not match kernel input layout")
    acc = np.zeros(kernel.out_layout.dim)
    for j in range(cloud.size):
        dx = query - cloud.points[j]
        if np.linalg.norm(dx) < _ZERO_TOL:
            raise QueryOnPoint("query coincides with a cloud point; use self-interaction")
        if method == "escn":
            acc += escn_kernel_apply(kernel, dx,
                                     SteerableVector(cloud.layout, cloud.features[j])).data
        else:
            acc += tfn_kernel_eval(kernel, dx) @ cloud.features[j]
    return SteerableVector(kernel.out_layout, acc)


def identity_self_interaction(layout: IrrepLayout) -> dict:
    return {(n, n): 1.0 for n in range(len(layout.degrees))}


def self_interaction(weights: dict, f: SteerableVector,
                     out_layout: IrrepLayout | None = None) -> SteerableVector:
    """Degree-preserving linear mixing: block (n', n) is w * I and may be
    nonzero only when the degrees match (any intertwiner between equal irreps
    is a scalar)."""
    out_layout = out_layout or f.layout
    out = np.zeros(out_layout.dim)
    out_slices = out_layout.slices()
    in_slices = f.layout.slices()
    for (np_i, n_i), w in weights.items():
        if np_i >= len(out_layout.degrees) or n_i >= len(f.layout.degrees):
            raise DimensionMismatch("self-interaction weight index out of range")
        if out_layout.degrees[np_i] != f.layout.degrees[n_i]:
            raise DimensionMismatch("self-interaction couples only matching degrees")
        out[out_slices[np_i]] += w * f.data[in_slices[n_i]]
    return SteerableVector(out_layout, out)


def invariant_attention(cloud: FeaturedPointCloud, kernel: TfnKernel,
                        degree_gains: dict | None = None,
                        si_weights: dict | None = None) -> FeaturedPointCloud:
    """Scalar self-attention over rotation-invariant feature inner products.

    alpha_ij = softmax_j( sum_n gain_n <f_i^(n), f_j^(n)> ) over j != i, and
    the output at point i is sum_j alpha_ij W(x_i - x_j) f_j plus a
    self-interaction branch.  The attention logits are invariant because each
    degree block transforms orthogonally.
    """
    if cloud.size < 1:
        raise DimensionMismatch("attention needs at least one point")
    if si_weights is None:
        si_weights = {(np_i, n_i): 1.0
                      for np_i, lp in enumerate(kernel.out_layout.degrees)
                      for n_i, l in enumerate(kernel.in_layout.degrees)
                      if lp == l}
    gains = degree_gains or {}
    slices = cloud.layout.slices()
    out = np.zeros((cloud.size, kernel.out_layout.dim))
    for i in range(cloud.size):
        fi = SteerableVector(cloud.layout, cloud.features[i])
        acc = self_interaction(si_weights, fi, kernel.out_layout).data
        others = [j for j in range(cloud.size) if j != i]
        if others:
            logits = np.empty(len(others))
            for idx, j in enumerate(others):
                s = 0.0
                for n_i in range(len(cloud.layout.degrees)):
                    gain = gains.get(n_i, 1.0)
                    s += gain * (cloud.features[i][slices[n_i]] @ cloud.features[j][slices[n_i]])
                logits[idx] = s
            logits -= logits.max()
            alpha = np.exp(logits)
            alpha /= alpha.sum()
            for idx, j in enumerate(others):
                w = tfn_kernel_eval(kernel, cloud.points[i] - cloud.points[j])
                acc += alpha[idx] * (w @ cloud.features[j])
        out[i] = acc
    return FeaturedPointCloud(cloud.points, kernel.out_layout, out)


def attention_weights(cloud: FeaturedPointCloud, i: int,
                      degree_gains: dict | None = None) -> np.ndarray:
    """The softmax weights alpha_{ij} over j != i (exposed for invariance
    tests)."""
    gains = degree_gains or {}
    slices = cloud.layout.slices()
    others = [j for j in range(cloud.size) if j != i]
    logits = np.empty(len(others))
    for idx, j in enumerate(others):
        s = 0.0
        for n_i in range(len(cloud.layout.degrees)):
            s += gains.get(n_i, 1.0) * (cloud.features[i][slices[n_i]]
                                        @ cloud.features[j][slices[n_i]])
        logits[idx] = s
    logits -= logits.max()
    alpha = np.exp(logits)
    return alpha / alpha.sum()


# ---------------------------------------------------------------------------
# aligned-axis fast path
# ---------------------------------------------------------------------------

def aligning_rotation(x) -> Rotation:
    """Minimal-angle rotation R with R (x/|x|) = e_y; for x anti-parallel to
    e_y (within 1e-12) the gauge is fixed as the half-turn about e_z."""
    x = np.asarray(x, dtype=float).reshape(3)
    r = np.linalg.norm(x)
    if r < _ZERO_TOL:
        raise ZeroDisplacement("no aligning rotation for x = 0")
    a = x / r
    ey = np.array([0.0, 1.0, 0.0])
    c = float(a @ ey)
    if c < -1.0 + 1e-12:
        return Rotation(np.diag([-1.0, -1.0, 1.0]))
    w = np.cross(a, ey)
    wh = np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])
    return Rotation(np.eye(3) + wh + wh @ wh / (1.0 + c))


def _aligned_slice(cg: CGTable, l_in: int, j: int, l_out: int) -> tuple[np.ndarray, np.ndarray]:
    """(s, a) with s[m] (m=0..mm) the diagonal and a[m] (m=1..mm, stored from
    index 1) the antidiagonal of the k=0 kernel slice C^{(l',m')}_{(l,m)(J,0)};
    entries off that pattern are certified zero."""
    blk = cg.block(l_in, j, l_out)
    sl = blk[:, :, j]  # (2l'+1, 2l+1) at k = 0
    mm = min(l_in, l_out)
    s = np.zeros(mm + 1)
    a = np.zeros(mm + 1)
    check = sl.copy()
    s[0] = sl[l_out, l_in]
    check[l_out, l_in] = 0.0
    for m in range(1, mm + 1):
        s[m] = sl[l_out + m, l_in + m]
        a[m] = sl[l_out + m, l_in - m]
        if abs(sl[l_out - m, l_in - m] - s[m]) > 1e-10:
            raise DimensionMismatch("aligned slice diagonal is not symmetric")
        if abs(sl[l_out - m, l_in + m] + a[m]) > 1e-10:
            raise DimensionMismatch("aligned slice antidiagonal is not antisymmetric")
        check[l_out + m, l_in + m] = 0.0
        check[l_out - m, l_in - m] = 0.0
        check[l_out + m, l_in - m] = 0.0
        check[l_out - m, l_in + m] = 0.0
    if np.abs(check).max() > 1e-10:
        raise DimensionMismatch("aligned kernel slice has off-pattern entries")
    return s, a


def _complexify(block: np.ndarray, l: int, mm: int) -> np.ndarray:
    """f~_m = f_m + i f_{-m}, m = 0..mm (mm <= l)."""
    out = np.empty(mm + 1, dtype=complex)
    out[0] = block[l]
    for m in range(1, mm + 1):
        out[m] = block[l + m] + 1j * block[l - m]
    return out


def escn_kernel_apply(kernel: TfnKernel, x, f: SteerableVector) -> SteerableVector:
    """W(x) f via the aligned-axis reduction: rotate x onto e_y, apply the
    sparse aligned kernel as a pointwise complex product per order m, rotate
    back.  Mathematically identical to tfn_kernel_eval(kernel, x) @ f."""
    x, r = _check_displacement(kernel, x)
    if f.layout.degrees != kernel.in_layout.degrees:
        raise DimensionMismatch("feature layout does not match kernel input layout")
    out = SteerableVector.zeros(kernel.out_layout)
    if kernel.cutoff is not None and r > kernel.cutoff:
        return out
    ry = aligning_rotation(x)
    lmax = max(kernel.in_layout.max_degree, kernel.out_layout.max_degree)
    dstack = wigner_d_stack(lmax, ry)
    in_slices = kernel.in_layout.slices()
    out_slices = kernel.out_layout.slices()
    rotated = [dstack[l] @ f.data[in_slices[n_i]]
               for n_i, l in enumerate(kernel.in_layout.degrees)]
    acc = [np.zeros(2 * lp + 1) for lp in kernel.out_layout.degrees]
    for np_i, lp in enumerate(kernel.out_layout.degrees):
        for n_i, l in enumerate(kernel.in_layout.degrees):
            mm = min(l, lp)
            s_tot = np.zeros(mm + 1)
            a_tot = np.zeros(mm + 1)
            for j in range(abs(lp - l), lp + l + 1):
                # Y^J(e_y) = c_J e_{m=0}: the degree constant multiplies phi
                c_j = math.sqrt((2 * j + 1) / (4.0 * math.pi))
                phi = kernel.radial(np_i, n_i, j, r) * c_j
                s, a = _aligned_slice(kernel.cg, l, j, lp)
                s_tot += phi * s
                a_tot += phi * a
            f_c = _complexify(rotated[n_i], l, mm)
            h_c = s_tot - 1j * a_tot
            prod = h_c * f_c
            acc[np_i][lp] += prod[0].real
            for m in range(1, mm + 1):
                acc[np_i][lp + m] += prod[m].real
                acc[np_i][lp - m] += prod[m].imag
    data = np.zeros(kernel.out_layout.dim)
    for np_i, lp in enumerate(kernel.out_layout.degrees):
        data[out_slices[np_i]] = dstack[lp].T @ acc[np_i]
    return SteerableVector(kernel.out_layout, data)


# ---------------------------------------------------------------------------
# work model (multiply-accumulate counts of the two evaluation paths)
# ---------------------------------------------------------------------------

def tensor_product_work(in_layout: IrrepLayout, out_layout: IrrepLayout) -> int:
    """MACs for one direct W(x) @ f evaluation, following the actual loops."""
    work = 0
    for lp in out_layout.degrees:
        for l in in_layout.degrees:
            for j in range(abs(lp - l), lp + l + 1):
                work += (2 * lp + 1) * (2 * l + 1) * (2 * j + 1)  # CG contraction
            work += (2 * lp + 1) * (2 * l + 1)  # block matvec
    return work


def escn_work(in_layout: IrrepLayout, out_layout: IrrepLayout) -> int:
    """MACs for one aligned-path evaluation (rotations + pointwise products)."""
    work = 0
    for l in in_layout.degrees:
        work += (2 * l + 1) ** 2          # rotate in
    for lp in out_layout.degrees:
        work += (2 * lp + 1) ** 2         # rotate out
    for lp in out_layout.degrees:
        for l in in_layout.degrees:
            mm = min(l, lp)
            work += (lp + l + 1 - abs(lp - l) + 1) * (mm + 1) * 2  # s/a assembly
            work += 4 * (mm + 1)          # complex pointwise product
    return work


# ---------------------------------------------------------------------------
# equivariance report harness
# ---------------------------------------------------------------------------

def _perturbed_table(triple=(1, 1, 1), index=(0, 0, 0), delta=1e-2) -> CGTable:
    table = CGTable()
    blk = table.block(*triple).copy()
    blk[index] += delta
    table._blocks[triple] = blk
    return table


def equivariance_report(layer: str, lmax: int, trials: int, seed: int,
                        n_points: int = 8, perturb_cg: bool = False) -> dict:
    """Deterministic residual statistics for one layer type.

    layer: "identity" | "tfn" | "escn" | "attention" | "self".
    For "escn" the residual is the aligned-vs-direct deviation; for the
    others it is the equivariance defect relative to 1 + |f_out|.
    """
    rng = np.random.default_rng(seed)
    layout = IrrepLayout(tuple(range(lmax + 1)))
    table = _perturbed_table() if perturb_cg else default_cg_table()
    kernel = TfnKernel.random(layout, layout, rng, cg=table)
    residuals = np.zeros(trials)
    for t in range(trials):
        cloud = FeaturedPointCloud.random(layout, n_points, rng)
        g = Pose.random(rng)
        if layer == "identity":
            residuals[t] = 0.0
            continue
        if layer == "self":
            weights = {(n, n): float(rng.standard_normal())
                       for n in range(len(layout.degrees))}
            f = SteerableVector(layout, cloud.features[0])
            lhs = self_interaction(weights, f.rotate(g.r)).data
            rhs = layout.wigner(g.r) @ self_interaction(weights, f).data
            residuals[t] = np.abs(lhs - rhs).max() / (1.0 + np.abs(rhs).max())
            continue
        if layer == "escn":
            dx = rng.standard_normal(3)
            f = SteerableVector(layout, cloud.features[0])
            direct = tfn_kernel_eval(kernel, dx) @ f.data
            fast = escn_kernel_apply(kernel, dx, f).data
            residuals[t] = np.abs(direct - fast).max()
            continue
        if layer == "tfn":
            query = rng.standard_normal(3)
            base = tfn_convolve(kernel, cloud, query).data
            moved = tfn_convolve(kernel, cloud.transform(g), g.apply(query)).data
            expect = layout.wigner(g.r) @ base
            residuals[t] = np.abs(moved - expect).max() / (1.0 + np.abs(expect).max())
            continue
        if layer == "attention":
            base = invariant_attention(cloud, kernel)
            moved = invariant_attention(cloud.transform(g), kernel)
            expect = base.transform(g)
            residuals[t] = (np.abs(moved.features - expect.features).max()
                            / (1.0 + np.abs(expect.features).max()))
            continue
        raise ValueError(f"unknown layer {layer!r}")
    return {
        "layer": layer,
        "lmax": lmax,
        "trials": trials,
        "seed": seed,
        "n_points": n_points,
        "perturbed": bool(perturb_cg),
        "max_residual": float(residuals.max()) if trials else 0.0,
        "mean_residual": float(residuals.mean()) if trials else 0.0,
    }
