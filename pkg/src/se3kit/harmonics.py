"""Real spherical harmonics, real Wigner-D matrices, and real Clebsch-Gordan
coefficients.

Convention (fixed once, used everywhere):
  * components of a degree-l block are ordered m = -l..l;
  * the spherical-harmonic polar axis is +y and the azimuth is measured from
    +z toward +x.  Concretely, with t = n_y and (c_m + i s_m) = (n_z + i n_x)^m,

        Y_{l, m}(n) = sqrt(2) K_{l,m} c_m Pbar_l^m(t)     (m > 0)
        Y_{l, 0}(n) = K_{l,0} Pbar_l^0(t)
        Y_{l,-m}(n) = sqrt(2) K_{l,m} s_m Pbar_l^m(t)     (m > 0)

    where Pbar is the associated Legendre function with the (1-t^2)^{m/2}
    factor replaced by rho^m = (n_x^2+n_z^2)^{m/2} (absorbed into c_m, s_m),
    K_{l,m} = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!), and no Condon-Shortley phase.

  Consequences: Y^1(n) = c_1 (n_x, n_y, n_z) so that D^1(R) = R with no
  residual permutation, and Y^l(e_y) = c_l e_{m=0} with
  c_l = sqrt((2l+1)/(4 pi)) (the aligned-axis sparsity the fast tensor-product
  path relies on).

Higher Wigner-D matrices come from the recursive product method
    D^l = T_l (D^{l-1} kron D^1) T_l^T / lambda_l,
where T_l projects degree-(l-1) x degree-1 products onto degree l; T_l is
computed once per degree by an exact sphere quadrature of triple products of
harmonics, so every D^l is basis-consistent with the Y^l above by
construction and the steering identity Y^l(Rn) = D^l(R) Y^l(n) remains an
independent test.

Clebsch-Gordan blocks are solved from the intertwining constraint
    Q (D^{l1} kron D^{l2}) = D^l Q
stacked over a fixed set of internally-seeded random rotations (nullspace of
the normal matrix); rows are normalized to orthonormality, the block sign is
fixed by the first nonzero coefficient in lexicographic (m, m1, m2) order,
and entries below 1e-10 are stored as structural zeros.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainError, InsufficientSamples, NotUnit
from .liegroup import Rotation

# Hard degree caps (the toolkit targets small degrees; see module non-goals).
MAX_L1 = 6
MAX_L2 = 8
MAX_L = 10

_CG_ZERO_TOL = 1e-10
_CG_ROTATION_COUNT = 12
_CG_SEED = 0x5E36D  # internal; tables must be identical across runs


def _dfact(k: int) -> float:
    """Double factorial k!! for odd k (k!!=1 for k <= 0)."""
    out = 1.0
    while k > 1:
        out *= k
        k -= 2
    return out


def assoc_legendre(l: int, m: int, x: float) -> float:
    """Associated Legendre function P_l^m(x) without the Condon-Shortley
    phase, by the standard (m, l) recursion."""
    if not (0 <= m <= l):
        raise DomainError("assoc_legendre needs 0 <= m <= l")
    if not -1.0 <= x <= 1.0:
        raise DomainError("assoc_legendre needs |x| <= 1")
    somx2 = math.sqrt(max(0.0, 1.0 - x * x))
    pmm = _dfact(2 * m - 1) * somx2 ** m
    if l == m:
        return pmm
    pmmp1 = x * (2 * m + 1) * pmm
    if l == m + 1:
        return pmmp1
    for ll in range(m + 2, l + 1):
        pmm, pmmp1 = pmmp1, ((2 * ll - 1) * x * pmmp1 - (ll + m - 1) * pmm) / (ll - m)
    return pmmp1


def _scaled_legendre_all(lmax: int, t: float) -> np.ndarray:
    """Pbar_l^m(t) = P_l^m(t) / (1-t^2)^{m/2} for all 0 <= m <= l <= lmax."""
    out = np.zeros((lmax + 1, lmax + 1))
    for m in range(lmax + 1):
        pmm = _dfact(2 * m - 1)
        out[m, m] = pmm
        if m + 1 <= lmax:
            out[m + 1, m] = t * (2 * m + 1) * pmm
        for l in range(m + 2, lmax + 1):
            out[l, m] = ((2 * l - 1) * t * out[l - 1, m]
                         - (l + m - 1) * out[l - 2, m]) / (l - m)
    return out


def _norm_k(l: int, m: int) -> float:
    return math.sqrt((2 * l + 1) / (4.0 * math.pi)
                     * math.factorial(l - m) / math.factorial(l + m))


def sph_harm_stack(lmax: int, n) -> list[np.ndarray]:
    """[Y^0(n), Y^1(n), ..., Y^lmax(n)], each Y^l of length 2l+1."""
    n = np.asarray(n, dtype=float).reshape(3)
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise NotUnit("direction must be unit length (|n| = 1 within 1e-9)")
    t = n[1]
    pbar = _scaled_legendre_all(lmax, t)
    # (c_m + i s_m) = (n_z + i n_x)^m, m = 0..lmax
    c = np.empty(lmax + 1)
    s = np.empty(lmax + 1)
    c[0], s[0] = 1.0, 0.0
    for m in range(1, lmax + 1):
        c[m] = c[m - 1] * n[2] - s[m - 1] * n[0]
        s[m] = s[m - 1] * n[2] + c[m - 1] * n[0]
    out = []
    for l in range(lmax + 1):
        y = np.empty(2 * l + 1)
        y[l] = _norm_k(l, 0) * pbar[l, 0]
        for m in range(1, l + 1):
            kn = math.sqrt(2.0) * _norm_k(l, m) * pbar[l, m]
            y[l + m] = kn * c[m]
            y[l - m] = kn * s[m]
        out.append(y)
    return out


def sph_harm_vector(l: int, n) -> np.ndarray:
    """Y^l(n) with components ordered m = -l..l."""
    return sph_harm_stack(l, n)[l]


def real_sph_harm(l: int, m: int, n) -> float:
    """Single real spherical harmonic Y^l_m(n)."""
    if abs(m) > l:
        raise DomainError("real_sph_harm needs |m| <= l")
    return float(sph_harm_vector(l, n)[l + m])


@dataclass(frozen=True)
class ShBasisEval:
    """All harmonics up to a degree cap evaluated at one unit direction."""

    max_degree: int
    values: tuple

    @staticmethod
    def at(max_degree: int, n) -> "ShBasisEval":
        return ShBasisEval(max_degree, tuple(sph_harm_stack(max_degree, n)))

    def degree(self, l: int) -> np.ndarray:
        return self.values[l]


def sphere_quadrature(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Product quadrature (directions, weights) exact for spherical
    polynomials up to the given degree: Gauss-Legendre in the polar cosine
    (about +y) times a uniform azimuthal grid."""
    n_t = degree // 2 + 1
    n_phi = degree + 1
    t, wt = np.polynomial.legendre.leggauss(n_t)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    wphi = 2.0 * math.pi / n_phi
    rho = np.sqrt(1.0 - t ** 2)
    dirs = np.empty((n_t * n_phi, 3))
    w = np.empty(n_t * n_phi)
    idx = 0
    for i in range(n_t):
        for j in range(n_phi):
            dirs[idx] = (rho[i] * np.sin(phi[j]), t[i], rho[i] * np.cos(phi[j]))
            w[idx] = wt[i] * wphi
            idx += 1
    return dirs, w


@dataclass(frozen=True)
class WignerD:
    """Real orthogonal irrep matrix of SO(3) at one degree."""

    degree: int
    m: np.ndarray


class _GauntCache:
    """T_l projection matrices for the D^{l-1} kron D^1 -> D^l recursion."""

    def __init__(self):
        self._lock = threading.Lock()
        self._t: dict[int, np.ndarray] = {}
        self._lam: dict[int, float] = {}

    def get(self, l: int) -> tuple[np.ndarray, float]:
        with self._lock:
            if l not in self._t:
                dirs, w = sphere_quadrature(2 * l)
                t = np.zeros((2 * l + 1, (2 * l - 1) * 3))
                for d, wi in zip(dirs, w):
                    ys = sph_harm_stack(l, d)
                    prod = np.outer(ys[l - 1], ys[1]).reshape(-1)
                    t += wi * np.outer(ys[l], prod)
                gram = t @ t.T
                lam = gram[0, 0]
                if np.abs(gram - lam * np.eye(2 * l + 1)).max() > 1e-10 * lam:
                    raise DomainError("degree projection is not isotropic")
                self._t[l] = t
                self._lam[l] = float(lam)
            return self._t[l], self._lam[l]


_gaunt = _GauntCache()


def wigner_d_stack(lmax: int, r: Rotation) -> list[np.ndarray]:
    """[D^0(R), ..., D^lmax(R)] by the recursive product method."""
    if lmax > MAX_L:
        raise DomainError("degree above toolkit cap")
    mats = [np.ones((1, 1))]
    if lmax >= 1:
        mats.append(np.asarray(r.m, dtype=float))
    for l in range(2, lmax + 1):
        t, lam = _gaunt.get(l)
        mats.append(t @ np.kron(mats[l - 1], mats[1]) @ t.T / lam)
    return mats


def wigner_d(l: int, r: Rotation) -> WignerD:
    return WignerD(l, wigner_d_stack(l, r)[l])


def block_diag_wigner(degrees, r: Rotation) -> np.ndarray:
    """Block-diagonal stack of D^l(R) over a degree list (with repeats)."""
    degrees = list(degrees)
    stack = wigner_d_stack(max(degrees, default=0), r)
    dim = sum(2 * l + 1 for l in degrees)
    out = np.zeros((dim, dim))
    at = 0
    for l in degrees:
        d = 2 * l + 1
        out[at:at + d, at:at + d] = stack[l]
        at += d
    return out


class CGTable:
    """Sparse real Clebsch-Gordan coefficients, built lazily per
    (l1, l2, l) block from the intertwining constraint and cached.

    Blocks carry axes (m, m1, m2).  Entries outside the triangle rule
    |l1-l2| <= l <= l1+l2 are identically zero (not stored); within a block,
    entries are exactly zero (cleaned) or O(1).
    """

    def __init__(self, max_l1: int = MAX_L1, max_l2: int = MAX_L2, max_l: int = MAX_L):
        self.max_l1 = max_l1
        self.max_l2 = max_l2
        self.max_l = max_l
        self._blocks: dict[tuple[int, int, int], np.ndarray] = {}
        self._lock = threading.Lock()
        rng = np.random.default_rng(_CG_SEED)
        self._rotations = [Rotation.random(rng) for _ in range(_CG_ROTATION_COUNT)]
        self._dstacks: list[list[np.ndarray]] | None = None

    def _stacks(self, lmax: int) -> list[list[np.ndarray]]:
        if self._dstacks is None or len(self._dstacks[0]) <= lmax:
            self._dstacks = [wigner_d_stack(max(lmax, 1), r) for r in self._rotations]
        return self._dstacks

    def _solve_block(self, l1: int, l2: int, l: int) -> np.ndarray:
        d1, d2, dl = 2 * l1 + 1, 2 * l2 + 1, 2 * l + 1
        stacks = self._stacks(max(l1, l2, l))
        size = dl * d1 * d2
        normal = np.zeros((size, size))
        for st in stacks:
            dkron = np.kron(st[l1], st[l2])
            a = np.kron(st[l], np.eye(d1 * d2)) - np.kron(np.eye(dl), dkron.T)
            normal += a.T @ a
        evals, evecs = np.linalg.eigh(normal)
        if size > 1 and evals[1] < 1e-6:
            raise DomainError("intertwiner space is not one-dimensional")
        q = evecs[:, 0].reshape(dl, d1, d2)
        q *= math.sqrt(dl) / np.linalg.norm(q)
        flat = q.reshape(-1)
        for value in flat:
            if abs(value) > _CG_ZERO_TOL:
                if value < 0.0:
                    q = -q
                break
        q[np.abs(q) < _CG_ZERO_TOL] = 0.0
        return q

    def block(self, l1: int, l2: int, l: int) -> np.ndarray:
        """Dense (2l+1, 2l1+1, 2l2+1) coefficient block (zeros outside the
        triangle rule)."""
        if l1 > self.max_l1 or l2 > self.max_l2 or l > self.max_l:
            raise DomainError("degree above table caps")
        if min(l1, l2, l) < 0:
            raise DomainError("degrees must be non-negative")
        if not abs(l1 - l2) <= l <= l1 + l2:
            return np.zeros((2 * l + 1, 2 * l1 + 1, 2 * l2 + 1))
        key = (l1, l2, l)
        with self._lock:
            if key not in self._blocks:
                self._blocks[key] = self._solve_block(l1, l2, l)
            return self._blocks[key]

    def coefficient(self, l1: int, m1: int, l2: int, m2: int, l: int, m: int) -> float:
        if abs(m1) > l1 or abs(m2) > l2 or abs(m) > l:
            return 0.0
        if not abs(l1 - l2) <= l <= l1 + l2:
            return 0.0
        return float(self.block(l1, l2, l)[l + m, l1 + m1, l2 + m2])

    def iter_nonzero(self, lmax: int):
        """Deterministic (l1, m1, l2, m2, l, m, value) stream for dumping."""
        for l1 in range(lmax + 1):
            for l2 in range(lmax + 1):
                for l in range(abs(l1 - l2), min(l1 + l2, self.max_l) + 1):
                    blk = self.block(l1, l2, l)
                    for m1 in range(-l1, l1 + 1):
                        for m2 in range(-l2, l2 + 1):
                            for m in range(-l, l + 1):
                                v = blk[l + m, l1 + m1, l2 + m2]
                                if v != 0.0:
                                    yield (l1, m1, l2, m2, l, m, float(v))


_default_table: CGTable | None = None
_default_lock = threading.Lock()


def default_cg_table() -> CGTable:
    global _default_table
    with _default_lock:
        if _default_table is None:
            _default_table = CGTable()
        return _default_table


def cg_coefficient(l1: int, m1: int, l2: int, m2: int, l: int, m: int,
                   table: CGTable | None = None) -> float:
    """Real Clebsch-Gordan coefficient C^{(l,m)}_{(l1,m1)(l2,m2)}; zero
    outside the triangle rule."""
    table = table or default_cg_table()
    return table.coefficient(l1, m1, l2, m2, l, m)


def cg_tensor_product(u, l1: int, v, l2: int, l: int,
                      table: CGTable | None = None) -> np.ndarray:
    """(u x v)^l_m = sum C^{(l,m)}_{(l1,m1)(l2,m2)} u_{m1} v_{m2}."""
    u = np.asarray(u, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    if u.shape[0] != 2 * l1 + 1 or v.shape[0] != 2 * l2 + 1:
        raise DimensionMismatch("block sizes must be 2*l+1")
    table = table or default_cg_table()
    blk = table.block(l1, l2, l)
    return np.einsum("mij,i,j->m", blk, u, v)


# ---------------------------------------------------------------------------
# Fourier expansion on SO(3)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class So3FourierCoeffs:
    """Per-degree coefficient matrices of f(R) = sum_l sum_mn c^l_mn D^l_mn(R)."""

    lmax: int
    blocks: tuple

    def __post_init__(self):
        if len(self.blocks) != self.lmax + 1:
            raise DimensionMismatch("need one block per degree 0..lmax")


def _basis_size(lmax: int) -> int:
    return sum((2 * l + 1) ** 2 for l in range(lmax + 1))


def so3_fourier_synthesize(coeffs: So3FourierCoeffs, r: Rotation) -> float:
    stack = wigner_d_stack(coeffs.lmax, r)
    return float(sum(np.sum(c * d) for c, d in zip(coeffs.blocks, stack)))


def so3_fourier_analyze(samples, lmax: int) -> So3FourierCoeffs:
    """Least-squares fit of the degree-<=lmax Wigner-D expansion to
    (Rotation, value) samples; raises InsufficientSamples when the samples
    cannot pin the basis."""
    samples = list(samples)
    nb = _basis_size(lmax)
    if len(samples) < nb:
        raise InsufficientSamples("need at least as many samples as basis functions")
    design = np.empty((len(samples), nb))
    values = np.empty(len(samples))
    for i, (r, v) in enumerate(samples):
        stack = wigner_d_stack(lmax, r)
        design[i] = np.concatenate([d.reshape(-1) for d in stack])
        values[i] = v
    sol, _, rank, _ = np.linalg.lstsq(design, values, rcond=None)
    if rank < nb:
        raise InsufficientSamples("sample rotations do not span the basis")
    blocks = []
    at = 0
    for l in range(lmax + 1):
        d = 2 * l + 1
        blocks.append(sol[at:at + d * d].reshape(d, d))
        at += d * d
    return So3FourierCoeffs(lmax, tuple(blocks))


def so3_quadrature_grid(lmax: int) -> list[tuple[Rotation, float]]:
    """Deterministic Euler-product rotation grid (with Haar weights) dense
    enough for band limit lmax; used as the sampling set for analysis."""
    n_ang = 2 * lmax + 2
    n_beta = lmax + 2
    tb, wb = np.polynomial.legendre.leggauss(n_beta)
    betas = np.arccos(tb)
    alphas = 2.0 * math.pi * np.arange(n_ang) / n_ang
    out = []
    w_ang = 1.0 / (n_ang * n_ang)
    for beta, wbi in zip(betas, wb):
        rz = Rotation(np.array([
            [math.cos(beta), -math.sin(beta), 0.0],
            [math.sin(beta), math.cos(beta), 0.0],
            [0.0, 0.0, 1.0]]))
        for a in alphas:
            ca, sa = math.cos(a), math.sin(a)
            ry_a = Rotation(np.array([[ca, 0.0, sa], [0.0, 1.0, 0.0], [-sa, 0.0, ca]]))
            for g in alphas:
                cg, sg = math.cos(g), math.sin(g)
                ry_g = Rotation(np.array([[cg, 0.0, sg], [0.0, 1.0, 0.0], [-sg, 0.0, cg]]))
                out.append((ry_a @ rz @ ry_g, wbi * w_ang / 2.0))
    return out
