"""Hot numeric kernels: Lie-group primitives, manipulator dynamics, and the
closed-loop impedance-control integrator.

Everything here operates on plain float64 ndarrays and is nopython-compatible
so the whole module can be compiled by numba (see ``se3kit.backend``).  Public
modules wrap these with typed containers and validation; tests cross-check the
compiled and plain paths.

Conventions (used consistently across the package):
  * twists are 6-vectors ordered (v, w): linear part first;
  * wrenches are (f, tau);
  * poses are 4x4 homogeneous matrices [[R, p], [0, 1]];
  * the Adjoint of g = (p, R) is [[R, hat(p) R], [0, R]].

Numerical branch points:
  * ``_SMALL_ANGLE`` switches exp/rodrigues coefficients to series (loss of
    significance in (1-cos)/t^2 below ~1e-4);
  * ``_AINV_TAYLOR`` switches the translation block of the SE(3) logarithm to
    I - hat(psi)/2 + hat(psi)^2/12 (the closed form divides by sin|psi|);
  * ``_EPS_ANTIPODAL`` (radians) is the exclusion zone around a pi rotation
    where the logarithm branch is rejected instead of silently guessed.

The dynamics section avoids BLAS calls and temporaries on purpose: inside the
integrator a 4x4/6x6 matmul through dgemm costs more in call overhead than
the arithmetic, so small products are explicit loops and Adjoint actions are
applied without forming 6x6 matrices.
"""

from __future__ import annotations

import math

import numpy as np

from .backend import jit
from .errors import AntipodalSingularity, NearSingularJacobian

_SMALL_ANGLE = 1e-4
_AINV_TAYLOR = 1e-4
_EPS_ANTIPODAL = 1e-6


def hat3(w):
    out = np.zeros((3, 3))
    out[0, 1] = -w[2]
    out[0, 2] = w[1]
    out[1, 0] = w[2]
    out[1, 2] = -w[0]
    out[2, 0] = -w[1]
    out[2, 1] = w[0]
    return out


def vee3(s):
    return np.array([s[2, 1], s[0, 2], s[1, 0]])


def exp_so3(w):
    t = math.sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2])
    k = hat3(w)
    k2 = k @ k
    if t < _SMALL_ANGLE:
        a = 1.0 - t * t / 6.0
        b = 0.5 - t * t / 24.0
    else:
        a = math.sin(t) / t
        b = (1.0 - math.cos(t)) / (t * t)
    return np.eye(3) + a * k + b * k2


def quat_from_rot(r):
    """Unit quaternion (w, x, y, z) via the largest-pivot branch; stable for
    all angles including near pi."""
    tr = r[0, 0] + r[1, 1] + r[2, 2]
    q = np.empty(4)
    if tr > 0.0:
        s = math.sqrt(tr + 1.0) * 2.0
        q[0] = 0.25 * s
        q[1] = (r[2, 1] - r[1, 2]) / s
        q[2] = (r[0, 2] - r[2, 0]) / s
        q[3] = (r[1, 0] - r[0, 1]) / s
    elif r[0, 0] >= r[1, 1] and r[0, 0] >= r[2, 2]:
        s = math.sqrt(1.0 + r[0, 0] - r[1, 1] - r[2, 2]) * 2.0
        q[0] = (r[2, 1] - r[1, 2]) / s
        q[1] = 0.25 * s
        q[2] = (r[0, 1] + r[1, 0]) / s
        q[3] = (r[0, 2] + r[2, 0]) / s
    elif r[1, 1] >= r[2, 2]:
        s = math.sqrt(1.0 + r[1, 1] - r[0, 0] - r[2, 2]) * 2.0
        q[0] = (r[0, 2] - r[2, 0]) / s
        q[1] = (r[0, 1] + r[1, 0]) / s
        q[2] = 0.25 * s
        q[3] = (r[1, 2] + r[2, 1]) / s
    else:
        s = math.sqrt(1.0 + r[2, 2] - r[0, 0] - r[1, 1]) * 2.0
        q[0] = (r[1, 0] - r[0, 1]) / s
        q[1] = (r[0, 2] + r[2, 0]) / s
        q[2] = (r[1, 2] + r[2, 1]) / s
        q[3] = 0.25 * s
    n = math.sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    return q / n


def log_so3(r):
    q = quat_from_rot(r)
    if q[0] < 0.0:  # pick the branch with angle in [0, pi]
        q = -q
    nv = math.sqrt(q[1] * q[1] + q[2] * q[2] + q[3] * q[3])
    angle = 2.0 * math.atan2(nv, q[0])
    if math.pi - angle < _EPS_ANTIPODAL:
        raise AntipodalSingularity("rotation angle within 1e-6 rad of pi")
    if nv < 1e-12:
        return 2.0 * q[1:]
    return (angle / nv) * q[1:]


def dexp_v(psi):
    """V(psi) with exp_se3(v, psi) = (exp_so3(psi), V(psi) v)."""
    t = math.sqrt(psi[0] * psi[0] + psi[1] * psi[1] + psi[2] * psi[2])
    k = hat3(psi)
    k2 = k @ k
    if t < _SMALL_ANGLE:
        a = 0.5 - t * t / 24.0
        b = 1.0 / 6.0 - t * t / 120.0
    else:
        a = (1.0 - math.cos(t)) / (t * t)
        b = (t - math.sin(t)) / (t * t * t)
    return np.eye(3) + a * k + b * k2


def ainv(psi):
    """Inverse of dexp_v; Taylor branch below 1e-4 rad."""
    t = math.sqrt(psi[0] * psi[0] + psi[1] * psi[1] + psi[2] * psi[2])
    k = hat3(psi)
    k2 = k @ k
    if t < _AINV_TAYLOR:
        return np.eye(3) - 0.5 * k + k2 / 12.0
    st = math.sin(t)
    c = (2.0 * st - t * (1.0 + math.cos(t))) / (2.0 * t * t * st)
    return np.eye(3) - 0.5 * k + c * k2


def exp_se3(xi):
    g = np.eye(4)
    w = xi[3:]
    g[:3, :3] = exp_so3(w)
    g[:3, 3] = dexp_v(w) @ xi[:3].copy()
    return g


def log_se3(g):
    psi = log_so3(g[:3, :3].copy())
    b = ainv(psi) @ g[:3, 3].copy()
    out = np.empty(6)
    out[:3] = b
    out[3:] = psi
    return out


def pose_inv(g):
    out = np.eye(4)
    for i in range(3):
        for j in range(3):
            out[i, j] = g[j, i]
        out[i, 3] = -(g[0, i] * g[0, 3] + g[1, i] * g[1, 3] + g[2, i] * g[2, 3])
    return out


def adjoint(g):
    out = np.zeros((6, 6))
    r = g[:3, :3]
    out[:3, :3] = r
    out[3:, 3:] = r
    out[:3, 3:] = hat3(g[:3, 3].copy()) @ r.copy()
    return out


def adjoint_inv(g):
    return adjoint(pose_inv(g))


def ad6(xi):
    out = np.zeros((6, 6))
    wh = hat3(xi[3:])
    out[:3, :3] = wh
    out[3:, 3:] = wh
    out[:3, 3:] = hat3(xi[:3])
    return out


# ---------------------------------------------------------------------------
# small fixed-size helpers (explicit loops; no BLAS, no temporaries)
# ---------------------------------------------------------------------------

def _mm44(a, b, out):
    for i in range(4):
        for j in range(4):
            out[i, j] = (a[i, 0] * b[0, j] + a[i, 1] * b[1, j]
                         + a[i, 2] * b[2, j] + a[i, 3] * b[3, j])


def _pose_inv_into(g, out):
    for i in range(3):
        for j in range(3):
            out[i, j] = g[j, i]
        out[i, 3] = -(g[0, i] * g[0, 3] + g[1, i] * g[1, 3] + g[2, i] * g[2, 3])
    out[3, 0] = 0.0
    out[3, 1] = 0.0
    out[3, 2] = 0.0
    out[3, 3] = 1.0


def _exp_se3_into(xi, theta, out):
    """out = exp(hat(xi) * theta), no temporaries beyond scalars."""
    wx = xi[3] * theta
    wy = xi[4] * theta
    wz = xi[5] * theta
    vx = xi[0] * theta
    vy = xi[1] * theta
    vz = xi[2] * theta
    t2 = wx * wx + wy * wy + wz * wz
    t = math.sqrt(t2)
    if t < _SMALL_ANGLE:
        a = 1.0 - t2 / 6.0
        b = 0.5 - t2 / 24.0
        c = 1.0 / 6.0 - t2 / 120.0
    else:
        a = math.sin(t) / t
        b = (1.0 - math.cos(t)) / t2
        c = (t - math.sin(t)) / (t2 * t)
    # R = I + a hat(w) + b hat(w)^2 ; V = I + b hat(w) + c hat(w)^2
    xx, yy, zz = wx * wx, wy * wy, wz * wz
    xy, xz, yz = wx * wy, wx * wz, wy * wz
    out[0, 0] = 1.0 + b * (-yy - zz)
    out[0, 1] = -a * wz + b * xy
    out[0, 2] = a * wy + b * xz
    out[1, 0] = a * wz + b * xy
    out[1, 1] = 1.0 + b * (-xx - zz)
    out[1, 2] = -a * wx + b * yz
    out[2, 0] = -a * wy + b * xz
    out[2, 1] = a * wx + b * yz
    out[2, 2] = 1.0 + b * (-xx - yy)
    v00 = 1.0 + c * (-yy - zz)
    v01 = -b * wz + c * xy
    v02 = b * wy + c * xz
    v10 = b * wz + c * xy
    v11 = 1.0 + c * (-xx - zz)
    v12 = -b * wx + c * yz
    v20 = -b * wy + c * xz
    v21 = b * wx + c * yz
    v22 = 1.0 + c * (-xx - yy)
    out[0, 3] = v00 * vx + v01 * vy + v02 * vz
    out[1, 3] = v10 * vx + v11 * vy + v12 * vz
    out[2, 3] = v20 * vx + v21 * vy + v22 * vz
    out[3, 0] = 0.0
    out[3, 1] = 0.0
    out[3, 2] = 0.0
    out[3, 3] = 1.0


def _ad_apply_into(g, xi, out):
    """out = Ad_g xi = (R v + p x (R w), R w) without forming the 6x6."""
    rv0 = g[0, 0] * xi[0] + g[0, 1] * xi[1] + g[0, 2] * xi[2]
    rv1 = g[1, 0] * xi[0] + g[1, 1] * xi[1] + g[1, 2] * xi[2]
    rv2 = g[2, 0] * xi[0] + g[2, 1] * xi[1] + g[2, 2] * xi[2]
    rw0 = g[0, 0] * xi[3] + g[0, 1] * xi[4] + g[0, 2] * xi[5]
    rw1 = g[1, 0] * xi[3] + g[1, 1] * xi[4] + g[1, 2] * xi[5]
    rw2 = g[2, 0] * xi[3] + g[2, 1] * xi[4] + g[2, 2] * xi[5]
    px, py, pz = g[0, 3], g[1, 3], g[2, 3]
    out[0] = rv0 + py * rw2 - pz * rw1
    out[1] = rv1 + pz * rw0 - px * rw2
    out[2] = rv2 + px * rw1 - py * rw0
    out[3] = rw0
    out[4] = rw1
    out[5] = rw2


def _ad_inv_apply_into(g, xi, out):
    """out = Ad_{g^{-1}} xi = (R^T (v - p x w), R^T w)."""
    px, py, pz = g[0, 3], g[1, 3], g[2, 3]
    ux = xi[0] - (py * xi[5] - pz * xi[4])
    uy = xi[1] - (pz * xi[3] - px * xi[5])
    uz = xi[2] - (px * xi[4] - py * xi[3])
    out[0] = g[0, 0] * ux + g[1, 0] * uy + g[2, 0] * uz
    out[1] = g[0, 1] * ux + g[1, 1] * uy + g[2, 1] * uz
    out[2] = g[0, 2] * ux + g[1, 2] * uy + g[2, 2] * uz
    out[3] = g[0, 0] * xi[3] + g[1, 0] * xi[4] + g[2, 0] * xi[5]
    out[4] = g[0, 1] * xi[3] + g[1, 1] * xi[4] + g[2, 1] * xi[5]
    out[5] = g[0, 2] * xi[3] + g[1, 2] * xi[4] + g[2, 2] * xi[5]


def _ad6_apply_into(xi, eta, out):
    """out = ad_xi eta = (w x eta_v + v x eta_w, w x eta_w)."""
    vx, vy, vz = xi[0], xi[1], xi[2]
    wx, wy, wz = xi[3], xi[4], xi[5]
    out[0] = wy * eta[2] - wz * eta[1] + vy * eta[5] - vz * eta[4]
    out[1] = wz * eta[0] - wx * eta[2] + vz * eta[3] - vx * eta[5]
    out[2] = wx * eta[1] - wy * eta[0] + vx * eta[4] - vy * eta[3]
    out[3] = wy * eta[5] - wz * eta[4]
    out[4] = wz * eta[3] - wx * eta[5]
    out[5] = wx * eta[4] - wy * eta[3]


def _mm_into(a, b, out):
    n, m = out.shape
    kk = a.shape[1]
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(kk):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc


def _mmt_into(a, b, out):
    """out = a^T b."""
    n, m = out.shape
    kk = a.shape[0]
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(kk):
                acc += a[k, i] * b[k, j]
            out[i, j] = acc


def _mv66_into(a, v, out):
    for i in range(6):
        acc = 0.0
        for k in range(6):
            acc += a[i, k] * v[k]
        out[i] = acc


# ---------------------------------------------------------------------------
# product-of-exponentials kinematics and rigid-body dynamics
# ---------------------------------------------------------------------------

def prefix_poses(xis, q):
    """P[i] = exp(xi_1 q_1) ... exp(xi_i q_i), P[0] = I."""
    n = q.shape[0]
    out = np.empty((n + 1, 4, 4))
    out[0] = np.eye(4)
    step = np.empty((4, 4))
    for i in range(n):
        _exp_se3_into(xis[i], q[i], step)
        _mm44(out[i], step, out[i + 1])
    return out


def fk_ee(xis, q, home):
    pre = prefix_poses(xis, q)
    out = np.empty((4, 4))
    _mm44(pre[q.shape[0]], home, out)
    return out


def spatial_cols(xis, q, pre):
    n = q.shape[0]
    cols = np.empty((6, n))
    buf = np.empty(6)
    for i in range(n):
        _ad_apply_into(pre[i], xis[i], buf)
        cols[:, i] = buf
    return cols


def body_jacobian_of(frame_pose, scols, k):
    """Body Jacobian of a frame driven by the first k joints."""
    n = scols.shape[1]
    out = np.zeros((6, n))
    col = np.empty(6)
    src = np.empty(6)
    for i in range(k):
        for r in range(6):
            src[r] = scols[r, i]
        _ad_inv_apply_into(frame_pose, src, col)
        for r in range(6):
            out[r, i] = col[r]
    return out


def ee_jacobian(xis, q, home):
    pre = prefix_poses(xis, q)
    scols = spatial_cols(xis, q, pre)
    g = np.empty((4, 4))
    _mm44(pre[q.shape[0]], home, g)
    return body_jacobian_of(g, scols, q.shape[0])


def ee_jacobian_dot(jb, qd):
    """dJ/dt for a body Jacobian: dJ_i/dq_j = ad_{J_i} J_j for j > i."""
    n = jb.shape[1]
    out = np.zeros((6, n))
    tail = np.empty(6)
    ji = np.empty(6)
    dcol = np.empty(6)
    for i in range(n):
        for r in range(6):
            tail[r] = 0.0
        for j in range(i + 1, n):
            for r in range(6):
                tail[r] += qd[j] * jb[r, j]
        for r in range(6):
            ji[r] = jb[r, i]
        _ad6_apply_into(ji, tail, dcol)
        for r in range(6):
            out[r, i] = dcol[r]
    return out


def _mass_into(xis, q, coms, masses, inertias, m_out, pre, scols, jl, aw):
    """Mass matrix via link-COM body Jacobians; buffers supplied by caller."""
    n = q.shape[0]
    step = np.empty((4, 4))
    pre[0] = np.eye(4)
    for i in range(n):
        _exp_se3_into(xis[i], q[i], step)
        _mm44(pre[i], step, pre[i + 1])
    buf = np.empty(6)
    for i in range(n):
        _ad_apply_into(pre[i], xis[i], buf)
        for r in range(6):
            scols[r, i] = buf[r]
    for i in range(n):
        for j in range(n):
            m_out[i, j] = 0.0
    gl = np.empty((4, 4))
    src = np.empty(6)
    col = np.empty(6)
    for l in range(n):
        # COM frame: home orientation = spatial, origin at coms[l]
        for i in range(4):
            for j in range(4):
                gl[i, j] = pre[l + 1, i, j]
        gl[0, 3] += pre[l + 1, 0, 0] * coms[l, 0] + pre[l + 1, 0, 1] * coms[l, 1] + pre[l + 1, 0, 2] * coms[l, 2]
        gl[1, 3] += pre[l + 1, 1, 0] * coms[l, 0] + pre[l + 1, 1, 1] * coms[l, 1] + pre[l + 1, 1, 2] * coms[l, 2]
        gl[2, 3] += pre[l + 1, 2, 0] * coms[l, 0] + pre[l + 1, 2, 1] * coms[l, 1] + pre[l + 1, 2, 2] * coms[l, 2]
        k = l + 1
        for i in range(k):
            for r in range(6):
                src[r] = scols[r, i]
            _ad_inv_apply_into(gl, src, col)
            for r in range(6):
                jl[r, i] = col[r]
        mass = masses[l]
        for i in range(k):
            aw[0, i] = mass * jl[0, i]
            aw[1, i] = mass * jl[1, i]
            aw[2, i] = mass * jl[2, i]
            for r in range(3):
                aw[3 + r, i] = (inertias[l, r, 0] * jl[3, i]
                                + inertias[l, r, 1] * jl[4, i]
                                + inertias[l, r, 2] * jl[5, i])
        for i in range(k):
            for j in range(k):
                acc = 0.0
                for r in range(6):
                    acc += jl[r, i] * aw[r, j]
                m_out[i, j] += acc
    # exact symmetry so the Christoffel construction is structurally passive
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.5 * (m_out[i, j] + m_out[j, i])
            m_out[i, j] = s
            m_out[j, i] = s


def mass_matrix(xis, q, coms, masses, inertias):
    n = q.shape[0]
    m = np.empty((n, n))
    pre = np.empty((n + 1, 4, 4))
    scols = np.empty((6, n))
    jl = np.zeros((6, n))
    aw = np.empty((6, n))
    _mass_into(xis, q, coms, masses, inertias, m, pre, scols, jl, aw)
    return m


def gravity_vector(xis, q, coms, masses, gvec):
    """G = dU/dq with U = -sum_l m_l gvec . p_com_l(q)."""
    n = q.shape[0]
    pre = prefix_poses(xis, q)
    scols = spatial_cols(xis, q, pre)
    out = np.zeros(n)
    gl = np.empty((4, 4))
    src = np.empty(6)
    col = np.empty(6)
    for l in range(n):
        for i in range(4):
            for j in range(4):
                gl[i, j] = pre[l + 1, i, j]
        gl[0, 3] += pre[l + 1, 0, 0] * coms[l, 0] + pre[l + 1, 0, 1] * coms[l, 1] + pre[l + 1, 0, 2] * coms[l, 2]
        gl[1, 3] += pre[l + 1, 1, 0] * coms[l, 0] + pre[l + 1, 1, 1] * coms[l, 1] + pre[l + 1, 1, 2] * coms[l, 2]
        gl[2, 3] += pre[l + 1, 2, 0] * coms[l, 0] + pre[l + 1, 2, 1] * coms[l, 1] + pre[l + 1, 2, 2] * coms[l, 2]
        for i in range(l + 1):
            for r in range(6):
                src[r] = scols[r, i]
            _ad_inv_apply_into(gl, src, col)
            # d p_com / dq_i = R_com * linear rows of J; G_i -= m g . (R col_v)
            rx = gl[0, 0] * col[0] + gl[0, 1] * col[1] + gl[0, 2] * col[2]
            ry = gl[1, 0] * col[0] + gl[1, 1] * col[1] + gl[1, 2] * col[2]
            rz = gl[2, 0] * col[0] + gl[2, 1] * col[1] + gl[2, 2] * col[2]
            out[i] -= masses[l] * (gvec[0] * rx + gvec[1] * ry + gvec[2] * rz)
    return out


def coriolis_matrix(xis, q, qd, coms, masses, inertias, eps):
    """Christoffel-symbol Coriolis matrix; dM/dq by central differences."""
    n = q.shape[0]
    dm = np.empty((n, n, n))
    mp = np.empty((n, n))
    mm = np.empty((n, n))
    pre = np.empty((n + 1, 4, 4))
    scols = np.empty((6, n))
    jl = np.zeros((6, n))
    aw = np.empty((6, n))
    qp = q.copy()
    for k in range(n):
        qk = q[k]
        qp[k] = qk + eps
        _mass_into(xis, qp, coms, masses, inertias, mp, pre, scols, jl, aw)
        qp[k] = qk - eps
        _mass_into(xis, qp, coms, masses, inertias, mm, pre, scols, jl, aw)
        qp[k] = qk
        inv2e = 1.0 / (2.0 * eps)
        for i in range(n):
            for j in range(n):
                dm[k, i, j] = (mp[i, j] - mm[i, j]) * inv2e
    c = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += (dm[k, i, j] + dm[j, i, k] - dm[i, k, j]) * qd[k]
            c[i, j] = 0.5 * acc
    return c


def joint_dynamics_arrays(xis, q, qd, coms, masses, inertias, gvec, eps):
    m = mass_matrix(xis, q, coms, masses, inertias)
    c = coriolis_matrix(xis, q, qd, coms, masses, inertias, eps)
    g = gravity_vector(xis, q, coms, masses, gvec)
    return m, c, g


def min_singular_value(j):
    s = np.linalg.svd(j)[1]
    return s[s.shape[0] - 1]


def operational_arrays(m, c, g, jb, jbdot, sigma_min):
    """Mt = Ji^T M Ji, Ct = Ji^T (C - M Ji Jdot) Ji, Gt = Ji^T G with
    Ji = jb^{-1}; sigma_min <= 0 skips the conditioning guard."""
    if sigma_min > 0.0 and min_singular_value(jb) < sigma_min:
        raise NearSingularJacobian("body Jacobian below minimum singular value guard")
    n = jb.shape[0]
    ji = np.linalg.inv(np.ascontiguousarray(jb))
    tmp = np.empty((n, n))
    mt = np.empty((n, n))
    _mm_into(m, ji, tmp)             # M Ji
    _mmt_into(ji, tmp, mt)           # Ji^T (M Ji)
    for i in range(n):
        for j in range(i + 1, n):
            s = 0.5 * (mt[i, j] + mt[j, i])
            mt[i, j] = s
            mt[j, i] = s
    inner = np.empty((n, n))
    _mm_into(ji, jbdot, tmp)         # Ji Jdot
    _mm_into(m, tmp, inner)          # M Ji Jdot
    for i in range(n):
        for j in range(n):
            inner[i, j] = c[i, j] - inner[i, j]
    _mm_into(inner, ji, tmp)         # (C - M Ji Jdot) Ji
    ct = np.empty((n, n))
    _mmt_into(ji, tmp, ct)           # Ji^T (...)
    gt = np.empty(n)
    for i in range(n):
        acc = 0.0
        for k in range(n):
            acc += ji[k, i] * g[k]
        gt[i] = acc
    return mt, ct, gt


# ---------------------------------------------------------------------------
# geometric impedance control
# ---------------------------------------------------------------------------

def gcev(g, gd):
    out = np.empty(6)
    dp0 = g[0, 3] - gd[0, 3]
    dp1 = g[1, 3] - gd[1, 3]
    dp2 = g[2, 3] - gd[2, 3]
    out[0] = g[0, 0] * dp0 + g[1, 0] * dp1 + g[2, 0] * dp2
    out[1] = g[0, 1] * dp0 + g[1, 1] * dp1 + g[2, 1] * dp2
    out[2] = g[0, 2] * dp0 + g[1, 2] * dp1 + g[2, 2] * dp2
    # m = Rd^T R; e_R = vee(m - m^T)
    m01 = (gd[0, 0] * g[0, 1] + gd[1, 0] * g[1, 1] + gd[2, 0] * g[2, 1])
    m10 = (gd[0, 1] * g[0, 0] + gd[1, 1] * g[1, 0] + gd[2, 1] * g[2, 0])
    m02 = (gd[0, 0] * g[0, 2] + gd[1, 0] * g[1, 2] + gd[2, 0] * g[2, 2])
    m20 = (gd[0, 2] * g[0, 0] + gd[1, 2] * g[1, 0] + gd[2, 2] * g[2, 0])
    m12 = (gd[0, 1] * g[0, 2] + gd[1, 1] * g[1, 2] + gd[2, 1] * g[2, 2])
    m21 = (gd[0, 2] * g[0, 1] + gd[1, 2] * g[1, 1] + gd[2, 2] * g[2, 1])
    out[3] = m21 - m12
    out[4] = m02 - m20
    out[5] = m10 - m01
    return out


def xi_de(g, gd):
    gde = np.empty((4, 4))
    gdi = np.empty((4, 4))
    _pose_inv_into(gd, gdi)
    _mm44(gdi, g, gde)
    return log_se3(gde)


def psi1(g, gd):
    dp0 = g[0, 3] - gd[0, 3]
    dp1 = g[1, 3] - gd[1, 3]
    dp2 = g[2, 3] - gd[2, 3]
    tr = 0.0
    for i in range(3):
        tr += (gd[0, i] * g[0, i] + gd[1, i] * g[1, i] + gd[2, i] * g[2, i])
    return (3.0 - tr) + 0.5 * (dp0 * dp0 + dp1 * dp1 + dp2 * dp2)


def psi2(g, gd):
    x = xi_de(g, gd)
    return 0.5 * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
                  + x[3] * x[3] + x[4] * x[4] + x[5] * x[5])


def potential1(g, gd, kp, kr):
    # tr(K_R (I - Rd^T R)) + (p-p_d)^T Rd Kp Rd^T (p-p_d) / 2
    rde = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            rde[i, j] = (gd[0, i] * g[0, j] + gd[1, i] * g[1, j] + gd[2, i] * g[2, j])
    tr = 0.0
    for i in range(3):
        for j in range(3):
            delta = 1.0 if i == j else 0.0
            tr += kr[i, j] * (delta - rde[j, i])
    dp0 = g[0, 3] - gd[0, 3]
    dp1 = g[1, 3] - gd[1, 3]
    dp2 = g[2, 3] - gd[2, 3]
    e0 = gd[0, 0] * dp0 + gd[1, 0] * dp1 + gd[2, 0] * dp2
    e1 = gd[0, 1] * dp0 + gd[1, 1] * dp1 + gd[2, 1] * dp2
    e2 = gd[0, 2] * dp0 + gd[1, 2] * dp1 + gd[2, 2] * dp2
    quad = (e0 * (kp[0, 0] * e0 + kp[0, 1] * e1 + kp[0, 2] * e2)
            + e1 * (kp[1, 0] * e0 + kp[1, 1] * e1 + kp[1, 2] * e2)
            + e2 * (kp[2, 0] * e0 + kp[2, 1] * e1 + kp[2, 2] * e2))
    return tr + 0.5 * quad


def potential2(g, gd, kxi):
    x = xi_de(g, gd)
    acc = 0.0
    for i in range(6):
        row = 0.0
        for j in range(6):
            row += kxi[i, j] * x[j]
        acc += x[i] * row
    return 0.5 * acc


def elastic1(g, gd, kp, kr):
    """f_{G,1} = (R^T Rd Kp Rd^T (p-pd), vee(KR Rd^T R - R^T Rd KR))."""
    rde = np.empty((3, 3))  # Rd^T R
    for i in range(3):
        for j in range(3):
            rde[i, j] = (gd[0, i] * g[0, j] + gd[1, i] * g[1, j] + gd[2, i] * g[2, j])
    dp0 = g[0, 3] - gd[0, 3]
    dp1 = g[1, 3] - gd[1, 3]
    dp2 = g[2, 3] - gd[2, 3]
    e0 = gd[0, 0] * dp0 + gd[1, 0] * dp1 + gd[2, 0] * dp2
    e1 = gd[0, 1] * dp0 + gd[1, 1] * dp1 + gd[2, 1] * dp2
    e2 = gd[0, 2] * dp0 + gd[1, 2] * dp1 + gd[2, 2] * dp2
    k0 = kp[0, 0] * e0 + kp[0, 1] * e1 + kp[0, 2] * e2
    k1 = kp[1, 0] * e0 + kp[1, 1] * e1 + kp[1, 2] * e2
    k2 = kp[2, 0] * e0 + kp[2, 1] * e1 + kp[2, 2] * e2
    out = np.empty(6)
    out[0] = rde[0, 0] * k0 + rde[1, 0] * k1 + rde[2, 0] * k2
    out[1] = rde[0, 1] * k0 + rde[1, 1] * k1 + rde[2, 1] * k2
    out[2] = rde[0, 2] * k0 + rde[1, 2] * k1 + rde[2, 2] * k2
    # m = KR Rd^T R - (Rd^T R)^T KR is antisymmetric; vee reads one triangle
    m21 = (kr[2, 0] * rde[0, 1] + kr[2, 1] * rde[1, 1] + kr[2, 2] * rde[2, 1]
           - (rde[0, 2] * kr[0, 1] + rde[1, 2] * kr[1, 1] + rde[2, 2] * kr[2, 1]))
    m02 = (kr[0, 0] * rde[0, 2] + kr[0, 1] * rde[1, 2] + kr[0, 2] * rde[2, 2]
           - (rde[0, 0] * kr[0, 2] + rde[1, 0] * kr[1, 2] + rde[2, 0] * kr[2, 2]))
    m10 = (kr[1, 0] * rde[0, 0] + kr[1, 1] * rde[1, 0] + kr[1, 2] * rde[2, 0]
           - (rde[0, 1] * kr[0, 0] + rde[1, 1] * kr[1, 0] + rde[2, 1] * kr[2, 0]))
    out[3] = m21
    out[4] = m02
    out[5] = m10
    return out


def elastic2(g, gd, kxi):
    x = xi_de(g, gd)
    out = np.empty(6)
    _mv66_into(kxi, x, out)
    return out


def velocity_error(g, gd, vb, vd):
    """e_V = V^b - Ad_{g_ed} V_d^b with g_ed = g^-1 g_d."""
    gi = np.empty((4, 4))
    ged = np.empty((4, 4))
    _pose_inv_into(g, gi)
    _mm44(gi, gd, ged)
    vdstar = np.empty(6)
    _ad_apply_into(ged, vd, vdstar)
    return vb - vdstar, vdstar


def gic_wrench(g, gd, vb, vd, vdd, kp, kr, kxi, kd, mt, ct, gt, variant):
    gi = np.empty((4, 4))
    ged = np.empty((4, 4))
    _pose_inv_into(g, gi)
    _mm44(gi, gd, ged)
    vdstar = np.empty(6)
    _ad_apply_into(ged, vd, vdstar)
    ev = vb - vdstar
    # d/dt (Ad_{g_ed} V_d) = Ad_{g_ed} Vdot_d - ad_{e_V} Ad_{g_ed} V_d
    advdd = np.empty(6)
    _ad_apply_into(ged, vdd, advdd)
    corr = np.empty(6)
    _ad6_apply_into(ev, vdstar, corr)
    vdstar_dot = advdd - corr
    if variant == 1:
        fg = elastic1(g, gd, kp, kr)
    else:
        fg = elastic2(g, gd, kxi)
    t = np.empty(6)
    buf = np.empty(6)
    _mv66_into(mt, vdstar_dot, t)
    _mv66_into(ct, vdstar, buf)
    for i in range(6):
        t[i] += buf[i] + gt[i] - fg[i]
    _mv66_into(kd, ev, buf)
    for i in range(6):
        t[i] -= buf[i]
    return t, ev


def desired_state(kind, t, gd0, params):
    """Desired pose/body-velocity/body-acceleration at time t.

    kind 0: hold gd0.
    kind 1: planar circle through gd0's position, constant orientation;
            params = (radius, omega, e1[3], e2[3]) with e1, e2 the plane axes.
    """
    gd = gd0.copy()
    vd = np.zeros(6)
    vdd = np.zeros(6)
    if kind == 1:
        radius = params[0]
        omega = params[1]
        e1 = params[2:5]
        e2 = params[5:8]
        s = math.sin(omega * t)
        c = math.cos(omega * t)
        for i in range(3):
            gd[i, 3] = gd0[i, 3] + radius * ((c - 1.0) * e1[i] + s * e2[i])
        # body-frame: V_d = (R_d^T pdot, 0), orientation constant
        pdot = radius * omega * (-s * e1 + c * e2)
        pddot = radius * omega * omega * (-c * e1 - s * e2)
        for i in range(3):
            vd[i] = gd0[0, i] * pdot[0] + gd0[1, i] * pdot[1] + gd0[2, i] * pdot[2]
            vdd[i] = gd0[0, i] * pddot[0] + gd0[1, i] * pddot[1] + gd0[2, i] * pddot[2]
    return gd, vd, vdd


def closed_loop_rhs(q, qd, t, xis, coms, masses, inertias, home, gvec,
                    kind, gd0, params, kp, kr, kxi, kd, variant,
                    fd_eps, sigma_min):
    """Closed-loop joint accelerations plus dissipation-rate for the
    augmented energy integral; returns (qdd, ddot)."""
    n = q.shape[0]
    m, c, grav = joint_dynamics_arrays(xis, q, qd, coms, masses, inertias, gvec, fd_eps)
    pre = prefix_poses(xis, q)
    scols = spatial_cols(xis, q, pre)
    g = np.empty((4, 4))
    _mm44(pre[n], home, g)
    jb = body_jacobian_of(g, scols, n)
    jbdot = ee_jacobian_dot(jb, qd)
    mt, ct, gt = operational_arrays(m, c, grav, jb, jbdot, sigma_min)
    gd, vd, vdd = desired_state(kind, t, gd0, params)
    vb = np.empty(n)
    _mv66_into(jb, qd, vb)
    wrench, ev = gic_wrench(g, gd, vb, vd, vdd, kp, kr, kxi, kd, mt, ct, gt, variant)
    tau = np.empty(n)
    for i in range(n):
        acc = 0.0
        for r in range(6):
            acc += jb[r, i] * wrench[r]
        acc -= grav[i]
        for k in range(n):
            acc -= c[i, k] * qd[k]
        tau[i] = acc
    qdd = np.linalg.solve(m, tau)
    kdev = np.empty(6)
    _mv66_into(kd, ev, kdev)
    ddot = 0.0
    for i in range(6):
        ddot += ev[i] * kdev[i]
    return qdd, ddot


def closed_loop_run(xis, coms, masses, inertias, home, gvec,
                    q0, qd0, kind, gd0, params,
                    kp, kr, kxi, kd, variant,
                    dt, nsteps, fd_eps, sigma_min):
    """RK4 integration of the closed loop with stage-wise control.

    The dissipated energy D (integral of e_V^T K_d e_V) is co-integrated so
    the per-step rate of V + D measures the energy-balance residual; the
    Jacobian conditioning guard runs at step boundaries.
    Returns (t, q, qd, psi, kinetic, potential, lyap, dissipated, residual,
    wrench, e_g, e_v) with rows at every step boundary.
    """
    n = q0.shape[0]
    t_arr = np.empty(nsteps + 1)
    q_arr = np.empty((nsteps + 1, n))
    qd_arr = np.empty((nsteps + 1, n))
    psi_arr = np.empty(nsteps + 1)
    kin_arr = np.empty(nsteps + 1)
    pot_arr = np.empty(nsteps + 1)
    lyap_arr = np.empty(nsteps + 1)
    diss_arr = np.empty(nsteps + 1)
    res_arr = np.zeros(nsteps + 1)
    wrench_arr = np.empty((nsteps + 1, 6))
    eg_arr = np.empty((nsteps + 1, 6))
    ev_arr = np.empty((nsteps + 1, 6))

    q = q0.copy()
    qd = qd0.copy()
    dcum = 0.0
    for step in range(nsteps + 1):
        t = step * dt
        # instrumentation at the step boundary (guarded)
        m, c, grav = joint_dynamics_arrays(xis, q, qd, coms, masses, inertias, gvec, fd_eps)
        pre = prefix_poses(xis, q)
        scols = spatial_cols(xis, q, pre)
        g = np.empty((4, 4))
        _mm44(pre[n], home, g)
        jb = body_jacobian_of(g, scols, n)
        jbdot = ee_jacobian_dot(jb, qd)
        mt, ct, gt = operational_arrays(m, c, grav, jb, jbdot, sigma_min)
        gd, vd, vdd = desired_state(kind, t, gd0, params)
        vb = np.empty(n)
        _mv66_into(jb, qd, vb)
        wrench, ev = gic_wrench(g, gd, vb, vd, vdd, kp, kr, kxi, kd, mt, ct, gt, variant)
        if variant == 1:
            psi = psi1(g, gd)
            pot = potential1(g, gd, kp, kr)
        else:
            psi = psi2(g, gd)
            pot = potential2(g, gd, kxi)
        mtev = np.empty(6)
        _mv66_into(mt, ev, mtev)
        kin = 0.0
        for i in range(6):
            kin += 0.5 * ev[i] * mtev[i]

        t_arr[step] = t
        q_arr[step] = q
        qd_arr[step] = qd
        psi_arr[step] = psi
        kin_arr[step] = kin
        pot_arr[step] = pot
        lyap_arr[step] = kin + pot
        diss_arr[step] = dcum
        wrench_arr[step] = wrench
        eg_arr[step] = gcev(g, gd)
        ev_arr[step] = ev
        if step > 0:
            res_arr[step] = ((lyap_arr[step] + diss_arr[step])
                             - (lyap_arr[step - 1] + diss_arr[step - 1])) / dt
        if step == nsteps:
            break

        # RK4 on (q, qd, D); stages skip the conditioning guard
        k1q = qd
        k1v, k1d = closed_loop_rhs(q, qd, t, xis, coms, masses, inertias, home,
                                   gvec, kind, gd0, params, kp, kr, kxi, kd,
                                   variant, fd_eps, 0.0)
        q2 = q + 0.5 * dt * k1q
        v2 = qd + 0.5 * dt * k1v
        k2q = v2
        k2v, k2d = closed_loop_rhs(q2, v2, t + 0.5 * dt, xis, coms, masses,
                                   inertias, home, gvec, kind, gd0, params,
                                   kp, kr, kxi, kd, variant, fd_eps, 0.0)
        q3 = q + 0.5 * dt * k2q
        v3 = qd + 0.5 * dt * k2v
        k3q = v3
        k3v, k3d = closed_loop_rhs(q3, v3, t + 0.5 * dt, xis, coms, masses,
                                   inertias, home, gvec, kind, gd0, params,
                                   kp, kr, kxi, kd, variant, fd_eps, 0.0)
        q4 = q + dt * k3q
        v4 = qd + dt * k3v
        k4q = v4
        k4v, k4d = closed_loop_rhs(q4, v4, t + dt, xis, coms, masses, inertias,
                                   home, gvec, kind, gd0, params, kp, kr, kxi,
                                   kd, variant, fd_eps, 0.0)
        q = q + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        qd = qd + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        dcum = dcum + (dt / 6.0) * (k1d + 2.0 * k2d + 2.0 * k3d + k4d)

    return (t_arr, q_arr, qd_arr, psi_arr, kin_arr, pot_arr, lyap_arr,
            diss_arr, res_arr, wrench_arr, eg_arr, ev_arr)


def torque_rhs(q, qd, tau, xis, coms, masses, inertias, gvec, fd_eps):
    m, c, grav = joint_dynamics_arrays(xis, q, qd, coms, masses, inertias, gvec, fd_eps)
    n = q.shape[0]
    rhs = np.empty(n)
    for i in range(n):
        acc = tau[i] - grav[i]
        for k in range(n):
            acc -= c[i, k] * qd[k]
        rhs[i] = acc
    return np.linalg.solve(m, rhs)


def rk4_torque_step(q, qd, tau, dt, xis, coms, masses, inertias, gvec, fd_eps):
    """One RK4 step with the joint torque held constant over the step."""
    k1q = qd
    k1v = torque_rhs(q, qd, tau, xis, coms, masses, inertias, gvec, fd_eps)
    q2 = q + 0.5 * dt * k1q
    v2 = qd + 0.5 * dt * k1v
    k2q = v2
    k2v = torque_rhs(q2, v2, tau, xis, coms, masses, inertias, gvec, fd_eps)
    q3 = q + 0.5 * dt * k2q
    v3 = qd + 0.5 * dt * k2v
    k3q = v3
    k3v = torque_rhs(q3, v3, tau, xis, coms, masses, inertias, gvec, fd_eps)
    q4 = q + dt * k3q
    v4 = qd + dt * k3v
    k4q = v4
    k4v = torque_rhs(q4, v4, tau, xis, coms, masses, inertias, gvec, fd_eps)
    qn = q + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    vn = qd + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return qn, vn


def simulate_constant_torque(q0, qd0, tau, dt, nsteps, xis, coms, masses,
                             inertias, gvec, fd_eps):
    n = q0.shape[0]
    q_arr = np.empty((nsteps + 1, n))
    qd_arr = np.empty((nsteps + 1, n))
    q_arr[0] = q0
    qd_arr[0] = qd0
    q = q0.copy()
    qd = qd0.copy()
    for step in range(nsteps):
        q, qd = rk4_torque_step(q, qd, tau, dt, xis, coms, masses, inertias,
                                gvec, fd_eps)
        q_arr[step + 1] = q
        qd_arr[step + 1] = qd
    return q_arr, qd_arr


_HOT = [
    "hat3", "vee3", "exp_so3", "quat_from_rot", "log_so3", "dexp_v", "ainv",
    "exp_se3", "log_se3", "pose_inv", "adjoint", "adjoint_inv", "ad6",
    "_mm44", "_pose_inv_into", "_exp_se3_into", "_ad_apply_into",
    "_ad_inv_apply_into", "_ad6_apply_into", "_mm_into", "_mmt_into",
    "_mv66_into",
    "prefix_poses", "fk_ee", "spatial_cols", "body_jacobian_of",
    "ee_jacobian", "ee_jacobian_dot", "_mass_into", "mass_matrix",
    "gravity_vector", "coriolis_matrix", "joint_dynamics_arrays",
    "min_singular_value", "operational_arrays", "gcev", "xi_de", "psi1",
    "psi2", "potential1", "potential2", "elastic1", "elastic2",
    "velocity_error", "gic_wrench", "desired_state", "closed_loop_rhs",
    "closed_loop_run", "torque_rhs", "rk4_torque_step",
    "simulate_constant_torque",
]

for _name in _HOT:
    globals()[_name] = jit(globals()[_name])
