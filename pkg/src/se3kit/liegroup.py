"""SO(3)/SE(3) kinematics: constructors, exp/log, Adjoint machinery,
velocity/wrench transforms, and product-of-exponentials forward kinematics.

Twists are stored (v, w) with the linear part first; wrenches (f, tau).
Frame tags are the strings ``"body"`` and ``"spatial"``.  All containers are
immutable values (arrays are marked read-only), so everything here is safe to
use concurrently.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .errors import (
    AntipodalSingularity,
    DimensionMismatch,
    FrameMismatch,
    InconsistentDerivative,
    NotSkew,
)

BODY = "body"
SPATIAL = "spatial"

# Orthonormality drift handling for rotation constructors: accept below
# _DRIFT_OK, re-project by polar decomposition up to _DRIFT_FIX, reject beyond.
_DRIFT_OK = 1e-10
_DRIFT_FIX = 1e-6

_EPS_ANTIPODAL = _k._EPS_ANTIPODAL


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def hat3(w) -> np.ndarray:
    """Skew cross-product matrix: hat3(w) @ u == cross(w, u)."""
    w = np.asarray(w, dtype=float)
    return _k.hat3(w)


def vee3(s) -> np.ndarray:
    """Inverse of hat3; rejects matrices whose symmetric part exceeds 1e-9."""
    s = np.asarray(s, dtype=float)
    if s.shape != (3, 3) or np.linalg.norm(s + s.T) > 1e-9:
        raise NotSkew("vee3 expects a 3x3 skew-symmetric matrix")
    return _k.vee3(s)


@dataclass(frozen=True)
class Rotation:
    """Element of SO(3) stored as an orthonormal 3x3 matrix."""

    m: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", _freeze(self.m))

    @staticmethod
    def identity() -> "Rotation":
        return Rotation(np.eye(3))

    @staticmethod
    def from_matrix(m) -> "Rotation":
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3):
            raise DimensionMismatch("rotation matrix must be 3x3")
        drift = np.linalg.norm(m.T @ m - np.eye(3))
        if drift > _DRIFT_FIX or np.linalg.det(m) < 0.0:
            raise DimensionMismatch("matrix is not a rotation (drift > 1e-6 or det < 0)")
        if drift > _DRIFT_OK:
            u, _, vt = np.linalg.svd(m)
            m = u @ vt
        return Rotation(m)

    @staticmethod
    def random(rng: np.random.Generator) -> "Rotation":
        """Haar-uniform sample via Gram-Schmidt of a Gaussian triple."""
        a = rng.standard_normal((3, 3))
        q0 = a[:, 0] / np.linalg.norm(a[:, 0])
        q1 = a[:, 1] - (q0 @ a[:, 1]) * q0
        q1 /= np.linalg.norm(q1)
        q2 = np.cross(q0, q1)
        return Rotation(np.column_stack((q0, q1, q2)))

    def inverse(self) -> "Rotation":
        return Rotation(self.m.T)

    def apply(self, v) -> np.ndarray:
        return self.m @ np.asarray(v, dtype=float)

    def __matmul__(self, other: "Rotation") -> "Rotation":
        return Rotation(self.m @ other.m)

    def angle(self) -> float:
        return float(2.0 * np.arctan2(
            np.linalg.norm(_k.quat_from_rot(self.m)[1:]),
            abs(_k.quat_from_rot(self.m)[0])))


@dataclass(frozen=True)
class Pose:
    """Element of SE(3): rotation plus translation, with a homogeneous view."""

    r: Rotation
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", _freeze(np.asarray(self.p, dtype=float).reshape(3)))

    @staticmethod
    def identity() -> "Pose":
        return Pose(Rotation.identity(), np.zeros(3))

    @staticmethod
    def from_matrix(m) -> "Pose":
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4) or np.linalg.norm(m[3] - np.array([0, 0, 0, 1.0])) > 1e-9:
            raise DimensionMismatch("homogeneous matrix must be 4x4 with last row (0,0,0,1)")
        return Pose(Rotation.from_matrix(m[:3, :3]), m[:3, 3])

    @staticmethod
    def random(rng: np.random.Generator, p_scale: float = 1.0) -> "Pose":
        return Pose(Rotation.random(rng), p_scale * rng.standard_normal(3))

    def matrix(self) -> np.ndarray:
        out = np.eye(4)
        out[:3, :3] = self.r.m
        out[:3, 3] = self.p
        return out

    def inverse(self) -> "Pose":
        rt = self.r.m.T
        return Pose(Rotation(rt), -(rt @ self.p))

    def apply(self, point) -> np.ndarray:
        return self.r.m @ np.asarray(point, dtype=float) + self.p

    def __matmul__(self, other: "Pose") -> "Pose":
        return Pose(self.r @ other.r, self.r.m @ other.p + self.p)


@dataclass(frozen=True)
class Twist:
    """se(3) element in (v, w) coordinates with a frame tag."""

    v: np.ndarray
    w: np.ndarray
    frame: str = BODY

    def __post_init__(self):
        object.__setattr__(self, "v", _freeze(np.asarray(self.v, dtype=float).reshape(3)))
        object.__setattr__(self, "w", _freeze(np.asarray(self.w, dtype=float).reshape(3)))
        if self.frame not in (BODY, SPATIAL):
            raise FrameMismatch("twist frame must be 'body' or 'spatial'")

    @staticmethod
    def from_array(xi, frame: str = BODY) -> "Twist":
        xi = np.asarray(xi, dtype=float).reshape(6)
        return Twist(xi[:3], xi[3:], frame)

    def array(self) -> np.ndarray:
        return np.concatenate((self.v, self.w))

    def hat(self) -> np.ndarray:
        out = np.zeros((4, 4))
        out[:3, :3] = _k.hat3(self.w)
        out[:3, 3] = self.v
        return out


@dataclass(frozen=True)
class Wrench:
    """Generalized force (f, tau) with a frame tag."""

    f: np.ndarray
    tau: np.ndarray
    frame: str = BODY

    def __post_init__(self):
        object.__setattr__(self, "f", _freeze(np.asarray(self.f, dtype=float).reshape(3)))
        object.__setattr__(self, "tau", _freeze(np.asarray(self.tau, dtype=float).reshape(3)))
        if self.frame not in (BODY, SPATIAL):
            raise FrameMismatch("wrench frame must be 'body' or 'spatial'")

    @staticmethod
    def from_array(fw, frame: str = BODY) -> "Wrench":
        fw = np.asarray(fw, dtype=float).reshape(6)
        return Wrench(fw[:3], fw[3:], frame)

    def array(self) -> np.ndarray:
        return np.concatenate((self.f, self.tau))


@dataclass(frozen=True)
class AdjointMatrix:
    """6x6 change-of-frame operator [[R, hat(p)R], [0, R]]."""

    m: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", _freeze(self.m))

    def apply(self, twist: Twist) -> Twist:
        out = self.m @ twist.array()
        return Twist(out[:3], out[3:], twist.frame)

    def inverse(self) -> "AdjointMatrix":
        r = self.m[:3, :3]
        out = np.zeros((6, 6))
        out[:3, :3] = r.T
        out[3:, 3:] = r.T
        out[:3, 3:] = -(r.T @ self.m[:3, 3:] @ r.T)
        return AdjointMatrix(out)


def exp_so3(w) -> Rotation:
    """Rodrigues exponential; series branch below 1e-4 rad."""
    return Rotation(_k.exp_so3(np.asarray(w, dtype=float).reshape(3)))


def log_so3(r: Rotation) -> np.ndarray:
    """Rotation logarithm with |result| in [0, pi]; the axis near pi comes
    from the largest-pivot quaternion branch.  Raises AntipodalSingularity
    within 1e-6 rad of pi."""
    return _k.log_so3(r.m)


def exp_se3(xi: Twist, theta: float = 1.0) -> Pose:
    g = _k.exp_se3(xi.array() * float(theta))
    return Pose(Rotation(g[:3, :3]), g[:3, 3])


def log_se3(g: Pose) -> Twist:
    """SE(3) logarithm (v, w) with exp_se3(result) == g; A^{-1} translation
    factor with a Taylor branch below 1e-4 rad."""
    return Twist.from_array(_k.log_se3(g.matrix()), BODY)


def adjoint_big(g: Pose) -> AdjointMatrix:
    return AdjointMatrix(_k.adjoint(g.matrix()))


def adjoint_small(xi: Twist) -> np.ndarray:
    """ad_xi as a 6x6 operator: ad_x y = [x, y]."""
    return _k.ad6(xi.array())


def lie_bracket(x: Twist, y: Twist) -> Twist:
    if x.frame != y.frame:
        raise FrameMismatch("bracket operands must share a frame")
    return Twist.from_array(_k.ad6(x.array()) @ y.array(), x.frame)


def _check_tangent(g: Pose, gdot: np.ndarray) -> None:
    gdot = np.asarray(gdot, dtype=float)
    if gdot.shape != (4, 4):
        raise InconsistentDerivative("gdot must be 4x4")
    if np.linalg.norm(gdot[3]) > 1e-8:
        raise InconsistentDerivative("gdot bottom row must vanish")
    s = g.r.m.T @ gdot[:3, :3]
    if np.linalg.norm(s + s.T) > 1e-6 * (1.0 + np.linalg.norm(s)):
        raise InconsistentDerivative("gdot rotation block is not R @ skew")


def body_velocity(g: Pose, gdot) -> Twist:
    """V^b with hat(V^b) = g^{-1} gdot."""
    gdot = np.asarray(gdot, dtype=float)
    _check_tangent(g, gdot)
    vb = _k.pose_inv(g.matrix()) @ gdot
    return Twist(vb[:3, 3], _k.vee3(0.5 * (vb[:3, :3] - vb[:3, :3].T)), BODY)


def spatial_velocity(g: Pose, gdot) -> Twist:
    """V^s with hat(V^s) = gdot g^{-1}."""
    gdot = np.asarray(gdot, dtype=float)
    _check_tangent(g, gdot)
    vs = gdot @ _k.pose_inv(g.matrix())
    return Twist(vs[:3, 3], _k.vee3(0.5 * (vs[:3, :3] - vs[:3, :3].T)), SPATIAL)


def power_pairing(v: Twist, f: Wrench) -> float:
    """<V, F> = v.f + w.tau; frames must match."""
    if v.frame != f.frame:
        raise FrameMismatch("power pairing requires matching frames")
    return float(v.v @ f.f + v.w @ f.tau)


def transform_wrench(f: Wrench, g_bc: Pose) -> Wrench:
    """Wrench transport F_c = Ad_{g_bc}^T F_b between body-fixed frames."""
    if f.frame != BODY:
        raise FrameMismatch("transform_wrench moves wrenches between body frames")
    out = _k.adjoint(g_bc.matrix()).T @ f.array()
    return Wrench(out[:3], out[3:], BODY)


REVOLUTE = "revolute"
PRISMATIC = "prismatic"


@dataclass(frozen=True)
class ManipulatorModel:
    """Serial manipulator: spatial joint twists (unit axes), home pose of the
    end effector, and per-link inertial data (COM position at the home
    configuration, spatial orientation; inertia tensor about the COM)."""

    joint_twists: np.ndarray      # (n, 6) spatial-frame unit twists
    home: Pose                    # end-effector pose at q = 0
    masses: np.ndarray            # (n,)
    coms: np.ndarray              # (n, 3) home COM positions
    inertias: np.ndarray          # (n, 3, 3) about COM, home orientation
    joint_types: tuple = field(default=())

    def __post_init__(self):
        xi = np.asarray(self.joint_twists, dtype=float)
        if xi.ndim != 2 or xi.shape[1] != 6:
            raise DimensionMismatch("joint twists must be (n, 6)")
        n = xi.shape[0]
        types = self.joint_types or tuple(
            REVOLUTE if np.linalg.norm(x[3:]) > 0.5 else PRISMATIC for x in xi)
        if len(types) != n:
            raise DimensionMismatch("joint_types length mismatch")
        for x, t in zip(xi, types):
            if t == REVOLUTE:
                if abs(np.linalg.norm(x[3:]) - 1.0) > 1e-9:
                    raise DimensionMismatch("revolute twist needs |w| = 1")
            elif t == PRISMATIC:
                if np.linalg.norm(x[3:]) > 1e-12 or abs(np.linalg.norm(x[:3]) - 1.0) > 1e-9:
                    raise DimensionMismatch("prismatic twist needs w = 0, |v| = 1")
            else:
                raise DimensionMismatch("joint type must be revolute or prismatic")
        object.__setattr__(self, "joint_twists", _freeze(xi))
        object.__setattr__(self, "masses", _freeze(np.asarray(self.masses, dtype=float).reshape(n)))
        object.__setattr__(self, "coms", _freeze(np.asarray(self.coms, dtype=float).reshape(n, 3)))
        object.__setattr__(self, "inertias", _freeze(np.asarray(self.inertias, dtype=float).reshape(n, 3, 3)))
        object.__setattr__(self, "joint_types", types)

    @property
    def dof(self) -> int:
        return self.joint_twists.shape[0]

    @staticmethod
    def revolute_twist(axis, point) -> np.ndarray:
        axis = np.asarray(axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        point = np.asarray(point, dtype=float)
        return np.concatenate((-np.cross(axis, point), axis))

    @staticmethod
    def prismatic_twist(axis) -> np.ndarray:
        axis = np.asarray(axis, dtype=float)
        return np.concatenate((axis / np.linalg.norm(axis), np.zeros(3)))

    @staticmethod
    def from_json(text_or_path) -> "ManipulatorModel":
        """Load the JSON document schema:

        {"joints": [{"type": "revolute", "axis": [..], "point": [..]} |
                    {"type": "prismatic", "axis": [..]}, ...],
         "home": {"r": [[..]x3], "p": [..]},
         "links": [{"mass": .., "com": [..], "inertia": [[..]x3]}, ...]}

        Units: meters, kilograms, radians.
        """
        if isinstance(text_or_path, str) and text_or_path.lstrip().startswith("{"):
            doc = json.loads(text_or_path)
        else:
            with open(text_or_path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        twists = []
        types = []
        for j in doc["joints"]:
            if j["type"] == REVOLUTE:
                twists.append(ManipulatorModel.revolute_twist(j["axis"], j.get("point", (0, 0, 0))))
            else:
                twists.append(ManipulatorModel.prismatic_twist(j["axis"]))
            types.append(j["type"])
        home = Pose(Rotation.from_matrix(doc["home"]["r"]), doc["home"]["p"])
        links = doc["links"]
        if len(links) != len(twists):
            raise DimensionMismatch("need one link entry per joint")
        return ManipulatorModel(
            joint_twists=np.array(twists),
            home=home,
            masses=np.array([l["mass"] for l in links]),
            coms=np.array([l["com"] for l in links]),
            inertias=np.array([l["inertia"] for l in links]),
            joint_types=tuple(types),
        )


def forward_kinematics(model: ManipulatorModel, q) -> Pose:
    """Product of exponentials: g(q) = exp(xi_1 q_1) ... exp(xi_n q_n) g(0)."""
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != model.dof:
        raise DimensionMismatch("joint vector length mismatch")
    g = _k.fk_ee(model.joint_twists, q, model.home.matrix())
    return Pose(Rotation(g[:3, :3]), g[:3, 3])


def body_jacobian(model: ManipulatorModel, q) -> np.ndarray:
    """J_b(q) with V^b = J_b(q) qdot."""
    q = np.asarray(q, dtype=float).reshape(-1)
    if q.shape[0] != model.dof:
        raise DimensionMismatch("joint vector length mismatch")
    return _k.ee_jacobian(model.joint_twists, q, model.home.matrix())


def random_twist(rng: np.random.Generator, scale: float = 1.0, frame: str = BODY) -> Twist:
    return Twist.from_array(scale * rng.standard_normal(6), frame)
