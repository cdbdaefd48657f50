"""Rigid serial-manipulator dynamics, a fixed-step RK4 integrator, and
closed-loop instrumentation for the impedance-control certificates.

The mass matrix comes from link-frame body Jacobians and link inertias; the
Coriolis matrix from Christoffel symbols of M with dM/dq by central
differences (eps = 1e-6), which makes the passivity defect of Mdot - 2C
structurally zero.  The operational-space quantities follow

    Mt = J^{-T} M J^{-1},  Ct = J^{-T} (C - M J^{-1} Jdot) J^{-1},
    Gt = J^{-T} G,

with the Jacobian time-derivative computed analytically from Lie brackets of
Jacobian columns.

``run_closed_loop`` integrates the autonomous closed-loop vector field
(control evaluated inside every RK4 stage) and co-integrates the dissipated
energy D so the recorded residual (V + D rate) isolates integrator error from
model error.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as _k
from .errors import DimensionMismatch, NearSingularJacobian
from .gic import GicGains
from .liegroup import ManipulatorModel, Pose, Rotation, forward_kinematics
from .models import load_model

FD_EPS = 1e-6          # central-difference step for dM/dq
SIGMA_MIN = 1e-3       # Jacobian minimum-singular-value guard
DEFAULT_GRAVITY = (0.0, 0.0, -9.81)


@dataclass(frozen=True)
class JointState:
    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(-1)
        qd = np.asarray(self.qdot, dtype=float).reshape(-1)
        if q.shape != qd.shape or not (np.isfinite(q).all() and np.isfinite(qd).all()):
            raise DimensionMismatch("q and qdot must be finite vectors of equal length")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qd)


@dataclass(frozen=True)
class DynamicsMatrices:
    M: np.ndarray
    C: np.ndarray
    G: np.ndarray


@dataclass(frozen=True)
class OperationalMatrices:
    Mt: np.ndarray
    Ct: np.ndarray
    Gt: np.ndarray


def joint_dynamics(model: ManipulatorModel, q, qdot,
                   gravity=DEFAULT_GRAVITY) -> DynamicsMatrices:
    q = np.asarray(q, dtype=float).reshape(model.dof)
    qdot = np.asarray(qdot, dtype=float).reshape(model.dof)
    m, c, g = _k.joint_dynamics_arrays(model.joint_twists, q, qdot, model.coms,
                                       model.masses, model.inertias,
                                       np.asarray(gravity, dtype=float), FD_EPS)
    return DynamicsMatrices(m, c, g)


def operational_dynamics(model: ManipulatorModel, q, qdot,
                         gravity=DEFAULT_GRAVITY, task_dims=None,
                         sigma_min: float = SIGMA_MIN) -> OperationalMatrices:
    """Operational-space matrices at (q, qdot).

    For n = 6 the full body Jacobian is used; for n < 6 pass ``task_dims``,
    n twist-coordinate indices selecting a square sub-Jacobian.  Raises
    NearSingularJacobian below the minimum-singular-value guard.
    """
    q = np.asarray(q, dtype=float).reshape(model.dof)
    qdot = np.asarray(qdot, dtype=float).reshape(model.dof)
    dyn = joint_dynamics(model, q, qdot, gravity)
    jb = _k.ee_jacobian(model.joint_twists, q, model.home.matrix())
    jbdot = _k.ee_jacobian_dot(jb, qdot)
    if model.dof != 6:
        if task_dims is None or len(task_dims) != model.dof:
            raise DimensionMismatch(
                "n != 6 needs task_dims selecting a square sub-Jacobian")
        rows = np.asarray(task_dims, dtype=int)
        jb = jb[rows]
        jbdot = jbdot[rows]
    mt, ct, gt = _k.operational_arrays(dyn.M, dyn.C, dyn.G, jb, jbdot, sigma_min)
    return OperationalMatrices(mt, ct, gt)


def step_rk4(model: ManipulatorModel, state: JointState, tau, dt: float,
             gravity=DEFAULT_GRAVITY) -> JointState:
    """One RK4 step of M qddot + C qdot + G = tau with tau held constant."""
    if dt <= 0.0:
        raise DimensionMismatch("dt must be positive")
    tau = np.asarray(tau, dtype=float).reshape(model.dof)
    q, qd = _k.rk4_torque_step(state.q, state.qdot, tau, dt, model.joint_twists,
                               model.coms, model.masses, model.inertias,
                               np.asarray(gravity, dtype=float), FD_EPS)
    return JointState(q, qd)


def simulate_torque(model: ManipulatorModel, state: JointState, tau, dt: float,
                    nsteps: int, gravity=DEFAULT_GRAVITY):
    """Fixed-torque rollout; returns (q, qdot) arrays with nsteps+1 rows."""
    tau = np.asarray(tau, dtype=float).reshape(model.dof)
    return _k.simulate_constant_torque(state.q, state.qdot, tau, dt, nsteps,
                                       model.joint_twists, model.coms,
                                       model.masses, model.inertias,
                                       np.asarray(gravity, dtype=float), FD_EPS)


# ---------------------------------------------------------------------------
# closed-loop scenarios
# ---------------------------------------------------------------------------

@dataclass
class Scenario:
    """Closed-loop run description (see ``from_json`` for the file schema)."""

    q0: np.ndarray
    qdot0: np.ndarray
    desired_kind: str                 # "hold" | "circle"
    g_d: Pose
    circle: dict = field(default_factory=dict)
    gains: GicGains = field(default_factory=GicGains.isotropic)
    variant: int = 1
    horizon: float = 2.0
    dt: float = 1e-3
    gravity: tuple = DEFAULT_GRAVITY

    _PLANES = {"xy": ((1, 0, 0), (0, 1, 0)),
               "yz": ((0, 1, 0), (0, 0, 1)),
               "xz": ((1, 0, 0), (0, 0, 1))}

    def desired_params(self) -> tuple[int, np.ndarray]:
        if self.desired_kind == "hold":
            return 0, np.zeros(8)
        e1, e2 = self._PLANES[self.circle.get("plane", "xy")]
        params = np.concatenate(([self.circle["radius"], self.circle["omega"]],
                                 np.asarray(e1, dtype=float),
                                 np.asarray(e2, dtype=float)))
        return 1, params

    @staticmethod
    def from_json(text_or_path, model: ManipulatorModel) -> "Scenario":
        """Schema:

        {"q0": [...], "qdot0": [...],
         "desired": {"type": "hold", "q_ref": [...]}            # or
                    {"type": "pose", "r": [[..]x3], "p": [..]}  # or
                    {"type": "circle", "q_ref": [...], "radius": .., "omega": ..,
                     "plane": "xy"},
         "gains": {"kp": 100, "kr": 100, "kxi": 100, "kd": 20},
         "variant": 1, "horizon": 2.0, "dt": 1e-3,
         "gravity": [0, 0, -9.81]}
        """
        if isinstance(text_or_path, str) and text_or_path.lstrip().startswith("{"):
            doc = json.loads(text_or_path)
        else:
            with open(text_or_path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        des = doc["desired"]
        circle = {}
        if des["type"] in ("hold", "circle"):
            g_d = forward_kinematics(model, np.asarray(des["q_ref"], dtype=float))
            if des["type"] == "circle":
                circle = {"radius": float(des["radius"]),
                          "omega": float(des["omega"]),
                          "plane": des.get("plane", "xy")}
        elif des["type"] == "pose":
            g_d = Pose(Rotation.from_matrix(des["r"]), des["p"])
        else:
            raise DimensionMismatch(f"unknown desired type {des['type']!r}")
        gd = doc.get("gains", {})
        gains = GicGains.isotropic(gd.get("kp", 100.0), gd.get("kr", 100.0),
                                   gd.get("kxi", 100.0), gd.get("kd", 20.0))
        return Scenario(
            q0=np.asarray(doc["q0"], dtype=float),
            qdot0=np.asarray(doc.get("qdot0", np.zeros(model.dof)), dtype=float),
            desired_kind=des["type"] if des["type"] != "pose" else "hold",
            g_d=g_d,
            circle=circle,
            gains=gains,
            variant=int(doc.get("variant", 1)),
            horizon=float(doc.get("horizon", 2.0)),
            dt=float(doc.get("dt", 1e-3)),
            gravity=tuple(doc.get("gravity", DEFAULT_GRAVITY)),
        )


@dataclass(frozen=True)
class SimTrace:
    """Closed-loop time series at every step boundary.

    ``residual`` is the discrete rate of V + D (Lyapunov energy plus the
    co-integrated dissipation), i.e. the violation of the energy identity;
    for variant 1 it is pure integrator error.
    """

    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray
    psi: np.ndarray
    kinetic: np.ndarray
    potential: np.ndarray
    lyapunov: np.ndarray
    dissipated: np.ndarray
    residual: np.ndarray
    wrench: np.ndarray
    e_g: np.ndarray
    e_v: np.ndarray

    def to_csv(self, path) -> None:
        n = self.q.shape[1]
        header = (["t"] + [f"q{i}" for i in range(n)]
                  + ["psi", "kinetic", "potential", "lyapunov",
                     "dissipation_residual"]
                  + [f"wrench_{c}" for c in ("fx", "fy", "fz", "tx", "ty", "tz")])
        table = np.column_stack([self.t, self.q, self.psi, self.kinetic,
                                 self.potential, self.lyapunov, self.residual,
                                 self.wrench])
        np.savetxt(path, table, delimiter=",", header=",".join(header),
                   comments="", fmt="%.17g")


def run_closed_loop(model: ManipulatorModel, scenario: Scenario,
                    variant: int | None = None) -> SimTrace:
    """Integrate the impedance-controlled arm; raises NearSingularJacobian if
    the trajectory hits the manipulability guard."""
    variant = scenario.variant if variant is None else variant
    if variant not in (1, 2):
        raise DimensionMismatch("variant must be 1 or 2")
    if model.dof != 6:
        raise DimensionMismatch("closed-loop control needs the 6-DOF arm")
    nsteps = int(round(scenario.horizon / scenario.dt))
    kind, params = scenario.desired_params()
    out = _k.closed_loop_run(
        model.joint_twists, model.coms, model.masses, model.inertias,
        model.home.matrix(), np.asarray(scenario.gravity, dtype=float),
        np.asarray(scenario.q0, dtype=float),
        np.asarray(scenario.qdot0, dtype=float),
        kind, scenario.g_d.matrix(), params,
        scenario.gains.Kp, scenario.gains.KR, scenario.gains.Kxi,
        scenario.gains.Kd, variant, scenario.dt, nsteps, FD_EPS, SIGMA_MIN)
    return SimTrace(*out)


def regulation_scenario(model: ManipulatorModel, q_ref, q0, variant: int = 1,
                        horizon: float = 2.0, dt: float = 1e-3,
                        gains: GicGains | None = None,
                        gravity=DEFAULT_GRAVITY) -> Scenario:
    """Hold the pose reached at q_ref, starting from rest at q0."""
    return Scenario(q0=np.asarray(q0, dtype=float),
                    qdot0=np.zeros(model.dof),
                    desired_kind="hold",
                    g_d=forward_kinematics(model, np.asarray(q_ref, dtype=float)),
                    gains=gains or GicGains.isotropic(),
                    variant=variant, horizon=horizon, dt=dt,
                    gravity=tuple(gravity))


def load_scenario(source: str, model: ManipulatorModel) -> Scenario:
    """Resolve "builtin:<name>" or a JSON file path."""
    from .models import ELBOW_NOMINAL_Q
    if source.startswith("builtin:"):
        name = source.split(":", 1)[1]
        if name == "at-goal":
            return regulation_scenario(model, ELBOW_NOMINAL_Q, ELBOW_NOMINAL_Q)
        if name == "regulation":
            q0 = ELBOW_NOMINAL_Q + np.array([0.25, -0.2, 0.3, -0.3, 0.25, 0.2])
            return regulation_scenario(model, ELBOW_NOMINAL_Q, q0)
        if name == "circle":
            sc = regulation_scenario(model, ELBOW_NOMINAL_Q, ELBOW_NOMINAL_Q)
            sc.desired_kind = "circle"
            sc.circle = {"radius": 0.05, "omega": 2.0, "plane": "xy"}
            sc.horizon = 2.0
            return sc
        raise KeyError(f"unknown builtin scenario {name!r}")
    return Scenario.from_json(source, model)
