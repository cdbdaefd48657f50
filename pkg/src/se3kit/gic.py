"""Geometric impedance control on SE(3): error functions, error vectors,
energies, and the two impedance control laws, all left-invariant by
construction.

Two parallel formulations are carried throughout:
  * variant 1 measures configuration error through the Frobenius norm of the
    homogeneous-matrix difference (defined everywhere on SE(3));
  * variant 2 measures it through the logarithm coordinates xi_de of the
    configuration error (undefined within 1e-6 rad of a pi rotation error).

The energy-rate identity dV/dt = -e_V^T K_d e_V along the closed loop is
exact for variant 1.  For variant 2 it holds only to second order in the
configuration error whenever translational and rotational errors couple
(there is no bi-invariant positive-definite metric on se(3)); the simulation
instrumentation in ``plant`` makes that residual observable rather than
hiding it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .errors import DimensionMismatch, FrameMismatch
from .liegroup import BODY, Pose, Twist


def _check_spd(m: np.ndarray, dim: int, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (dim, dim):
        raise DimensionMismatch(f"{name} must be {dim}x{dim}")
    if np.abs(m - m.T).max() > 1e-12:
        raise DimensionMismatch(f"{name} must be symmetric")
    if np.linalg.eigvalsh(m)[0] <= 0.0:
        raise DimensionMismatch(f"{name} must be positive definite")
    return m


@dataclass(frozen=True)
class GicGains:
    """Stiffness (Kp translation, KR rotation, Kxi log-coordinate) and
    damping Kd; all symmetric positive definite."""

    Kp: np.ndarray
    KR: np.ndarray
    Kxi: np.ndarray
    Kd: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "Kp", _check_spd(self.Kp, 3, "Kp"))
        object.__setattr__(self, "KR", _check_spd(self.KR, 3, "KR"))
        object.__setattr__(self, "Kxi", _check_spd(self.Kxi, 6, "Kxi"))
        object.__setattr__(self, "Kd", _check_spd(self.Kd, 6, "Kd"))

    @staticmethod
    def isotropic(kp: float = 100.0, kr: float = 100.0, kxi: float = 100.0,
                  kd: float = 20.0) -> "GicGains":
        return GicGains(kp * np.eye(3), kr * np.eye(3), kxi * np.eye(6), kd * np.eye(6))


@dataclass(frozen=True)
class TaskState:
    """Current/desired poses with body-frame twists and the desired body
    acceleration."""

    g: Pose
    g_d: Pose
    Vb: Twist
    Vb_d: Twist
    Vdot_d: np.ndarray

    def __post_init__(self):
        if self.Vb.frame != BODY or self.Vb_d.frame != BODY:
            raise FrameMismatch("task-state twists must be body-frame")
        object.__setattr__(self, "Vdot_d",
                           np.asarray(self.Vdot_d, dtype=float).reshape(6))


def config_error(g: Pose, g_d: Pose) -> Pose:
    """g_de = g_d^{-1} g; identity exactly when g == g_d."""
    return g_d.inverse() @ g


def psi1(g: Pose, g_d: Pose) -> float:
    """Frobenius-form error: tr(I - R_d^T R) + |p - p_d|^2 / 2."""
    return float(_k.psi1(g.matrix(), g_d.matrix()))


def psi2(g: Pose, g_d: Pose) -> float:
    """Log-form error: (|b_de|^2 + |psi_de|^2) / 2."""
    return float(_k.psi2(g.matrix(), g_d.matrix()))


def gcev(g: Pose, g_d: Pose) -> np.ndarray:
    """Geometrically consistent error vector (e_p, e_R):
    e_p = R^T (p - p_d), e_R = vee(R_d^T R - R^T R_d); its pairing with a
    right-perturbation direction is the directional derivative of psi1."""
    return _k.gcev(g.matrix(), g_d.matrix())


def xi_de(g: Pose, g_d: Pose) -> np.ndarray:
    """Log coordinates of the configuration error: exp(hat(xi_de)) = g_de."""
    return _k.xi_de(g.matrix(), g_d.matrix())


def velocity_error(state: TaskState) -> np.ndarray:
    """e_V = V^b - Ad_{g_ed} V_d^b (both legs compared in the current body
    frame)."""
    ev, _ = _k.velocity_error(state.g.matrix(), state.g_d.matrix(),
                              state.Vb.array(), state.Vb_d.array())
    return ev


def desired_velocity_in_body(state: TaskState) -> np.ndarray:
    """V_d^* = Ad_{g_ed} V_d^b."""
    _, vdstar = _k.velocity_error(state.g.matrix(), state.g_d.matrix(),
                                  state.Vb.array(), state.Vb_d.array())
    return vdstar


def potential_p1(g: Pose, g_d: Pose, gains: GicGains) -> float:
    """tr(K_R (I - R_d^T R)) + (p-p_d)^T R_d K_p R_d^T (p-p_d) / 2."""
    return float(_k.potential1(g.matrix(), g_d.matrix(), gains.Kp, gains.KR))


def potential_p2(g: Pose, g_d: Pose, gains: GicGains) -> float:
    """xi_de^T K_xi xi_de / 2."""
    return float(_k.potential2(g.matrix(), g_d.matrix(), gains.Kxi))


def elastic_force_1(g: Pose, g_d: Pose, gains: GicGains) -> np.ndarray:
    """f_{G,1}: gradient-consistent elastic wrench of the weighted Frobenius
    potential, (R^T R_d K_p R_d^T (p-p_d), vee(K_R R_d^T R - R^T R_d K_R))."""
    return _k.elastic1(g.matrix(), g_d.matrix(), gains.Kp, gains.KR)


def elastic_force_2(g: Pose, g_d: Pose, gains: GicGains) -> np.ndarray:
    """f_{G,2} = K_xi xi_de."""
    return _k.elastic2(g.matrix(), g_d.matrix(), gains.Kxi)


def gic_control(state: TaskState, gains: GicGains, plant_matrices, variant: int = 1) -> np.ndarray:
    """Impedance control wrench in the body frame:

        T = Mt d/dt(V_d^*) + Ct V_d^* + Gt - f_{G,variant} - K_d e_V,

    with d/dt(Ad_{g_ed} V_d) = Ad_{g_ed} Vdot_d - ad_{e_V} Ad_{g_ed} V_d.
    ``plant_matrices`` is (Mt, Ct, Gt) from the operational-space dynamics.
    """
    if variant not in (1, 2):
        raise DimensionMismatch("variant must be 1 or 2")
    mt, ct, gt = plant_matrices
    mt = _check_spd(np.asarray(mt, dtype=float), 6, "Mt")
    wrench, _ = _k.gic_wrench(state.g.matrix(), state.g_d.matrix(),
                              state.Vb.array(), state.Vb_d.array(),
                              state.Vdot_d, gains.Kp, gains.KR, gains.Kxi,
                              gains.Kd, mt, np.asarray(ct, dtype=float),
                              np.asarray(gt, dtype=float).reshape(6), variant)
    return wrench


def gcev_right(g: Pose, g_d: Pose) -> np.ndarray:
    """Right-invariant error vector (spatial-frame sibling of gcev):
    e_p = p - R R_d^T p_d, e_R = vee(R R_d^T - R_d R^T)."""
    r, p = g.r.m, g.p
    rd, pd = g_d.r.m, g_d.p
    m = r @ rd.T
    s = m - m.T
    return np.concatenate((p - m @ pd, (s[2, 1], s[0, 2], s[1, 0])))


def spatial_wrench(g: Pose, body_wrench) -> np.ndarray:
    """Transport a body wrench to the spatial frame: F_s = Ad_{g^{-1}}^T F_b
    (power pairing with the spatial twist is preserved)."""
    body_wrench = np.asarray(body_wrench, dtype=float).reshape(6)
    return _k.adjoint(_k.pose_inv(g.matrix())).T @ body_wrench
