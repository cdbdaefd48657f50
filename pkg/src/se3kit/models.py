"""Stock manipulator models.

The 6-DOF elbow arm is the workhorse for operational-space control runs; the
1-DOF pendulum and 2-DOF planar arm exist because they have textbook
closed-form dynamics to test against.
"""

from __future__ import annotations

import numpy as np

from .liegroup import ManipulatorModel, Pose, Rotation


def pendulum_1dof(mass: float = 1.2, length: float = 0.8) -> ManipulatorModel:
    """Point-mass pendulum about the +y axis through the origin, hanging
    along -z at q = 0: M = m l^2, G = m g l sin q."""
    twists = np.array([ManipulatorModel.revolute_twist((0, 1, 0), (0, 0, 0))])
    home = Pose(Rotation.identity(), (0, 0, -length))
    return ManipulatorModel(
        joint_twists=twists,
        home=home,
        masses=np.array([mass]),
        coms=np.array([[0.0, 0.0, -length]]),
        inertias=np.zeros((1, 3, 3)),
    )


def planar_2dof(l1: float = 0.8, l2: float = 0.5, m1: float = 1.0,
                m2: float = 0.7) -> ManipulatorModel:
    """Two point-mass links rotating about +z in the x-y plane."""
    twists = np.array([
        ManipulatorModel.revolute_twist((0, 0, 1), (0, 0, 0)),
        ManipulatorModel.revolute_twist((0, 0, 1), (l1, 0, 0)),
    ])
    home = Pose(Rotation.identity(), (l1 + l2, 0, 0))
    return ManipulatorModel(
        joint_twists=twists,
        home=home,
        masses=np.array([m1, m2]),
        coms=np.array([[l1, 0, 0], [l1 + l2, 0, 0]]),
        inertias=np.zeros((2, 3, 3)),
    )


def elbow_6dof() -> ManipulatorModel:
    """All-revolute elbow arm with a spherical-style wrist: base yaw about z,
    shoulder and elbow pitch about y, wrist roll-pitch-roll about x-y-x.
    Home posture is stretched along +x at shoulder height; cylinder-like
    diagonal link inertias."""
    l1, l2, l3, w = 0.33, 0.33, 0.25, 0.10
    wrist = (l2 + l3, 0.0, l1)
    twists = np.array([
        ManipulatorModel.revolute_twist((0, 0, 1), (0, 0, 0)),
        ManipulatorModel.revolute_twist((0, 1, 0), (0, 0, l1)),
        ManipulatorModel.revolute_twist((0, 1, 0), (l2, 0, l1)),
        ManipulatorModel.revolute_twist((1, 0, 0), wrist),
        ManipulatorModel.revolute_twist((0, 1, 0), wrist),
        ManipulatorModel.revolute_twist((1, 0, 0), wrist),
    ])
    home = Pose(Rotation.identity(), (l2 + l3 + w, 0, l1))
    masses = np.array([3.0, 2.5, 2.0, 1.2, 1.0, 0.8])
    coms = np.array([
        [0.0, 0.0, l1 / 2],
        [l2 / 2, 0.0, l1],
        [l2 + l3 / 2, 0.0, l1],
        [l2 + l3 - 0.04, 0.0, l1],
        [l2 + l3 + 0.03, 0.0, l1],
        [l2 + l3 + w / 2, 0.0, l1],
    ])
    inertias = np.array([
        np.diag([0.060, 0.060, 0.030]),
        np.diag([0.020, 0.050, 0.050]),
        np.diag([0.012, 0.032, 0.032]),
        np.diag([0.080, 0.085, 0.085]),
        np.diag([0.075, 0.070, 0.075]),
        np.diag([0.065, 0.070, 0.070]),
    ])
    return ManipulatorModel(twists, home, masses, coms, inertias)


# well-conditioned nominal posture for operational-space scenarios
ELBOW_NOMINAL_Q = np.array([0.4, 0.5, 0.9, 0.3, 0.7, 0.4])

BUILTIN_MODELS = {
    "elbow6": elbow_6dof,
    "pendulum1": pendulum_1dof,
    "planar2": planar_2dof,
}


def load_model(source: str) -> ManipulatorModel:
    """Resolve "builtin:<name>" or a JSON file path."""
    if source.startswith("builtin:"):
        name = source.split(":", 1)[1]
        if name not in BUILTIN_MODELS:
            raise KeyError(f"unknown builtin model {name!r}")
        return BUILTIN_MODELS[name]()
    return ManipulatorModel.from_json(source)
