import numpy as np
import pytest

from se3kit import gic, liegroup as lg, models, plant
from se3kit.errors import DimensionMismatch, NearSingularJacobian
from se3kit import _kernels as _k


@pytest.fixture(scope="module")
def arm():
    return models.elbow_6dof()


def kinetic_energy(model, q, qd):
    dyn = plant.joint_dynamics(model, q, qd, gravity=(0, 0, 0))
    return 0.5 * qd @ dyn.M @ qd


class TestJointDynamics:
    def test_coriolis_vanishes_at_rest(self, arm, rng):
        q = rng.uniform(-1, 1, 6)
        dyn = plant.joint_dynamics(arm, q, np.zeros(6))
        assert np.abs(dyn.C).max() == 0.0

    def test_pendulum_closed_form(self, rng):
        m, l = 1.2, 0.8
        pend = models.pendulum_1dof(m, l)
        for q in rng.uniform(-2, 2, 5):
            dyn = plant.joint_dynamics(pend, [q], [0.3])
            assert np.isclose(dyn.M[0, 0], m * l * l, atol=1e-12)
            assert np.isclose(dyn.G[0], m * 9.81 * l * np.sin(q), atol=1e-10)

    def test_mass_matrix_spd(self, arm, rng):
        for _ in range(5):
            q = rng.uniform(-1.2, 1.2, 6)
            dyn = plant.joint_dynamics(arm, q, np.zeros(6))
            assert np.abs(dyn.M - dyn.M.T).max() == 0.0
            assert np.linalg.eigvalsh(dyn.M)[0] > 0.0

    def test_passivity_structural(self, arm, rng):
        # Mdot - 2C plus its transpose vanishes (Christoffel construction)
        eps = 1e-6
        for _ in range(10):
            q = rng.uniform(-1.2, 1.2, 6)
            qd = rng.standard_normal(6)
            dyn = plant.joint_dynamics(arm, q, qd)
            mp = _k.mass_matrix(arm.joint_twists, q + eps * qd, arm.coms,
                                arm.masses, arm.inertias)
            mm = _k.mass_matrix(arm.joint_twists, q - eps * qd, arm.coms,
                                arm.masses, arm.inertias)
            mdot = (mp - mm) / (2 * eps)
            defect = mdot - 2 * dyn.C
            assert np.abs(defect + defect.T).max() < 1e-8

    def test_energy_conservation_one_second(self, arm, rng):
        # unforced, gravity-free: total kinetic energy is conserved by RK4
        q0 = rng.uniform(-0.8, 0.8, 6)
        qd0 = 0.4 * rng.standard_normal(6)
        e0 = kinetic_energy(arm, q0, qd0)
        qs, qds = plant.simulate_torque(arm, plant.JointState(q0, qd0),
                                        np.zeros(6), 1e-3, 1000,
                                        gravity=(0, 0, 0))
        e1 = kinetic_energy(arm, qs[-1], qds[-1])
        assert abs(e1 - e0) < 1e-6


class TestOperationalDynamics:
    def test_definition(self, arm, rng):
        q = models.ELBOW_NOMINAL_Q + 0.05 * rng.standard_normal(6)
        qd = 0.3 * rng.standard_normal(6)
        dyn = plant.joint_dynamics(arm, q, qd)
        op = plant.operational_dynamics(arm, q, qd)
        jb = lg.body_jacobian(arm, q)
        ji = np.linalg.inv(jb)
        assert np.abs(op.Mt - ji.T @ dyn.M @ ji).max() < 1e-10
        assert np.abs(op.Gt - ji.T @ dyn.G).max() < 1e-10

    def test_energy_equivalence(self, arm, rng):
        for _ in range(5):
            q = models.ELBOW_NOMINAL_Q + 0.1 * rng.standard_normal(6)
            qd = rng.standard_normal(6)
            dyn = plant.joint_dynamics(arm, q, qd)
            op = plant.operational_dynamics(arm, q, qd)
            vb = lg.body_jacobian(arm, q) @ qd
            assert abs(0.5 * vb @ op.Mt @ vb - 0.5 * qd @ dyn.M @ qd) < 1e-10

    def test_singular_guard(self, arm):
        # stretched home posture has a degenerate wrist
        with pytest.raises(NearSingularJacobian):
            plant.operational_dynamics(arm, np.zeros(6), np.zeros(6))

    def test_square_subjacobian_for_planar(self, rng):
        arm2 = models.planar_2dof()
        q = np.array([0.4, 0.7])
        qd = np.array([0.3, -0.2])
        op = plant.operational_dynamics(arm2, q, qd, task_dims=(0, 1))
        dyn = plant.joint_dynamics(arm2, q, qd)
        jt = lg.body_jacobian(arm2, q)[[0, 1]]
        v = jt @ qd
        assert abs(0.5 * v @ op.Mt @ v - 0.5 * qd @ dyn.M @ qd) < 1e-10
        with pytest.raises(DimensionMismatch):
            plant.operational_dynamics(arm2, q, qd)

    def test_jacobian_dot_matches_finite_difference(self, arm, rng):
        h = 1e-6
        for _ in range(5):
            q = rng.uniform(-1, 1, 6)
            qd = rng.standard_normal(6)
            jd = _k.ee_jacobian_dot(lg.body_jacobian(arm, q), qd)
            fd = (lg.body_jacobian(arm, q + h * qd)
                  - lg.body_jacobian(arm, q - h * qd)) / (2 * h)
            assert np.abs(jd - fd).max() < 1e-6


class TestRk4:
    def test_zero_dynamics_unchanged(self, arm):
        state = plant.JointState(np.ones(6) * 0.3, np.zeros(6))
        out = plant.step_rk4(arm, state, np.zeros(6), 1e-2, gravity=(0, 0, 0))
        assert np.array_equal(out.q, state.q)
        assert np.array_equal(out.qdot, state.qdot)

    def test_richardson_order_on_pendulum(self):
        pend = models.pendulum_1dof()
        q0, qd0 = np.array([1.1]), np.array([0.0])

        def endpoint(dt, nsteps):
            qs, qds = plant.simulate_torque(pend, plant.JointState(q0, qd0),
                                            np.zeros(1), dt, nsteps)
            return np.array([qs[-1, 0], qds[-1, 0]])

        ref = endpoint(1e-4, 10000)  # dt/100 dense reference over 1 s
        err_h = np.linalg.norm(endpoint(1e-2, 100) - ref)
        err_h2 = np.linalg.norm(endpoint(5e-3, 200) - ref)
        ratio = err_h / err_h2
        assert 12.0 <= ratio <= 20.0

    def test_dt_guard(self, arm):
        with pytest.raises(DimensionMismatch):
            plant.step_rk4(arm, plant.JointState(np.zeros(6), np.zeros(6)),
                           np.zeros(6), 0.0)


class TestClosedLoop:
    def test_at_goal_stays_at_equilibrium(self, arm):
        sc = plant.load_scenario("builtin:at-goal", arm)
        sc.horizon = 0.2
        tr = plant.run_closed_loop(arm, sc)
        assert np.abs(tr.lyapunov).max() < 1e-18
        assert np.abs(tr.residual).max() < 1e-9
        assert np.abs(tr.q - tr.q[0]).max() < 1e-12

    def test_regulation_monotone_and_residual(self, arm):
        sc = plant.load_scenario("builtin:regulation", arm)
        sc.dt = 1e-4
        sc.horizon = 0.25
        tr = plant.run_closed_loop(arm, sc)
        assert np.all(np.diff(tr.lyapunov) <= 1e-10)
        assert np.abs(tr.residual[1:]).max() < 1e-5
        assert tr.psi[-1] < tr.psi[0]

    def test_tracking_circle_bounded_error_and_residual(self, arm):
        sc = plant.load_scenario("builtin:circle", arm)
        sc.dt = 1e-4
        sc.horizon = 0.5
        tr = plant.run_closed_loop(arm, sc)
        assert np.abs(tr.e_v).max() < 1.0
        assert np.abs(tr.residual[1:]).max() < 1e-5

    def test_residual_is_integrator_error_for_variant1(self, arm):
        # measured residual drops by >= 4x when dt halves (c dt^2 bound holds
        # with the same c; the observed order here is RK4's dt^4)
        maxima = []
        for dt in (2e-3, 1e-3, 5e-4):
            sc = plant.load_scenario("builtin:regulation", arm)
            sc.dt = dt
            sc.horizon = 0.1
            tr = plant.run_closed_loop(arm, sc)
            maxima.append(np.abs(tr.residual[1:]).max())
        assert maxima[1] < maxima[0] / 4.0
        assert maxima[2] < maxima[1] / 4.0

    def test_variant2_residual_is_model_error(self, arm):
        # variant 2's energy identity is only approximate: the residual does
        # not shrink with dt (it reflects the se(3) coupling term, not the
        # integrator)
        maxima = []
        for dt in (1e-3, 5e-4):
            sc = plant.load_scenario("builtin:regulation", arm)
            sc.variant = 2
            sc.dt = dt
            sc.horizon = 0.1
            tr = plant.run_closed_loop(arm, sc)
            maxima.append(np.abs(tr.residual[1:]).max())
        assert maxima[1] > maxima[0] / 4.0
        assert maxima[0] > 1e-4

    def test_both_variants_converge(self, arm):
        for variant in (1, 2):
            sc = plant.load_scenario("builtin:regulation", arm)
            sc.variant = variant
            sc.horizon = 4.0
            tr = plant.run_closed_loop(arm, sc)
            assert tr.psi[-1] < 1e-6

    def test_trace_csv_columns(self, arm, tmp_path):
        sc = plant.load_scenario("builtin:at-goal", arm)
        sc.horizon = 0.01
        tr = plant.run_closed_loop(arm, sc)
        path = tmp_path / "trace.csv"
        tr.to_csv(path)
        header = path.read_text().splitlines()[0].split(",")
        assert header[:8] == ["t", "q0", "q1", "q2", "q3", "q4", "q5", "psi"]
        assert header[8:12] == ["kinetic", "potential", "lyapunov",
                                "dissipation_residual"]
        assert header[12:] == ["wrench_fx", "wrench_fy", "wrench_fz",
                               "wrench_tx", "wrench_ty", "wrench_tz"]
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        assert data.shape == (len(tr.t), len(header))

    def test_scenario_json_roundtrip(self, arm, tmp_path):
        doc = """
        {"q0": [0.4, 0.5, 0.9, 0.3, 0.7, 0.4],
         "desired": {"type": "hold", "q_ref": [0.4, 0.5, 0.9, 0.3, 0.7, 0.4]},
         "gains": {"kp": 50, "kr": 50, "kxi": 50, "kd": 15},
         "variant": 2, "horizon": 0.02, "dt": 0.001}
        """
        sc = plant.Scenario.from_json(doc, arm)
        assert sc.variant == 2
        tr = plant.run_closed_loop(arm, sc)
        assert np.abs(tr.lyapunov).max() < 1e-18
