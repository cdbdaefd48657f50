"""Aggregated invariant suites, one per acceptance area.

Every suite returns a JSON-serializable dict with a ``passed`` flag and the
measured statistics; ``run_selftest`` chains them under one seed.  All
randomness flows from the seed, nothing records wall-clock time, so reports
are byte-identical across runs of the same build.
"""

from __future__ import annotations

import numpy as np

from . import gic, gimdp, liegroup as lg, models, plant, steerable as st
from . import _kernels as _k
from .harmonics import default_cg_table, sph_harm_vector, wigner_d_stack


def lie_suite(seed: int, trials: int = 1000) -> dict:
    """exp/log roundtrips, Adjoint composition, Jacobi identity, and wrench
    power-pairing invariance over random elements."""
    rng = np.random.default_rng(seed)
    roundtrip = adchain = jacobi = pairing = 0.0
    for _ in range(trials):
        g1 = lg.Pose.random(rng)
        g2 = lg.Pose.random(rng)
        xi = lg.log_se3(g1)
        roundtrip = max(roundtrip,
                        np.abs(lg.exp_se3(xi).matrix() - g1.matrix()).max())
        lhs = lg.adjoint_big(g1 @ g2).m
        rhs = lg.adjoint_big(g1).m @ lg.adjoint_big(g2).m
        adchain = max(adchain, np.abs(lhs - rhs).max())
        x, y, z = (lg.random_twist(rng) for _ in range(3))
        total = (lg.lie_bracket(x, lg.lie_bracket(y, z)).array()
                 + lg.lie_bracket(y, lg.lie_bracket(z, x)).array()
                 + lg.lie_bracket(z, lg.lie_bracket(x, y)).array())
        jacobi = max(jacobi, np.abs(total).max())
        f_b = lg.Wrench.from_array(rng.standard_normal(6))
        v_ac = lg.random_twist(rng)
        v_ab = lg.adjoint_big(g2).apply(v_ac)
        f_c = lg.transform_wrench(f_b, g2)
        pairing = max(pairing, abs(lg.power_pairing(v_ac, f_c)
                                   - lg.power_pairing(v_ab, f_b)))
    passed = (roundtrip < 1e-9 and adchain < 1e-12
              and jacobi < 1e-10 and pairing < 1e-10)
    return {"name": "liegroup", "passed": bool(passed), "trials": trials,
            "roundtrip": roundtrip, "ad_composition": adchain,
            "jacobi": jacobi, "power_pairing": pairing}


def representation_suite(seed: int, rotations: int = 50, table=None) -> dict:
    """Spherical-harmonic steering and Wigner-D homomorphism for l <= 4, and
    the Clebsch-Gordan intertwining residual for l1, l2 <= 3 on fresh
    rotations (table construction included when a fresh table is passed)."""
    rng = np.random.default_rng(seed)
    steering = homomorphism = 0.0
    rots = [lg.Rotation.random(rng) for _ in range(rotations)]
    stacks = [wigner_d_stack(6, r) for r in rots]
    for r, stack in zip(rots, stacks):
        n = rng.standard_normal(3)
        n /= np.linalg.norm(n)
        r2 = lg.Rotation.random(rng)
        stack2 = wigner_d_stack(4, r2)
        stack12 = wigner_d_stack(4, r @ r2)
        for l in range(5):
            lhs = sph_harm_vector(l, r.m @ n)
            rhs = stack[l] @ sph_harm_vector(l, n)
            steering = max(steering, np.abs(lhs - rhs).max())
            homomorphism = max(homomorphism,
                               np.abs(stack12[l] - stack[l] @ stack2[l]).max())
    table = table or default_cg_table()
    intertwine = 0.0
    for l1 in range(4):
        for l2 in range(4):
            for l in range(abs(l1 - l2), l1 + l2 + 1):
                q = table.block(l1, l2, l).reshape(2 * l + 1, -1)
                for stack in stacks:
                    res = stack[l] @ q - q @ np.kron(stack[l1], stack[l2])
                    intertwine = max(intertwine, np.abs(res).max())
    passed = steering < 1e-9 and homomorphism < 1e-9 and intertwine < 1e-8
    return {"name": "representation", "passed": bool(passed),
            "rotations": rotations, "sh_steering": steering,
            "wigner_homomorphism": homomorphism,
            "cg_intertwining": intertwine}


def tfn_suite(seed: int, trials: int = 200, n_points: int = 32) -> dict:
    """Full-layer equivariance of the steerable convolution, layouts up to
    l = 2, plus exact translation invariance."""
    rng = np.random.default_rng(seed)
    layout = st.IrrepLayout((0, 1, 2))
    kernel = st.TfnKernel.random(layout, layout, rng)
    equiv = translation = 0.0
    for _ in range(trials):
        cloud = st.FeaturedPointCloud.random(layout, n_points, rng)
        query = rng.standard_normal(3)
        g = lg.Pose.random(rng)
        base = st.tfn_convolve(kernel, cloud, query).data
        moved = st.tfn_convolve(kernel, cloud.transform(g), g.apply(query)).data
        expect = layout.wigner(g.r) @ base
        equiv = max(equiv, np.abs(moved - expect).max() / (1.0 + np.abs(expect).max()))
        p = rng.standard_normal(3)
        shifted = st.FeaturedPointCloud(cloud.points + p, layout, cloud.features)
        tr = st.tfn_convolve(kernel, shifted, query + p).data
        translation = max(translation,
                          np.abs(tr - base).max() / (1.0 + np.abs(base).max()))
    passed = equiv < 1e-8 and translation < 1e-12
    return {"name": "tfn_equivariance", "passed": bool(passed),
            "trials": trials, "n_points": n_points,
            "equivariance": equiv, "translation": translation}


def escn_suite(seed: int, trials: int = 500) -> dict:
    """Aligned-path/direct-path agreement for layouts up to l = 3, and the
    work-model scaling trend for degree caps 2, 3, 4."""
    rng = np.random.default_rng(seed)
    layout = st.IrrepLayout((0, 1, 2, 3))
    kernel = st.TfnKernel.random(layout, layout, rng)
    deviation = 0.0
    for _ in range(trials):
        x = rng.standard_normal(3)
        f = st.SteerableVector.random(layout, rng)
        direct = st.tfn_kernel_eval(kernel, x) @ f.data
        fast = st.escn_kernel_apply(kernel, x, f).data
        deviation = max(deviation, np.abs(direct - fast).max())
    ratios = []
    for lcap in (2, 3, 4):
        lay = st.IrrepLayout(tuple(range(lcap + 1)))
        ratios.append(st.tensor_product_work(lay, lay) / st.escn_work(lay, lay))
    trend = ratios[0] < ratios[1] < ratios[2]
    passed = deviation < 1e-8 and trend
    return {"name": "escn_equivalence", "passed": bool(passed),
            "trials": trials, "max_deviation": deviation,
            "work_ratios": ratios, "ratio_trend_increasing": bool(trend)}


def gic_suite(seed: int, runs: int = 100, invariance_trials: int = 100) -> dict:
    """Left-invariance sweeps, finite-difference gradient order, the
    dt = 1e-4 dissipation-residual regulation run (variant 1, 2 s), and
    convergence from random initial offsets for both variants."""
    rng = np.random.default_rng(seed)
    gains = gic.GicGains.isotropic()
    invariance = 0.0
    for _ in range(invariance_trials):
        g, g_d, g_l = (lg.Pose.random(rng) for _ in range(3))
        v, vd = (lg.Twist.from_array(0.5 * rng.standard_normal(6)) for _ in range(2))
        pairs = (
            (gic.psi1(g, g_d), gic.psi1(g_l @ g, g_l @ g_d)),
            (gic.psi2(g, g_d), gic.psi2(g_l @ g, g_l @ g_d)),
        )
        for a, b in pairs:
            invariance = max(invariance, abs(a - b))
        for fn in (gic.gcev, gic.xi_de):
            invariance = max(invariance, np.abs(fn(g, g_d) - fn(g_l @ g, g_l @ g_d)).max())
        for fn in (gic.elastic_force_1, gic.elastic_force_2):
            invariance = max(invariance,
                             np.abs(fn(g, g_d, gains) - fn(g_l @ g, g_l @ g_d, gains)).max())
        s = gic.TaskState(g, g_d, v, vd, np.zeros(6))
        s_l = gic.TaskState(g_l @ g, g_l @ g_d, v, vd, np.zeros(6))
        invariance = max(invariance,
                         np.abs(gic.velocity_error(s) - gic.velocity_error(s_l)).max())

    # gradient order: central-difference error drops ~100x per 10x step cut
    order_ok = True
    worst_ratio = np.inf
    for _ in range(10):
        g, g_d = lg.Pose.random(rng), lg.Pose.random(rng)
        eta = lg.random_twist(rng)
        for val, grad in ((gic.psi1, gic.gcev),
                          (lambda a, b: gic.potential_p1(a, b, gains),
                           lambda a, b: gic.elastic_force_1(a, b, gains))):
            e = grad(g, g_d) @ eta.array()
            errs = []
            for eps in (1e-3, 1e-4):
                fd = (val(g @ lg.exp_se3(eta, eps), g_d)
                      - val(g @ lg.exp_se3(eta, -eps), g_d)) / (2 * eps)
                errs.append(abs(fd - e))
            ratio = errs[0] / max(errs[1], 1e-16)
            worst_ratio = min(worst_ratio, ratio)
            if errs[1] > errs[0] / 30.0 + 1e-12:
                order_ok = False

    arm = models.elbow_6dof()
    sc = plant.load_scenario("builtin:regulation", arm)
    sc.dt = 1e-4
    sc.horizon = 2.0
    trace = plant.run_closed_loop(arm, sc)
    dissipation = float(np.abs(trace.residual[1:]).max())

    q_ref = models.ELBOW_NOMINAL_Q
    worst_psi = {1: 0.0, 2: 0.0}
    max_rot_err = 0.0
    g_ref = lg.forward_kinematics(arm, q_ref)
    for _ in range(runs):
        while True:
            dq = np.concatenate((rng.uniform(-0.35, 0.35, 3),
                                 rng.uniform(-0.6, 0.6, 3)))
            g0 = lg.forward_kinematics(arm, q_ref + dq)
            rot_err = (g_ref.inverse() @ g0).r.angle()
            if rot_err < np.pi - 0.2:
                break
        max_rot_err = max(max_rot_err, rot_err)
        for variant in (1, 2):
            sc = plant.regulation_scenario(arm, q_ref, q_ref + dq,
                                           variant=variant, horizon=6.0, dt=2e-3)
            tr = plant.run_closed_loop(arm, sc)
            worst_psi[variant] = max(worst_psi[variant], float(tr.psi[-1]))
    passed = (invariance < 1e-10 and order_ok and dissipation < 1e-5
              and worst_psi[1] < 1e-6 and worst_psi[2] < 1e-6)
    return {"name": "gic", "passed": bool(passed),
            "invariance_trials": invariance_trials,
            "left_invariance": invariance,
            "gradient_order_ok": bool(order_ok),
            "gradient_error_ratio_min": float(worst_ratio),
            "dissipation_residual": dissipation,
            "convergence_runs": runs,
            "max_initial_rotation_error": float(max_rot_err),
            "worst_terminal_psi_v1": worst_psi[1],
            "worst_terminal_psi_v2": worst_psi[2]}


def plant_suite(seed: int) -> dict:
    """Passivity defect, unforced gravity-free energy conservation over one
    second, and the RK4 step-halving order ratio."""
    rng = np.random.default_rng(seed)
    arm = models.elbow_6dof()
    passivity = 0.0
    eps = 1e-6
    for _ in range(10):
        q = rng.uniform(-1.2, 1.2, 6)
        qd = rng.standard_normal(6)
        dyn = plant.joint_dynamics(arm, q, qd)
        mp = _k.mass_matrix(arm.joint_twists, q + eps * qd, arm.coms,
                            arm.masses, arm.inertias)
        mm = _k.mass_matrix(arm.joint_twists, q - eps * qd, arm.coms,
                            arm.masses, arm.inertias)
        defect = (mp - mm) / (2 * eps) - 2 * dyn.C
        passivity = max(passivity, np.abs(defect + defect.T).max())

    q0 = rng.uniform(-0.8, 0.8, 6)
    qd0 = 0.4 * rng.standard_normal(6)
    m0 = plant.joint_dynamics(arm, q0, qd0, gravity=(0, 0, 0)).M
    e0 = 0.5 * qd0 @ m0 @ qd0
    qs, qds = plant.simulate_torque(arm, plant.JointState(q0, qd0),
                                    np.zeros(6), 1e-3, 1000, gravity=(0, 0, 0))
    m1 = plant.joint_dynamics(arm, qs[-1], qds[-1], gravity=(0, 0, 0)).M
    drift = abs(0.5 * qds[-1] @ m1 @ qds[-1] - e0)

    pend = models.pendulum_1dof()
    start = plant.JointState(np.array([1.1]), np.array([0.0]))

    def endpoint(dt, nsteps):
        qs_, qds_ = plant.simulate_torque(pend, start, np.zeros(1), dt, nsteps)
        return np.array([qs_[-1, 0], qds_[-1, 0]])

    ref = endpoint(1e-4, 10000)
    ratio = (np.linalg.norm(endpoint(1e-2, 100) - ref)
             / np.linalg.norm(endpoint(5e-3, 200) - ref))
    passed = passivity < 1e-8 and drift < 1e-6 and 12.0 <= ratio <= 20.0
    return {"name": "plant", "passed": bool(passed),
            "passivity_defect": passivity, "energy_drift": float(drift),
            "rk4_halving_ratio": float(ratio)}


def mdp_suite(gamma: float = 0.95, tol: float = 1e-10) -> dict:
    rep = gimdp.mdp_demo_report(gamma=gamma, tol=tol)
    passed = (rep["invariance"]["reward_invariant"]
              and rep["invariance"]["transition_invariant"]
              and rep["symmetry"]["q_invariant"]
              and rep["symmetry"]["argmax_sets_equivariant"])
    rep_out = {"name": "gimdp", "passed": bool(passed)}
    rep_out.update(rep)
    return rep_out


def run_selftest(seed: int, lie_trials: int = 1000, tfn_trials: int = 200,
                 escn_trials: int = 500, gic_runs: int = 100) -> dict:
    """All suites under one seed; the per-suite seeds are fixed offsets so
    shrinking one suite's trial count does not reshuffle the others."""
    suites = [
        lie_suite(seed + 1, lie_trials),
        representation_suite(seed + 2),
        tfn_suite(seed + 3, tfn_trials),
        escn_suite(seed + 4, escn_trials),
        gic_suite(seed + 5, gic_runs),
        mdp_suite(),
        plant_suite(seed + 6),
    ]
    return {
        "seed": seed,
        "passed": all(s["passed"] for s in suites),
        "suites": suites,
    }
