import math

import numpy as np
import pytest

from se3kit import steerable as st
from se3kit.errors import DimensionMismatch, QueryOnPoint, ZeroDisplacement
from se3kit.liegroup import Pose, Rotation


@pytest.fixture
def layout2():
    return st.IrrepLayout((0, 1, 2))


@pytest.fixture
def kernel2(layout2, rng):
    return st.TfnKernel.random(layout2, layout2, rng)


class TestLayoutsAndVectors:
    def test_dimension(self):
        assert st.IrrepLayout((0, 1, 1, 2)).dim == 1 + 3 + 3 + 5

    def test_rotate_is_block_diag_orthogonal(self, layout2, rng):
        f = st.SteerableVector.random(layout2, rng)
        r = Rotation.random(rng)
        rot = f.rotate(r)
        assert np.isclose(np.linalg.norm(rot.data), np.linalg.norm(f.data))
        for n in range(3):
            assert np.isclose(np.linalg.norm(rot.block(n)), np.linalg.norm(f.block(n)))

    def test_cloud_action_composes(self, layout2, rng):
        cloud = st.FeaturedPointCloud.random(layout2, 5, rng)
        g1, g2 = Pose.random(rng), Pose.random(rng)
        a = cloud.transform(g2).transform(g1)
        b = cloud.transform(g1 @ g2)
        assert np.allclose(a.points, b.points, atol=1e-12)
        assert np.allclose(a.features, b.features, atol=1e-12)


class TestKernel:
    def test_scalar_block_is_radial_times_constant(self, rng):
        layout0 = st.IrrepLayout((0,))
        k = st.TfnKernel.random(layout0, layout0, rng)
        x = rng.standard_normal(3)
        r = np.linalg.norm(x)
        c0 = 1.0 / (2.0 * math.sqrt(math.pi))
        expect = k.radial(0, 0, 0, r) * c0  # CG(0,0,0) = +1
        assert np.isclose(st.tfn_kernel_eval(k, x)[0, 0], expect, atol=1e-12)

    def test_intertwining(self, kernel2, rng):
        for _ in range(20):
            x = rng.standard_normal(3)
            r = Rotation.random(rng)
            w_rot = st.tfn_kernel_eval(kernel2, r.m @ x)
            d_out = kernel2.out_layout.wigner(r)
            d_in = kernel2.in_layout.wigner(r)
            assert np.abs(w_rot - d_out @ st.tfn_kernel_eval(kernel2, x) @ d_in.T).max() < 1e-9

    def test_selection_rule_blocks_zero(self, rng):
        # 0 -> 2 block admits only J = 2; kill its radial weights and the
        # block must vanish identically
        in_l, out_l = st.IrrepLayout((0,)), st.IrrepLayout((2,))
        prof = st.RadialProfile(out_l, in_l, {(0, 0, 2): np.zeros(8)})
        k = st.TfnKernel(in_l, out_l, prof)
        assert np.array_equal(st.tfn_kernel_eval(k, rng.standard_normal(3)),
                              np.zeros((5, 1)))

    def test_zero_displacement_rejected(self, kernel2):
        with pytest.raises(ZeroDisplacement):
            st.tfn_kernel_eval(kernel2, np.zeros(3))

    def test_cutoff_hard_zero(self, layout2, rng):
        k = st.TfnKernel.random(layout2, layout2, rng, cutoff=1.0)
        x = np.array([3.0, 0.0, 0.0])
        assert np.array_equal(st.tfn_kernel_eval(k, x), np.zeros((k.out_layout.dim,) * 2))
        f = st.SteerableVector.random(layout2, rng)
        assert np.array_equal(st.escn_kernel_apply(k, x, f).data, np.zeros(k.out_layout.dim))


class TestConvolve:
    def test_empty_cloud(self, kernel2, layout2):
        cloud = st.FeaturedPointCloud(np.zeros((0, 3)), layout2, np.zeros((0, layout2.dim)))
        out = st.tfn_convolve(kernel2, cloud, (1.0, 0, 0))
        assert np.array_equal(out.data, np.zeros(layout2.dim))

    def test_single_scalar_point_closed_form(self, rng):
        layout0 = st.IrrepLayout((0,))
        k = st.TfnKernel.random(layout0, layout0, rng)
        x0 = rng.standard_normal(3)
        fval = 1.7
        cloud = st.FeaturedPointCloud(x0[None], layout0, np.array([[fval]]))
        q = rng.standard_normal(3)
        out = st.tfn_convolve(k, cloud, q)
        c0 = 1.0 / (2.0 * math.sqrt(math.pi))
        expect = k.radial(0, 0, 0, np.linalg.norm(q - x0)) * c0 * fval
        assert np.isclose(out.data[0], expect, atol=1e-12)

    def test_query_on_point_rejected(self, kernel2, layout2, rng):
        cloud = st.FeaturedPointCloud.random(layout2, 3, rng)
        with pytest.raises(QueryOnPoint):
            st.tfn_convolve(kernel2, cloud, cloud.points[1])

    def test_equivariance(self, kernel2, rng):
        # f_out(g q | g X) == D(R) f_out(q | X), relative tolerance 1e-8
        for _ in range(25):
            cloud = st.FeaturedPointCloud.random(kernel2.in_layout, 8, rng)
            q = rng.standard_normal(3)
            g = Pose.random(rng)
            base = st.tfn_convolve(kernel2, cloud, q).data
            moved = st.tfn_convolve(kernel2, cloud.transform(g), g.apply(q)).data
            expect = kernel2.out_layout.wigner(g.r) @ base
            assert np.abs(moved - expect).max() <= 1e-8 * (1.0 + np.abs(expect).max())

    def test_translation_invariance(self, kernel2, rng):
        cloud = st.FeaturedPointCloud.random(kernel2.in_layout, 6, rng)
        q = rng.standard_normal(3)
        p = np.array([0.5, -1.0, 2.0])
        base = st.tfn_convolve(kernel2, cloud, q).data
        shifted_cloud = st.FeaturedPointCloud(cloud.points + p, cloud.layout, cloud.features)
        moved = st.tfn_convolve(kernel2, shifted_cloud, q + p).data
        assert np.abs(moved - base).max() < 1e-12 * (1.0 + np.abs(base).max())


class TestSelfInteraction:
    def test_identity_weights(self, layout2, rng):
        f = st.SteerableVector.random(layout2, rng)
        out = st.self_interaction(st.identity_self_interaction(layout2), f)
        assert np.array_equal(out.data, f.data)

    def test_zero_weights(self, layout2, rng):
        f = st.SteerableVector.random(layout2, rng)
        out = st.self_interaction({}, f)
        assert np.array_equal(out.data, np.zeros(layout2.dim))

    def test_commutes_with_rotation(self, layout2, rng):
        weights = {(n, n): float(rng.standard_normal()) for n in range(3)}
        for _ in range(20):
            f = st.SteerableVector.random(layout2, rng)
            r = Rotation.random(rng)
            lhs = st.self_interaction(weights, f.rotate(r)).data
            rhs = st.SteerableVector(layout2, st.self_interaction(weights, f).data).rotate(r).data
            assert np.abs(lhs - rhs).max() < 1e-10

    def test_degree_mismatch_rejected(self, rng):
        f = st.SteerableVector.random(st.IrrepLayout((0, 1)), rng)
        with pytest.raises(DimensionMismatch):
            st.self_interaction({(0, 1): 1.0}, f)


class TestAttention:
    def test_single_point_is_self_interaction_only(self, kernel2, layout2, rng):
        cloud = st.FeaturedPointCloud.random(layout2, 1, rng)
        out = st.invariant_attention(cloud, kernel2)
        f = st.SteerableVector(layout2, cloud.features[0])
        si = st.self_interaction({(n, n): 1.0 for n in range(3)}, f, kernel2.out_layout)
        assert np.allclose(out.features[0], si.data)

    def test_identical_features_give_uniform_weights(self, layout2, rng):
        f = rng.standard_normal(layout2.dim)
        cloud = st.FeaturedPointCloud(rng.standard_normal((5, 3)), layout2,
                                      np.tile(f, (5, 1)))
        alpha = st.attention_weights(cloud, 2)
        assert np.allclose(alpha, 0.25)

    def test_weights_invariant_under_group_action(self, layout2, rng):
        cloud = st.FeaturedPointCloud.random(layout2, 6, rng)
        g = Pose.random(rng)
        a0 = st.attention_weights(cloud, 1)
        a1 = st.attention_weights(cloud.transform(g), 1)
        assert np.abs(a0 - a1).max() < 1e-9

    def test_layer_equivariance(self, kernel2, rng):
        for _ in range(10):
            cloud = st.FeaturedPointCloud.random(kernel2.in_layout, 5, rng)
            g = Pose.random(rng)
            base = st.invariant_attention(cloud, kernel2).transform(g)
            moved = st.invariant_attention(cloud.transform(g), kernel2)
            assert (np.abs(moved.features - base.features).max()
                    <= 1e-8 * (1.0 + np.abs(base.features).max()))


class TestEscn:
    def test_aligned_direction_uses_identity_rotation(self, kernel2, rng):
        f = st.SteerableVector.random(kernel2.in_layout, rng)
        x = np.array([0.0, 1.7, 0.0])
        assert np.allclose(st.aligning_rotation(x).m, np.eye(3), atol=1e-14)
        direct = st.tfn_kernel_eval(kernel2, x) @ f.data
        fast = st.escn_kernel_apply(kernel2, x, f).data
        assert np.abs(direct - fast).max() < 1e-12

    def test_antiparallel_branch(self, kernel2, rng):
        x = np.array([0.0, -2.0, 0.0])
        r = st.aligning_rotation(x)
        assert np.allclose(r.m @ (x / 2.0), (0, 1, 0), atol=1e-12)
        f = st.SteerableVector.random(kernel2.in_layout, rng)
        direct = st.tfn_kernel_eval(kernel2, x) @ f.data
        fast = st.escn_kernel_apply(kernel2, x, f).data
        assert np.abs(direct - fast).max() < 1e-12

    def test_scalar_case_reduces_to_multiply(self, rng):
        layout0 = st.IrrepLayout((0,))
        k = st.TfnKernel.random(layout0, layout0, rng)
        x = rng.standard_normal(3)
        f = st.SteerableVector(layout0, np.array([2.2]))
        direct = st.tfn_kernel_eval(k, x) @ f.data
        fast = st.escn_kernel_apply(k, x, f).data
        assert np.allclose(direct, fast, atol=1e-14)

    def test_aligning_rotation_properties(self, rng):
        for _ in range(50):
            x = rng.standard_normal(3)
            r = st.aligning_rotation(x).m
            assert np.abs(r @ (x / np.linalg.norm(x)) - np.array([0, 1, 0])).max() < 1e-12
            assert np.abs(r.T @ r - np.eye(3)).max() < 1e-12
            assert np.isclose(np.linalg.det(r), 1.0)

    def test_equivalence_sweep(self, rng):
        layout = st.IrrepLayout((0, 1, 2, 3))
        k = st.TfnKernel.random(layout, layout, rng)
        worst = 0.0
        for _ in range(100):
            x = rng.standard_normal(3)
            f = st.SteerableVector.random(layout, rng)
            direct = st.tfn_kernel_eval(k, x) @ f.data
            fast = st.escn_kernel_apply(k, x, f).data
            worst = max(worst, np.abs(direct - fast).max())
        assert worst < 1e-8

    def test_mixed_degree_caps_zero_extension(self, rng):
        # output degree above input degree: orders beyond the input cap stay 0
        in_l, out_l = st.IrrepLayout((1,)), st.IrrepLayout((3,))
        k = st.TfnKernel.random(in_l, out_l, rng)
        for _ in range(10):
            x = rng.standard_normal(3)
            f = st.SteerableVector.random(in_l, rng)
            direct = st.tfn_kernel_eval(k, x) @ f.data
            fast = st.escn_kernel_apply(k, x, f).data
            assert np.abs(direct - fast).max() < 1e-10

    def test_work_model_trend(self):
        ratios = []
        for lcap in (2, 3, 4):
            layout = st.IrrepLayout(tuple(range(lcap + 1)))
            ratios.append(st.tensor_product_work(layout, layout)
                          / st.escn_work(layout, layout))
        assert ratios[0] < ratios[1] < ratios[2]


class TestReport:
    def test_identity_layer_zero(self):
        rep = st.equivariance_report("identity", 2, 5, 1)
        assert rep["max_residual"] == 0.0

    def test_layers_below_tolerance(self):
        assert st.equivariance_report("tfn", 2, 5, 3, n_points=6)["max_residual"] < 1e-8
        assert st.equivariance_report("escn", 2, 10, 3)["max_residual"] < 1e-8
        assert st.equivariance_report("self", 2, 10, 3)["max_residual"] < 1e-10

    def test_mutation_flagged(self):
        rep = st.equivariance_report("escn", 2, 10, 3, perturb_cg=True)
        assert rep["max_residual"] > 1e-3

    def test_deterministic(self):
        a = st.equivariance_report("tfn", 1, 4, 9, n_points=5)
        b = st.equivariance_report("tfn", 1, 4, 9, n_points=5)
        assert a == b

    def test_cloud_json_schema(self):
        doc = {"points": [[0, 0, 0], [1, 0, 0]], "layout": [0, 1],
               "features": [[1, 0, 0, 0], [0, 1, 2, 3]]}
        cloud = st.FeaturedPointCloud.from_json_dict(doc)
        assert cloud.size == 2
        assert cloud.layout.degrees == (0, 1)
