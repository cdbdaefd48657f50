import numpy as np
import pytest

from se3kit import gcnn, liegroup as lg
from se3kit.errors import ShapeMismatch
from se3kit.liegroup import Pose


def random_field(rng, n=6):
    vals = rng.integers(0, 9, (n, n, n)).astype(float)
    half = (n - 1) / 2.0
    return gcnn.GridField(vals, origin=(-half, -half, -half), spacing=1.0)


class TestLeftRegular:
    def test_identity(self, rng):
        field = random_field(rng)
        out = gcnn.left_regular_apply(Pose.identity(), field)
        assert np.array_equal(out.values, field.values)

    def test_translation_shifts_samples(self, rng):
        field = random_field(rng)
        g = Pose(lg.Rotation.identity(), (1.0, 0.0, 0.0))
        out = gcnn.left_regular_apply(g, field).values
        assert np.array_equal(out[1:], field.values[:-1])
        assert np.all(out[0] == 0.0)

    def test_composition_exact_on_lattice_rotations(self, rng):
        field = random_field(rng)
        for _ in range(10):
            axes = [(np.pi / 2, 0, 0), (0, np.pi / 2, 0), (0, 0, np.pi / 2),
                    (np.pi, 0, 0), (0, 0, -np.pi / 2)]
            w1 = axes[rng.integers(0, len(axes))]
            w2 = axes[rng.integers(0, len(axes))]
            g1 = Pose(lg.exp_so3(w1), np.zeros(3))
            g2 = Pose(lg.exp_so3(w2), np.zeros(3))
            twice = gcnn.left_regular_apply(g1, gcnn.left_regular_apply(g2, field))
            once = gcnn.left_regular_apply(g1 @ g2, field)
            assert np.array_equal(twice.values, once.values)

    def test_accepts_bare_rotation(self, rng):
        field = random_field(rng)
        r = lg.exp_so3((0, 0, np.pi / 2))
        a = gcnn.left_regular_apply(r, field).values
        b = gcnn.left_regular_apply(Pose(r, np.zeros(3)), field).values
        assert np.array_equal(a, b)


class TestLifting:
    def test_constant_image_interior(self, rng):
        ker = rng.integers(-3, 4, (3, 3)).astype(float)
        lifted = gcnn.lifting_correlation_se2(np.ones((9, 9)), ker, 4)
        inner = lifted[:, 1:-1, 1:-1]
        assert np.allclose(inner, inner[0])

    def test_n_theta_one_is_plain_correlation(self, rng):
        img = rng.integers(0, 9, (7, 7)).astype(float)
        ker = rng.integers(-2, 3, (3, 3)).astype(float)
        lifted = gcnn.lifting_correlation_se2(img, ker, 1)
        assert np.array_equal(lifted[0], gcnn.correlate2d_same(img, ker))

    def test_c4_equivariance_exact(self, rng):
        # rotating the input by 90 deg rolls theta by one and rotates space
        img = rng.integers(0, 9, (9, 9)).astype(float)
        ker = rng.integers(-3, 4, (3, 3)).astype(float)
        base = gcnn.lifting_correlation_se2(img, ker, 4)
        rot = gcnn.lifting_correlation_se2(np.rot90(img), ker, 4)
        for k in range(4):
            assert np.array_equal(rot[k], np.rot90(base[(k - 1) % 4]))


class TestGroupCorrelation:
    def test_constant_input(self, rng):
        ker = rng.integers(-2, 3, (4, 3, 3)).astype(float)
        lifted = np.ones((4, 9, 9))
        out = gcnn.group_correlation_se2(lifted, ker)
        inner = out[:, 1:-1, 1:-1]
        assert np.allclose(inner, inner[0, 1, 1])

    def test_delta_kernel_identity(self, rng):
        lifted = rng.integers(0, 9, (4, 7, 7)).astype(float)
        ker = np.zeros((4, 3, 3))
        ker[0, 1, 1] = 1.0
        assert np.array_equal(gcnn.group_correlation_se2(lifted, ker), lifted)

    def test_c4_equivariance_exact(self, rng):
        img = rng.integers(0, 9, (9, 9)).astype(float)
        ker2 = rng.integers(-3, 4, (3, 3)).astype(float)
        lifted = gcnn.lifting_correlation_se2(img, ker2, 4)
        ker3 = rng.integers(-2, 3, (4, 3, 3)).astype(float)

        def act(stack):
            return np.stack([np.rot90(stack[(k - 1) % 4]) for k in range(4)])

        lhs = gcnn.group_correlation_se2(act(lifted), ker3)
        rhs = act(gcnn.group_correlation_se2(lifted, ker3))
        assert np.array_equal(lhs, rhs)

    def test_shape_guard(self, rng):
        with pytest.raises(ShapeMismatch):
            gcnn.group_correlation_se2(np.ones((4, 5, 5)), np.ones((3, 3, 3)))
