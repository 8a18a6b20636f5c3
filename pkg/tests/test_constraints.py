import numpy as np
import pytest

from quadstab.constraints import (
    ConstraintKind,
    QuadConstraint,
    build_convex_gradient,
    build_lipschitz,
    build_partial_gradient_bounds,
    build_passive,
    build_rnn,
    build_sector,
    check_regularity,
    constraint_from_dict,
    constraint_to_dict,
    evaluate,
    lift,
)
from quadstab.matcore import Definiteness, MatrixError, definiteness


def sample_values(c, f, p, rng, n_samples=10_000, scale=3.0):
    """Direct sampling oracle: the form evaluated along an admissible f."""
    zs = rng.normal(size=(n_samples, p)) * scale
    return np.array([evaluate(c, z, f(z)) for z in zs])


class TestLipschitz:
    def test_direct_substitution(self):
        c = build_lipschitz(2.0, 2, 2)
        assert np.allclose(c.qhat, 4.0 * np.eye(2))
        assert np.allclose(c.shat, 0.0)
        assert np.allclose(c.rhat, -np.eye(2))
        assert c.kind is ConstraintKind.STRICT_R

    def test_scalar(self):
        c = build_lipschitz(1.0, 1, 1)
        assert np.allclose(c.qhat, [[1.0]])
        assert np.allclose(c.rhat, [[-1.0]])

    def test_sampling_oracle_sin(self):
        c = build_lipschitz(1.0, 1, 1)
        rng = np.random.default_rng(0)
        vals = sample_values(c, lambda z: np.sin(z), 1, rng)
        assert vals.min() >= -1e-12

    def test_rejects_nonpositive_ell(self):
        with pytest.raises(ValueError):
            build_lipschitz(0.0, 1, 1)


class TestSector:
    def test_k1_zero_collapses_products(self):
        c = build_sector(np.zeros((2, 2)), 2.0 * np.eye(2))
        assert np.allclose(c.qhat, 0.0)
        assert np.allclose(c.shat, 2.0 * np.eye(2))
        assert np.allclose(c.rhat, -2.0 * np.eye(2))

    def test_symmetric_scalar_sector(self):
        c = build_sector([[-1.0]], [[1.0]])
        assert np.allclose(c.qhat, [[2.0]])
        assert np.allclose(c.shat, [[0.0]])
        assert np.allclose(c.rhat, [[-2.0]])

    def test_sampling_oracle_half_slope(self):
        c = build_sector([[0.0]], [[1.0]])
        rng = np.random.default_rng(1)
        vals = sample_values(c, lambda z: 0.5 * z, 1, rng)
        assert vals.min() >= -1e-12

    def test_boundary_value_hand_expanded(self):
        # 2 (v - K1 z)(K2 z - v) at z=1, v=0.5 with K1=0, K2=1 gives 0.5
        c = build_sector([[0.0]], [[1.0]])
        assert evaluate(c, [1.0], [0.5]) == pytest.approx(0.5)

    def test_dimension_mismatch(self):
        with pytest.raises(MatrixError):
            build_sector(np.zeros((1, 2)), np.eye(2))


class TestConvexGradient:
    def test_direct_substitution(self):
        c = build_convex_gradient(1.0, 2.0, 2)
        assert np.allclose(c.qhat, -4.0 * np.eye(2))
        assert np.allclose(c.shat, 3.0 * np.eye(2))
        assert np.allclose(c.rhat, -2.0 * np.eye(2))

    def test_rejects_m_not_below_ell(self):
        for eps in (0.0, -0.5):
            with pytest.raises(ValueError):
                build_convex_gradient(2.0 - eps, 2.0, 2)

    def test_sampling_oracle_quadratic_gradient(self):
        # g(x) = x^T diag(1,2) x / 2 is 1-strongly convex with 2-Lipschitz gradient
        c = build_convex_gradient(1.0, 2.0, 2)
        d = np.diag([1.0, 2.0])
        rng = np.random.default_rng(2)
        vals = sample_values(c, lambda z: d @ z, 2, rng)
        assert vals.min() >= -1e-12


class TestPartialGradientBounds:
    def test_zero_bounds(self):
        c = build_partial_gradient_bounds(np.zeros((2, 2)), np.zeros((2, 2)))
        assert np.allclose(c.qhat, 0.0)
        assert np.allclose(c.shat, 0.0)
        assert np.allclose(c.rhat, -np.eye(4))
        assert np.allclose(c.selection, [[1, 1, 0, 0], [0, 0, 1, 1]])

    def test_symmetric_unit_box(self):
        # fbar = I, funder = -I: midpoints vanish, half-widths are I
        c = build_partial_gradient_bounds(np.eye(2), -np.eye(2))
        assert np.allclose(c.qhat, np.eye(2))
        assert np.allclose(c.shat, 0.0)

    def test_general_entries_match_hand_expansion(self):
        fbar = np.array([[1.0, 2.0], [3.0, 4.0]])
        funder = np.array([[-1.0, 0.0], [1.0, -2.0]])
        c = build_partial_gradient_bounds(fbar, funder)
        cm = 0.5 * (fbar + funder)
        cw = 0.5 * (fbar - funder)
        assert c.qhat[0, 0] == pytest.approx((cw[0, 0] - cm[0, 0]) + (cw[1, 0] - cm[1, 0]))
        assert c.qhat[1, 1] == pytest.approx((cw[0, 1] - cm[0, 1]) + (cw[1, 1] - cm[1, 1]))
        assert np.allclose(
            c.shat,
            [[cm[0, 0], 0.0, cm[1, 0], 0.0], [0.0, cm[0, 1], 0.0, cm[1, 1]]],
        )

    def test_rejects_crossed_bounds(self):
        with pytest.raises(ValueError):
            build_partial_gradient_bounds(np.zeros((2, 2)), np.ones((2, 2)))

    def test_rejects_other_dimensions(self):
        with pytest.raises(ValueError):
            build_partial_gradient_bounds(np.zeros((3, 3)), np.zeros((3, 3)))


class TestRnn:
    def test_identity_rejected_offdiagonal_sign(self):
        with pytest.raises(ValueError):
            build_rnn(np.eye(2))

    def test_valid_gamma_makes_rhat_nd(self):
        c = build_rnn([[2.0, -1.0], [-1.0, 2.0]])
        assert np.allclose(c.shat, [[2.0, -1.0], [-1.0, 2.0]])
        assert np.allclose(c.rhat, [[-4.0, 2.0], [2.0, -4.0]])
        # eigenvalues of -2 Gamma are {-2, -6} (2x2 eigen oracle)
        assert np.allclose(np.sort(np.linalg.eigvalsh(c.rhat)), [-6.0, -2.0])
        assert definiteness(c.rhat) is Definiteness.ND

    def test_scalar_gamma(self):
        c = build_rnn([[1.0]])
        assert np.allclose(c.qhat, [[0.0]])
        assert np.allclose(c.shat, [[1.0]])
        assert np.allclose(c.rhat, [[-2.0]])

    def test_sampling_oracle_tanh(self):
        c = build_rnn([[2.0, -1.0], [-1.0, 2.0]])
        rng = np.random.default_rng(3)
        vals = sample_values(c, np.tanh, 2, rng)
        assert vals.min() >= -1e-12


class TestPassive:
    def test_surge_output_map(self):
        c = build_passive([[1.0, 0.0]])
        lc = lift(c, 2)
        assert np.allclose(lc.q, np.zeros((2, 2)))
        assert np.allclose(lc.s, [[1.0], [0.0]])
        assert np.allclose(lc.r, [[0.0]])

    def test_identity_map(self):
        c = build_passive(np.eye(2))
        assert np.allclose(c.shat, np.eye(2))

    def test_sampling_oracle_cubic(self):
        c = build_passive([[1.0]])
        rng = np.random.default_rng(4)
        vals = sample_values(c, lambda z: z**3, 1, rng)
        assert vals.min() >= -1e-12

    def test_rejects_zero_h(self):
        with pytest.raises(ValueError):
            build_passive(np.zeros((1, 2)))


class TestLift:
    def test_identity_h_is_identity_lift(self):
        c = build_convex_gradient(1.0, 2.0, 3)
        lc = lift(c, 3)
        assert np.allclose(lc.q, c.qhat)
        assert np.allclose(lc.s, c.shat)
        assert np.allclose(lc.r, c.rhat)

    def test_lipschitz_row_selector(self):
        c = build_lipschitz(2.0, 1, 1, h=[[1.0, 0.0]])
        lc = lift(c, 2)
        assert np.allclose(lc.q, np.diag([4.0, 0.0]))
        assert np.allclose(lc.s, 0.0)
        assert np.allclose(lc.r, [[-1.0]])
        assert lc.q_class is Definiteness.PSD

    def test_dimension_mismatch(self):
        c = build_lipschitz(1.0, 2, 2)
        with pytest.raises(MatrixError):
            lift(c, 3)

    def test_congruence_consistency_1000_pairs(self):
        rng = np.random.default_rng(11)
        h = rng.normal(size=(2, 4))
        c = build_sector(-0.5 * np.eye(2), np.eye(2), h=h)
        lc = lift(c, 4)
        for _ in range(1000):
            x = rng.normal(size=4)
            v = rng.normal(size=2)
            w = np.concatenate([x, v])
            lifted_val = float(w @ lc.block() @ w)
            assert lifted_val == pytest.approx(evaluate(c, h @ x, v), abs=1e-9, rel=1e-9)


class TestInvariants:
    def test_strict_r_classifies_nd(self):
        for c in (
            build_lipschitz(0.7, 2, 2),
            build_sector([[0.0]], [[1.0]]),
            build_convex_gradient(0.5, 1.5, 2),
            build_rnn([[2.0, -1.0], [-1.0, 2.0]]),
            build_partial_gradient_bounds(np.eye(2), -np.eye(2)),
        ):
            assert c.kind is ConstraintKind.STRICT_R
            assert definiteness(c.rhat) is Definiteness.ND

    def test_builders_are_deterministic_bitwise(self):
        a = build_sector([[-0.25]], [[0.75]])
        b = build_sector([[-0.25]], [[0.75]])
        assert np.array_equal(a.qhat, b.qhat)
        assert np.array_equal(a.shat, b.shat)
        assert np.array_equal(a.rhat, b.rhat)


class TestRegularity:
    def test_diagonal_sector_shortcut(self):
        c = build_sector(np.zeros((2, 2)), np.eye(2))
        res = check_regularity(c, 2)
        assert res.regular and res.analytic
        z, v = res.witness
        assert evaluate(c, z, v) > 0

    def test_nonpositive_form_has_no_witness(self):
        c = QuadConstraint(
            qhat=np.zeros((2, 2)),
            shat=np.zeros((2, 1)),
            rhat=-np.eye(1),
            h=np.eye(2),
            kind=ConstraintKind.STRICT_R,
        )
        res = check_regularity(c, 2, budget=500, seed=1)
        assert not res.regular and res.witness is None

    def test_lipschitz_witness_at_v_zero(self):
        c = build_lipschitz(2.0, 2, 2)
        assert evaluate(c, [1.0, 0.0], [0.0, 0.0]) == pytest.approx(4.0)
        res = check_regularity(c, 2, seed=2)
        assert res.regular
        z, v = res.witness
        assert evaluate(c, z, v) > 0

    def test_trivial_evaluations(self):
        c = build_lipschitz(1.0, 1, 1)
        assert evaluate(c, [0.0], [0.0]) == 0.0
        assert evaluate(c, [1.0], [1.0]) == pytest.approx(0.0)  # boundary


class TestSerialization:
    def test_round_trip(self, tmp_path):
        c = build_sector([[-0.5, 0.0]], [[1.0, 0.25]], h=[[1.0, 0.0], [0.0, 1.0]])
        d = constraint_to_dict(c)
        c2 = constraint_from_dict(d)
        assert c2.kind is c.kind
        assert np.array_equal(c2.qhat, c.qhat)
        assert np.array_equal(c2.shat, c.shat)
        assert np.array_equal(c2.rhat, c.rhat)
        assert np.array_equal(c2.h, c.h)

    def test_missing_field_is_error(self):
        with pytest.raises(MatrixError):
            constraint_from_dict({"kind": "passive"})
