import numpy as np
import pytest

from refcomm import numerics
from refcomm.errors import (
    DegenerateInputError,
    InsufficientDataError,
    NumericError,
    ParameterError,
    ShapeError,
)

RNG = lambda s: np.random.default_rng(s)


def naive_linear(W, b, X):
    """Triple-loop oracle for the linear layer."""
    out = np.zeros((X.shape[0], W.shape[0]))
    for i in range(X.shape[0]):
        for o in range(W.shape[0]):
            acc = 0.0
            for j in range(X.shape[1]):
                acc += W[o, j] * X[i, j]
            out[i, o] = acc + b[o]
    return out


class TestLinear:
    def test_identity(self):
        W = np.eye(2, dtype=np.float32)
        b = np.zeros(2, dtype=np.float32)
        out = numerics.linear_forward(W, b, np.array([[3.0, 4.0]]))
        np.testing.assert_allclose(out, [[3.0, 4.0]])

    def test_hand_sum(self):
        out = numerics.linear_forward(
            np.array([[1.0, 1.0]]), np.array([1.0]), np.array([[2.0, 3.0]])
        )
        np.testing.assert_allclose(out, [[6.0]])

    def test_matches_naive_matmul(self):
        rng = RNG(0)
        W = rng.standard_normal((4, 8)).astype(np.float32)
        b = rng.standard_normal(4).astype(np.float32)
        X = rng.standard_normal((16, 8)).astype(np.float32)
        np.testing.assert_allclose(
            numerics.linear_forward(W, b, X), naive_linear(W, b, X), atol=1e-6
        )

    def test_shape_errors_name_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\)"):
            numerics.linear_forward(
                np.zeros((2, 3)), np.zeros(2), np.zeros((4, 5))
            )

    def test_backward_zero_grad(self):
        rng = RNG(1)
        X = rng.standard_normal((3, 4))
        W = rng.standard_normal((2, 4))
        gW, gb, gX = numerics.linear_backward(np.zeros((3, 2)), X, W)
        assert not gW.any() and not gb.any() and not gX.any()

    def test_backward_scalar_chain_rule(self):
        w, x, g = 1.7, -0.3, 2.5
        gW, gb, gX = numerics.linear_backward(
            np.array([[g]]), np.array([[x]]), np.array([[w]])
        )
        np.testing.assert_allclose(gW, [[g * x]])
        np.testing.assert_allclose(gb, [g])
        np.testing.assert_allclose(gX, [[g * w]])

    def test_backward_vs_finite_differences(self):
        rng = RNG(2)
        X0 = rng.standard_normal((5, 4))
        W0 = rng.standard_normal((3, 4))
        b0 = rng.standard_normal(3)
        coeff = rng.standard_normal((5, 3))  # random linear loss over outputs

        def comp(inputs):
            out = numerics.linear_forward(inputs["W"], inputs["b"], inputs["X"])
            loss = float((coeff * out).sum())
            gW, gb, gX = numerics.linear_backward(coeff, inputs["X"], inputs["W"])
            return loss, {"W": gW, "b": gb, "X": gX}

        err = numerics.grad_check(comp, {"W": W0, "b": b0, "X": X0}, h=1e-3)
        assert err < 1e-4


class TestRelu:
    def test_simple(self):
        np.testing.assert_allclose(
            numerics.relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0]
        )

    def test_all_negative(self):
        X = -np.abs(RNG(3).standard_normal((4, 4)))
        assert not numerics.relu(X).any()
        assert not numerics.relu_backward(np.ones_like(X), X).any()

    def test_finite_differences_away_from_zero(self):
        rng = RNG(4)
        X0 = rng.standard_normal((6, 3))
        X0[np.abs(X0) < 0.05] = 0.1  # keep clear of the kink
        coeff = rng.standard_normal((6, 3))

        def comp(inputs):
            loss = float((coeff * numerics.relu(inputs["X"])).sum())
            return loss, {"X": numerics.relu_backward(coeff, inputs["X"])}

        assert numerics.grad_check(comp, {"X": X0}, h=1e-3) < 1e-4


class TestCosine:
    def test_identical(self):
        v = np.array([1.0, 2.0, 3.0])
        assert numerics.cosine_similarity(v, v) == pytest.approx(1.0)

    def test_orthogonal(self):
        assert numerics.cosine_similarity(
            np.array([1.0, 0.0]), np.array([0.0, 1.0])
        ) == pytest.approx(0.0)

    def test_zero_norm_raises(self):
        with pytest.raises(DegenerateInputError):
            numerics.cosine_similarity(np.zeros(3), np.ones(3))

    def test_gradient_vs_finite_differences(self):
        rng = RNG(5)
        u0 = rng.standard_normal(6)
        v0 = rng.standard_normal(6)

        def comp(inputs):
            c = numerics.cosine_similarity(inputs["u"], inputs["v"])
            gu, gv = numerics.cosine_similarity_backward(inputs["u"], inputs["v"])
            return c, {"u": gu, "v": gv}

        assert numerics.grad_check(comp, {"u": u0, "v": v0}, h=1e-4) < 1e-4

    def test_symmetry_and_scale_invariance(self):
        rng = RNG(6)
        for _ in range(50):
            u = rng.standard_normal(8)
            v = rng.standard_normal(8)
            a, b = rng.uniform(0.1, 10, size=2)
            c1 = numerics.cosine_similarity(u, v)
            assert numerics.cosine_similarity(v, u) == pytest.approx(c1, abs=1e-6)
            assert numerics.cosine_similarity(a * u, b * v) == pytest.approx(
                c1, abs=1e-6
            )
            assert -1.0 - 1e-9 <= c1 <= 1.0 + 1e-9

    def test_cosine_matrix_matches_pairwise(self):
        rng = RNG(7)
        U = rng.standard_normal((5, 4))
        V = rng.standard_normal((7, 4))
        C, _ = numerics.cosine_matrix(U, V)
        for i in range(5):
            for j in range(7):
                assert C[i, j] == pytest.approx(
                    numerics.cosine_similarity(U[i], V[j]), abs=1e-6
                )

    def test_cosine_matrix_backward_vs_fd(self):
        rng = RNG(8)
        U0 = rng.standard_normal((4, 3))
        V0 = rng.standard_normal((5, 3))
        coeff = rng.standard_normal((4, 5))

        def comp(inputs):
            C, cache = numerics.cosine_matrix(inputs["U"], inputs["V"])
            gU, gV = numerics.cosine_matrix_backward(coeff, cache)
            return float((coeff * C).sum()), {"U": gU, "V": gV}

        assert numerics.grad_check(comp, {"U": U0, "V": V0}, h=1e-4) < 1e-4


class TestSoftmaxCrossEntropy:
    def test_uniform_logits_loss_is_log_n(self):
        logits = np.zeros((3, 64), dtype=np.float32)
        loss, _ = numerics.softmax_cross_entropy(logits, np.array([0, 5, 63]))
        assert loss == pytest.approx(np.log(64), abs=1e-5)  # ~4.1589

    def test_large_margin_loss_near_zero(self):
        logits = np.zeros((1, 10), dtype=np.float32)
        logits[0, 3] = 30.0
        loss, _ = numerics.softmax_cross_entropy(logits, np.array([3]))
        assert loss < 1e-8

    def test_out_of_range_target(self):
        with pytest.raises(IndexError):
            numerics.softmax_cross_entropy(np.zeros((2, 5)), np.array([0, 5]))

    def test_grad_vs_finite_differences(self):
        rng = RNG(9)
        logits0 = rng.standard_normal((8, 5))
        targets = rng.integers(0, 5, size=8)

        def comp(inputs):
            loss, grad = numerics.softmax_cross_entropy(inputs["logits"], targets)
            return loss, {"logits": grad}

        assert numerics.grad_check(comp, {"logits": logits0}, h=1e-4) < 1e-4

    def test_softmax_is_simplex_under_extreme_logits(self):
        rng = RNG(10)
        for _ in range(100):
            logits = rng.uniform(-100, 100, size=rng.integers(2, 20))
            p = numerics.softmax(logits)
            assert np.all(p >= 0)
            assert p.sum() == pytest.approx(1.0, abs=1e-5)


class TestGumbelSoftmax:
    def test_soft_sample_on_simplex(self):
        rng = RNG(11)
        for _ in range(20):
            logits = rng.standard_normal(10) * rng.uniform(0.1, 20)
            s, _ = numerics.gumbel_softmax_sample(logits, tau=5.0, rng=rng)
            assert np.all(s > 0) and np.all(s < 1)
            assert s.sum() == pytest.approx(1.0, abs=1e-5)

    def test_low_tau_concentrates_on_argmax(self):
        # Monte-Carlo: logits (10, 0, 0) at tau=0.01 -> argmax sample >= 99% of draws
        rng = RNG(12)
        logits = np.array([10.0, 0.0, 0.0])
        hits = 0
        top = 0
        n = 10_000
        for _ in range(n):
            s, _ = numerics.gumbel_softmax_sample(logits, tau=0.01, rng=rng)
            top += s[0] > 0.99
            hits += np.argmax(s) == 0
        assert hits / n >= 0.99
        assert top / n >= 0.99

    def test_mean_sample_preserves_argmax_order(self):
        # 1e5 draws at tau=5: argmax of the empirical mean equals argmax of logits
        rng = RNG(13)
        logits = np.array([0.3, 1.2, -0.5, 0.9])
        noise = numerics.gumbel_noise((100_000, 4), rng)
        y = numerics.softmax((logits + noise) / 5.0, axis=1)
        assert np.argmax(y.mean(axis=0)) == np.argmax(logits)

    def test_hard_mode_exactly_one_hot(self):
        rng = RNG(14)
        for _ in range(50):
            s, _ = numerics.gumbel_softmax_sample(
                rng.standard_normal(8), tau=5.0, rng=rng, hard=True
            )
            assert sorted(s.tolist())[:-1] == [0.0] * 7
            assert s.max() == 1.0

    def test_tau_must_be_positive(self):
        with pytest.raises(ParameterError):
            numerics.gumbel_softmax_sample(np.zeros(3), tau=0.0, rng=RNG(0))

    def test_backward_vs_fd_with_frozen_noise(self):
        rng = RNG(15)
        logits0 = rng.standard_normal((4, 6))
        noise = numerics.gumbel_noise((4, 6), rng, dtype=np.float64)
        coeff = rng.standard_normal((4, 6))

        def comp(inputs):
            s, cache = numerics.gumbel_softmax_sample(
                inputs["logits"], tau=5.0, noise=noise
            )
            return float((coeff * s).sum()), {
                "logits": numerics.gumbel_softmax_backward(coeff, cache)
            }

        assert numerics.grad_check(comp, {"logits": logits0}, h=1e-4) < 1e-4


class TestAdam:
    def test_zero_gradient_leaves_params(self):
        p = np.array([1.0, -2.0], dtype=np.float32)
        state = numerics.AdamState()
        numerics.adam_step({"p": p}, {"p": np.zeros(2, dtype=np.float32)}, state)
        np.testing.assert_array_equal(p, [1.0, -2.0])
        assert state.step == 1

    def test_constant_gradient_moves_against_it(self):
        p = np.zeros(3, dtype=np.float32)
        g = np.array([1.0, -2.0, 0.5], dtype=np.float32)
        state = numerics.AdamState(lr=0.01)
        for _ in range(50):
            numerics.adam_step({"p": p}, {"p": g}, state)
        assert np.all(np.sign(p) == -np.sign(g))

    def test_quadratic_convergence(self):
        # minimize x^2 from x=1 at lr=0.1: |x| < 0.01 within 200 steps
        x = np.array([1.0], dtype=np.float32)
        state = numerics.AdamState(lr=0.1)
        for _ in range(200):
            numerics.adam_step({"x": x}, {"x": 2.0 * x}, state)
        assert abs(float(x[0])) < 0.01

    def test_non_finite_gradient_names_parameter(self):
        with pytest.raises(NumericError, match="W_bad"):
            numerics.adam_step(
                {"W_bad": np.ones(2, dtype=np.float32)},
                {"W_bad": np.array([np.nan, 1.0], dtype=np.float32)},
                numerics.AdamState(),
            )


class TestPca:
    def test_rank_one(self):
        rng = RNG(16)
        direction = rng.standard_normal(6)
        rows = np.outer(rng.standard_normal(50), direction)
        res = numerics.pca(rows)
        assert res.ratios[0] == pytest.approx(1.0, abs=1e-6)
        assert np.all(res.ratios[1:] < 1e-6)

    def test_isotropic_cloud_flat_spectrum(self):
        rows = RNG(17).standard_normal((10_000, 16))
        res = numerics.pca(rows)
        assert np.all(res.ratios >= 0.04) and np.all(res.ratios <= 0.09)

    def test_independent_dims_low_correlation(self):
        rows = RNG(18).standard_normal((10_000, 8))
        res = numerics.pca(rows)
        off = res.correlation - np.diag(np.diag(res.correlation))
        assert np.all(np.abs(off) < 0.05)
        np.testing.assert_array_equal(np.diag(res.correlation), np.ones(8))

    def test_ratios_descending_nonnegative_sum_one(self):
        rng = RNG(19)
        for _ in range(10):
            rows = rng.standard_normal((40, 5)) @ rng.standard_normal((5, 5))
            res = numerics.pca(rows)
            assert np.all(res.ratios >= 0)
            assert np.all(np.diff(res.ratios) <= 1e-12)
            assert res.ratios.sum() == pytest.approx(1.0, abs=1e-5)

    def test_matches_numpy_eigh_oracle(self):
        rng = RNG(20)
        rows = rng.standard_normal((200, 7)) @ rng.standard_normal((7, 7))
        res = numerics.pca(rows)
        X = rows - rows.mean(axis=0)
        ref = np.sort(np.linalg.eigvalsh((X.T @ X) / (len(rows) - 1)))[::-1]
        np.testing.assert_allclose(res.eigenvalues, ref, rtol=1e-8, atol=1e-10)

    def test_too_few_rows(self):
        with pytest.raises(InsufficientDataError):
            numerics.pca(np.ones((1, 4)))


class TestJacobi:
    def test_matches_numpy_on_random_symmetric(self):
        rng = RNG(21)
        for n in (2, 3, 8, 16):
            M = rng.standard_normal((n, n))
            S = (M + M.T) / 2
            w, V = numerics.jacobi_eigh(S)
            np.testing.assert_allclose(
                w, np.sort(np.linalg.eigvalsh(S))[::-1], atol=1e-9
            )
            # eigenvector property: S v = w v
            np.testing.assert_allclose(S @ V, V @ np.diag(w), atol=1e-8)


class TestGradCheckHarness:
    def test_linear_plus_cross_entropy_stack(self):
        rng = RNG(22)
        X = rng.standard_normal((6, 4))
        targets = rng.integers(0, 3, size=6)
        W0 = rng.standard_normal((3, 4))
        b0 = rng.standard_normal(3)

        def comp(inputs):
            out = numerics.linear_forward(inputs["W"], inputs["b"], X)
            loss, dlogits = numerics.softmax_cross_entropy(out, targets)
            gW, gb, _ = numerics.linear_backward(dlogits, X, inputs["W"])
            return loss, {"W": gW, "b": gb}

        assert numerics.grad_check(comp, {"W": W0, "b": b0}, h=1e-3) < 1e-4


def test_determinism_same_seed_same_draws():
    a, _ = numerics.gumbel_softmax_sample(np.zeros(5), 5.0, rng=RNG(99))
    b, _ = numerics.gumbel_softmax_sample(np.zeros(5), 5.0, rng=RNG(99))
    np.testing.assert_array_equal(a, b)
