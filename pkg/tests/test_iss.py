import numpy as np
import pytest

from conftest import crandn, random_problem
from mmiva.core import whiten_init
from mmiva.exceptions import IndivisibleBlock, NotPositiveDefinite, NumericalBreakdown
from mmiva.iss import (
    _solve_2x2,
    block_objective,
    block_rotation,
    iss1_pass,
    iss2_pass,
    iss_p_step,
    iss_pass,
    iss_q_step,
    solve_2x2,
)
from oracles import (
    fd_gradient_2x2,
    iss1_loop,
    iss_block_perturbations,
    objective_2x2,
    objective_2x2_batch,
    random_candidates,
    random_hpd_2x2,
    surrogate_batch,
    surrogate_bin,
)


def random_state(rng, K, m, n=None):
    X, lam = random_problem(rng, K, m, n or 8 * m)
    W = whiten_init(X)[0] + 0.2 * crandn(rng, K, m, m)
    return X, W, W @ X, lam


class TestSolve2x2:
    def test_identity_pair(self):
        sol = solve_2x2(np.eye(2), np.eye(2), full=True)
        np.testing.assert_allclose(sol.theta, [1, 1], atol=1e-15)
        np.testing.assert_allclose(sol.P, np.eye(2), atol=1e-15)
        assert objective_2x2(sol.P, np.eye(2), np.eye(2)) == pytest.approx(2.0, abs=1e-15)

    def test_hand_example(self):
        G2 = np.diag([4.0, 1.0])
        sol = solve_2x2(np.eye(2), G2, full=True)
        np.testing.assert_allclose(sol.theta, [4, 1], atol=1e-15)
        np.testing.assert_allclose(sol.u[0], [-3, 0], atol=1e-15)
        np.testing.assert_allclose(sol.u[1], [0, 3], atol=1e-15)
        np.testing.assert_allclose(sol.P, [[-1, 0], [0, 1]], atol=1e-15)
        assert objective_2x2(sol.P, np.eye(2), G2) == pytest.approx(2.0, abs=1e-15)

    def test_swapped_diagonal(self):
        # one eigenvector formula vanishes here although H is not a multiple of I
        G2 = np.diag([1.0, 4.0])
        P = solve_2x2(np.eye(2), G2)
        np.testing.assert_allclose(np.abs(P), [[0, 1], [1, 0]], atol=1e-15)
        assert objective_2x2(P, np.eye(2), G2) == pytest.approx(2.0, abs=1e-15)

    def test_solution_invariants(self, rng):
        for _ in range(200):
            G1, G2 = random_hpd_2x2(rng), random_hpd_2x2(rng)
            sol = solve_2x2(G1, G2, full=True)
            H = sol.H
            np.testing.assert_allclose(H, np.linalg.solve(G1, G2), atol=1e-10 * np.abs(H).max())
            t1, t2 = sol.theta
            assert t1 >= t2 > 0
            assert t1 * t2 == pytest.approx(np.linalg.det(H).real, rel=1e-10)
            assert t1 + t2 == pytest.approx(np.trace(H).real, rel=1e-10)
            for u, t in zip(sol.u, sol.theta):
                assert np.linalg.norm(H @ u - t * u) <= 1e-8 * np.linalg.norm(H) * np.linalg.norm(u)
            P = sol.P
            assert np.vdot(P[0].conj(), G1 @ P[0].conj()).real == pytest.approx(1.0, abs=1e-10)
            assert np.vdot(P[1].conj(), G2 @ P[1].conj()).real == pytest.approx(1.0, abs=1e-10)

    def test_stationary_and_optimal(self, rng):
        for _ in range(50):
            G1, G2 = random_hpd_2x2(rng), random_hpd_2x2(rng)
            P = solve_2x2(G1, G2)
            assert np.linalg.norm(fd_gradient_2x2(P, G1, G2)) < 1e-7 * (1 + np.linalg.norm(P))
            cand = objective_2x2_batch(random_candidates(rng, 1000), G1, G2)
            assert objective_2x2(P, G1, G2) <= cand.min()

    def test_batched_matches_single(self, rng):
        G1 = np.stack([random_hpd_2x2(rng) for _ in range(6)])
        G2 = np.stack([random_hpd_2x2(rng) for _ in range(6)])
        P = solve_2x2(G1, G2)
        for k in range(6):
            np.testing.assert_allclose(P[k], solve_2x2(G1[k], G2[k]), atol=1e-14)

    def test_block_objective(self, rng):
        G1, G2 = random_hpd_2x2(rng), random_hpd_2x2(rng)
        P = crandn(rng, 2, 2)
        assert block_objective(P, np.stack([G1, G2])) == pytest.approx(objective_2x2(P, G1, G2), abs=1e-12)

    def test_rejects_indefinite(self):
        with pytest.raises(NotPositiveDefinite):
            solve_2x2(np.eye(2), np.diag([1.0, -1.0]))

    def test_complex_spectrum_breaks_down(self):
        # indefinite G1 bypassing validation gives complex eigenvalues
        with pytest.raises(NumericalBreakdown):
            _solve_2x2(np.diag([1.0, -1.0]).astype(complex), np.array([[1.0, 2.0], [2.0, 1.0]], dtype=complex))


class TestQStep:
    def test_hand_example(self):
        Y = np.array([[[1.0, 1.0], [1.0, -1.0]]], dtype=complex)
        W = np.eye(2, dtype=complex)[None].copy()
        lam = np.array([[1.0, 1.0], [2.0, 1.0]])
        Q = iss_q_step(Y, W, lam, [0])
        np.testing.assert_allclose(Q[0, 0, 0], -1 / 3, atol=1e-15)
        np.testing.assert_allclose(Y[0, 1], [2 / 3, -4 / 3], atol=1e-15)
        np.testing.assert_allclose(Y[0, 0], [1, 1], atol=0)

    def test_orthogonal_row_unchanged(self):
        Y = np.array([[[1.0, 1.0], [1.0, -2.0]]], dtype=complex)
        lam = np.array([[1.0, 1.0], [2.0, 1.0]])
        before = Y.copy()
        iss_q_step(Y, None, lam, [0])
        np.testing.assert_allclose(Y, before, atol=1e-15)

    @pytest.mark.parametrize("lead", [[0], [2], [0, 1], [2, 3], [1, 3]])
    def test_cross_terms_vanish(self, rng, lead):
        X, W, Y, lam = random_state(rng, 3, 4)
        iss_q_step(Y, W, lam, lead)
        n = Y.shape[-1]
        for i in set(range(4)) - set(lead):
            g = (Y[:, lead] * lam[i]) @ Y[:, i].conj()[..., None] / (2 * n)
            assert np.max(np.abs(g)) < 1e-9 * np.max(np.abs(Y)) ** 2
        np.testing.assert_allclose(Y, W @ X, atol=1e-10)


class TestPStep:
    def test_scalar_rescale(self):
        Y = np.array([[[np.sqrt(8), np.sqrt(8)], [1.0, 2.0]]], dtype=complex)
        lam = np.ones((2, 2))
        P = iss_p_step(Y, None, lam, [0])
        assert P[0, 0, 0] == pytest.approx(0.5, abs=1e-15)
        assert np.sum(np.abs(Y[0, 0]) ** 2) / 4 == pytest.approx(1.0, abs=1e-14)

    def test_scalar_fixed_point(self):
        Y = np.array([[[np.sqrt(2), np.sqrt(2)], [1.0, 2.0]]], dtype=complex)
        before = Y.copy()
        iss_p_step(Y, None, np.ones((2, 2)), [0])
        np.testing.assert_allclose(Y, before, atol=1e-15)

    def test_pair_fixture(self):
        # G1 = I, G2 = diag(4, 1)
        Y = (2 * np.eye(2, dtype=complex))[None].copy()
        lam = np.array([[1.0, 1.0], [4.0, 1.0]])
        P = iss_p_step(Y, None, lam, [0, 1])
        np.testing.assert_allclose(P[0], [[-1, 0], [0, 1]], atol=1e-15)
        np.testing.assert_allclose(Y[0], [[-2, 0], [0, 2]], atol=1e-15)

    def test_pair_normalization(self, rng):
        X, W, Y, lam = random_state(rng, 4, 4)
        iss_p_step(Y, W, lam, [1, 2])
        n = Y.shape[-1]
        for i in (1, 2):
            power = np.sum(lam[i] * np.abs(Y[:, i]) ** 2, axis=-1) / (2 * n)
            np.testing.assert_allclose(power, 1.0, atol=1e-9)
        np.testing.assert_allclose(Y, W @ X, atol=1e-10)

    def test_large_block_rejected(self, rng):
        X, W, Y, lam = random_state(rng, 1, 4)
        with pytest.raises(IndivisibleBlock):
            iss_p_step(Y, W, lam, [0, 1, 2])


class TestBlockRotation:
    @pytest.mark.parametrize("m,d", [(4, 1), (4, 2), (6, 2), (6, 1)])
    def test_full_cycle_is_identity(self, m, d):
        L = m // d
        np.testing.assert_array_equal(block_rotation(m, d, L), np.arange(m))
        idx = np.arange(m)
        for _ in range(L):
            idx = idx[block_rotation(m, d, 1)]
        np.testing.assert_array_equal(idx, np.arange(m))

    def test_moves_block_to_top(self):
        np.testing.assert_array_equal(block_rotation(6, 2, 1), [2, 3, 4, 5, 0, 1])

    def test_indivisible(self):
        with pytest.raises(IndivisibleBlock):
            block_rotation(5, 2)


class TestPass:
    def test_fused_matches_sequential_steps(self, rng):
        for d, blocks in ((1, None), (2, None), (2, [(2, 0), (3, 1)])):
            X, W, Y, lam = random_state(rng, 3, 4)
            Ys, Ws = Y.copy(), W.copy()
            iss_pass(Y, W, lam, d, blocks=blocks)
            for lead in blocks or [tuple(range(l * d, (l + 1) * d)) for l in range(4 // d)]:
                iss_q_step(Ys, Ws, lam, list(lead))
                iss_p_step(Ys, Ws, lam, list(lead))
            np.testing.assert_allclose(Y, Ys, atol=1e-12)
            np.testing.assert_allclose(W, Ws, atol=1e-12)

    def test_matches_conventional_iss(self, rng):
        for _ in range(20):
            X, W, Y, lam = random_state(rng, 1, 3)
            Yr, Wr = iss1_loop(Y[0], W[0], lam)
            iss1_pass(Y, W, lam)
            np.testing.assert_allclose(W[0], Wr, atol=1e-8)
            np.testing.assert_allclose(Y[0], Yr, atol=1e-8)

    @pytest.mark.parametrize("d", [1, 2])
    def test_substep_monotone(self, rng, d):
        X, W, Y, lam = random_state(rng, 2, 6)
        values = [surrogate_batch(Y, W, lam)]

        def record(l, lead, P, Q):
            values.append(surrogate_batch(Y, W, lam))

        iss_pass(Y, W, lam, d, on_substep=record)
        values = np.array(values)
        assert len(values) == 6 // d + 1
        assert np.all(np.diff(values, axis=0) <= 1e-12 * np.abs(values[:-1]))

    @pytest.mark.parametrize("d", [1, 2])
    def test_block_optimality(self, rng, d):
        X, W, Y, lam = random_state(rng, 1, 4)
        worst = []

        def probe(l, lead, P, Q):
            T = iss_block_perturbations(rng, 4, lead, 1000, 1e-3)
            base = surrogate_bin(Y[0], W[0], lam)
            worst.append(np.min(surrogate_batch(T @ Y[0], T @ W[0], lam) - base))

        iss_pass(Y, W, lam, d, on_substep=probe)
        assert min(worst) > -1e-8

    @pytest.mark.parametrize("d", [1, 2])
    def test_only_lead_columns_of_inverse_change(self, rng, d):
        X, W, Y, lam = random_state(rng, 2, 6)
        A = [np.linalg.inv(W)]

        def record(l, lead, P, Q):
            A_new = np.linalg.inv(W)
            rest = np.setdiff1d(np.arange(6), lead)
            scale = np.max(np.abs(A[-1]))
            np.testing.assert_allclose(A_new[..., rest], A[-1][..., rest], atol=1e-8 * scale)
            A.append(A_new)

        iss_pass(Y, W, lam, d, on_substep=record)
        assert len(A) == 6 // d + 1

    @pytest.mark.parametrize("d", [1, 2])
    def test_determinant_tracking(self, rng, d):
        X, W, Y, lam = random_state(rng, 3, 4)
        before = np.linalg.slogdet(W)[1]
        acc = np.zeros(3)

        def record(l, lead, P, Q):
            acc[:] += np.linalg.slogdet(P)[1]

        iss_pass(Y, W, lam, d, on_substep=record)
        np.testing.assert_allclose(np.linalg.slogdet(W)[1], before + acc, atol=1e-8)

    @pytest.mark.parametrize("d", [1, 2])
    def test_relabeling_commutes(self, rng, d):
        X, W, Y, lam = random_state(rng, 3, 6)
        sigma = rng.permutation(6)
        inv = np.argsort(sigma)
        blocks = [tuple(range(l * d, (l + 1) * d)) for l in range(6 // d)]
        relabeled = [tuple(int(inv[i]) for i in b) for b in blocks]
        Yp, Wp, lamp = Y[:, sigma].copy(), W[:, sigma].copy(), lam[sigma].copy()
        iss_pass(Y, W, lam, d)
        iss_pass(Yp, Wp, lamp, d, blocks=relabeled)
        np.testing.assert_allclose(Yp, Y[:, sigma], atol=1e-10)
        np.testing.assert_allclose(Wp, W[:, sigma], atol=1e-10)

    def test_lam_untouched(self, rng):
        X, W, Y, lam = random_state(rng, 2, 4)
        lam0 = lam.copy()
        iss2_pass(Y, W, lam)
        np.testing.assert_array_equal(lam, lam0)

    def test_consistency(self, rng):
        for d in (1, 2):
            X, W, Y, lam = random_state(rng, 3, 6)
            iss_pass(Y, W, lam, d)
            np.testing.assert_allclose(Y, W @ X, atol=1e-10 * np.max(np.abs(Y)))

    @pytest.mark.parametrize("m,d", [(6, 3), (3, 2), (4, 4)])
    def test_indivisible(self, rng, m, d):
        X, W, Y, lam = random_state(rng, 1, m)
        with pytest.raises(IndivisibleBlock):
            iss_pass(Y, W, lam, d)

    def test_wrong_block_size(self, rng):
        X, W, Y, lam = random_state(rng, 1, 4)
        with pytest.raises(IndivisibleBlock):
            iss_pass(Y, W, lam, 2, blocks=[(0,), (1, 2, 3)])
