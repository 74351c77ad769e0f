import numpy as np
import pytest

from sparsekrylov.krylov import (
    BreakdownError,
    CorrectedRestartDegenerate,
    corrected_restart,
    fa_init,
    fa_step,
    fgk_init,
    fgk_step,
    plain_restart,
)
from sparsekrylov.operators import DenseOperator, IdentityOperator
from sparsekrylov.regularization import (
    RegOperator,
    WeightVector,
    irn_weights,
)


def rng(seed=0):
    return np.random.Generator(np.random.Philox(seed))


def identity_parts(n):
    return WeightVector.identity(n), RegOperator.identity(n)


def check_arnoldi_state(state, Am, tol=1e-10):
    V, Z, H = state.V, state.Z, state.H
    scale = max(np.linalg.norm(Am, 2), 1e-300)
    assert np.linalg.norm(V.T @ V - np.eye(V.shape[1])) <= tol
    assert np.linalg.norm(Am @ Z - V @ H) <= tol * scale * max(np.linalg.norm(Z), 1.0)


def check_gk_state(state, Am, tol=1e-10):
    U, V, Z, M, S = state.U, state.V, state.Z, state.M, state.S
    scale = max(np.linalg.norm(Am, 2), 1e-300)
    assert np.linalg.norm(U.T @ U - np.eye(U.shape[1])) <= tol
    if V.shape[1]:
        assert np.linalg.norm(V.T @ V - np.eye(V.shape[1])) <= tol
    assert np.linalg.norm(Am @ Z - U @ M) <= tol * scale * max(np.linalg.norm(Z), 1.0)
    k = state.u_skip
    nv = V.shape[1]
    if nv:
        assert np.linalg.norm(Am.T @ U[:, k:k + nv] - V @ S) \
            <= tol * scale * max(np.linalg.norm(U), 1.0)


class TestInit:
    def test_fa_unit_vector(self):
        st = fa_init(np.array([1.0, 0.0, 0.0]))
        assert np.array_equal(st.V[:, 0], [1.0, 0.0, 0.0])
        assert st.i == 0 and st.H.shape == (1, 0)

    def test_fa_normalization(self):
        st = fa_init(np.array([3.0, 4.0]))
        assert np.allclose(st.V[:, 0], [0.6, 0.8])

    def test_fa_zero_residual(self):
        with pytest.raises(ValueError, match="converged"):
            fa_init(np.zeros(4))

    def test_fgk_cases(self):
        st = fgk_init(np.array([0.0, 5.0]))
        assert np.allclose(st.U[:, 0], [0.0, 1.0])
        with pytest.raises(ValueError, match="converged"):
            fgk_init(np.zeros(3))


class TestFaStep:
    def test_identity_operator_lucky_breakdown(self):
        A = IdentityOperator(3)
        W, L = identity_parts(3)
        st = fa_init(np.array([1.0, 0.0, 0.0]))
        with pytest.raises(BreakdownError) as exc:
            fa_step(st, A, W, L)
        assert exc.value.extended
        assert np.allclose(exc.value.values["h"], [1.0, 0.0])
        # the final column was committed and the relation still holds
        assert st.exhausted and st.i == 1
        assert np.allclose(st.H, [[1.0]])

    def test_diag_hand_oracle(self):
        A = DenseOperator(np.diag([1.0, 2.0]))
        W, L = identity_parts(2)
        st = fa_init(np.array([1.0, 1.0]))
        fa_step(st, A, W, L)
        assert st.H[0, 0] == pytest.approx(1.5)
        assert st.H[1, 0] == pytest.approx(0.5)
        assert np.allclose(st.V[:, 1], np.array([-1.0, 1.0]) / np.sqrt(2))

    def test_space_exhaustion_at_n(self):
        n = 6
        Am = rng(1).standard_normal((n, n))
        A = DenseOperator(Am)
        W, L = identity_parts(n)
        st = fa_init(rng(2).standard_normal(n))
        for _ in range(n - 1):
            fa_step(st, A, W, L)
        # the n-th direction closes the space: lucky breakdown
        with pytest.raises(BreakdownError):
            fa_step(st, A, W, L)
        check_arnoldi_state(st, Am)

    def test_matches_dense_arnoldi_with_unit_weights(self):
        n = 12
        Am = rng(3).standard_normal((n, n))
        A = DenseOperator(Am)
        W, L = identity_parts(n)
        r0 = rng(4).standard_normal(n)
        st = fa_init(r0)
        for _ in range(8):
            fa_step(st, A, W, L)
        # dense Arnoldi oracle with double orthogonalization
        V = np.zeros((n, 9))
        H = np.zeros((9, 8))
        V[:, 0] = r0 / np.linalg.norm(r0)
        for k in range(8):
            q = Am @ V[:, k]
            for _pass in range(2):
                for j in range(k + 1):
                    c = V[:, j] @ q
                    q -= c * V[:, j]
                    H[j, k] += c
            H[k + 1, k] = np.linalg.norm(q)
            V[:, k + 1] = q / H[k + 1, k]
        assert np.linalg.norm(st.H - H) <= 1e-10 * np.linalg.norm(H)

    def test_flexible_weights_relation(self):
        n = 10
        Am = rng(5).standard_normal((n, n))
        A = DenseOperator(Am)
        L = RegOperator.first_difference(n)
        st = fa_init(rng(6).standard_normal(n))
        g = rng(7)
        for _ in range(6):
            w = irn_weights(g.standard_normal(n), p=1.0, tau_smooth=1e-2)
            fa_step(st, A, w, L)
        check_arnoldi_state(st, Am)


class TestFgkStep:
    def test_scalar_case(self):
        # 1x1 identity: s11 = 1, v1 = [1], m11 = 1, then the second
        # normalization of the step vanishes (space exhausted)
        A = IdentityOperator(1)
        W, L = identity_parts(1)
        st = fgk_init(np.array([1.0]))
        with pytest.raises(BreakdownError) as exc:
            fgk_step(st, A, W, L)
        assert exc.value.stage == "gk_m" and exc.value.extended
        assert st.S[0, 0] == pytest.approx(1.0)
        assert st.V[0, 0] == pytest.approx(1.0)
        assert st.M[0, 0] == pytest.approx(1.0)

    def test_diag_eigvector_breakdown_dense_oracle(self):
        # u1 = e2 is an eigenvector of diag(1,2): the image normalization
        # vanishes after one half-step
        A = DenseOperator(np.diag([1.0, 2.0]))
        W, L = identity_parts(2)
        st = fgk_init(np.array([0.0, 1.0]))
        with pytest.raises(BreakdownError) as exc:
            fgk_step(st, A, W, L)
        assert exc.value.stage == "gk_m" and exc.value.extended
        assert np.allclose(st.V[:, 0], [0.0, 1.0])
        assert np.allclose(st.Z[:, 0], [0.0, 1.0])
        assert st.S[0, 0] == pytest.approx(2.0)
        assert np.allclose(exc.value.values["m"], [2.0, 0.0])
        # relation still exact with the committed final column
        check_gk_state(st, np.diag([1.0, 2.0]), tol=1e-14)

    def test_random_rectangular_relations(self):
        Am = rng(8).standard_normal((5, 3))
        A = DenseOperator(Am)
        W, L = identity_parts(3)
        st = fgk_init(rng(9).standard_normal(5))
        for _ in range(3):
            fgk_step(st, A, W, L)
        check_gk_state(st, Am, tol=1e-12)

    def test_flexible_weights_relations(self):
        Am = rng(10).standard_normal((9, 7))
        A = DenseOperator(Am)
        L = RegOperator.first_difference(7)
        st = fgk_init(rng(11).standard_normal(9))
        g = rng(12)
        for _ in range(5):
            w = irn_weights(g.standard_normal(7), p=1.0, tau_smooth=1e-2)
            fgk_step(st, A, w, L)
        check_gk_state(st, Am)


class TestRestarts:
    def test_plain_restart_fresh_state(self):
        st = plain_restart(np.array([1.0, 0.0]), "arnoldi")
        assert st.V.shape == (2, 1) and st.i == 0
        st = plain_restart(np.array([1.0, 0.0, 0.0]), "golub_kahan")
        assert st.U.shape == (3, 1) and st.i == 0

    def test_plain_restart_zero_residual(self):
        with pytest.raises(ValueError):
            plain_restart(np.zeros(3), "arnoldi")

    def test_restart_then_steps_valid_relation(self):
        n = 8
        Am = rng(13).standard_normal((n, n))
        A = DenseOperator(Am)
        W, L = identity_parts(n)
        st = fa_init(rng(14).standard_normal(n))
        for _ in range(4):
            fa_step(st, A, W, L)
        st = plain_restart(rng(15).standard_normal(n), "arnoldi")
        assert st.V.shape[1] == 1  # old basis released
        for _ in range(n - 1):
            fa_step(st, A, W, L)
        check_arnoldi_state(st, Am)

    def test_corrected_orthogonal_pair(self):
        A = IdentityOperator(3)
        st = corrected_restart(np.array([1.0, 0.0, 0.0]),
                               np.array([0.0, 1.0, 0.0]), A, "arnoldi")
        assert np.allclose(st.Z[:, 0], [1.0, 0.0, 0.0])
        assert st.H[0, 0] == pytest.approx(1.0)
        assert st.H[1, 0] == 0.0
        assert np.allclose(st.V[:, 0], [1.0, 0.0, 0.0])
        assert np.allclose(st.V[:, 1], [0.0, 1.0, 0.0])
        assert st.corrected

    def test_corrected_parallel_degenerate(self):
        A = IdentityOperator(2)
        with pytest.raises(CorrectedRestartDegenerate):
            corrected_restart(np.array([1.0, 0.0]), np.array([2.0, 0.0]),
                              A, "arnoldi")

    @pytest.mark.parametrize("kind", ["arnoldi", "golub_kahan"])
    def test_corrected_relation_after_steps(self, kind):
        n = 6
        Am = rng(16).standard_normal((n, n))
        A = DenseOperator(Am)
        W, L = identity_parts(n)
        x_prev = rng(17).standard_normal(n)
        r = rng(18).standard_normal(n)
        st = corrected_restart(x_prev, r, A, kind)
        step = fa_step if kind == "arnoldi" else fgk_step
        for _ in range(3):
            step(st, A, W, L)
        if kind == "arnoldi":
            check_arnoldi_state(st, Am)
            assert st.H[1, 0] == 0.0
        else:
            check_gk_state(st, Am)
            assert st.M[1, 0] == 0.0
        # the previous solution lies in the span of the search directions
        zdir = x_prev / np.linalg.norm(x_prev)
        coef = np.linalg.lstsq(st.Z, zdir, rcond=None)[0]
        assert np.linalg.norm(st.Z @ coef - zdir) <= 1e-12

    def test_corrected_solution_seed_variant(self):
        n = 5
        Am = rng(19).standard_normal((n, n))
        A = DenseOperator(Am)
        st = corrected_restart(rng(20).standard_normal(n),
                               rng(21).standard_normal(n), A, "arnoldi",
                               seed_projection="solution")
        V = st.V
        assert np.linalg.norm(V.T @ V - np.eye(2)) <= 1e-12

    def test_breakdown_preserves_relation(self):
        # force s-side breakdown: square orthogonal A exhausts after n steps
        n = 4
        Am, _ = np.linalg.qr(rng(22).standard_normal((n, n)))
        A = DenseOperator(Am)
        W, L = identity_parts(n)
        st = fgk_init(rng(23).standard_normal(n))
        with pytest.raises(BreakdownError):
            for _ in range(n + 1):
                fgk_step(st, A, W, L)
        check_gk_state(st, Am)
