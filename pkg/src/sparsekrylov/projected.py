"""Small dense subproblem machinery.

Holds the projected shifted Tikhonov problem

    min_y ||T y - c||^2 + lambda ||R y - d||^2        (+ a constant c_perp^2)

together with its solution, its residual as a function of lambda, and the two
regularization-parameter rules (discrepancy principle and the oracle that
minimizes the true error).
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "ProjectedProblem",
    "economic_qr",
    "solve_projected",
    "projected_residual_norm",
    "parametric_solver",
    "discrepancy_lambda",
    "optimal_lambda",
]

LAMBDA_MIN = 1e-12
LAMBDA_MAX = 1e12
_BISECT_MAX = 200


@dataclass
class ProjectedProblem:
    """Projected operator T, projected residual c, triangular reg factor R and
    reg target d.

    ``d`` is the target of the regularization block: the solution minimizes
    ``||T y - c||^2 + lambda ||R y - d||^2``.  ``c_perp`` is the norm of the
    data-residual component outside the projected image space (zero for the
    flexible decompositions, where the residual lies in the basis by
    construction).
    """

    T: np.ndarray
    c: np.ndarray
    R: np.ndarray
    d: np.ndarray
    c_perp: float = 0.0

    @property
    def i(self):
        return self.T.shape[1]


def economic_qr(B):
    """Thin QR of a tall-skinny matrix: B = Q R with Q orthonormal columns."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] < B.shape[1] or B.shape[1] < 1:
        raise ValueError("economic_qr expects an n-by-i matrix with n >= i >= 1")
    return np.linalg.qr(B, mode="reduced")


def solve_projected(pp, lam):
    """Minimize ``||T y - c||^2 + lam ||R y - d||^2`` by stacked least squares.

    Rank-deficient stacked systems fall back to the minimum-norm solution;
    with ``lam == 0`` this situation is additionally flagged with a warning.
    """
    if lam < 0.0:
        raise ValueError("lambda must be nonnegative")
    if lam == 0.0:
        y, _, rank, _ = np.linalg.lstsq(pp.T, pp.c, rcond=None)
        if rank < pp.i:
            warnings.warn(
                "rank-deficient projected problem at lambda = 0; "
                "minimum-norm solution returned",
                stacklevel=2,
            )
        return y
    root = math.sqrt(lam)
    stacked = np.vstack([pp.T, root * pp.R])
    rhs = np.concatenate([pp.c, root * pp.d])
    y, _, _, _ = np.linalg.lstsq(stacked, rhs, rcond=None)
    return y


def projected_residual_norm(pp, y):
    """Data-fit residual norm ``||T y - c||`` (plus any out-of-space part)."""
    return math.hypot(float(np.linalg.norm(pp.T @ y - pp.c)), pp.c_perp)


class _ParametricSolver:
    """Solves the projected problem for many lambda values cheaply.

    When R is safely invertible the problem is reduced with the substitution
    u = R y and one SVD, after which each lambda costs O(i).  Otherwise every
    call falls back to the stacked least-squares path.
    """

    def __init__(self, pp):
        self.pp = pp
        self._fast = False
        i = pp.i
        if i == 0:
            return
        rdiag = np.abs(np.diag(pp.R))
        if rdiag.min() > 1e-12 * max(rdiag.max(), 1e-300):
            G = scipy.linalg.solve_triangular(pp.R, pp.T.T, trans="T").T
            Ug, s, Vgt = np.linalg.svd(G, full_matrices=False)
            self._s = s
            self._beta = Ug.T @ pp.c
            self._delta = Vgt @ pp.d
            self._Vg = Vgt.T
            self._rho2 = max(float(pp.c @ pp.c - self._beta @ self._beta), 0.0)
            self._fast = True

    def _coeffs(self, lam):
        denom = self._s ** 2 + lam
        num = self._s * self._beta + lam * self._delta
        return np.divide(num, denom, out=np.zeros_like(num), where=denom > 0.0)

    def solve(self, lam):
        if not self._fast:
            return solve_projected(self.pp, lam)
        w = self._coeffs(lam)
        return scipy.linalg.solve_triangular(self.pp.R, self._Vg @ w)

    def solve_many(self, lams):
        """Solutions for a whole vector of lambdas, as the columns of an
        (i, len(lams)) array."""
        lams = np.asarray(lams, dtype=float)
        if not self._fast:
            return np.column_stack([solve_projected(self.pp, lam) for lam in lams])
        denom = self._s[:, None] ** 2 + lams[None, :]
        num = (self._s * self._beta)[:, None] + lams[None, :] * self._delta[:, None]
        W = np.divide(num, denom, out=np.zeros_like(num), where=denom > 0.0)
        return scipy.linalg.solve_triangular(self.pp.R, self._Vg @ W)

    def residual(self, lam):
        if not self._fast:
            return projected_residual_norm(self.pp, solve_projected(self.pp, lam))
        w = self._coeffs(lam)
        fit2 = float(np.sum((self._s * w - self._beta) ** 2)) + self._rho2
        return math.sqrt(max(fit2, 0.0) + self.pp.c_perp ** 2)


def parametric_solver(pp):
    return _ParametricSolver(pp)


def discrepancy_lambda(pp, b_norm, nl, tau_dp, solver=None):
    """Discrepancy-principle parameter: residual(lambda) = nl * tau_dp * b_norm.

    The residual is nondecreasing in lambda, so the root is located by
    bracketing plus bisection on log10(lambda) in [-12, 12].  Returns
    ``(lam, attained)``; when no root exists in the bracket the result is
    ``(0.0, False)``, which minimizes the discrepancy gap when the residual
    already sits above the target at lambda = 0.
    """
    if nl < 0.0:
        raise ValueError("noise level must be nonnegative")
    if tau_dp <= 0.0:
        raise ValueError("tau_dp must be positive")
    if b_norm <= 0.0:
        raise ValueError("b_norm must be positive")
    if solver is None:
        solver = _ParametricSolver(pp)
    target = nl * tau_dp * b_norm
    tol = 1e-8 * target + 1e-14 * b_norm

    r0 = solver.residual(0.0)
    if abs(r0 - target) <= tol:
        return 0.0, True
    if r0 > target:
        return 0.0, False

    if solver.residual(LAMBDA_MIN) >= target:
        # Root below the log bracket: bisect linearly on [0, LAMBDA_MIN].
        lo, hi = 0.0, LAMBDA_MIN
        for _ in range(_BISECT_MAX):
            mid = 0.5 * (lo + hi)
            rm = solver.residual(mid)
            if abs(rm - target) <= tol:
                return mid, True
            if rm < target:
                lo = mid
            else:
                hi = mid
        return hi, abs(solver.residual(hi) - target) <= tol

    if solver.residual(LAMBDA_MAX) < target:
        return 0.0, False

    lo_exp, hi_exp = math.log10(LAMBDA_MIN), math.log10(LAMBDA_MAX)
    for _ in range(_BISECT_MAX):
        mid_exp = 0.5 * (lo_exp + hi_exp)
        lam = 10.0 ** mid_exp
        rm = solver.residual(lam)
        if abs(rm - target) <= tol:
            return lam, True
        if rm < target:
            lo_exp = mid_exp
        else:
            hi_exp = mid_exp
    lam = 10.0 ** (0.5 * (lo_exp + hi_exp))
    return lam, abs(solver.residual(lam) - target) <= tol


def _golden_min(f, lo, hi, iters=80):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def optimal_lambda(pp, Z, x_prev, x_true, grid_points=601, return_info=False):
    """Oracle parameter: minimize ``||x_prev + Z y(lam) - x_true||``.

    Benchmarking aid only; it needs the true solution.  The error is sampled
    on ``{0} + logspace(-12, 12)`` and every sampled local minimum is refined
    by golden section in log space.
    """
    solver = _ParametricSolver(pp)
    base = x_prev - x_true

    def err(lam):
        return float(np.linalg.norm(base + Z @ solver.solve(lam)))

    lams = np.concatenate([[0.0], np.logspace(-12.0, 12.0, grid_points)])
    X = Z @ solver.solve_many(lams) + base[:, None]
    errs = np.linalg.norm(X, axis=0)

    best_idx = int(np.argmin(errs))
    best_lam, best_err = float(lams[best_idx]), float(errs[best_idx])
    degenerate = float(errs.max() - errs.min()) <= 1e-14 * (1.0 + best_err)
    if not degenerate:
        interior = [
            j
            for j in range(1, len(lams) - 1)
            if errs[j] <= errs[j - 1] and errs[j] <= errs[j + 1]
        ]
        for j in interior:
            lo = math.log10(lams[j - 1]) if lams[j - 1] > 0 else math.log10(LAMBDA_MIN) - 1.0
            hi = math.log10(lams[j + 1])
            lam_ref, err_ref = _golden_min(lambda t: err(10.0 ** t), lo, hi)
            if err_ref < best_err:
                best_lam, best_err = 10.0 ** lam_ref, err_ref
    if return_info:
        return best_lam, {"error": best_err, "degenerate": degenerate}
    return best_lam
