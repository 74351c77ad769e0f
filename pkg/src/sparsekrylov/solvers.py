"""Solver drivers: iteratively refined restarted flexible Krylov methods
(plain and corrected), the reweighted/hybrid/flexible baselines, the
inner-outer reweighting scheme, and FISTA.

Each solve owns its state; several solves may run concurrently over shared
immutable operators.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .krylov import (
    BreakdownError,
    CorrectedRestartDegenerate,
    _Columns,
    _orthogonalize,
    corrected_restart,
    fa_init,
    fa_step,
    fgk_init,
    fgk_step,
    plain_restart,
)
from .projected import (
    ProjectedProblem,
    discrepancy_lambda,
    economic_qr,
    optimal_lambda,
    parametric_solver,
)
from .regularization import (
    RegOperator,
    WeightVector,
    apply_weighted_reg,
    irn_weights,
)

__all__ = [
    "ARNOLDI_METHODS",
    "GOLUB_KAHAN_METHODS",
    "ALL_METHODS",
    "SolverConfig",
    "RunHistory",
    "functional_T",
    "restart_criterion",
    "solve",
    "solve_ir",
    "solve_cir",
    "solve_irw",
    "solve_hybrid_flexible",
    "solve_flexible",
    "solve_hybrid_standard",
    "solve_irn_inner_outer",
    "solve_fista",
]

ARNOLDI_METHODS = frozenset({
    "ir_fgmres", "cir_fgmres", "irw_fgmres", "hybrid_fgmres",
    "flexible_fgmres", "hybrid_gmres", "irn_gmres",
})
GOLUB_KAHAN_METHODS = frozenset({
    "ir_flsqr", "cir_flsqr", "irw_flsqr", "hybrid_flsqr",
    "flexible_flsqr", "hybrid_lsqr", "irn_lsqr",
})
ALL_METHODS = tuple(sorted(ARNOLDI_METHODS | GOLUB_KAHAN_METHODS | {"fista"}))

LAMBDA_RULES = ("discrepancy", "optimal", "fixed")

_RES_CONVERGED = 1e-14


@dataclass
class SolverConfig:
    """Options shared by every solver.

    ``lambda_value`` is used by the ``fixed`` rule (and as the FISTA
    parameter).  ``restart_tol <= 0`` disables stabilization-triggered
    restarts; ``max_basis_vectors = None`` leaves the basis uncapped.
    ``tau_smooth = None`` resolves to ``1e-4 * max|r0|`` at solve time.
    ``stop_x_tol <= 0`` disables the iterate-stabilization stop.
    """

    method: str
    p: float = 1.0
    tau_smooth: float | None = None
    lambda_rule: str = "discrepancy"
    lambda_value: float = 0.0
    tau_dp: float = 1.0
    noise_level: float = 0.0
    restart_tol: float = 0.1
    max_basis_vectors: int | None = None
    kmax: int = 100
    x0: np.ndarray | None = None
    seed: int = 0
    stop_x_tol: float = 1e-8
    corrected_seed: str = "image"
    fista_monotone: bool = True

    def validate(self, rows, cols):
        if self.method not in ALL_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.method in ARNOLDI_METHODS and rows != cols:
            raise ValueError(f"{self.method} requires a square operator")
        if not 0.0 < self.p <= 2.0:
            raise ValueError("p must lie in (0, 2]")
        if self.tau_smooth is not None and self.tau_smooth <= 0.0:
            raise ValueError("tau_smooth must be positive")
        if self.lambda_rule not in LAMBDA_RULES:
            raise ValueError(f"unknown lambda_rule {self.lambda_rule!r}")
        if self.lambda_rule == "fixed" and self.lambda_value < 0.0:
            raise ValueError("fixed lambda must be nonnegative")
        if self.tau_dp <= 0.0:
            raise ValueError("tau_dp must be positive")
        if self.noise_level < 0.0:
            raise ValueError("noise_level must be nonnegative")
        if self.max_basis_vectors is not None and self.max_basis_vectors < 1:
            raise ValueError("max_basis_vectors must be positive")
        if self.kmax < 1:
            raise ValueError("kmax must be positive")
        if self.corrected_seed not in ("image", "solution"):
            raise ValueError("corrected_seed must be 'image' or 'solution'")
        if self.x0 is not None and np.asarray(self.x0).shape != (cols,):
            raise ValueError("x0 has the wrong length")


@dataclass
class RunHistory:
    """Per-iteration record of a solver run.

    ``residual_norm`` is always the independently recomputed full-space
    residual; ``projected_residual`` is the solver's small-space value (nan
    when the method has none).  The iterate trajectory is kept so that
    functionals and weights can be re-evaluated after the fact.
    """

    rel_error: list = field(default_factory=list)
    residual_norm: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)
    subspace_dim: list = field(default_factory=list)
    restarted: list = field(default_factory=list)
    corrected_fallback: list = field(default_factory=list)
    functional_T: list = field(default_factory=list)
    projected_residual: list = field(default_factory=list)
    dp_attained: list = field(default_factory=list)
    x: list = field(default_factory=list)
    status: str = "max_iterations"
    peak_basis_columns: int = 0

    def append(self, *, rel_error, residual_norm, lam, subspace_dim, restarted,
               corrected_fallback, functional_T, projected_residual,
               dp_attained, x):
        self.rel_error.append(rel_error)
        self.residual_norm.append(residual_norm)
        self.lambdas.append(lam)
        self.subspace_dim.append(subspace_dim)
        self.restarted.append(restarted)
        self.corrected_fallback.append(corrected_fallback)
        self.functional_T.append(functional_T)
        self.projected_residual.append(projected_residual)
        self.dp_attained.append(dp_attained)
        self.x.append(np.array(x))

    def __len__(self):
        return len(self.residual_norm)

    @property
    def restart_count(self):
        return int(sum(bool(r) for r in self.restarted))


def functional_T(A, b, L, x, p, tau_smooth, lam, weights=None):
    """Sparsity functional ``||Ax - b||^2 + lam ||W~(Lx) L x||^2``.

    With ``weights`` given, the fixed-weight quadratic
    ``||Ax - b||^2 + lam ||W L x||^2`` is evaluated instead.
    """
    x = np.asarray(x, dtype=float)
    fit = float(np.sum((A.apply(x) - b) ** 2))
    if lam == 0.0:
        return fit
    v = L.apply(x)
    if weights is None:
        reg = float(np.sum((v ** 2 + tau_smooth ** 2) ** ((p - 2.0) / 2.0) * v ** 2))
    else:
        reg = float(np.sum((weights.w * v) ** 2))
    return fit + lam * reg


def restart_criterion(history, restart_tol, max_basis_vectors=None):
    """True when the basis hit its cap, or when the last two consecutive
    relative changes of lambda since the previous restart are both within
    tolerance (needs three positive values)."""
    if len(history) == 0:
        return False
    if (max_basis_vectors is not None
            and history.subspace_dim[-1] >= max_basis_vectors):
        return True
    if restart_tol is None or restart_tol <= 0.0:
        return False
    lams = []
    for lam, restarted in zip(reversed(history.lambdas),
                              reversed(history.restarted)):
        lams.append(lam)
        if restarted:
            break
    if len(lams) < 3:
        return False
    lk, lk1, lk2 = lams[0], lams[1], lams[2]
    if lk1 <= 0.0 or lk2 <= 0.0:
        return False
    return (abs(lk - lk1) / lk1 <= restart_tol
            and abs(lk1 - lk2) / lk2 <= restart_tol)


def _resolve_tau(cfg, r0):
    if cfg.tau_smooth is not None:
        return cfg.tau_smooth
    scale = float(np.max(np.abs(r0)))
    return 1e-4 * max(scale, 1e-30)


def _select_lambda(cfg, pp, Z, x_base, x_true, b_norm, solver=None):
    """Returns (lam, dp_attained_or_None) per the configured rule."""
    if cfg.lambda_rule == "fixed":
        return cfg.lambda_value, None
    if cfg.lambda_rule == "discrepancy":
        return discrepancy_lambda(pp, b_norm, cfg.noise_level, cfg.tau_dp,
                                  solver=solver)
    if x_true is None:
        raise ValueError("lambda_rule='optimal' requires x_true")
    return optimal_lambda(pp, Z, x_base, x_true), None


def _init_state(kind, r):
    return fa_init(r) if kind == "arnoldi" else fgk_init(r)


def _step(state, A, weights, L):
    if state.kind == "arnoldi":
        fa_step(state, A, weights, L)
    else:
        fgk_step(state, A, weights, L)


def _record(hist, *, x, x_true, r_norm, lam, dim, restarted, fallback, T_val,
            proj_res, attained, basis_cols):
    rel = (float(np.linalg.norm(x - x_true) / np.linalg.norm(x_true))
           if x_true is not None else float("nan"))
    hist.append(rel_error=rel, residual_norm=r_norm, lam=lam,
                subspace_dim=dim, restarted=restarted,
                corrected_fallback=fallback, functional_T=T_val,
                projected_residual=proj_res, dp_attained=attained, x=x)
    hist.peak_basis_columns = max(hist.peak_basis_columns, basis_cols)


def _run_projected_family(cfg, A, b, L, x_true, family):
    """Shared driver for the flexible-decomposition solvers.

    family: "ir" / "cir" (incremental with restarts), "irw", "hybrid",
    "flexible", "hybrid_std" (direct, no restarts).
    """
    cfg.validate(A.rows, A.cols)
    n = A.cols
    b = np.asarray(b, dtype=float)
    b_norm = float(np.linalg.norm(b))
    x = (np.zeros(n) if cfg.x0 is None
         else np.asarray(cfg.x0, dtype=float).copy())
    r = b - A.apply(x)
    hist = RunHistory()
    if np.linalg.norm(r) <= _RES_CONVERGED * max(b_norm, 1.0):
        hist.status = "converged"
        return x, hist

    tau = _resolve_tau(cfg, r)
    incremental = family in ("ir", "cir")
    flexible_weights = family != "hybrid_std"
    reg_block = {"ir": "weighted", "cir": "weighted", "irw": "weighted",
                 "hybrid": "identity", "hybrid_std": "identity",
                 "flexible": None}[family]
    kind = "arnoldi" if cfg.method in ARNOLDI_METHODS else "golub_kahan"

    weights = WeightVector.identity(L.apply(x).shape[0])
    r0 = r.copy()
    state = _init_state(kind, r)
    steps_since_restart = 0
    stall = 0

    for _ in range(cfg.kmax):
        restarted_flag = False
        fallback_flag = False
        if incremental and (state.exhausted
                            or restart_criterion(hist, cfg.restart_tol,
                                                 cfg.max_basis_vectors)):
            if family == "cir" and np.linalg.norm(x) > 0.0:
                try:
                    state = corrected_restart(x, r, A, kind,
                                              seed_projection=cfg.corrected_seed)
                except CorrectedRestartDegenerate:
                    state = plain_restart(r, kind)
                    fallback_flag = True
            else:
                state = plain_restart(r, kind)
            restarted_flag = True
            steps_since_restart = 0

        final_column = False
        try:
            _step(state, A, weights, L)
        except BreakdownError as err:
            if err.extended:
                final_column = True
            elif incremental:
                if steps_since_restart == 0:
                    hist.status = "stagnated"
                    break
                state = plain_restart(r, kind)
                restarted_flag = True
                steps_since_restart = 0
                try:
                    _step(state, A, weights, L)
                except BreakdownError as err2:
                    if not err2.extended:
                        hist.status = "stagnated"
                        break
                    final_column = True
            else:
                hist.status = "breakdown"
                break
        steps_since_restart += 1

        Z = state.Z
        X = state.projection_basis
        T = state.T_matrix
        r_for_fit = r if incremental else r0
        c = X.T @ r_for_fit
        x_base = x if incremental else (cfg.x0 if cfg.x0 is not None
                                        else np.zeros(n))
        if reg_block == "weighted":
            Q, R = economic_qr(apply_weighted_reg(weights, L, Z))
            d = -(Q.T @ apply_weighted_reg(weights, L, np.asarray(x_base)))
        else:
            R = np.eye(state.i)
            d = np.zeros(state.i)
        pp = ProjectedProblem(T=T, c=c, R=R, d=d)
        psolver = parametric_solver(pp)

        if family == "flexible":
            lam, attained = 0.0, None
        else:
            lam, attained = _select_lambda(cfg, pp, Z, x_base, x_true,
                                           b_norm, solver=psolver)
        y = psolver.solve(lam)
        proj_res = psolver.residual(lam)

        x_prev = x
        x = np.asarray(x_base) + Z @ y
        if flexible_weights:
            weights = irn_weights(L.apply(x), cfg.p, tau)
        r = b - A.apply(x)
        r_norm = float(np.linalg.norm(r))
        T_val = float(r_norm ** 2) if lam == 0.0 else functional_T(
            A, b, L, x, cfg.p, tau, lam)
        _record(hist, x=x, x_true=x_true, r_norm=r_norm, lam=lam,
                dim=state.i, restarted=restarted_flag, fallback=fallback_flag,
                T_val=T_val, proj_res=proj_res, attained=attained,
                basis_cols=state.image_basis_count)

        if final_column and not incremental:
            hist.status = "breakdown"
            break
        if r_norm <= _RES_CONVERGED * max(b_norm, 1.0):
            hist.status = "converged"
            break
        x_change = float(np.linalg.norm(x - x_prev))
        x_scale = float(np.linalg.norm(x_prev))
        if cfg.stop_x_tol > 0.0 and x_scale > 0.0 \
                and x_change <= cfg.stop_x_tol * x_scale:
            stall += 1
            if stall >= 2:
                hist.status = "converged"
                break
        else:
            stall = 0
        if (not incremental and cfg.max_basis_vectors is not None
                and state.i >= cfg.max_basis_vectors):
            hist.status = "basis_cap"
            break
    return x, hist


def _lanczos_gk_step(apply_fun, rmatvec_fun, Ucols, Vcols):
    """One fully reorthogonalized Golub-Kahan bidiagonalization step on a
    stacked operator given as a pair of callables.  Returns False when the
    recurrence breaks down."""
    u = Ucols.col(Ucols.k - 1)
    w = rmatvec_fun(u)
    pre = np.linalg.norm(w)
    _, w = _orthogonalize(w, Vcols.view())
    alpha = np.linalg.norm(w)
    if alpha <= max(1e-12 * pre, 1e-300):
        return False
    v = w / alpha
    Vcols.push(v)
    q = apply_fun(v)
    _, q = _orthogonalize(q, Ucols.view())
    beta = np.linalg.norm(q)
    if beta == 0.0:
        return True  # v committed; image space exhausted
    Ucols.push(q / beta)
    return True


def _run_irn(cfg, A, b, L, x_true, inner_kind):
    """Inner-outer reweighting: weights frozen inside each inner solve.

    inner_kind "gmres": preconditioned Arnoldi on (A, r) with the frozen
    priorconditioner and the shifted projected problem.  inner_kind "lsqr":
    bidiagonalization of the stacked operator [A; sqrt(lam) W L] against
    [r; -sqrt(lam) W L x], projected through thin QR factorizations of the
    two blocks.  The regularization parameter is chosen on the inner
    projected problem; the stacked operator uses the most recent value.
    """
    cfg.validate(A.rows, A.cols)
    n = A.cols
    b = np.asarray(b, dtype=float)
    b_norm = float(np.linalg.norm(b))
    x = (np.zeros(n) if cfg.x0 is None
         else np.asarray(cfg.x0, dtype=float).copy())
    r = b - A.apply(x)
    hist = RunHistory()
    if np.linalg.norm(r) <= _RES_CONVERGED * max(b_norm, 1.0):
        hist.status = "converged"
        return x, hist
    tau = _resolve_tau(cfg, r)
    weights = WeightVector.identity(L.apply(x).shape[0])
    lam_last = cfg.lambda_value if cfg.lambda_rule == "fixed" else 0.0

    total = 0
    outer = 0
    x_outer_prev = x.copy()
    outer_stall = 0
    while total < cfg.kmax:
        outer += 1
        if np.linalg.norm(r) <= _RES_CONVERGED * max(b_norm, 1.0):
            hist.status = "converged"
            break
        x_hat = apply_weighted_reg(weights, L, x)
        x_cand = x

        if inner_kind == "gmres":
            state = fa_init(r)
        else:
            root = math.sqrt(lam_last) if lam_last > 0.0 else 0.0
            r_hat = np.concatenate([r, -root * x_hat])
            if np.linalg.norm(r_hat) == 0.0:
                hist.status = "converged"
                break

            def stack_apply(v, _root=root):
                return np.concatenate([A.apply(v),
                                       _root * apply_weighted_reg(weights, L, v)])

            def stack_rmatvec(u, _root=root):
                top = A.apply_adjoint(u[: A.rows])
                if _root == 0.0:
                    return top
                return top + _root * _wl_adjoint(weights, L, u[A.rows:])

            Ucols = _Columns(A.rows + weights.size)
            Ucols.push(r_hat / np.linalg.norm(r_hat))
            Vcols = _Columns(n)
            av_cols = _Columns(A.rows)
            wl_cols = _Columns(weights.size)

        inner_done = False
        inner_rows = 0
        while not inner_done and total < cfg.kmax:
            restarted_flag = outer > 1 and (
                (inner_kind == "gmres" and state.i == 0)
                or (inner_kind == "lsqr" and Vcols.k == 0))
            if inner_kind == "gmres":
                try:
                    fa_step(state, A, weights, L)
                except BreakdownError as err:
                    if not err.extended:
                        break
                    inner_done = True
                Zin = state.Z
                c = state.V.T @ r
                c_perp = 0.0
                T = state.H
                basis_cols = state.image_basis_count
                dim = state.i
            else:
                before = Vcols.k
                ok = _lanczos_gk_step(stack_apply, stack_rmatvec, Ucols, Vcols)
                if not ok or Vcols.k == before:
                    break
                vnew = Vcols.col(Vcols.k - 1)
                av_cols.push(A.apply(vnew))
                wl_cols.push(apply_weighted_reg(weights, L, vnew))
                Zin = Vcols.view()
                Qa, Ra = np.linalg.qr(av_cols.view(), mode="reduced")
                ct = Qa.T @ r
                c_perp = float(np.linalg.norm(r - Qa @ ct))
                T, c = Ra, ct
                basis_cols = Ucols.k
                dim = Vcols.k
                if Ucols.k == Vcols.k:  # image side exhausted
                    inner_done = True

            if inner_kind == "gmres":
                Q, R = economic_qr(apply_weighted_reg(weights, L, Zin))
            else:
                Q, R = np.linalg.qr(wl_cols.view(), mode="reduced")
            d = -(Q.T @ x_hat)
            pp = ProjectedProblem(T=T, c=c, R=R, d=d, c_perp=c_perp)
            psolver = parametric_solver(pp)
            lam, attained = _select_lambda(cfg, pp, Zin, x, x_true, b_norm,
                                           solver=psolver)
            y = psolver.solve(lam)
            proj_res = psolver.residual(lam)
            x_cand = x + Zin @ y
            lam_last = lam
            r_norm = float(np.linalg.norm(b - A.apply(x_cand)))
            T_val = float(r_norm ** 2) if lam == 0.0 else functional_T(
                A, b, L, x_cand, cfg.p, tau, lam)
            _record(hist, x=x_cand, x_true=x_true, r_norm=r_norm, lam=lam,
                    dim=dim, restarted=restarted_flag, fallback=False,
                    T_val=T_val, proj_res=proj_res, attained=attained,
                    basis_cols=basis_cols)
            total += 1
            inner_rows += 1
            if restart_criterion(hist, cfg.restart_tol, cfg.max_basis_vectors):
                inner_done = True

        if inner_rows == 0:
            # inner recurrence stalled before producing any direction
            hist.status = "stagnated"
            break
        # Outer update with the last inner solution, then refresh weights.
        x = x_cand
        r = b - A.apply(x)
        weights = irn_weights(L.apply(x), cfg.p, tau)
        change = float(np.linalg.norm(x - x_outer_prev))
        scale = float(np.linalg.norm(x_outer_prev))
        if cfg.stop_x_tol > 0.0 and scale > 0.0 \
                and change <= cfg.stop_x_tol * scale:
            outer_stall += 1
            if outer_stall >= 2:
                hist.status = "converged"
                break
        else:
            outer_stall = 0
        x_outer_prev = x.copy()
        if np.linalg.norm(r) <= _RES_CONVERGED * max(b_norm, 1.0):
            hist.status = "converged"
            break
    return x, hist


def _wl_adjoint(weights, L, u):
    """(W L)^T u = L^T (W u)."""
    wu = weights.w * u
    if L.kind == "identity":
        return wu
    # first difference transpose: (L^T y)_i = y_i - y_{i+1}, last entry y_n
    out = wu.copy()
    out[:-1] -= wu[1:]
    return out


def _soft_threshold(v, thresh):
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def _run_fista(cfg, A, b, lam, x_true):
    """FISTA on ``min ||Ax - b||^2 + lam ||x||_1`` with a monotone safeguard.

    The plain recursion can let the objective ripple; when
    ``fista_monotone`` is set (the default) the iterate only moves when the
    objective does not increase, with the momentum kept on the proximal
    point.
    """
    n = A.cols
    b = np.asarray(b, dtype=float)
    if lam < 0.0:
        raise ValueError("lambda must be nonnegative")
    x = (np.zeros(n) if cfg.x0 is None
         else np.asarray(cfg.x0, dtype=float).copy())
    hist = RunHistory()
    tau = _resolve_tau(cfg, b - A.apply(x))

    # Lipschitz constant of the gradient of ||Ax-b||^2 is 2 sigma_max^2.
    rng = np.random.Generator(np.random.Philox(key=int(cfg.seed)))
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    for _ in range(50):
        w = A.apply_adjoint(A.apply(v))
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw
    sigma2 = float(np.linalg.norm(A.apply(v)) ** 2)
    lip = 2.0 * 1.05 * max(sigma2, 1e-30)

    def objective(z):
        return float(np.sum((A.apply(z) - b) ** 2) + lam * np.sum(np.abs(z)))

    y = x.copy()
    t = 1.0
    obj = objective(x)
    stall = 0
    L_id = RegOperator.identity(n)
    for _ in range(cfg.kmax):
        grad = 2.0 * A.apply_adjoint(A.apply(y) - b)
        z = _soft_threshold(y - grad / lip, lam / lip)
        obj_z = objective(z)
        x_prev, obj_prev = x, obj
        if cfg.fista_monotone and obj_z > obj_prev:
            x, obj = x_prev, obj_prev
        else:
            x, obj = z, obj_z
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        y = x + (t / t_next) * (z - x) + ((t - 1.0) / t_next) * (x - x_prev)
        t = t_next

        r_norm = float(np.linalg.norm(b - A.apply(x)))
        T_val = functional_T(A, b, L_id, x, 1.0, tau, lam)
        _record(hist, x=x, x_true=x_true, r_norm=r_norm, lam=lam, dim=0,
                restarted=False, fallback=False, T_val=T_val,
                proj_res=float("nan"), attained=None, basis_cols=0)
        change = float(np.linalg.norm(x - x_prev))
        scale = float(np.linalg.norm(x_prev))
        if cfg.stop_x_tol > 0.0 and scale > 0.0 \
                and change <= cfg.stop_x_tol * scale:
            stall += 1
            if stall >= 2:
                hist.status = "converged"
                break
        else:
            stall = 0
    return x, hist


def _default_L(A, L):
    return RegOperator.identity(A.cols) if L is None else L


def solve_ir(config, A, b, L=None, x_true=None):
    """Iteratively refined restarted flexible method (plain warm restarts)."""
    if config.method not in ("ir_fgmres", "ir_flsqr"):
        raise ValueError("solve_ir handles ir_fgmres / ir_flsqr")
    return _run_projected_family(config, A, b, _default_L(A, L), x_true, "ir")


def solve_cir(config, A, b, L=None, x_true=None):
    """Corrected variant: restarts augment the space with the previous
    solution; degenerate augmentation falls back to a plain restart."""
    if config.method not in ("cir_fgmres", "cir_flsqr"):
        raise ValueError("solve_cir handles cir_fgmres / cir_flsqr")
    return _run_projected_family(config, A, b, _default_L(A, L), x_true, "cir")


def solve_irw(config, A, b, L=None, x_true=None):
    """Reweighted flexible method without restarts (regularize-then-project)."""
    if config.method not in ("irw_fgmres", "irw_flsqr"):
        raise ValueError("solve_irw handles irw_fgmres / irw_flsqr")
    return _run_projected_family(config, A, b, _default_L(A, L), x_true, "irw")


def solve_hybrid_flexible(config, A, b, L=None, x_true=None):
    """Flexible basis with a Tikhonov term on the projected coefficients."""
    if config.method not in ("hybrid_fgmres", "hybrid_flsqr"):
        raise ValueError("solve_hybrid_flexible handles hybrid_fgmres / hybrid_flsqr")
    return _run_projected_family(config, A, b, _default_L(A, L), x_true, "hybrid")


def solve_flexible(config, A, b, L=None, x_true=None):
    """Flexible basis with no explicit regularization (early stopping only)."""
    if config.method not in ("flexible_fgmres", "flexible_flsqr"):
        raise ValueError("solve_flexible handles flexible_fgmres / flexible_flsqr")
    return _run_projected_family(config, A, b, _default_L(A, L), x_true,
                                 "flexible")


def solve_hybrid_standard(config, A, b, L=None, x_true=None):
    """Standard hybrid method: weights held at identity throughout."""
    if config.method not in ("hybrid_gmres", "hybrid_lsqr"):
        raise ValueError("solve_hybrid_standard handles hybrid_gmres / hybrid_lsqr")
    return _run_projected_family(config, A, b, _default_L(A, L), x_true,
                                 "hybrid_std")


def solve_irn_inner_outer(config, A, b, L=None, x_true=None):
    """Classic inner-outer reweighting with a fresh inner space per outer
    iteration."""
    if config.method not in ("irn_gmres", "irn_lsqr"):
        raise ValueError("solve_irn_inner_outer handles irn_gmres / irn_lsqr")
    inner = "gmres" if config.method == "irn_gmres" else "lsqr"
    return _run_irn(config, A, b, _default_L(A, L), x_true, inner)


def solve_fista(config, A, b, lambda_fixed=None, x_true=None):
    """FISTA baseline for ``min ||Ax - b||^2 + lam ||x||_1`` (identity L)."""
    if config.method != "fista":
        raise ValueError("solve_fista handles method 'fista'")
    lam = config.lambda_value if lambda_fixed is None else lambda_fixed
    return _run_fista(config, A, b, lam, x_true)


_DISPATCH = {
    "ir_fgmres": solve_ir, "ir_flsqr": solve_ir,
    "cir_fgmres": solve_cir, "cir_flsqr": solve_cir,
    "irw_fgmres": solve_irw, "irw_flsqr": solve_irw,
    "hybrid_fgmres": solve_hybrid_flexible, "hybrid_flsqr": solve_hybrid_flexible,
    "flexible_fgmres": solve_flexible, "flexible_flsqr": solve_flexible,
    "hybrid_gmres": solve_hybrid_standard, "hybrid_lsqr": solve_hybrid_standard,
    "irn_gmres": solve_irn_inner_outer, "irn_lsqr": solve_irn_inner_outer,
}


def solve(config, A, b, L=None, x_true=None):
    """Dispatch on ``config.method``; returns ``(x_final, RunHistory)``."""
    if config.method == "fista":
        if L is not None and L.kind != "identity":
            raise ValueError("fista supports only the identity regularizer")
        return solve_fista(config, A, b, x_true=x_true)
    try:
        fun = _DISPATCH[config.method]
    except KeyError:
        raise ValueError(f"unknown method {config.method!r}") from None
    return fun(config, A, b, L=L, x_true=x_true)
