"""Flexible Arnoldi and flexible Golub-Kahan decompositions with plain and
solution-augmented (corrected) restarts.

A state owns growing bases stored column-major with doubling capacity.  Step
functions mutate the state in place.  On breakdown a ``BreakdownError`` is
raised and the state is either untouched or finalized (``exhausted``); the
decomposition relations always keep holding.
"""

import numpy as np

from .regularization import apply_priorconditioner

__all__ = [
    "BreakdownError",
    "CorrectedRestartDegenerate",
    "FlexibleArnoldiState",
    "FlexibleGolubKahanState",
    "fa_init",
    "fa_step",
    "fgk_init",
    "fgk_step",
    "plain_restart",
    "corrected_restart",
]

_BREAKDOWN_REL = 1e-12
_BREAKDOWN_FLOOR = 1e-300


class BreakdownError(RuntimeError):
    """A normalization coefficient vanished; the basis cannot be extended.

    ``extended`` is True when the step still committed a final usable search
    direction (lucky breakdown), in which case the caller may solve one more
    projected problem before restarting or stopping.  ``values`` carries the
    quantities computed before the breakdown, for inspection.
    """

    def __init__(self, stage, extended, values=None):
        super().__init__(f"basis breakdown ({stage})")
        self.stage = stage
        self.extended = extended
        self.values = values or {}


class CorrectedRestartDegenerate(RuntimeError):
    """Corrected restart cannot build its two seed vectors; fall back to a
    plain restart."""


class _Columns:
    """Column-major growable matrix; capacity doubles as columns are pushed."""

    def __init__(self, n=None):
        self.n = n
        self.k = 0
        self._buf = None if n is None else np.zeros((n, 8), order="F")

    def push(self, col):
        col = np.asarray(col, dtype=float)
        if self._buf is None:
            self.n = col.shape[0]
            self._buf = np.zeros((self.n, 8), order="F")
        if self.k == self._buf.shape[1]:
            grown = np.zeros((self.n, 2 * self._buf.shape[1]), order="F")
            grown[:, : self.k] = self._buf
            self._buf = grown
        self._buf[:, self.k] = col
        self.k += 1

    def col(self, j):
        return self._buf[:, j]

    def view(self):
        if self._buf is None:
            return np.zeros((0, 0))
        return self._buf[:, : self.k]


def _orthogonalize(q, basis):
    """One modified Gram-Schmidt pass, with a second pass when the norm drops
    below 1/sqrt(2) of its pre-orthogonalization value.  Returns (coeffs, q)."""
    k = basis.shape[1]
    coeffs = np.zeros(k)
    if k == 0:
        return coeffs, q
    pre = np.linalg.norm(q)
    for j in range(k):
        cj = basis[:, j] @ q
        q = q - cj * basis[:, j]
        coeffs[j] += cj
    if np.linalg.norm(q) < pre / np.sqrt(2.0):
        for j in range(k):
            cj = basis[:, j] @ q
            q = q - cj * basis[:, j]
            coeffs[j] += cj
    return coeffs, q


def _cols_to_matrix(cols, nrows):
    out = np.zeros((nrows, len(cols)))
    for j, col in enumerate(cols):
        out[: len(col), j] = col
    return out


class FlexibleArnoldiState:
    """State of a flexible Arnoldi decomposition A Z = V H."""

    kind = "arnoldi"

    def __init__(self, v1, corrected=False):
        v1 = np.asarray(v1, dtype=float)
        self._V = _Columns(v1.shape[0])
        self._V.push(v1)
        self._Z = _Columns(v1.shape[0])
        self._hcols = []
        self.corrected = corrected
        self.exhausted = False

    @property
    def n(self):
        return self._V.n

    @property
    def i(self):
        """Inner dimension: number of stored search directions."""
        return self._Z.k

    @property
    def V(self):
        return self._V.view()

    @property
    def Z(self):
        return self._Z.view()

    @property
    def H(self):
        return _cols_to_matrix(self._hcols, self._V.k)

    # Uniform accessors shared with the Golub-Kahan state.
    @property
    def T_matrix(self):
        return self.H

    @property
    def projection_basis(self):
        return self.V

    @property
    def image_basis_count(self):
        return self._V.k


class FlexibleGolubKahanState:
    """State of a flexible Golub-Kahan decomposition A Z = U M, A^T U = V S.

    After a corrected restart the first column of U is the image of the
    previous solution and is not revisited by the adjoint recurrence, so the
    triangular relation covers ``U[:, u_skip : u_skip + V.shape[1]]``.
    """

    kind = "golub_kahan"

    def __init__(self, u1, corrected=False):
        u1 = np.asarray(u1, dtype=float)
        self._U = _Columns(u1.shape[0])
        self._U.push(u1)
        self._V = _Columns()
        self._Z = _Columns()
        self._mcols = []
        self._scols = []
        self.corrected = corrected
        self.exhausted = False

    @property
    def m(self):
        return self._U.n

    @property
    def n(self):
        return self._V.n

    @property
    def i(self):
        return self._Z.k

    @property
    def U(self):
        return self._U.view()

    @property
    def V(self):
        return self._V.view()

    @property
    def Z(self):
        return self._Z.view()

    @property
    def M(self):
        return _cols_to_matrix(self._mcols, self._U.k)

    @property
    def S(self):
        return _cols_to_matrix(self._scols, self._V.k)

    @property
    def u_skip(self):
        return 1 if self.corrected else 0

    @property
    def T_matrix(self):
        return self.M

    @property
    def projection_basis(self):
        return self.U

    @property
    def image_basis_count(self):
        return self._U.k


def fa_init(r0):
    """Start a flexible Arnoldi decomposition from a nonzero residual."""
    r0 = np.asarray(r0, dtype=float)
    nrm = np.linalg.norm(r0)
    if nrm == 0.0:
        raise ValueError("zero residual: already converged")
    return FlexibleArnoldiState(r0 / nrm)


def fgk_init(r0):
    """Start a flexible Golub-Kahan decomposition from a nonzero residual."""
    r0 = np.asarray(r0, dtype=float)
    nrm = np.linalg.norm(r0)
    if nrm == 0.0:
        raise ValueError("zero residual: already converged")
    return FlexibleGolubKahanState(r0 / nrm)


def _breakdown_tol(pre_norm):
    return max(_BREAKDOWN_REL * pre_norm, _BREAKDOWN_FLOOR)


def fa_step(state, A, weights, L):
    """Extend a flexible Arnoldi state by one priorconditioned direction.

    Appends ``z = (W L)^{-1} v_last`` to Z, a new Hessenberg column, and a
    new orthonormal vector.  Raises ``BreakdownError`` when the orthogonalized
    image vanishes; in that case the final column is still committed
    (``extended=True``) and the state refuses further steps.
    """
    if state.exhausted:
        raise BreakdownError("exhausted", extended=False)
    if A.rows != A.cols:
        raise ValueError("flexible Arnoldi requires a square operator")
    v = state._V.col(state._V.k - 1)
    z = apply_priorconditioner(weights, L, v)
    q = A.apply(z)
    pre = np.linalg.norm(q)
    coeffs, q = _orthogonalize(q, state._V.view())
    hnew = np.linalg.norm(q)
    if hnew <= _breakdown_tol(pre):
        state._Z.push(z)
        state._hcols.append(coeffs.copy())
        state.exhausted = True
        raise BreakdownError(
            "arnoldi_h",
            extended=True,
            values={"z": z, "h": np.append(coeffs, 0.0)},
        )
    state._Z.push(z)
    state._hcols.append(np.append(coeffs, hnew))
    state._V.push(q / hnew)


def fgk_step(state, A, weights, L):
    """Extend a flexible Golub-Kahan state by one priorconditioned direction.

    Orthogonalizes ``A^T u_last`` against V to produce the new v and its
    triangular column, appends ``z = (W L)^{-1} v``, then orthogonalizes
    ``A z`` against U.  Either normalization may break down; the second kind
    still commits a usable search direction (``extended=True``).
    """
    if state.exhausted:
        raise BreakdownError("exhausted", extended=False)
    u = state._U.col(state._U.k - 1)
    w = A.apply_adjoint(u)
    pre_s = np.linalg.norm(w)
    scoef, w = _orthogonalize(w, state._V.view())
    snorm = np.linalg.norm(w)
    if snorm <= _breakdown_tol(pre_s):
        state.exhausted = True
        raise BreakdownError(
            "gk_s", extended=False, values={"s": np.append(scoef, 0.0)}
        )
    vnew = w / snorm
    z = apply_priorconditioner(weights, L, vnew)
    q = A.apply(z)
    pre_m = np.linalg.norm(q)
    mcoef, q = _orthogonalize(q, state._U.view())
    mnorm = np.linalg.norm(q)
    state._V.push(vnew)
    state._scols.append(np.append(scoef, snorm))
    state._Z.push(z)
    if mnorm <= _breakdown_tol(pre_m):
        state._mcols.append(mcoef.copy())
        state.exhausted = True
        raise BreakdownError(
            "gk_m",
            extended=True,
            values={
                "v": vnew,
                "z": z,
                "s": np.append(scoef, snorm),
                "m": np.append(mcoef, 0.0),
            },
        )
    state._mcols.append(np.append(mcoef, mnorm))
    state._U.push(q / mnorm)


def plain_restart(r_current, kind):
    """Discard the stored basis and reseed from the current residual."""
    if kind == "arnoldi":
        return fa_init(r_current)
    if kind == "golub_kahan":
        return fgk_init(r_current)
    raise ValueError(f"unknown decomposition kind: {kind!r}")


def corrected_restart(x_prev, r_current, A, kind, seed_projection="image"):
    """Restart with a basis whose search space contains the previous solution.

    The first search direction is ``x_prev / ||x_prev||``; its image under A
    seeds the orthonormal image basis, and the second image vector is the
    current residual projected orthogonal to the first.  The first column of
    the Hessenberg block therefore has an exact zero in its second row.

    ``seed_projection`` selects which vector builds the residual projector:
    ``"image"`` (the image direction, the default) or ``"solution"`` (the
    normalized previous solution; the residual is then orthonormalized
    against the image direction as required for an orthonormal basis).

    Raises ``CorrectedRestartDegenerate`` when the previous solution is
    numerically in the null space of A or the residual is parallel to its
    image; callers fall back to a plain restart.
    """
    x_prev = np.asarray(x_prev, dtype=float)
    r_current = np.asarray(r_current, dtype=float)
    if seed_projection not in ("image", "solution"):
        raise ValueError("seed_projection must be 'image' or 'solution'")
    xn = np.linalg.norm(x_prev)
    if xn == 0.0:
        raise ValueError("x_prev must be nonzero")
    rn = np.linalg.norm(r_current)
    if rn == 0.0:
        raise ValueError("zero residual: already converged")
    z1 = x_prev / xn
    q = A.apply(z1)
    qn = np.linalg.norm(q)
    if qn <= max(_BREAKDOWN_REL * A.norm_estimate(), _BREAKDOWN_FLOOR):
        raise CorrectedRestartDegenerate(
            "previous solution is numerically in the null space of A"
        )
    b1 = q / qn

    if seed_projection == "solution":
        w = r_current - (z1 @ r_current) * z1
    else:
        w = r_current.copy()
    w = w - (b1 @ w) * b1
    w = w - (b1 @ w) * b1
    wn = np.linalg.norm(w)
    if wn <= 1e-12 * rn:
        raise CorrectedRestartDegenerate(
            "residual is parallel to the image of the previous solution"
        )
    b2 = w / wn

    if kind == "arnoldi":
        if A.rows != A.cols:
            raise ValueError("flexible Arnoldi requires a square operator")
        state = FlexibleArnoldiState(b1, corrected=True)
        state._V.push(b2)
        state._Z.push(z1)
        state._hcols.append(np.array([qn, 0.0]))
        return state
    if kind == "golub_kahan":
        state = FlexibleGolubKahanState(b1, corrected=True)
        state._U.push(b2)
        state._Z.push(z1)
        state._mcols.append(np.array([qn, 0.0]))
        return state
    raise ValueError(f"unknown decomposition kind: {kind!r}")
