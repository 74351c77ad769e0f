"""Reweighting machinery: smoothed reweighting vectors, regularization
operators L, and application of the iteration-dependent priorconditioner
(W L)^{-1}.

All functions here are pure over immutable inputs.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "RegOperator",
    "WeightVector",
    "irn_weights",
    "apply_priorconditioner",
    "apply_weighted_reg",
]


@dataclass(frozen=True)
class RegOperator:
    """Regularization operator: identity or an invertible first difference.

    The first-difference form is lower bidiagonal with unit diagonal and -1
    subdiagonal, so it is invertible and its inverse is a cumulative sum.
    """

    kind: str
    n: int

    _KINDS = ("identity", "first_difference_invertible")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown regularization operator kind: {self.kind!r}")
        if self.n < 1:
            raise ValueError("size must be positive")

    @classmethod
    def identity(cls, n):
        return cls("identity", n)

    @classmethod
    def first_difference(cls, n):
        return cls("first_difference_invertible", n)

    def apply(self, x):
        """Return ``L @ x``; works on vectors or on the columns of a matrix."""
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n:
            raise ValueError(f"expected leading dimension {self.n}, got {x.shape[0]}")
        if self.kind == "identity":
            return x.copy()
        return np.concatenate([x[:1], np.diff(x, axis=0)], axis=0)

    def solve(self, y):
        """Return ``L^{-1} @ y``; works on vectors or on the columns of a matrix."""
        y = np.asarray(y, dtype=float)
        if y.shape[0] != self.n:
            raise ValueError(f"expected leading dimension {self.n}, got {y.shape[0]}")
        if self.kind == "identity":
            return y.copy()
        return np.cumsum(y, axis=0)


@dataclass(frozen=True)
class WeightVector:
    """Diagonal of the reweighting matrix W, with the parameters that built it."""

    w: np.ndarray
    p: float
    tau_smooth: float

    @classmethod
    def identity(cls, n):
        return cls(w=np.ones(n), p=2.0, tau_smooth=1.0)

    @property
    def size(self):
        return self.w.shape[0]


def irn_weights(v, p, tau_smooth):
    """Smoothed reweighting: entry i is ``(v_i^2 + tau^2)^((p-2)/4)``.

    Parameters
    ----------
    v : array_like
        Current value of ``L x``.
    p : float
        Norm exponent in (0, 2].  ``p == 2`` yields unit weights.
    tau_smooth : float
        Smoothing parameter; must be positive unless every entry of ``v``
        is nonzero.
    """
    v = np.asarray(v, dtype=float)
    if not 0.0 < p <= 2.0:
        raise ValueError(f"p must lie in (0, 2], got {p}")
    if tau_smooth < 0.0:
        raise ValueError("tau_smooth must be nonnegative")
    if p == 2.0:
        return WeightVector(w=np.ones_like(v), p=p, tau_smooth=tau_smooth)
    if tau_smooth == 0.0 and np.any(v == 0.0):
        raise ValueError("tau_smooth = 0 with a zero entry divides by zero")
    w = (v ** 2 + tau_smooth ** 2) ** ((p - 2.0) / 4.0)
    return WeightVector(w=w, p=p, tau_smooth=tau_smooth)


def apply_priorconditioner(weights, L, v):
    """Return ``(W L)^{-1} v`` computed as ``L^{-1} (W^{-1} v)``."""
    v = np.asarray(v, dtype=float)
    if np.any(weights.w == 0.0):
        raise ValueError("priorconditioner requires strictly positive weights")
    if weights.w.ndim == 1 and v.ndim > 1:
        scaled = v / weights.w[:, None]
    else:
        scaled = v / weights.w
    return L.solve(scaled)


def apply_weighted_reg(weights, L, x):
    """Return ``W L x``."""
    y = L.apply(x)
    if weights.w.ndim == 1 and y.ndim > 1:
        return weights.w[:, None] * y
    return weights.w * y
