"""Test-problem generation, exact-noise injection, and error metrics.

All generators are pure functions of their parameters and seed.  Randomness
comes from numpy's Philox counter-based generator, which is platform-stable
and splittable, so generated problems are bit-reproducible.
"""

import math
from dataclasses import dataclass

import numpy as np

from .operators import (
    LinearOperator,
    make_gaussian_blur_1d,
    make_gaussian_blur_2d,
    make_tomography,
)

__all__ = [
    "TestProblem",
    "rng_for_seed",
    "spectra_signal",
    "star_field",
    "shepp_logan",
    "add_noise",
    "relative_error",
    "spectra_problem",
    "blur2d_problem",
    "ct_problem",
]


def rng_for_seed(seed):
    """The repo-standard generator: Philox keyed by the seed."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


@dataclass(frozen=True)
class TestProblem:
    """Forward operator with exact clean data, noise realization, and truth.

    By construction ``b = b_clean + e`` exactly, ``b_clean = A x_true``, and
    ``norm(e) / norm(b_clean)`` equals the requested noise level to rounding.
    """

    A: LinearOperator
    b: np.ndarray
    b_clean: np.ndarray
    e: np.ndarray
    x_true: np.ndarray
    nl: float
    seed: int


# Peak layout for the synthetic emission spectrum: (center fraction, height).
_SPECTRA_PEAKS = ((0.20, 1.0), (0.36, 0.55), (0.55, 0.85), (0.76, 0.45))


def spectra_signal(n):
    """Nonnegative signal with exactly 4 narrow peaks on an exactly zero
    background; at least 80 percent of the entries are zero for n >= 20."""
    if n < 16:
        raise ValueError("n must be >= 16")
    sigma = n / 128.0
    radius = 0 if n < 64 else int(math.ceil(2.0 * sigma))
    x = np.zeros(n)
    for frac, height in _SPECTRA_PEAKS:
        center = int(round(frac * n))
        for off in range(-radius, radius + 1):
            j = center + off
            if 0 <= j < n:
                x[j] += height * math.exp(-(off ** 2) / (2.0 * sigma ** 2))
    return x


def star_field(nx, density=0.072, seed=0):
    """Sparse random nonnegative image: ``round(density * nx^2)`` bright
    pixels at uniformly chosen positions."""
    if not 0.0 < density < 1.0:
        raise ValueError("density must lie in (0, 1)")
    n = nx * nx
    count = int(round(density * n))
    image = np.zeros(n)
    if count:
        rng = rng_for_seed(seed)
        where = rng.choice(n, size=count, replace=False)
        image[where] = rng.uniform(0.25, 1.0, size=count)
    return image


# Modified ten-ellipse head phantom: (a, b, x0, y0, phi_deg, intensity).
_PHANTOM_ELLIPSES = (
    (0.69, 0.92, 0.0, 0.0, 0.0, 1.0),
    (0.6624, 0.874, 0.0, -0.0184, 0.0, -0.8),
    (0.11, 0.31, 0.22, 0.0, -18.0, -0.2),
    (0.16, 0.41, -0.22, 0.0, 18.0, -0.2),
    (0.21, 0.25, 0.0, 0.35, 0.0, 0.1),
    (0.046, 0.046, 0.0, 0.1, 0.0, 0.1),
    (0.046, 0.046, 0.0, -0.1, 0.0, 0.1),
    (0.046, 0.023, -0.08, -0.605, 0.0, 0.1),
    (0.023, 0.023, 0.0, -0.606, 0.0, 0.1),
    (0.023, 0.046, 0.06, -0.605, 0.0, 0.1),
)


def phantom_value(x, y):
    """Analytic phantom intensity at a point of [-1, 1]^2."""
    value = 0.0
    for a, b, x0, y0, phi_deg, intensity in _PHANTOM_ELLIPSES:
        phi = math.radians(phi_deg)
        dx, dy = x - x0, y - y0
        u = dx * math.cos(phi) + dy * math.sin(phi)
        v = -dx * math.sin(phi) + dy * math.cos(phi)
        if (u / a) ** 2 + (v / b) ** 2 <= 1.0:
            value += intensity
    return value


def shepp_logan(nx):
    """Ten-ellipse head phantom rasterized by pixel-center membership,
    flattened column-major; values lie in [0, 1]."""
    if nx < 16:
        raise ValueError("nx must be >= 16")
    centers = -1.0 + (2.0 * np.arange(nx) + 1.0) / nx
    image = np.zeros((nx, nx))
    for a, b, x0, y0, phi_deg, intensity in _PHANTOM_ELLIPSES:
        phi = math.radians(phi_deg)
        dx = centers[:, None] - x0
        dy = centers[None, :] - y0
        u = dx * math.cos(phi) + dy * math.sin(phi)
        v = -dx * math.sin(phi) + dy * math.cos(phi)
        image[(u / a) ** 2 + (v / b) ** 2 <= 1.0] += intensity
    # intensity sums cancel to 0 inside nested ellipses; clear float dust
    np.clip(image, 0.0, None, out=image)
    return image.ravel(order="F")


def add_noise(b_clean, nl, seed=0):
    """Gaussian noise rescaled so that ``norm(e)/norm(b_clean)`` is exactly
    the requested level (making discrepancy targets exact)."""
    b_clean = np.asarray(b_clean, dtype=float)
    if nl < 0.0:
        raise ValueError("noise level must be nonnegative")
    if nl == 0.0:
        e = np.zeros_like(b_clean)
        return b_clean.copy(), e
    scale = np.linalg.norm(b_clean)
    if scale == 0.0:
        raise ValueError("cannot scale noise against zero clean data")
    g = rng_for_seed(seed).standard_normal(b_clean.shape[0])
    e = (nl * scale / np.linalg.norm(g)) * g
    return b_clean + e, e


def relative_error(x, x_true):
    """``norm(x - x_true) / norm(x_true)``."""
    x_true = np.asarray(x_true, dtype=float)
    nrm = np.linalg.norm(x_true)
    if nrm == 0.0:
        raise ValueError("x_true must be nonzero")
    return float(np.linalg.norm(np.asarray(x, dtype=float) - x_true) / nrm)


def _assemble(A, x_true, nl, seed):
    b_clean = A.apply(x_true)
    b, e = add_noise(b_clean, nl, seed)
    return TestProblem(A=A, b=b, b_clean=b_clean, e=e, x_true=x_true,
                       nl=float(nl), seed=int(seed))


def spectra_problem(n=64, nl=0.01, seed=0):
    """1D spectral deblurring: the symmetric Gaussian blur applied to the
    four-peak signal."""
    return _assemble(make_gaussian_blur_1d(n), spectra_signal(n), nl, seed)


def blur2d_problem(nx=64, nl=0.5, seed=0, psf_sigma=1.5, boundary="reflexive",
                   density=0.072):
    """2D deblurring of a sparse star field."""
    A = make_gaussian_blur_2d(nx, nx, psf_sigma, boundary)
    return _assemble(A, star_field(nx, density, seed), nl, seed)


def ct_problem(nx=64, n_angles=90, n_detectors=None, nl=0.5, seed=0):
    """Parallel-beam tomography of the head phantom; oversampled by default."""
    if n_detectors is None:
        n_detectors = int(round(math.sqrt(2.0) * nx))
    A = make_tomography(nx, n_angles, n_detectors)
    return _assemble(A, shepp_logan(nx), nl, seed)
