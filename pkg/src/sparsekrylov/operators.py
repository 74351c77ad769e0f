"""Matrix-free linear operators and the forward models used by the experiments.

Every operator is immutable after construction; ``apply`` and ``apply_adjoint``
are reentrant and safe to share across concurrent solver runs.
"""

import math

import numpy as np
import scipy.signal
import scipy.sparse

__all__ = [
    "LinearOperator",
    "DenseOperator",
    "IdentityOperator",
    "apply",
    "apply_adjoint",
    "make_gaussian_blur_1d",
    "make_gaussian_blur_2d",
    "make_tomography",
]

# Dense materialization is a test-oracle facility only; anything bigger than
# this is considered out of dense range.
DENSE_LIMIT = 512


class LinearOperator:
    """A linear map from R^cols to R^rows exposed through mat-vec products.

    Subclasses implement ``_matvec`` and ``_rmatvec``.  The public entry
    points validate dimensions and always hand out float64 vectors.
    """

    def __init__(self, rows, cols):
        rows = int(rows)
        cols = int(cols)
        if rows < 1 or cols < 1:
            raise ValueError("operator dimensions must be positive")
        self.rows = rows
        self.cols = cols
        self._norm_estimate = None

    def _matvec(self, x):
        raise NotImplementedError

    def _rmatvec(self, y):
        raise NotImplementedError

    def apply(self, x):
        """Return ``A @ x`` for a length-``cols`` vector."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.cols,):
            raise ValueError(
                f"expected a length-{self.cols} vector, got shape {x.shape}"
            )
        return np.asarray(self._matvec(x), dtype=float)

    def apply_adjoint(self, y):
        """Return ``A.T @ y`` for a length-``rows`` vector."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.rows,):
            raise ValueError(
                f"expected a length-{self.rows} vector, got shape {y.shape}"
            )
        return np.asarray(self._rmatvec(y), dtype=float)

    def to_dense(self):
        """Materialize the operator as a dense matrix (test oracles only)."""
        if self.cols > DENSE_LIMIT:
            raise ValueError(
                f"dense materialization is limited to {DENSE_LIMIT} columns"
            )
        cols = np.zeros((self.rows, self.cols))
        e = np.zeros(self.cols)
        for j in range(self.cols):
            e[j] = 1.0
            cols[:, j] = self.apply(e)
            e[j] = 0.0
        return cols

    def norm_estimate(self):
        """Power-method estimate of the spectral norm, cached after first use."""
        if self._norm_estimate is None:
            rng = np.random.Generator(np.random.Philox(0x5EED))
            v = rng.standard_normal(self.cols)
            v /= np.linalg.norm(v)
            for _ in range(30):
                w = self.apply_adjoint(self.apply(v))
                nw = np.linalg.norm(w)
                if nw == 0.0:
                    self._norm_estimate = 0.0
                    return 0.0
                v = w / nw
            self._norm_estimate = float(np.linalg.norm(self.apply(v)))
        return self._norm_estimate


def apply(op, x):
    """Functional form of ``op.apply(x)``."""
    return op.apply(x)


def apply_adjoint(op, y):
    """Functional form of ``op.apply_adjoint(y)``."""
    return op.apply_adjoint(y)


class DenseOperator(LinearOperator):
    """Operator backed by an explicit dense matrix."""

    def __init__(self, matrix):
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2:
            raise ValueError("matrix must be two-dimensional")
        super().__init__(matrix.shape[0], matrix.shape[1])
        self.matrix = matrix

    def _matvec(self, x):
        return self.matrix @ x

    def _rmatvec(self, y):
        return self.matrix.T @ y

    def to_dense(self):
        return self.matrix.copy()


class IdentityOperator(LinearOperator):
    def __init__(self, n):
        super().__init__(n, n)

    def _matvec(self, x):
        return x.copy()

    def _rmatvec(self, y):
        return y.copy()

    def norm_estimate(self):
        return 1.0


def make_gaussian_blur_1d(n):
    """Dense symmetric 1D Gaussian blur with entries exp(-(i-j)^2/8)/(2 sqrt(2 pi)).

    The full sum is evaluated with no kernel truncation so results are
    bit-stable across runs.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    idx = np.arange(n)
    diff = idx[:, None] - idx[None, :]
    matrix = np.exp(-(diff.astype(float) ** 2) / 8.0) / (2.0 * math.sqrt(2.0 * math.pi))
    return DenseOperator(matrix)


class _GaussianBlur2D(LinearOperator):
    def __init__(self, nx, ny, kernel, boundary):
        super().__init__(nx * ny, nx * ny)
        self.nx = nx
        self.ny = ny
        self.kernel = kernel
        self.boundary = boundary

    def _conv(self, x, kernel):
        image = x.reshape((self.nx, self.ny), order="F")
        if self.boundary == "zero":
            out = scipy.signal.convolve2d(image, kernel, mode="same",
                                          boundary="fill", fillvalue=0.0)
        else:
            out = scipy.signal.convolve2d(image, kernel, mode="same",
                                          boundary="symm")
        return out.ravel(order="F")

    def _matvec(self, x):
        return self._conv(x, self.kernel)

    def _rmatvec(self, y):
        # Adjoint of same-mode convolution is convolution with the reflected
        # kernel; under the reflexive boundary this is exact because the
        # kernel is centrosymmetric.
        return self._conv(y, self.kernel[::-1, ::-1])


def make_gaussian_blur_2d(nx, ny, psf_sigma, boundary="reflexive"):
    """Spatially invariant Gaussian blur on an nx-by-ny image.

    Images are flattened column-major.  The kernel is sampled on a
    ``2r+1`` square with ``r = ceil(4*psf_sigma)`` and normalized to unit
    sum, which keeps the intensity scale comparable across widths.

    Parameters
    ----------
    nx, ny : int
        Image dimensions, both >= 1.
    psf_sigma : float
        Standard deviation of the point spread function in pixels.
    boundary : {"zero", "reflexive"}
        Boundary rule used by the convolution and its adjoint.
    """
    if nx < 1 or ny < 1:
        raise ValueError("image dimensions must be >= 1")
    if psf_sigma <= 0:
        raise ValueError("psf_sigma must be positive")
    if boundary not in ("zero", "reflexive"):
        raise ValueError("boundary must be 'zero' or 'reflexive'")
    radius = int(math.ceil(4.0 * psf_sigma))
    if radius < 1:
        kernel = np.ones((1, 1))
    else:
        offs = np.arange(-radius, radius + 1, dtype=float)
        g = np.exp(-(offs ** 2) / (2.0 * psf_sigma ** 2))
        kernel = np.outer(g, g)
    kernel = kernel / kernel.sum()
    return _GaussianBlur2D(nx, ny, kernel, boundary)


class _SparseOperator(LinearOperator):
    def __init__(self, matrix):
        super().__init__(matrix.shape[0], matrix.shape[1])
        self.matrix = matrix.tocsr()
        self._matrix_t = self.matrix.T.tocsr()

    def _matvec(self, x):
        return self.matrix @ x

    def _rmatvec(self, y):
        return self._matrix_t @ y

    def to_dense(self):
        if self.cols > DENSE_LIMIT:
            raise ValueError(
                f"dense materialization is limited to {DENSE_LIMIT} columns"
            )
        return self.matrix.toarray()


def _ray_chords(nx, theta_deg, offset):
    """Exact pixel chord lengths of one ray through the nx-by-nx pixel grid.

    The image square is ``[-nx/2, nx/2]^2`` with unit pixels.  The ray passes
    through ``offset * (-sin t, cos t)`` with direction ``(cos t, sin t)``.
    Returns (pixel_indices, lengths) with column-major pixel indexing.
    """
    theta = math.radians(theta_deg)
    dx, dy = math.cos(theta), math.sin(theta)
    px, py = -offset * math.sin(theta), offset * math.cos(theta)
    half = nx / 2.0

    # Clip the ray parameter to the image square (slab method).
    t0, t1 = -np.inf, np.inf
    for d, p in ((dx, px), (dy, py)):
        if abs(d) > 1e-14:
            ta = (-half - p) / d
            tb = (half - p) / d
            t0 = max(t0, min(ta, tb))
            t1 = min(t1, max(ta, tb))
        elif not (-half <= p <= half):
            return np.zeros(0, dtype=np.int64), np.zeros(0)
    if not np.isfinite(t0) or t1 <= t0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)

    crossings = [t0, t1]
    for d, p in ((dx, px), (dy, py)):
        if abs(d) > 1e-14:
            lines = np.arange(-half + 1.0, half)
            ts = (lines - p) / d
            crossings.extend(ts[(ts > t0) & (ts < t1)])
    ts = np.unique(np.asarray(crossings))

    lengths = np.diff(ts)
    mids = ts[:-1] + lengths / 2.0
    ix = np.floor(px + mids * dx + half).astype(np.int64)
    iy = np.floor(py + mids * dy + half).astype(np.int64)
    keep = (lengths > 1e-14) & (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < nx)
    return (ix[keep] + nx * iy[keep]), lengths[keep]


def make_tomography(nx, n_angles, n_detectors):
    """Sparse ray-driven parallel-beam tomography operator on an nx-by-nx image.

    Angles are equispaced in [0, 179] degrees.  Detector offsets are
    equispaced with spacing ``nx / n_detectors`` and centered on the image,
    so entry ``(i, j)`` holds the exact chord length of ray ``i`` inside
    pixel ``j`` (Siddon-style geometry).  The operator may oversample
    (``rows > cols``).
    """
    if nx < 2:
        raise ValueError("nx must be >= 2")
    if n_angles < 1 or n_detectors < 1:
        raise ValueError("n_angles and n_detectors must be >= 1")
    angles = np.linspace(0.0, 179.0, n_angles)
    spacing = nx / n_detectors
    offsets = (np.arange(n_detectors) - (n_detectors - 1) / 2.0) * spacing

    rows, cols, vals = [], [], []
    for a, theta in enumerate(angles):
        for j, s in enumerate(offsets):
            pix, lens = _ray_chords(nx, theta, s)
            rows.extend([a * n_detectors + j] * len(pix))
            cols.extend(pix.tolist())
            vals.extend(lens.tolist())
    matrix = scipy.sparse.coo_matrix(
        (vals, (rows, cols)), shape=(n_angles * n_detectors, nx * nx)
    )
    return _SparseOperator(matrix)
