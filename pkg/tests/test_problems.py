import json
import math
import os

import numpy as np
import pytest

from sparsekrylov.problems import (
    add_noise,
    blur2d_problem,
    ct_problem,
    phantom_value,
    relative_error,
    shepp_logan,
    spectra_problem,
    spectra_signal,
    star_field,
)

GOLDEN_DIR = os.path.join(os.path.dirname(__file__), "golden")


class TestSpectraSignal:
    def test_four_local_maxima(self):
        x = spectra_signal(64)
        peaks = [i for i in range(1, 63)
                 if x[i] > 1e-3 and x[i] >= x[i - 1] and x[i] >= x[i + 1]]
        assert len(peaks) == 4

    def test_background_is_zero(self):
        x = spectra_signal(64)
        assert np.all(x >= 0)
        background = np.sort(x)[: int(0.8 * 64)]
        assert np.all(background <= 1e-10)

    def test_sparsity_across_sizes(self):
        for n in (24, 64, 128, 256):
            x = spectra_signal(n)
            assert np.mean(x < 1e-10) >= 0.8, n

    def test_golden_fixture(self):
        with open(os.path.join(GOLDEN_DIR, "spectra_n64.json")) as fh:
            header = json.load(fh)
        raw = np.fromfile(os.path.join(GOLDEN_DIR, "spectra_n64.f64"),
                          dtype=header["dtype"])
        assert list(raw.shape) == header["shape"]
        assert np.array_equal(spectra_signal(64), raw)


class TestStarField:
    def test_density(self):
        x = star_field(64, density=0.072, seed=3)
        frac = np.mean(x > 1e-10)
        assert abs(frac - 0.072) <= 0.01

    def test_zero_density_limit(self):
        x = star_field(32, density=1e-9, seed=0)
        assert np.all(x == 0.0)

    def test_seed_reproducibility(self):
        a = star_field(48, seed=11)
        b = star_field(48, seed=11)
        assert np.array_equal(a, b)
        c = star_field(48, seed=12)
        assert not np.array_equal(a, c)

    def test_nonnegative(self):
        assert star_field(20, seed=5).min() >= 0.0


class TestSheppLogan:
    def test_center_pixel_analytic(self):
        nx = 128
        img = shepp_logan(nx).reshape((nx, nx), order="F")
        # pixel covering the origin has center at (1/nx, 1/nx)
        ix = nx // 2
        cx = -1.0 + (2 * ix + 1.0) / nx
        assert img[ix, ix] == pytest.approx(phantom_value(cx, cx))
        assert img[ix, ix] == pytest.approx(0.2)

    def test_corners_zero(self):
        img = shepp_logan(64).reshape((64, 64), order="F")
        assert img[0, 0] == img[-1, 0] == img[0, -1] == img[-1, -1] == 0.0

    def test_values_in_unit_interval(self):
        x = shepp_logan(32)
        assert x.min() >= 0.0 and x.max() <= 1.0

    def test_support_inside_head_ellipse(self):
        for nx in (16, 128):
            img = shepp_logan(nx).reshape((nx, nx), order="F")
            centers = -1.0 + (2.0 * np.arange(nx) + 1.0) / nx
            X, Y = np.meshgrid(centers, centers, indexing="ij")
            outside = (X / 0.69) ** 2 + (Y / 0.92) ** 2 > 1.0
            assert np.all(img[outside] == 0.0)


class TestAddNoise:
    def test_zero_level(self):
        b = np.arange(1.0, 5.0)
        out, e = add_noise(b, 0.0, seed=0)
        assert np.array_equal(out, b)
        assert np.all(e == 0.0)

    def test_exact_ratio(self):
        g = np.random.Generator(np.random.Philox(1))
        b = g.standard_normal(200) + 3
        for nl in (1e-3, 0.01, 0.5):
            _, e = add_noise(b, nl, seed=7)
            ratio = np.linalg.norm(e) / np.linalg.norm(b)
            assert ratio == pytest.approx(nl, rel=1e-14)

    def test_determinism(self):
        b = np.ones(50)
        b1, e1 = add_noise(b, 0.1, seed=4)
        b2, e2 = add_noise(b, 0.1, seed=4)
        assert np.array_equal(b1, b2) and np.array_equal(e1, e2)


class TestRelativeError:
    def test_exact(self):
        x = np.array([1.0, 2.0])
        assert relative_error(x, x) == 0.0

    def test_zero_estimate(self):
        x = np.array([1.0, 2.0])
        assert relative_error(np.zeros(2), x) == 1.0

    def test_double(self):
        x = np.array([1.0, -1.0, 2.0])
        assert relative_error(2 * x, x) == pytest.approx(1.0)

    def test_zero_truth_rejected(self):
        with pytest.raises(ValueError):
            relative_error(np.ones(2), np.zeros(2))


class TestProblemAssembly:
    @pytest.mark.parametrize("seed", range(10))
    def test_spectra_invariants_seed_set(self, seed):
        prob = spectra_problem(n=64, nl=0.01, seed=seed)
        assert np.array_equal(prob.b, prob.b_clean + prob.e)
        assert np.linalg.norm(prob.b_clean - prob.A.apply(prob.x_true)) \
            <= 1e-14 * np.linalg.norm(prob.b_clean)
        ratio = np.linalg.norm(prob.e) / np.linalg.norm(prob.b_clean)
        assert ratio == pytest.approx(prob.nl, rel=1e-14)

    def test_blur2d_shapes(self):
        prob = blur2d_problem(nx=16, nl=0.3, seed=1)
        assert prob.A.rows == prob.A.cols == 256
        assert prob.b.shape == (256,)

    def test_ct_shapes_oversampled(self):
        prob = ct_problem(nx=16, n_angles=20, nl=0.2, seed=2)
        assert prob.A.rows == 20 * int(round(math.sqrt(2) * 16))
        assert prob.A.cols == 256
        assert prob.A.rows > prob.A.cols

    def test_purity(self):
        p1 = blur2d_problem(nx=16, nl=0.4, seed=9)
        p2 = blur2d_problem(nx=16, nl=0.4, seed=9)
        assert np.array_equal(p1.b, p2.b)
        assert np.array_equal(p1.x_true, p2.x_true)
