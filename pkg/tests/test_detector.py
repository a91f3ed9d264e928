import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imaging import brute_force_extrema, gaussian_spot, random_blobs, textured
from kaze.detector import (
    comparison_window,
    compute_responses,
    derivative_step,
    detect,
    find_extrema,
    hessian_response,
    passes_edge_test,
    quadratic_offset,
    refine_subpixel,
    reject_edges,
)
from kaze.parallel import num_threads
from kaze.scale_space import EvolutionLevel, ScaleSpaceOptions, build_scale_space

FWHM_4PX_SIGMA = 4.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))


def level_of(img, sigma=1.6):
    img = np.asarray(img, dtype=np.float32)
    return EvolutionLevel(0, 0, 0, sigma, 0.5 * sigma * sigma, img, img)


def quadratic_patch(px, py, a=1.0, b=1.0, c=0.0):
    y, x = np.mgrid[-1:2, -1:2].astype(np.float64)
    return 5.0 - a * (x - px) ** 2 - b * (y - py) ** 2 - c * (x - px) * (y - py)


class TestSteps:
    def test_derivative_step(self):
        assert derivative_step(1.6, (100, 100)) == 2
        assert derivative_step(0.3, (100, 100)) == 1
        assert derivative_step(40.0, (64, 100)) == 16

    def test_comparison_window(self):
        assert comparison_window(1.6, "exact_sigma") == 3
        assert comparison_window(3.8, "exact_sigma") == 5
        assert comparison_window(6.2, "exact_sigma") == 7
        assert comparison_window(12.8, "exact_sigma") == 13
        assert comparison_window(12.8, "approx_3x3") == 3


class TestHessianResponse:
    def test_constant_image(self):
        lv = level_of(np.full((40, 40), 0.7))
        assert np.all(hessian_response(lv, 2) == 0.0)

    @pytest.mark.parametrize("step", [1, 2, 3])
    def test_paraboloid(self, step):
        y, x = np.mgrid[0:48, 0:48].astype(np.float64)
        lv = level_of(((x - 24) ** 2 + (y - 24) ** 2) / 64.0)
        det = hessian_response(lv, step)
        m = 2 * step
        inner = (slice(m, -m), slice(m, -m))
        assert np.allclose(lv.Lxx[inner] * 64.0, 2.0, atol=1e-4)
        assert np.allclose(lv.Lyy[inner] * 64.0, 2.0, atol=1e-4)
        assert np.allclose(lv.Lxy[inner], 0.0, atol=1e-6)
        assert np.allclose(det[inner] * 64.0**2, 4.0 * step**4, rtol=1e-4)
        assert lv.deriv_step == step

    @pytest.mark.parametrize("step", [1, 2, 3])
    def test_saddle(self, step):
        y, x = np.mgrid[0:48, 0:48].astype(np.float64)
        lv = level_of((x - 24) * (y - 24) / 64.0)
        det = hessian_response(lv, step)
        m = 2 * step
        inner = (slice(m, -m), slice(m, -m))
        assert np.allclose(lv.Lxy[inner] * 64.0, 1.0, atol=1e-5)
        assert np.allclose(det[inner] * 64.0**2, -(step**4), rtol=1e-4)

    def test_rejects_zero_step(self):
        with pytest.raises(ValueError):
            hessian_response(level_of(np.zeros((8, 8))), 0)


def pyramid(img, mode="exact_sigma"):
    opts = ScaleSpaceOptions(extrema_window=mode)
    levels = build_scale_space(img, opts)
    compute_responses(levels)
    return levels, opts


class TestFindExtrema:
    @pytest.mark.parametrize("mode", ["exact_sigma", "approx_3x3"])
    @pytest.mark.parametrize("seed", range(10))
    def test_matches_brute_force(self, seed, mode):
        levels, opts = pyramid(random_blobs(64, 64, seed), mode)
        got = {(k.level, int(k.y), int(k.x)) for k in find_extrema(levels, opts)}
        windows = [comparison_window(lv.sigma, mode) for lv in levels]
        want = brute_force_extrema([lv.Ldet for lv in levels], None, opts.detector_threshold, windows)
        assert got == want
        assert got

    @pytest.mark.parametrize("center", [(32.0, 32.0), (27.3, 35.8), (37.6, 25.1)])
    def test_single_blob(self, center):
        cx, cy = center
        levels, opts = pyramid(gaussian_spot(64, 64, cx, cy, FWHM_4PX_SIGMA))
        kps = find_extrema(levels, opts)
        assert len(kps) == 1
        k = kps[0]
        assert abs(k.x - cx) <= 1 and abs(k.y - cy) <= 1
        assert 0 < k.level < len(levels) - 1
        assert k.sigma == levels[k.level].sigma

    def test_constant_image(self):
        with pytest.warns(UserWarning):
            levels, opts = pyramid(np.full((48, 48), 0.5, dtype=np.float32))
        assert find_extrema(levels, opts) == []
        assert detect(levels, opts) == []

    def test_needs_three_levels(self):
        levels, opts = pyramid(textured(40, 40, 0))
        with pytest.raises(ValueError):
            find_extrema(levels[:2], opts)

    @pytest.mark.parametrize("seed", range(4))
    def test_exact_subset_of_approx(self, seed):
        img = textured(96, 96, seed)
        exact_levels, exact_opts = pyramid(img, "exact_sigma")
        approx_opts = ScaleSpaceOptions(extrema_window="approx_3x3")
        exact = {(k.level, k.x, k.y) for k in find_extrema(exact_levels, exact_opts)}
        approx = {(k.level, k.x, k.y) for k in find_extrema(exact_levels, approx_opts)}
        assert exact <= approx
        assert len(exact) < len(approx)


class TestEdgeTest:
    def test_isotropic_peak_kept(self):
        assert passes_edge_test(-2.0, -2.0, 0.0, 10.0)

    def test_ridge_rejected(self):
        assert not passes_edge_test(-10.0, -0.01, 0.0, 10.0)

    def test_saddle_rejected(self):
        assert not passes_edge_test(-2.0, 2.0, 0.0, 10.0)

    def test_threshold_boundary(self):
        # Tr^2/Det = (r+1)^2/r exactly when the eigenvalue ratio equals r
        assert not passes_edge_test(-10.0, -1.0, 0.0, 10.0)
        assert passes_edge_test(-9.99, -1.0, 0.0, 10.0)

    def test_reject_edges_on_level(self):
        lv = level_of(np.zeros((5, 5)))
        lv.Ldet = np.zeros((5, 5), dtype=np.float32)
        lv.Ldet[2, 2] = 1.0
        assert reject_edges(lv, (2, 2), 10.0)
        lv.Ldet[2, 1:4] = 1.0
        lv.Ldet[2, 2] = 1.01
        assert not reject_edges(lv, (2, 2), 10.0)


class TestSubpixel:
    def test_symmetric_patch(self):
        assert quadratic_offset(quadratic_patch(0.0, 0.0)) == (0.0, 0.0)

    def test_known_peak(self):
        ox, oy = quadratic_offset(quadratic_patch(0.3, -0.2))
        assert abs(ox - 0.3) < 1e-6 and abs(oy + 0.2) < 1e-6

    @settings(max_examples=200, deadline=None)
    @given(
        st.floats(-0.99, 0.99),
        st.floats(-0.99, 0.99),
        st.floats(0.2, 5.0),
        st.floats(0.2, 5.0),
        st.floats(-0.3, 0.3),
    )
    def test_recovers_any_peak(self, px, py, a, b, c):
        off = quadratic_offset(quadratic_patch(px, py, a, b, c * min(a, b)))
        assert off is not None
        assert abs(off[0] - px) < 1e-6 and abs(off[1] - py) < 1e-6

    def test_far_peak_rejected(self):
        assert quadratic_offset(quadratic_patch(1.7, 0.0)) is None
        assert quadratic_offset(quadratic_patch(0.2, -1.3)) is None

    def test_singular_rejected(self):
        assert quadratic_offset(np.ones((3, 3))) is None

    def test_refine_adds_offset(self):
        resp = np.zeros((7, 7))
        resp[2:5, 3:6] = quadratic_patch(0.25, 0.4)
        x, y = refine_subpixel(resp, (4, 3))
        assert abs(x - 4.25) < 1e-6 and abs(y - 3.4) < 1e-6


@pytest.fixture(scope="module")
def scene():
    img = textured(120, 160, 7)
    levels, opts = pyramid(img)
    return img, levels, opts, detect(levels, opts)


class TestDetect:
    def test_keypoint_invariants(self, scene):
        img, levels, opts, kps = scene
        h, w = img.shape
        assert kps
        for k in kps:
            assert 0 <= k.x < w and 0 <= k.y < h
            assert k.response > opts.detector_threshold
            assert k.sigma == levels[k.level].sigma
            assert (k.octave, k.sublevel) == (levels[k.level].octave, levels[k.level].sublevel)
            assert abs(k.x - round(k.x)) <= 1 and abs(k.y - round(k.y)) <= 1
            assert k.angle == 0.0

    def test_sorted_by_response(self, scene):
        *_, kps = scene
        r = [k.response for k in kps]
        assert r == sorted(r, reverse=True)

    @staticmethod
    def _offset_pair():
        # dyadic pixel values, so img + 0.25 is exact in float32
        img = (np.round(textured(120, 160, 2) * 4096) / 4096).astype(np.float32)
        opts = ScaleSpaceOptions()
        a = detect(build_scale_space(img, opts), opts)
        b = detect(build_scale_space(img + np.float32(0.25), opts), opts)
        return a, b

    def test_offset_keeps_keypoint_set(self):
        a, b = self._offset_pair()
        assert [(k.level, round(k.x), round(k.y)) for k in a] == [(k.level, round(k.x), round(k.y)) for k in b]

    @pytest.mark.xfail(
        strict=True,
        reason="float32 pyramid round-off moves flat-peaked coarse-scale keypoints by up to ~1e-3 px",
    )
    def test_offset_invariance(self):
        a, b = self._offset_pair()
        assert max(max(abs(p.x - q.x), abs(p.y - q.y)) for p, q in zip(a, b)) < 1e-5

    def test_deterministic_across_threads(self, scene):
        img, _, opts, kps = scene
        with num_threads(4):
            levels, _ = pyramid(img)
            again = detect(levels, opts)
        assert again == kps
