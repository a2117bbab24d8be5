import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freeknot_sde.errors import ConfigurationError
from freeknot_sde.freeknot import optimal_spline
from freeknot_sde.paths import FineGrid, SeedSpec, path_from_values, sample_wiener
from freeknot_sde.sde import (AdditiveNoiseSde, build_combined, build_dagger, build_euler_interp, build_star,
                              coarse_steps, euler_coarse, knot_budget, preset, reference_solution, sigma_norms,
                              xbar_process)

from oracles import euler_loop

BM = preset("bm")
OU = preset("ou")
RAMP = preset("ramp-sigma")


def lin_drift(t, x):
    return 1.0


def decay(t, x):
    return -x


def test_bm_reference_is_the_path():
    p = sample_wiener(FineGrid(1024), SeedSpec(1))
    np.testing.assert_array_equal(reference_solution(BM, p).values, p.values)


def test_constant_drift_on_flat_path():
    sde = AdditiveNoiseSde(lin_drift, lambda t: np.ones_like(t))
    flat = path_from_values(np.zeros(1025))
    np.testing.assert_array_equal(reference_solution(sde, flat, 0.0).values, flat.times)


@pytest.mark.parametrize("name", ["ou", "ramp-sigma", "time-drift"])
def test_reference_matches_plain_loop(name):
    sde = preset(name)
    p = sample_wiener(FineGrid(512), SeedSpec(3))
    x0 = sde.sample_initial(SeedSpec(3))
    got = reference_solution(sde, p, x0).values
    want = euler_loop(lambda t, x: float(sde.drift(t, x)), lambda t: float(sde.sigma(t)), x0, p.values, p.times)
    np.testing.assert_allclose(got, want, rtol=0, atol=1e-13)


def test_python_drift_matches_compiled():
    p = sample_wiener(FineGrid(256), SeedSpec(2))
    py = AdditiveNoiseSde(decay, lambda t: np.ones_like(t))
    np.testing.assert_array_equal(reference_solution(py, p, 0.5).values, reference_solution(OU, p, 0.5).values)


def test_reference_two_resolutions():
    m = 2**14
    bound = 4 * math.sqrt(math.log(m) / m)
    for i in range(50):
        p = sample_wiener(FineGrid(m), SeedSpec(8, i))
        fine = reference_solution(OU, p).values[::4]
        coarse = reference_solution(OU, path_from_values(p.values[::4])).values
        assert np.max(np.abs(fine - coarse)) <= bound


def test_vanishing_sigma_rejected():
    with pytest.raises(ConfigurationError):
        AdditiveNoiseSde(decay, lambda t: t - 0.5)


def test_random_initial_value_needs_seed():
    sde = preset("time-drift")
    with pytest.raises(ConfigurationError):
        sde.sample_initial()
    assert sde.sample_initial(SeedSpec(4, 1)) == sde.sample_initial(SeedSpec(4, 1))
    assert sde.sample_initial(SeedSpec(4, 1)) != sde.sample_initial(SeedSpec(4, 2))


def test_unknown_preset():
    with pytest.raises(ConfigurationError):
        preset("gbm")


def test_coarse_steps():
    assert coarse_steps(512, 0.75) == 107
    assert coarse_steps(16, 0.75) == 8
    assert coarse_steps(81, 0.75) == 27
    with pytest.raises(ConfigurationError):
        coarse_steps(64, 0.5)


def test_euler_coarse_bm():
    p = sample_wiener(FineGrid(1024), SeedSpec(5))
    s = euler_coarse(BM, p, n=16, x0=0.7)
    np.testing.assert_allclose(s.euler_values, 0.7 + p.values[s.indices], rtol=0, atol=1e-15)


def test_euler_coarse_pure_decay():
    sde = AdditiveNoiseSde(decay, lambda t: np.zeros_like(t), strict=False)
    p = sample_wiener(FineGrid(64), SeedSpec(0))
    np.testing.assert_array_equal(euler_coarse(sde, p, n=2, x0=1.0).euler_values, [1.0, 0.5, 0.25])


def test_euler_coarse_ramp_sigma_values():
    p = sample_wiener(FineGrid(64), SeedSpec(0))
    np.testing.assert_array_equal(euler_coarse(RAMP, p, n=4).sigma_values, [1.0, 1.5, 2.0, 2.5])


def test_knot_budget_examples():
    np.testing.assert_array_equal(knot_budget(np.ones(10), 100, 10).m, np.full(10, 10))
    np.testing.assert_array_equal(knot_budget(np.sqrt([1.0, 3.0]), 10, 2).m, [3, 7])


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 5000), st.floats(0.51, 0.99), st.integers(0, 2**32))
def test_budget_sandwich(k, delta, seed):
    n = coarse_steps(k, delta)
    if n >= k:
        return
    sig = np.random.default_rng(seed).uniform(0.1, 5.0, n)
    b = knot_budget(sig, k, n, delta)
    assert k - n <= b.total_knots <= k + 1


def test_xbar_matches_euler_at_coarse_points():
    for name in ("ou", "ramp-sigma", "time-drift"):
        sde = preset(name)
        p = sample_wiener(FineGrid(2048), SeedSpec(6))
        x0 = sde.sample_initial(SeedSpec(6))
        s = euler_coarse(sde, p, n=37, x0=x0)
        xbar = xbar_process(sde, p, 37, x0)
        np.testing.assert_array_equal(xbar.values[s.indices], s.euler_values)


def test_xbar_bm_is_shifted_path():
    p = sample_wiener(FineGrid(1024), SeedSpec(7))
    np.testing.assert_allclose(xbar_process(BM, p, 10, 0.25).values, 0.25 + p.values, rtol=0, atol=1e-15)


def test_xbar_error_halves_with_n():
    ratios = []
    for i in range(100):
        p = sample_wiener(FineGrid(2**12), SeedSpec(9, i))
        ref = reference_solution(OU, p).values
        e8 = np.max(np.abs(ref - xbar_process(OU, p, 8).values))
        e16 = np.max(np.abs(ref - xbar_process(OU, p, 16).values))
        ratios.append(e16 / e8)
    assert 0.3 <= np.median(ratios) <= 0.8


def test_dagger_single_cell_is_brownian_spline():
    p = sample_wiener(FineGrid(4096), SeedSpec(10))
    build = build_combined(BM, p, 2, 0.75, 0, 0.0)
    assert build.scheme.n == 1 and build.budget.m[0] == 2
    direct = optimal_spline(p, 2, 0)
    np.testing.assert_array_equal(build.spline.knot_indices, direct.knot_indices)
    got = build.spline.grid_values(4096)
    # the combined spline starts at X(0); elsewhere it is the Brownian spline
    assert got[0] == 0.0
    np.testing.assert_allclose(got[1:], direct.grid_values(4096)[1:], rtol=0, atol=1e-15)


@pytest.mark.parametrize("r", [0, 1])
@pytest.mark.parametrize("allocation", ["dagger", "star"])
def test_cell_decomposition(r, allocation):
    for name in ("ou", "ramp-sigma", "time-drift"):
        sde = preset(name)
        p = sample_wiener(FineGrid(2**14), SeedSpec(11))
        x0 = sde.sample_initial(SeedSpec(11))
        b = build_combined(sde, p, 128, 0.75, r, x0, allocation)
        xbar = xbar_process(sde, p, b.scheme.n, x0).values
        total = np.max(np.abs(xbar - b.spline.grid_values(p.grid.steps)))
        per_cell = np.max(np.abs(b.scheme.sigma_values) * b.cell_errors)
        assert total == pytest.approx(per_cell, rel=1e-12, abs=1e-15)
        assert np.all(b.cell_errors <= b.cell_gammas * (1 + 1e-12))
        assert b.spline.knots <= 128 + 1


def test_star_equals_dagger_for_constant_sigma():
    p = sample_wiener(FineGrid(2**13), SeedSpec(12))
    d = build_combined(OU, p, 200, 0.75, 0, 0.0, "dagger")
    s = build_combined(OU, p, 200, 0.75, 0, 0.0, "star")
    np.testing.assert_array_equal(d.budget.m, s.budget.m)
    np.testing.assert_array_equal(d.spline.grid_values(2**13), s.spline.grid_values(2**13))


def test_star_equals_dagger_single_cell():
    p = sample_wiener(FineGrid(2**12), SeedSpec(13))
    a = build_dagger(BM, p, 2, 0.75, 0, 0.0)
    b = build_star(BM, p, 2, 0.75, 0, 0.0)
    np.testing.assert_array_equal(a.grid_values(2**12), b.grid_values(2**12))


def test_dagger_starts_at_initial_value():
    p = sample_wiener(FineGrid(2**12), SeedSpec(14))
    b = build_combined(RAMP, p, 64, 0.75, 0, 0.0)
    assert b.spline(0.0) == 0.0
    assert b.spline.value_at_start == 0.0


def test_euler_interp_bm_interpolates_path():
    p = sample_wiener(FineGrid(1024), SeedSpec(15))
    spline = build_euler_interp(BM, p, 32, 0.0)
    t = np.linspace(0, 1, 33)
    np.testing.assert_allclose(spline(t), p.values[::32], rtol=0, atol=1e-14)
    mid = p.times[16]
    assert spline(mid) == pytest.approx(0.5 * (p.values[0] + p.values[32]))


def test_euler_interp_full_resolution_is_reference():
    p = sample_wiener(FineGrid(512), SeedSpec(16))
    spline = build_euler_interp(OU, p, 512, 0.0)
    np.testing.assert_array_equal(spline.grid_values(512), reference_solution(OU, p, 0.0).values)


def test_sigma_norms():
    l2, sup = sigma_norms(RAMP)
    assert l2 == pytest.approx(math.sqrt(13 / 3), abs=1e-10)
    assert sup == pytest.approx(3.0, abs=1e-10)
    assert sigma_norms(OU) == pytest.approx((1.0, 1.0), abs=1e-12)
