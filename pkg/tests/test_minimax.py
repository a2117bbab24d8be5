import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from freeknot_sde.minimax import (ApproxWorkspace, PolynomialPiece, best_poly, equioscillation_count, eval_piece,
                                  fit_window, lp_oracle_best_poly, minimax_error_prefix_scan,
                                  window_error)
from freeknot_sde.paths import FineGrid, SeedSpec, path_from_values, sample_wiener

from oracles import subset_minimax_error

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
# values on a 1e-3 lattice keep the LP solver's absolute tolerances meaningful
lattice = st.integers(-10**6, 10**6).map(lambda i: i / 1000)


def residuals(piece, t, v):
    return np.asarray(v) - eval_piece(piece, np.asarray(t))


@pytest.mark.parametrize("fit", [best_poly, lp_oracle_best_poly])
def test_two_points_constant(fit):
    p = fit([0.0, 1.0], [0.0, 1.0], 0)
    assert p.coefficients == pytest.approx((0.5,))
    assert p.sup_error == pytest.approx(0.5)


@pytest.mark.parametrize("fit", [best_poly, lp_oracle_best_poly])
def test_tent_line(fit):
    t, v = [0.0, 0.5, 1.0], [0.0, 1.0, 0.0]
    p = fit(t, v, 1)
    assert p.coefficients == pytest.approx((0.5, 0.0), abs=1e-12)
    assert p.sup_error == pytest.approx(0.5)
    assert list(np.sign(residuals(p, t, v))) == [-1, 1, -1]


@pytest.mark.parametrize("fit", [best_poly, lp_oracle_best_poly])
@pytest.mark.parametrize("r", [0, 1, 2, 3, 5])
def test_single_point(fit, r):
    p = fit([0.3], [-2.5], r)
    assert p.sup_error == 0.0
    assert eval_piece(p, 0.3) == -2.5


@pytest.mark.parametrize("r", [0, 1, 2, 3, 4])
def test_reproduces_polynomials(r):
    rng = np.random.default_rng(r)
    c = rng.normal(size=r + 1)
    t = np.linspace(0.0, 1.0, 40)
    v = np.polynomial.polynomial.polyval(t, c)
    p = best_poly(t, v, r)
    assert p.sup_error <= 1e-12
    np.testing.assert_allclose(eval_piece(p, t), v, atol=1e-12)


def test_interpolation_when_enough_freedom():
    rng = np.random.default_rng(3)
    t = np.sort(rng.uniform(0, 1, 5))
    v = rng.normal(size=5)
    for r in (4, 6):
        assert lp_oracle_best_poly(t, v, r).sup_error <= 1e-9
        assert best_poly(t, v, r).sup_error <= 1e-9


def test_eval_piece_shapes():
    const = PolynomialPiece((0, 3), 1.0, 2.0, (4.0,), 0, 0.0)
    assert eval_piece(const, 1.7) == 4.0
    np.testing.assert_array_equal(eval_piece(const, np.array([1.0, 2.0])), [4.0, 4.0])
    ramp = PolynomialPiece((0, 3), 1.0, 2.0, (0.0, 1.0), 1, 0.0)
    assert eval_piece(ramp, 1.25) == pytest.approx(0.25)


def test_piece_validates_coefficients():
    with pytest.raises(ValueError):
        PolynomialPiece((0, 1), 0.0, 1.0, (1.0, 2.0), 0, 0.0)


@pytest.mark.parametrize("r", [0, 1, 2, 3])
def test_agrees_with_lp_and_equioscillates(r):
    rng = np.random.default_rng(100 + r)
    for _ in range(40):
        t = np.sort(rng.uniform(0, 1, 50))
        v = rng.normal(size=50)
        fast = best_poly(t, v, r)
        lp = lp_oracle_best_poly(t, v, r)
        assert abs(fast.sup_error - lp.sup_error) <= 1e-10
        assert equioscillation_count(residuals(fast, t, v), fast.sup_error) >= r + 2


@pytest.mark.parametrize("r", [0, 1, 2])
def test_agrees_with_subset_oracle(r):
    rng = np.random.default_rng(7 + r)
    for _ in range(15):
        t = np.sort(rng.uniform(0, 1, 9))
        v = rng.normal(size=9)
        assert best_poly(t, v, r).sup_error == pytest.approx(subset_minimax_error(t, v, r), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=2, max_size=30), st.integers(0, 3))
def test_optimality_against_perturbations(vals, r):
    v = np.array(vals)
    t = np.linspace(0.0, 1.0, v.size)
    p = best_poly(t, v, r)
    rng = np.random.default_rng(abs(hash(tuple(vals))) % 2**32)
    scale = np.ptp(v) + 1.0
    for _ in range(10):
        c = np.array(p.coefficients) + rng.normal(scale=1e-3 * scale, size=r + 1)
        worse = np.max(np.abs(v - np.polynomial.polynomial.polyval(t, c)))
        assert worse >= p.sup_error * (1 - 1e-9) - 1e-9 * scale


@settings(max_examples=60, deadline=None)
@given(st.lists(finite, min_size=3, max_size=25), st.integers(0, 3),
       st.floats(-100, 100), st.floats(0.01, 100))
def test_affine_equivariance(vals, r, shift, scale):
    # error scales with |a| under v -> a v + b and is invariant under time shifts
    v = np.array(vals)
    t = np.linspace(0.0, 1.0, v.size)
    base = best_poly(t, v, r).sup_error
    moved = best_poly(t + shift, scale * v + shift, r).sup_error
    assert moved == pytest.approx(scale * base, rel=1e-7, abs=1e-9 * (1 + scale * np.ptp(v)))


@settings(max_examples=40, deadline=None)
@given(st.lists(finite, min_size=3, max_size=25))
def test_error_nonincreasing_in_degree(vals):
    v = np.array(vals)
    t = np.linspace(0.0, 2.0, v.size)
    errs = [best_poly(t, v, r).sup_error for r in range(4)]
    tol = 1e-9 * (1 + np.ptp(v))
    assert all(b <= a + tol for a, b in zip(errs, errs[1:]))


def test_sup_error_is_recomputable():
    p = sample_wiener(FineGrid(512), SeedSpec(3))
    for r in range(4):
        piece = fit_window(p, 100, 300, r)
        t = p.times[100:301]
        assert piece.sup_error == np.max(np.abs(residuals(piece, t, p.values[100:301])))


def test_prefix_scan_linear_path_constant():
    path = path_from_values(np.linspace(0.0, 1.0, 101))
    e = minimax_error_prefix_scan(path, 0, 0, 0.3)
    # first grid point strictly above t = 0.6
    assert e == 61


def test_prefix_scan_linear_path_line():
    path = path_from_values(np.linspace(0.0, 1.0, 101))
    assert minimax_error_prefix_scan(path, 0, 1, 1e-6) is None


@pytest.mark.parametrize("r", [0, 1, 2, 3])
def test_prefix_scan_matches_brute_force(r):
    p = sample_wiener(FineGrid(256), SeedSpec(21))
    start, eps = 40, 0.08
    e = minimax_error_prefix_scan(p, start, r, eps)
    errs = [fit_window(p, start, j, r).sup_error for j in range(start + 1, 257)]
    over = [j for j, err in zip(range(start + 1, 257), errs) if err > eps]
    assert e == (over[0] if over else None)


@pytest.mark.parametrize("r", [0, 1, 2])
def test_prefix_scan_none_above_whole_error(r):
    p = sample_wiener(FineGrid(256), SeedSpec(4))
    whole = fit_window(p, 10, 256, r).sup_error
    assert minimax_error_prefix_scan(p, 10, r, whole * (1 + 1e-9) + 1e-15) is None


@pytest.mark.parametrize("r", [0, 1, 2, 3])
def test_workspace_tracks_from_scratch(r):
    p = sample_wiener(FineGrid(300), SeedSpec(8))
    ws = ApproxWorkspace(r, capacity=4)
    t, v = p.times, p.values
    n_check = 300 if r <= 1 else 60
    for i in range(n_check):
        got = ws.append(t[i], v[i])
        if r <= 1 and i > 0:
            assert got == window_error(p, 0, i, r)
        want = best_poly(t[: i + 1], v[: i + 1], r).sup_error
        assert got == pytest.approx(want, rel=1e-9, abs=1e-14)
    assert len(ws) == n_check


@settings(max_examples=30, deadline=None)
@given(st.lists(lattice, min_size=4, max_size=40))
def test_line_matches_lp(vals):
    v = np.array(vals)
    assume(np.ptp(v) > 0)
    t = np.linspace(0.0, 1.0, v.size)
    fast = best_poly(t, v, 1).sup_error
    lp = lp_oracle_best_poly(t, v, 1).sup_error
    assert fast == pytest.approx(lp, rel=1e-8, abs=1e-10 * np.ptp(v))
