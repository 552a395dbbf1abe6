import numpy as np
import pytest

from nlslab.errors import DomainError, PreconditionError
from nlslab.estimates import (
    CELL_LOG_MEAN,
    RatioSurvey,
    build_regular_point_problem,
    cell_log_mean_oracle,
    check_difference_bound,
    check_heat_domination,
    check_linf_interpolation,
    heat_window,
    log_potential_matrix,
    optimizing_tau,
    periodized_gaussian_kernel,
    regular_point_check,
    regular_point_survey,
    restricted_spectrum,
    survey_As_bound,
    survey_equivalence,
    survey_free_resolvent,
    two_term_gap,
)
from nlslab.fields import gaussian_family, random_bandlimited_fields
from nlslab.grid import Grid2D
from nlslab.operators import build_operator
from nlslab.potentials import PotentialSpec, virial_weight


def test_cell_log_mean_closed_form():
    assert CELL_LOG_MEAN == pytest.approx(cell_log_mean_oracle(), abs=1e-12)


def test_log_potential_matrix_is_symmetric(grid32):
    G = log_potential_matrix(Grid2D(16, 4.0))
    assert np.allclose(G, G.T)


def test_regular_point_bump_is_regular():
    v = regular_point_survey(PotentialSpec.gaussian_bump(1.0, 1.0), 8.0, ns=(16, 24, 32))
    assert v.verdict == "regular"
    assert all(r.sigma_min > 0 for r in v.results)


def test_regular_point_rejects_zero_potential(grid32):
    with pytest.raises(PreconditionError, match="V ≢ 0"):
        regular_point_survey(PotentialSpec.zero(), 8.0)
    with pytest.raises(PreconditionError):
        build_regular_point_problem(PotentialSpec.zero(), grid32)


def test_restricted_problem_projects_out_v():
    g = Grid2D(16, 4.0)
    prob = build_regular_point_problem(PotentialSpec.gaussian_bump(1.0, 1.0), g)
    ev = restricted_spectrum(prob)
    assert len(ev) == int(np.count_nonzero(prob.v)) - 1
    r = regular_point_check(PotentialSpec.gaussian_bump(1.0, 1.0), g)
    assert r.sigma_min <= r.sigma_max


def test_free_resolvent_plain_bound_is_uniform():
    g = Grid2D(128, 20.0)
    fields, ids = gaussian_family(g, [0.5, 1.0, 2.0], (0.0, 1.0))
    taus = [0.25, 1.0, 4.0, 16.0]
    sv = survey_free_resolvent(g, 4.0, 0.5, taus, fields, field_ids=ids, seed=0)
    per_tau = np.array(list(sv.sup_by_x().values()))
    assert np.all(np.isfinite(per_tau))
    assert per_tau.max() / per_tau.min() < 2.0  # no growth or collapse in tau


def test_free_resolvent_parameter_errors():
    g = Grid2D(32, 8.0)
    f = g.gaussian(1.0)
    with pytest.raises(DomainError, match=r"a > 2\(1 - s0\)"):
        survey_free_resolvent(g, 4.0, 0.5, [1.0], f, "weight_inside", a=0.5)
    with pytest.raises(DomainError, match="1/k"):
        survey_free_resolvent(g, 1.5, 0.1, [1.0], f)
    with pytest.raises(DomainError):
        survey_free_resolvent(g, 4.0, 0.5, [1.0], f, "bogus")


def test_free_resolvent_skips_wrapping_taus():
    g = Grid2D(32, 4.0)
    sv = survey_free_resolvent(g, 4.0, 0.5, [1e-4, 4.0], g.gaussian(1.0))
    assert sv.skipped == 1
    assert sv.count == 1


def test_ratio_survey_csv(tmp_path):
    sv = RatioSurvey("x", {"q": 2}, ["a", "b"], [0.5, 2.0], [1.0, 10.0], 32, 8.0, 7)
    path = tmp_path / "s.csv"
    sv.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ") and '"seed": 7' in lines[0]
    assert lines[1] == "sample_id,x,ratio"
    assert sv.breakdown() == {0: 0.5, 1: 2.0}


def test_periodized_gaussian_integrates_to_one(grid32):
    G = periodized_gaussian_kernel(Grid2D(24, 6.0), 0.5)
    assert np.allclose(G.sum(axis=1) * (2 * 6.0 / 24) ** 2, 1.0, rtol=1e-10)


def test_heat_domination_free_case_is_exact():
    g = Grid2D(24, 6.0)
    op = build_operator(g, PotentialSpec.gaussian_bump(0.0, 1.0), "dense")
    lo, hi = heat_window(g)
    cert = check_heat_domination(op, [lo, hi])
    assert cert.beta == 1.0
    # only the grid truncation separates the discrete and continuum kernels
    assert cert.C == pytest.approx(1.0, abs=5e-3)
    assert cert.nonnegative


def test_heat_domination_rejects_negative_potential():
    g = Grid2D(16, 4.0)
    op = build_operator(g, PotentialSpec.gaussian_bump(-1.0, 1.0), "dense")
    with pytest.raises(PreconditionError):
        check_heat_domination(op, [0.5])


def test_equivalence_survey_small(op32, grid32):
    fields = random_bandlimited_fields(grid32, 8, seed=1)
    sv = survey_equivalence(op32, [0.25, 0.5], fields, seed=1)
    assert sv.count == 16
    assert 0.1 <= sv.min_ratio and sv.sup_ratio <= 10
    with pytest.raises(DomainError):
        survey_equivalence(op32, [1.0], fields)


def test_equivalence_dense_and_lanczos_agree(op32, grid32, bump):
    fields = random_bandlimited_fields(grid32, 4, seed=2)
    a = survey_equivalence(op32, [0.5], fields, method="dense")
    b = survey_equivalence(build_operator(grid32, bump), [0.5], fields, method="lanczos")
    assert np.allclose(a.ratios, b.ratios, rtol=1e-8)


def test_random_fields_are_consistent_across_resolution():
    a = random_bandlimited_fields(Grid2D(32, 8.0), 2, seed=5)
    b = random_bandlimited_fields(Grid2D(64, 8.0), 2, seed=5)
    assert np.allclose(a, b[:, ::2, ::2], atol=1e-8)


def test_as_bound_survey(op32, grid32, bump):
    W = virial_weight(bump, grid32)
    fields = random_bandlimited_fields(grid32, 3, seed=0)
    sv = survey_As_bound(op32, 1.5, 2.0, fields, W, method="eigen")
    assert sv.count == 3 and np.all(np.isfinite(sv.ratios))
    with pytest.raises(DomainError):
        survey_As_bound(op32, 0.5, 2.0, fields, W)
    with pytest.raises(DomainError):
        survey_As_bound(op32, 1.5, 3.0, fields, W)


def test_difference_bound_routes(op32, grid32):
    fields = random_bandlimited_fields(grid32, 2, seed=0)
    sv = check_difference_bound(op32, 1.0, 0.5, fields)
    assert np.all(sv.ratios > 0)
    assert sv.extra["route_gap"] < 1e-4
    with pytest.raises(DomainError):
        check_difference_bound(op32, 0.5, 0.5, fields)


@pytest.mark.parametrize("s", [1.2, 1.5, 1.9])
def test_two_term_equality_at_optimizing_tau(s):
    assert two_term_gap(s, 3.0, 0.7) < 1e-12
    assert optimizing_tau(s, 3.0, 0.7) > 0


def test_linf_interpolation(op32, grid32):
    fields = random_bandlimited_fields(grid32, 4, seed=0)
    sv = check_linf_interpolation(op32, 1.5, fields)
    assert np.all(np.isfinite(sv.ratios))
    assert sv.extra["two_term_gap"] < 1e-12
    with pytest.raises(DomainError):
        check_linf_interpolation(op32, 1.0, fields)
