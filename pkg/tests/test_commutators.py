import numpy as np
import pytest

from nlslab.commutators import (
    A_defect,
    A_direct,
    A_integral,
    band_energy_fraction,
    commutator_defect_apply,
    dilation_apply,
    laguerre_gaussian,
    verification_fields,
    verify_appendix_identities,
    verify_power_commutator,
    verify_prop21,
    write_rows_csv,
)
from nlslab.errors import DomainError
from nlslab.grid import Grid2D, l2_norm
from nlslab.operators import build_operator
from nlslab.potentials import PotentialSpec, virial_weight


@pytest.fixture(scope="module")
def free64():
    g = Grid2D(64, 12.0)
    return g, build_operator(g, PotentialSpec.zero())


def test_dilation_of_gaussian():
    g = Grid2D(64, 10.0)
    f = g.gaussian(1.0)
    assert np.allclose(dilation_apply(g, f), -g.r2 * f, atol=1e-10)


def test_laguerre_gaussian_is_band_limited(free64):
    g, _ = free64
    f = laguerre_gaussian(g, 4, 1.0)
    assert np.max(np.abs(f)) == pytest.approx(1.0)
    assert band_energy_fraction(g, f) < 1e-6


@pytest.mark.parametrize("s", [0.5, 1.0, 1.5])
def test_A_vanishes_without_potential(free64, s):
    g, op = free64
    for f in verification_fields(g, seed=3, count=2):
        assert l2_norm(g, A_direct(op, s, f)) / l2_norm(g, f) < 1e-5
        assert not np.any(A_integral(op, s, f, np.zeros((g.n, g.n))))


def test_A_homogeneity_in_s_domain(op32, grid32):
    f = grid32.gaussian(1.0)
    with pytest.raises(DomainError):
        A_direct(op32, 0.0, f)
    with pytest.raises(DomainError):
        A_integral(op32, 2.0, f, virial_weight(PotentialSpec.gaussian_bump(), grid32))


@pytest.mark.parametrize("s", [0.5, 1.0, 1.5])
def test_route_gap_is_the_box_defect(op32, grid32, bump, s):
    # A_direct - A_integral equals the resolvent sandwich of the periodic commutator defect
    W = virial_weight(bump, grid32)
    f = verification_fields(grid32, seed=0, count=1)[0]
    d = A_direct(op32, s, f)
    i = A_integral(op32, s, f, W, method="eigen")
    e = A_defect(op32, s, f, W, method="eigen")
    assert l2_norm(grid32, d - i - e) / l2_norm(grid32, d) < 1e-6


def test_defect_vanishes_for_localized_free_fields(free64):
    g, op = free64
    f = laguerre_gaussian(g, 4, 1.0)
    D = commutator_defect_apply(op, np.zeros((g.n, g.n)), f)
    assert l2_norm(g, D) / l2_norm(g, op.apply(f)) < 1e-8


def test_A_integral_is_linear_in_weight(op32, grid32, bump):
    W = virial_weight(bump, grid32)
    f = grid32.gaussian(1.2)
    a = A_integral(op32, 1.0, f, 2.5 * W, method="eigen")
    b = A_integral(op32, 1.0, f, W, method="eigen")
    assert np.allclose(a, 2.5 * b, atol=1e-13)


def test_commutator_identities_on_resolved_grid():
    g = Grid2D(64, 12.0)
    op = build_operator(g, PotentialSpec.gaussian_bump(), "dense")
    f = verification_fields(g, 0, 1)[0]
    rows = verify_appendix_identities(g, 4.0, f, op, s=1.5)
    assert [r.identity_id for r in rows] == ["dt_phase_minus", "dt_phase_plus", "laplacian_phase_minus", "laplacian_phase_plus", "schrodinger_phase_minus", "schrodinger_phase_plus", "power_commutator"]
    for r in rows:
        if r.kind == "spatial":
            assert r.residual < 1e-6
        else:
            assert 1.8 <= r.order <= 2.2


def test_power_commutator_order_undefined_when_exact(op32, grid32):
    # for s = 1 the time dependence t**s is linear: centred differences are exact
    res, order = verify_power_commutator(op32, 1.0, 2.0, grid32.gaussian(1.0))
    assert res < 1e-10
    assert np.isnan(order)


def test_jv_commutator_second_order(op32, grid32):
    f = verification_fields(grid32, 0, 1)[0]
    res, order = verify_prop21(op32, 1.5, 2.0, f, with_order=True)
    assert 1.8 <= order <= 2.2


def test_identities_need_t_at_least_one(grid32):
    with pytest.raises(DomainError):
        verify_appendix_identities(grid32, 0.5, grid32.gaussian(1.0))


def test_rows_csv(tmp_path, grid32):
    rows = verify_appendix_identities(grid32, 2.0, grid32.gaussian(1.0))
    path = tmp_path / "rows.csv"
    write_rows_csv(rows, path)
    write_rows_csv(rows, path, append=True)
    lines = path.read_text().splitlines()
    assert lines[0] == "identity_id,s,t,n,L,residual"
    assert len(lines) == 1 + 2 * len(rows)
