import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from muskat import grid
from muskat.curve import Curve, tangent
from muskat.diagnostics import (
    ProximityError,
    boundary_limits,
    curve_sobolev_norm,
    energy_report,
    lambda_pointwise_check,
    min_sigma,
    pressure_at,
    sigma_field,
    sigma_lambda_form,
    stretch_rate,
    unit_normal,
    velocity_at,
)
from muskat.kernels import FluidParams, birkhoff_rott
from muskat.vorticity import solve_vorticity

STABLE = FluidParams(mu1=1.0, mu2=3.0, rho1=0.5, rho2=2.0, kappa=0.7, g=1.3)


def wavy(n=128):
    return Curve.from_functions(n, q1=lambda a: 0.05 * np.sin(a), q2=lambda a: 0.2 * np.cos(a) + 0.05 * np.sin(2 * a))


def test_sigma_flat_is_hydrostatic_jump():
    c = Curve.flat(32)
    s = sigma_field(c, np.zeros(32), STABLE)
    assert np.allclose(s, STABLE.g * (STABLE.rho2 - STABLE.rho1))


def test_sigma_equal_viscosity_reduces_to_gravity_term():
    c = wavy(64)
    p = FluidParams(rho2=3.0)
    w = solve_vorticity(c, p).w
    assert np.allclose(sigma_field(c, w, p), p.g * 3.0 * tangent(c)[0], atol=1e-15)


def test_sigma_integral_identity():
    c = wavy()
    w = solve_vorticity(c, STABLE, "dense").w
    total = grid.spacing(c.N) * sigma_field(c, w, STABLE).sum()
    assert total == pytest.approx(2 * np.pi * STABLE.g * (STABLE.rho2 - STABLE.rho1), abs=1e-7)


def test_min_sigma_subgrid_refinement():
    c = Curve.flat(64)
    a = c.alpha
    target = 0.123
    s = 2.0 + np.cos(a - target + np.pi)  # minimum 1 at alpha = target
    value, where = min_sigma(c, None, STABLE, sigma=s)
    assert value == pytest.approx(1.0, abs=1e-4)
    assert abs(where - target) < grid.spacing(64) / 10


def test_min_sigma_negative_when_heavy_fluid_on_top():
    c = Curve.flat(32)
    p = FluidParams(rho1=2.0, rho2=1.0)
    assert min_sigma(c, np.zeros(32), p)[0] == pytest.approx(-1.0)


def test_velocity_vanishes_for_zero_sheet():
    c = wavy(64)
    assert np.allclose(velocity_at(c, np.zeros(64), [0.1, 1.0]), 0.0)


def test_flat_pressure_is_horizontal_and_hydrostatic():
    c = Curve.flat(64)
    w = np.zeros(64)
    xs = np.array([[-2.0, 0.7], [0.3, 0.7], [2.5, 0.7]])
    p = pressure_at(c, w, STABLE, xs)
    assert np.ptp(p) < 1e-10
    for x2, rho in ((1.0, STABLE.rho1), (-1.0, STABLE.rho2)):
        dp = (pressure_at(c, w, STABLE, [0.0, x2 + 0.1]) - pressure_at(c, w, STABLE, [0.0, x2 - 0.1])) / 0.2
        assert dp == pytest.approx(-STABLE.g * rho, abs=1e-10)


@pytest.mark.parametrize("mu", [(1.0, 3.0), (3.0, 1.0)])
def test_darcy_law_holds_in_both_phases(mu):
    # grad p + (mu/kappa) v + (0, g rho) = 0 on each side of the interface
    p = FluidParams(mu1=mu[0], mu2=mu[1], rho1=0.5, rho2=2.0, kappa=0.7, g=1.3)
    c = wavy()
    w = solve_vorticity(c, p, "dense").w
    e = 1e-4
    for x, m, rho in (((0.3, 0.9), p.mu1, p.rho1), ((0.3, -0.9), p.mu2, p.rho2)):
        x = np.array(x)
        grad = np.array([(pressure_at(c, w, p, x + e * d) - pressure_at(c, w, p, x - e * d)) / (2 * e) for d in np.eye(2)])
        residual = grad + m / p.kappa * velocity_at(c, w, x) + np.array([0.0, p.g * rho])
        assert np.max(np.abs(residual)) < 1e-8


def test_unit_normal_points_up():
    n1, n2 = unit_normal(wavy(32))
    assert np.all(n2 > 0)
    assert np.allclose(n1 * n1 + n2 * n2, 1)


def test_boundary_limits_first_order():
    c = Curve.flat(64)
    w = np.cos(c.alpha)
    far = boundary_limits(c, w, STABLE, 1e-2)
    near = boundary_limits(c, w, STABLE, 1e-3)
    for key in ("jump", "average"):
        assert near[key] < far[key]
        assert near[key] < 2e-3


def test_too_close_raises_proximity_error():
    c = wavy(64)
    w = np.cos(c.alpha)
    with pytest.raises(ProximityError, match="boundary_limits"):
        velocity_at(c, w, [c.z1[5], c.z2[5] + 1e-9])


def test_lambda_check_on_constants_and_cosine():
    assert lambda_pointwise_check(np.full(32, 4.0)) == (0.0, True)
    a = grid.nodes(64)
    m, ok = lambda_pointwise_check(np.cos(a))
    assert ok and m > -1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 30))
def test_lambda_inequality_random_band_limited(seed, kmax):
    rng = np.random.default_rng(seed)
    a = grid.nodes(128)
    f = sum(rng.normal() * np.cos(k * a) + rng.normal() * np.sin(k * a) for k in range(kmax + 1))
    assert lambda_pointwise_check(f)[1]


def test_curve_sobolev_norm_flat_is_zero():
    assert curve_sobolev_norm(Curve.flat(32, 3.0), 3) == pytest.approx(3.0 * np.sqrt(2 * np.pi))
    assert curve_sobolev_norm(Curve.flat(32), 3) == 0.0


def test_stretch_rate_flat_is_zero():
    c = Curve.flat(64)
    br = birkhoff_rott(c, np.cos(c.alpha))
    assert abs(stretch_rate(c, br)) < 1e-15


def test_sigma_lambda_form_nonnegative_for_positive_sigma():
    c = wavy()
    w = solve_vorticity(c, STABLE, "dense").w
    s = sigma_field(c, w, STABLE)
    assert s.min() > 0
    assert sigma_lambda_form(c, s) >= -1e-8


def test_energy_report_flat():
    c = Curve.flat(64)
    rec = energy_report(c, np.zeros(64), STABLE)
    assert rec.H3_norm == 0.0
    assert rec.sup_F == pytest.approx(1.0)
    assert rec.min_sigma == pytest.approx(STABLE.g * (STABLE.rho2 - STABLE.rho1))
    assert rec.pressure_jump_max < 1e-10
    d = rec.to_dict()
    assert d["sobolev_norms"]["3"] == 0.0


def test_energy_report_is_deterministic():
    c = wavy(64)
    w = solve_vorticity(c, STABLE, "dense").w
    a = energy_report(c, w, STABLE).to_dict()
    b = energy_report(c, w, STABLE).to_dict()
    assert a == b


def test_boundary_limits_converge_at_first_order_and_extrapolate():
    c = wavy()
    w = solve_vorticity(c, STABLE, "dense").w
    coarse = boundary_limits(c, w, STABLE, 1e-2)
    fine = boundary_limits(c, w, STABLE, 1e-3)
    for key in ("jump", "average", "pressure"):
        assert coarse[key] / fine[key] == pytest.approx(10.0, rel=0.05)
    ext = boundary_limits(c, w, STABLE, 1e-2, extrapolate=True)
    assert ext["pressure"] < 1e-2 * coarse["pressure"]
