"""Lambda scans, gap-minimum critical points, delta tuning, scaling fits."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dense_oracle import dense_chi_point

from bjjsense.criticality import (
    PeakEstimate,
    ScanConfig,
    SusceptibilityCurve,
    chi_at_point,
    default_delta_grid,
    default_lambda_grid,
    fit_power_law,
    locate_critical_gap,
    optimize_delta,
    scaling_study,
    scan_lambda,
    temperature_sweep,
)
from bjjsense.model import ModelParams


def _config(**overrides):
    base = dict(
        params_template=ModelParams(n_particles=40, imbalance=2e-3),
        lambda_grid=-1.2 + 5e-3 * np.arange(41),
        temperature=0.0,
    )
    base.update(overrides)
    return ScanConfig(**base)


def test_scan_config_validation():
    with pytest.raises(ValueError):
        _config(lambda_grid=np.array([-1.0]))
    with pytest.raises(ValueError):
        _config(lambda_grid=np.array([-1.0, -1.0, -0.9]))
    with pytest.raises(ValueError):
        _config(lambda_grid=np.array([-0.9, -1.0, -1.1]))
    with pytest.raises(ValueError):
        _config(which=("moment", "bogus"))
    with pytest.raises(ValueError):
        _config(temperature=-0.5)
    with pytest.raises(ValueError):
        _config(epsilon0=0.0)


def test_default_lambda_grid_shape():
    grid = default_lambda_grid()
    assert grid[0] == -1.6
    assert_allclose(grid[-1], -0.4, atol=1e-12)
    assert_allclose(np.diff(grid), 2e-3, rtol=1e-10)


def test_scan_dominance_and_peak_coincidence():
    config = ScanConfig(
        params_template=ModelParams(n_particles=100, imbalance=1e-3),
        lambda_grid=-1.3 + 2e-3 * np.arange(301),
        temperature=0.0,
    )
    curve = scan_lambda(config)
    mom, cl, q = curve.chi_mom, curve.chi_cl, curve.chi_q
    assert np.all(mom >= 0) and np.all(cl >= 0) and np.all(q >= 0)
    # chi_mom carries O(step^2) central-difference bias, so only
    # violations beyond one percent are meaningful
    assert np.all(mom <= cl * 1.01)
    assert np.all(cl <= q * (1.0 + 1e-6))
    peaks = [curve.peak(m).index for m in ("moment", "classical", "quantum")]
    assert max(peaks) - min(peaks) <= 2
    assert all(curve.peak(m).interior for m in ("moment", "classical", "quantum"))


def test_scan_subset_of_methods():
    curve = scan_lambda(_config(which=("classical",)))
    assert curve.chi_mom is None and curve.chi_q is None
    assert curve.chi_cl.size == curve.lambda_grid.size
    with pytest.raises(ValueError):
        curve.chi("moment")


def test_scan_deterministic_across_threads_and_reruns():
    base = _config(temperature=0.5)
    c1 = scan_lambda(base)
    c2 = scan_lambda(_config(temperature=0.5, threads=2))
    c3 = scan_lambda(base)
    for a, b in ((c1, c2), (c1, c3)):
        assert np.array_equal(a.chi_mom, b.chi_mom)
        assert np.array_equal(a.chi_cl, b.chi_cl)
        assert np.array_equal(a.chi_q, b.chi_q)


def test_peak_parabolic_refinement():
    grid = np.arange(-1.0, 1.0, 0.1)
    apex = 0.234
    y = 1.0 - (grid - apex) ** 2
    curve = SusceptibilityCurve(
        lambda_grid=grid, mean_jz=np.zeros_like(grid),
        var_jz=np.ones_like(grid), chi_mom=None, chi_cl=None, chi_q=y,
        config=_config(),
    )
    peak = curve.peak("quantum")
    assert isinstance(peak, PeakEstimate)
    assert peak.interior
    assert_allclose(peak.lambda_peak, apex, atol=1e-12)
    assert_allclose(peak.value, 1.0, atol=1e-12)


def test_peak_at_boundary_not_interior():
    grid = np.linspace(0.0, 1.0, 11)
    curve = SusceptibilityCurve(
        lambda_grid=grid, mean_jz=np.zeros_like(grid),
        var_jz=np.ones_like(grid), chi_mom=None, chi_cl=grid.copy(),
        chi_q=None, config=_config(),
    )
    peak = curve.peak("classical")
    assert not peak.interior
    assert peak.index == grid.size - 1


def test_chi_at_point_matches_scan_fidelity_routes():
    lam = -1.1
    params = ModelParams(n_particles=30, imbalance=2e-3)
    config = ScanConfig(
        params_template=params,
        lambda_grid=np.array([lam - 0.01, lam, lam + 0.01]),
        temperature=0.3,
    )
    curve = scan_lambda(config)
    point = chi_at_point(
        params.replace(lambda_control=lam), temperature=0.3
    )
    assert_allclose(point["classical"], curve.chi_cl[1], rtol=1e-12)
    assert_allclose(point["quantum"], curve.chi_q[1], rtol=1e-12)


def test_chi_at_point_matches_dense_oracle():
    cases = [(-1.1, 2e-3, 0.0), (-0.8, 1e-3, 1.0), (-1.3, 5e-3, 1.5)]
    for lam, delta, temperature in cases:
        pkg = chi_at_point(
            ModelParams(n_particles=12, lambda_control=lam, imbalance=delta),
            temperature=temperature,
            epsilon0=3e-2,
        )
        ref = dense_chi_point(12, lam, delta, temperature, epsilon0=3e-2)
        for method in ("moment", "classical", "quantum"):
            assert_allclose(pkg[method], ref[method], rtol=1e-6)


def test_quantum_chi_paramagnetic_formula():
    # deep in the symmetric phase chi_Q approaches 1/[8(lambda+1)^2]
    lam = -0.5
    point = chi_at_point(
        ModelParams(n_particles=1000, lambda_control=lam, imbalance=2e-3),
        which=("quantum",),
    )
    expected = 1.0 / (8.0 * (lam + 1.0) ** 2)
    assert_allclose(point["quantum"], expected, rtol=0.1)


def test_temperature_sweep_ordering():
    crit = locate_critical_gap(60)
    sweep = temperature_sweep(60, [0.0, 0.3, 1.0], crit.lambda_c)
    mom, cl, q = sweep["moment"], sweep["classical"], sweep["quantum"]
    assert np.all(mom <= cl * (1.0 + 1e-6))
    assert np.all(cl <= q * (1.0 + 1e-6))
    assert_allclose(sweep["temperature"], [0.0, 0.3, 1.0], atol=0.0)


def test_temperature_sweep_validation():
    with pytest.raises(ValueError):
        temperature_sweep(20, [], -1.0)
    with pytest.raises(ValueError):
        temperature_sweep(20, [0.1, -0.2], -1.0)


def test_locate_critical_gap_large_system():
    crit = locate_critical_gap(1000)
    assert -1.03 < crit.lambda_c < -1.018
    assert crit.gap > 0
    assert crit.levels == (0, 2)


def test_critical_point_approaches_bulk_monotonically():
    shifts = [locate_critical_gap(n).shift for n in (100, 300, 1000)]
    assert all(s > 0 for s in shifts)
    assert shifts[0] > shifts[1] > shifts[2]


def test_locate_critical_gap_needs_interior_minimum():
    with pytest.raises(ValueError):
        locate_critical_gap(200, lambda_bracket=(-0.7, -0.4))


def test_default_delta_grid_stays_positive():
    grid = default_delta_grid()
    assert grid.size == 25
    assert grid[0] == pytest.approx(1e-6)
    assert grid[-1] == pytest.approx(1e-1)
    assert np.all(grid > 0)
    assert np.all(np.diff(grid) > 0)


def test_optimize_delta_centers_peak():
    crit = locate_critical_gap(300)
    opt = optimize_delta(
        300, "quantum", lambda_c=crit.lambda_c,
        delta_grid=np.logspace(-5, -2, 10), window_points=21,
    )
    assert opt.within_tolerance
    window_step = 2.0 * 8.0 * 300 ** (-2.0 / 3.0) / 20.0
    assert abs(opt.peak_offset) <= 0.5 * window_step
    assert 1e-5 <= opt.delta <= 1e-2
    assert_allclose(opt.peak_lambda, crit.lambda_c + opt.peak_offset,
                    rtol=1e-12)


def test_optimize_delta_validation():
    with pytest.raises(ValueError):
        optimize_delta(100, "bogus", lambda_c=-1.05)
    with pytest.raises(ValueError):
        optimize_delta(100, "moment", lambda_c=-1.05,
                       delta_grid=np.array([-1e-3, 1e-3]))


def test_fit_power_law_exact_cubic():
    x = np.array([1.0, 2.0, 3.0, 5.0])
    fit = fit_power_law(x, 2.0 * x**3)
    assert_allclose(fit.exponent, 3.0, rtol=1e-12)
    assert_allclose(fit.prefactor, 2.0, rtol=1e-12)
    assert fit.r_squared > 1.0 - 1e-12


def test_fit_power_law_validation():
    with pytest.raises(ValueError):
        fit_power_law([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        fit_power_law([1.0, 2.0, -3.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        fit_power_law([1.0, 2.0, 3.0], [1.0, 0.0, 3.0])
    with pytest.raises(ValueError):
        fit_power_law([1.0, 2.0, 3.0], [1.0, 2.0])


def test_scaling_study_small_systems():
    res = scaling_study(
        n_values=(40, 60, 80),
        delta_grid=np.logspace(-4, -2, 6),
        window_points=15,
    )
    assert np.all(np.diff(res.lambda_c) > 0)
    assert -0.80 < res.shift_fit.exponent < -0.55
    assert 1.8 < res.shift_fit.prefactor < 3.4
    for method in ("moment", "classical", "quantum"):
        ratio = res.chi[method] / res.n_values
        # super-extensive growth: chi/N keeps rising with N
        assert np.all(np.diff(ratio) > 0)
        assert res.fits[method].exponent > 0
        assert res.fits[method].r_squared > 0.99
        assert np.all(res.delta_star[method] > 0)
    # zero temperature: measured and quantum routes coincide
    assert_allclose(res.chi["classical"], res.chi["quantum"], rtol=1e-6)


def test_scaling_study_needs_three_sizes():
    with pytest.raises(ValueError):
        scaling_study(n_values=(100, 200))
