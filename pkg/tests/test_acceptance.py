"""End-to-end checks of the advertised results at their stated tolerances.

Each test is one headline claim: the two finite-size scaling laws, the
closed forms on both sides of the transition, the dominance chain on full
scans, agreement with the dense reference implementation, the analytic
Fisher-information families, the commuting-case identity, and the
calibration of the estimation pipeline on synthetic data.  Two checks are
currently red at their advertised tolerances; README documents why they
stay that way.
"""

from pathlib import Path

import numpy as np
import pytest
from scipy.stats import norm

import bjjsense.estimation as est
from dense_oracle import dense_chi_point, dense_hamiltonian, jacobi_eigh

from bjjsense.criticality import (
    ScanConfig,
    chi_at_point,
    default_lambda_grid,
    scaling_study,
    scan_lambda,
)
from bjjsense.fidelity import (
    DensityOperator,
    bhattacharyya_fidelity,
    default_epsilons,
    susceptibility_from_fidelity,
    uhlmann_fidelity,
)
from bjjsense.model import (
    DistributionOverM,
    ModelParams,
    build_hamiltonian,
    diagonalize,
)

SIZES = (200, 300, 500, 700, 1000)
TILT = 2e-3


@pytest.fixture(scope="module")
def scaling():
    """Five-size scaling study with per-method tilt optimization (~30 s)."""
    return scaling_study(SIZES)


@pytest.fixture(scope="module")
def full_scans():
    """Full N=1000 scans at three temperatures (~3 min)."""
    curves = {}
    for temperature in (0.0, 0.5, 1.0):
        curves[temperature] = scan_lambda(
            ScanConfig(
                params_template=ModelParams(1000, imbalance=TILT),
                lambda_grid=default_lambda_grid(),
                temperature=temperature,
            )
        )
    return curves


def test_finite_size_critical_shift_power_law(scaling):
    fit = scaling.shift_fit
    assert abs(fit.exponent - (-2.0 / 3.0)) <= 0.05, (
        f"shift exponent {fit.exponent:.4f}, want -2/3 +- 0.05"
    )
    assert abs(fit.prefactor - 2.3) <= 0.2 * 2.3, (
        f"shift prefactor {fit.prefactor:.4f}, want 2.3 +- 20%"
    )


def test_peak_susceptibility_super_extensive_scaling(scaling):
    # At N <= 1000 the effective chi/N exponent is still ~0.42 and drifting
    # toward its 1/3 asymptote, and the fitted prefactors order the other
    # way around than advertised (the moment peak cannot exceed the quantum
    # one at any tilt).  Both checks stay at the advertised targets and are
    # expected to fail; see README.
    advertised = {"moment": 1.18, "classical": 1.08, "quantum": 1.08}
    problems = []
    for method in ("moment", "classical", "quantum"):
        fit = scaling.fits[method]
        if abs(fit.exponent - 1.0 / 3.0) > 0.05:
            problems.append(
                f"{method} chi/N exponent {fit.exponent:.4f}, "
                f"want 1/3 +- 0.05"
            )
        ref = advertised[method]
        if abs(fit.prefactor - ref) > 0.15 * ref:
            problems.append(
                f"{method} prefactor {fit.prefactor:.4f}, "
                f"want {ref} +- 15%"
            )
    assert not problems, "; ".join(problems)


def test_symmetric_phase_closed_form():
    # chi_Q -> 1/[8 (1+lambda)^2] for N -> inf; the finite-size excess at
    # N=1000 grows toward the transition and breaches the 10% band at the
    # nearest point, lambda = -0.7.  Kept at the advertised tolerance; see
    # README.
    problems = []
    for lam in (-0.7, -0.5, -0.3):
        point = chi_at_point(
            ModelParams(1000, lambda_control=lam, imbalance=TILT),
            which=("quantum",),
        )
        reference = 1.0 / (8.0 * (lam + 1.0) ** 2)
        rel = point["quantum"] / reference - 1.0
        if abs(rel) > 0.10:
            problems.append(f"lambda={lam}: off by {rel:+.1%}")
    assert not problems, "; ".join(problems)


def test_broken_phase_closed_form():
    # The untilted broken-phase ground state is a degenerate cat pair; the
    # small tilt used throughout the scans selects a branch.
    for lam in (-2.0, -3.0):
        point = chi_at_point(
            ModelParams(1000, lambda_control=lam, imbalance=TILT),
            which=("quantum",),
        )
        reference = 1000.0 / (abs(lam) ** 3 * np.sqrt(lam * lam - 1.0))
        assert point["quantum"] == pytest.approx(reference, rel=0.10), (
            f"lambda={lam}"
        )


def test_susceptibility_dominance_chain(full_scans):
    for temperature, curve in full_scans.items():
        mom_excess = float(np.max(curve.chi_mom / curve.chi_cl - 1.0))
        cl_excess = float(np.max(curve.chi_cl / curve.chi_q - 1.0))
        assert mom_excess <= 1e-2, (
            f"T={temperature}: chi_mom exceeds chi_cl by {mom_excess:.2e}"
        )
        assert cl_excess <= 1e-2, (
            f"T={temperature}: chi_cl exceeds chi_q by {cl_excess:.2e}"
        )


def test_agrees_with_dense_reference():
    rng = np.random.default_rng(61)
    for _ in range(50):
        n = int(rng.integers(2, 21))
        params = ModelParams(
            n_particles=n,
            tunneling=float(rng.uniform(0.5, 2.0)),
            lambda_control=float(rng.uniform(-3.0, 0.5)),
            imbalance=float(rng.uniform(-0.05, 0.05)),
        )
        vals = diagonalize(build_hamiltonian(params)).eigenvalues
        ref, _ = jacobi_eigh(dense_hamiltonian(
            n, params.tunneling, params.lambda_control, params.imbalance
        ))
        assert np.max(np.abs(vals - ref)) <= 1e-10

    for lam, delta, temperature in ((-1.5, 1e-3, 0.0), (-0.8, 2e-3, 1.0)):
        pkg = chi_at_point(
            ModelParams(n_particles=10, lambda_control=lam, imbalance=delta),
            temperature=temperature,
            epsilon0=3e-2,
        )
        ref = dense_chi_point(10, lam, delta, temperature, epsilon0=3e-2)
        for method in ("moment", "classical", "quantum"):
            assert pkg[method] == pytest.approx(ref[method], rel=1e-6)


def test_fisher_information_analytic_families():
    # Gaussian location family: classical Fisher information is 1/sigma^2.
    sigma = 0.05
    z = np.linspace(-0.75, 0.75, 1501)

    def location_dist(mu):
        p = np.exp(-0.5 * ((z - mu) / sigma) ** 2)
        return DistributionOverM(z, p / p.sum())

    chi_cl = susceptibility_from_fidelity(
        lambda eps: bhattacharyya_fidelity(location_dist(0.0),
                                           location_dist(eps)),
        default_epsilons(0.0),
    )
    assert chi_cl.value == pytest.approx(1.0 / sigma**2, rel=1e-2)

    # Two-level rotation family: chi_Q = 4 exactly.
    def rotated(theta):
        v = np.array([[np.cos(theta)], [np.sin(theta)]])
        return DensityOperator(v, np.ones(1))

    chi_q = susceptibility_from_fidelity(
        lambda eps: uhlmann_fidelity(rotated(0.3), rotated(0.3 + eps)),
        default_epsilons(0.3),
        method="quantum",
    )
    assert chi_q.value == pytest.approx(4.0, abs=1e-6)


def test_commuting_pairs_have_equal_fidelities():
    rng = np.random.default_rng(88)
    for _ in range(100):
        dim = int(rng.integers(2, 13))
        basis, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        w1 = rng.random(dim) + 1e-3
        w2 = rng.random(dim) + 1e-3
        w1 /= w1.sum()
        w2 /= w2.sum()
        f_q = uhlmann_fidelity(
            DensityOperator(basis, w1), DensityOperator(basis, w2)
        )
        f_cl = float(np.sqrt(w1 * w2).sum())
        assert abs(f_q - f_cl) <= 1e-10


def _population_histogram(zbar, sigma, spec):
    """Exact bin probabilities of the clipped symmetric mixture."""
    edges = spec.edges
    p = np.zeros(edges.size - 1)
    for mu, w in ((zbar, 0.5), (-zbar, 0.5)):
        cdf = norm.cdf((edges - mu) / sigma)
        p += w * np.diff(cdf)
        p[0] += w * cdf[0]
        p[-1] += w * (1.0 - cdf[-1])
    return est.Histogram(spec, p)


def test_bootstrap_bars_cover_population_truth():
    # Family with a slope floor: every grid point keeps chi well above the
    # finite-sample Bhattacharyya bias ~ 2 m_bins / (n Delta^2), so the
    # error bars are testing noise, not bias.
    a = np.round(-2.34 + 0.15 * np.arange(10), 10)
    zbar = 0.18 + 0.25 * (a + 2.34) + 0.12 * (1.0 + np.tanh((a + 1.746) / 0.2))
    sigma = 0.1
    spec = est.HistogramSpec()
    n_pts = a.size

    hists_true = [_population_histogram(zb, sigma, spec) for zb in zbar]
    fits_true = [est.fit_double_gaussian(h) for h in hists_true]
    # The top point carries ~0.4% clipped mass in its edge bin, which the
    # smooth mixture cannot absorb to full stationarity; parameter recovery
    # is what defines the truth values.
    for zb, fit in zip(zbar, fits_true):
        assert abs(fit.separation - zb) <= 5e-3
        assert fit.residual <= 1e-4
    truth = {
        "chi_mom": np.array(
            [est.chi_mom_experimental(fits_true, a, i) for i in range(n_pts)]
        ),
        "chi_cl": np.full(n_pts, np.nan),
    }
    for i in range(1, n_pts - 1):
        truth["chi_cl"][i] = est.chi_cl_experimental(hists_true, a, i)

    params = [est.DoubleGaussianFit(zb, sigma, 0.5, 0.5) for zb in zbar]
    series = est.synth_samples(a, params, 24000, seed=6)
    points = est.series_estimates(series)

    peak_mom = int(np.argmax(points["chi_mom"]))
    peak_cl = int(np.nanargmax(points["chi_cl"]))
    assert abs(peak_mom - peak_cl) <= 1

    for name in ("chi_mom", "chi_cl"):
        boot = est.bootstrap(series, name, n_replicas=3000, seed=6)
        assert boot.n_failures == 0
        pulls = (truth[name] - points[name]) / boot.widths
        valid = np.isfinite(pulls)
        covered = int(np.sum(np.abs(pulls[valid]) <= 1.0))
        total = int(np.sum(valid))
        assert covered / total >= 0.6, (
            f"{name}: bars cover truth at {covered}/{total} points"
        )


def test_no_laboratory_data_bundled():
    # The measured-apparatus results (the experimental critical scattering
    # length near -1.746 a0 and chi values an order of magnitude below this
    # model) require data the package does not ship; the synthetic-closure
    # check above stands in for them.  Nothing installed may embed such a
    # dataset or constant.
    import bjjsense

    root = Path(bjjsense.__file__).parent
    files = [
        p for p in root.rglob("*")
        if p.is_file() and "__pycache__" not in p.parts
    ]
    non_source = [p.name for p in files if p.suffix != ".py"]
    assert non_source == []
    for path in files:
        assert "1.746" not in path.read_text(encoding="utf-8"), path.name
