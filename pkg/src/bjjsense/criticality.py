"""Susceptibility scans, finite-size critical points, and scaling studies.

The workflow mirrors a finite-size scaling analysis of the lambda = -1
transition:

1. ``locate_critical_gap``: pseudo-critical lambda_c^(N) from the minimum of
   the E_2 - E_0 gap at zero tilt.
2. ``optimize_delta``: tilt delta* for which the susceptibility peak sits at
   lambda_c^(N).
3. ``scaling_study``: susceptibilities at (lambda_c^(N), delta*) across N,
   fitted to power laws chi/N ~ a N^b.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .fidelity import (
    DensityOperator,
    bhattacharyya_fidelity,
    chi_mom_from_curves,
    default_epsilons,
    susceptibility_from_fidelity,
    uhlmann_fidelity,
)
from .model import (
    ModelParams,
    build_hamiltonian,
    eigenvalues_only,
    equilibrium_state,
    jz_distribution,
)

METHODS = ("moment", "classical", "quantum")


@dataclass(frozen=True)
class ScanConfig:
    """Parameters of a susceptibility scan over lambda.

    ``params_template`` supplies N, Omega and delta; its lambda is replaced
    by each grid value in turn.  ``which`` selects the susceptibilities to
    compute.
    """

    params_template: ModelParams
    lambda_grid: np.ndarray
    temperature: float = 0.0
    which: tuple[str, ...] = METHODS
    epsilon0: float = 1e-4
    rel_cutoff: float = 1e-12
    threads: int = 1

    def __post_init__(self):
        grid = np.asarray(self.lambda_grid, dtype=float)
        if grid.size < 2:
            raise ValueError(f"lambda_grid needs >= 2 points, got {grid.size}")
        if not np.all(np.isfinite(grid)):
            raise ValueError("lambda_grid contains non-finite values")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("lambda_grid must be strictly increasing")
        object.__setattr__(self, "lambda_grid", grid)
        bad = [w for w in self.which if w not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; valid: {METHODS}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.epsilon0 <= 0:
            raise ValueError(f"epsilon0 must be > 0, got {self.epsilon0}")


@dataclass(frozen=True)
class PeakEstimate:
    """Location and height of a curve maximum, parabolically refined."""

    lambda_peak: float
    value: float
    index: int
    interior: bool


@dataclass(frozen=True)
class SusceptibilityCurve:
    """Susceptibilities along a lambda grid.

    Arrays are None for methods not requested in the scan.  ``mean_jz`` and
    ``var_jz`` are always filled; they cost nothing beyond the ground-state
    (or thermal) solves already needed.
    """

    lambda_grid: np.ndarray
    mean_jz: np.ndarray
    var_jz: np.ndarray
    chi_mom: np.ndarray | None
    chi_cl: np.ndarray | None
    chi_q: np.ndarray | None
    config: ScanConfig

    def chi(self, method: str) -> np.ndarray:
        arr = {
            "moment": self.chi_mom,
            "classical": self.chi_cl,
            "quantum": self.chi_q,
        }.get(method)
        if arr is None:
            raise ValueError(f"method {method!r} not present in this scan")
        return arr

    def peak(self, method: str) -> PeakEstimate:
        """Maximum of chi(lambda), refined by a local quadratic fit."""
        y = self.chi(method)
        x = self.lambda_grid
        i = int(np.argmax(y))
        if i == 0 or i == x.size - 1:
            return PeakEstimate(float(x[i]), float(y[i]), i, interior=False)
        coeff = np.polyfit(x[i - 1 : i + 2], y[i - 1 : i + 2], 2)
        if coeff[0] >= 0:
            return PeakEstimate(float(x[i]), float(y[i]), i, interior=True)
        vertex = -coeff[1] / (2.0 * coeff[0])
        if not x[i - 1] <= vertex <= x[i + 1]:
            return PeakEstimate(float(x[i]), float(y[i]), i, interior=True)
        value = float(np.polyval(coeff, vertex))
        return PeakEstimate(float(vertex), value, i, interior=True)


@dataclass(frozen=True)
class CriticalPointResult:
    """Finite-size critical point from the excitation-gap minimum."""

    n_particles: int
    lambda_c: float
    gap: float
    levels: tuple[int, int]

    @property
    def shift(self) -> float:
        """Distance to the bulk critical point, -1 - lambda_c^(N) > 0."""
        return -1.0 - self.lambda_c


@dataclass(frozen=True)
class DeltaOptimization:
    """Tilt placing a susceptibility peak at the finite-size critical point."""

    n_particles: int
    method: str
    delta: float
    lambda_c: float
    peak_lambda: float
    peak_offset: float
    within_tolerance: bool


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares fit of y = prefactor * x**exponent in log space."""

    prefactor: float
    exponent: float
    r_squared: float


@dataclass(frozen=True)
class ScalingStudyResult:
    """Per-N optimized susceptibilities and their power-law fits.

    ``delta_star`` and ``chi`` map method name to a per-N array aligned with
    ``n_values``; ``fits`` maps method name to the fit of chi/N against N.
    """

    n_values: np.ndarray
    temperature: float
    lambda_c: np.ndarray
    delta_star: dict[str, np.ndarray]
    chi: dict[str, np.ndarray]
    fits: dict[str, PowerLawFit]
    shift_fit: PowerLawFit


# ---------------------------------------------------------------------------
# scans


def _point_worker(config: ScanConfig, lam: float):
    """Susceptibility ingredients at one lambda: moments and fidelity fits."""
    template = config.params_template
    t = config.temperature
    cut = config.rel_cutoff
    center = equilibrium_state(
        template.replace(lambda_control=lam), t, rel_cutoff=cut
    )
    dist_c = jz_distribution(center)
    mean, var = dist_c.mean, dist_c.variance
    want_cl = "classical" in config.which
    want_q = "quantum" in config.which
    chi_cl = chi_q = np.nan
    if want_cl or want_q:
        rho_c = DensityOperator.from_state(center) if want_q else None
        eps = default_epsilons(lam, config.epsilon0)
        fid_cl: dict[float, float] = {}
        fid_q: dict[float, float] = {}
        for e in eps:
            shifted = equilibrium_state(
                template.replace(lambda_control=lam + e), t, rel_cutoff=cut
            )
            if want_cl:
                fid_cl[e] = bhattacharyya_fidelity(
                    dist_c, jz_distribution(shifted)
                )
            if want_q:
                fid_q[e] = uhlmann_fidelity(
                    rho_c, DensityOperator.from_state(shifted)
                )
        if want_cl:
            chi_cl = susceptibility_from_fidelity(
                fid_cl.__getitem__, eps, "classical"
            ).value
        if want_q:
            chi_q = susceptibility_from_fidelity(
                fid_q.__getitem__, eps, "quantum"
            ).value
    return mean, var, chi_cl, chi_q


def scan_lambda(config: ScanConfig) -> SusceptibilityCurve:
    """Compute the requested susceptibilities along ``config.lambda_grid``.

    chi_cl and chi_q come from fidelities between states displaced by the
    four-point epsilon grid around each lambda; chi_mom comes from central
    differences of <J_z> along the scan grid itself.

    Returns
    -------
    SusceptibilityCurve
    """
    grid = config.lambda_grid
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            rows = list(pool.map(lambda l: _point_worker(config, l), grid))
    else:
        rows = [_point_worker(config, lam) for lam in grid]
    mean = np.array([r[0] for r in rows])
    var = np.array([r[1] for r in rows])
    chi_cl = np.array([r[2] for r in rows])
    chi_q = np.array([r[3] for r in rows])
    chi_mom = None
    if "moment" in config.which:
        chi_mom = np.array(
            [
                chi_mom_from_curves(mean, var, grid, i).value
                for i in range(grid.size)
            ]
        )
    return SusceptibilityCurve(
        lambda_grid=grid,
        mean_jz=mean,
        var_jz=var,
        chi_mom=chi_mom,
        chi_cl=chi_cl if "classical" in config.which else None,
        chi_q=chi_q if "quantum" in config.which else None,
        config=config,
    )


def default_lambda_grid(
    lo: float = -1.6, hi: float = -0.4, step: float = 2e-3
) -> np.ndarray:
    """Uniform scan grid; endpoints included when step divides the span."""
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def chi_at_point(
    params: ModelParams,
    temperature: float = 0.0,
    which: tuple[str, ...] = METHODS,
    epsilon0: float = 1e-4,
    rel_cutoff: float = 1e-12,
) -> dict[str, float]:
    """All requested susceptibilities at a single working point.

    Unlike ``scan_lambda``, the moment susceptibility here uses the same
    five states lambda + {0, +-eps, +-2eps} as the fidelity fits: the
    derivative of <J_z> is the least-squares slope through the five means.

    Returns
    -------
    dict mapping method name to chi.
    """
    bad = [w for w in which if w not in METHODS]
    if bad:
        raise ValueError(f"unknown methods {bad}; valid: {METHODS}")
    lam = params.lambda_control
    eps = default_epsilons(lam, epsilon0)
    center = equilibrium_state(params, temperature, rel_cutoff=rel_cutoff)
    dist_c = jz_distribution(center)
    rho_c = DensityOperator.from_state(center) if "quantum" in which else None
    means = {0.0: dist_c.mean}
    fid_cl: dict[float, float] = {}
    fid_q: dict[float, float] = {}
    for e in eps:
        shifted = equilibrium_state(
            params.replace(lambda_control=lam + e),
            temperature,
            rel_cutoff=rel_cutoff,
        )
        dist_s = jz_distribution(shifted)
        means[e] = dist_s.mean
        if "classical" in which:
            fid_cl[e] = bhattacharyya_fidelity(dist_c, dist_s)
        if "quantum" in which:
            fid_q[e] = uhlmann_fidelity(rho_c, DensityOperator.from_state(shifted))
    out: dict[str, float] = {}
    if "moment" in which:
        offsets = np.array(sorted(means))
        vals = np.array([means[o] for o in offsets])
        slope = float(offsets @ vals / (offsets @ offsets))
        var = dist_c.variance
        if var <= 0:
            raise ValueError(f"non-positive J_z variance {var} at {params}")
        out["moment"] = slope * slope / var
    if "classical" in which:
        out["classical"] = susceptibility_from_fidelity(
            fid_cl.__getitem__, eps, "classical"
        ).value
    if "quantum" in which:
        out["quantum"] = susceptibility_from_fidelity(
            fid_q.__getitem__, eps, "quantum"
        ).value
    return out


def temperature_sweep(
    n_particles: int,
    temperatures,
    lambda_value: float,
    imbalance: float = 2e-3,
    *,
    tunneling: float = 1.0,
    which: tuple[str, ...] = METHODS,
    epsilon0: float = 1e-4,
    rel_cutoff: float = 1e-12,
) -> dict[str, np.ndarray]:
    """Susceptibilities against temperature at a fixed working point.

    Returns
    -------
    dict with key "temperature" plus one array per requested method.
    """
    temps = np.asarray(list(temperatures), dtype=float)
    if temps.size < 1:
        raise ValueError("need at least one temperature")
    if np.any(temps < 0):
        raise ValueError("temperatures must be >= 0")
    params = ModelParams(
        n_particles=n_particles,
        tunneling=tunneling,
        lambda_control=lambda_value,
        imbalance=imbalance,
    )
    out = {"temperature": temps}
    for m in which:
        out[m] = np.empty(temps.size)
    for i, t in enumerate(temps):
        point = chi_at_point(
            params, float(t), which=which, epsilon0=epsilon0,
            rel_cutoff=rel_cutoff,
        )
        for m in which:
            out[m][i] = point[m]
    return out


# ---------------------------------------------------------------------------
# critical point


def locate_critical_gap(
    n_particles: int,
    lambda_bracket: tuple[float, float] = (-1.5, -0.85),
    *,
    tunneling: float = 1.0,
    imbalance: float = 0.0,
    levels: tuple[int, int] = (0, 2),
    n_coarse: int = 61,
    xtol: float = 1e-8,
) -> CriticalPointResult:
    """Finite-size critical point lambda_c^(N): minimum of the level gap.

    The default gap E_2 - E_0 pairs the ground state with its second
    excited partner; at zero tilt E_1 merges with E_0 in the broken phase
    and carries no interior minimum.  A coarse grid over
    ``lambda_bracket`` brackets the minimum, then golden-section search
    refines it.

    Raises
    ------
    ValueError
        If the coarse minimum lands on the bracket edge, i.e. the bracket
        does not enclose an interior minimum.
    """
    lo, hi = lambda_bracket
    if not lo < hi:
        raise ValueError(f"invalid bracket {lambda_bracket}")
    lower, upper = sorted(levels)
    if lower == upper:
        raise ValueError(f"levels must differ, got {levels}")
    k = upper + 1
    params = ModelParams(
        n_particles=n_particles, tunneling=tunneling, imbalance=imbalance
    )

    def gap(lam: float) -> float:
        ev = eigenvalues_only(
            build_hamiltonian(params.replace(lambda_control=lam)), k
        )
        return float(ev[upper] - ev[lower])

    grid = np.linspace(lo, hi, n_coarse)
    gaps = np.array([gap(lam) for lam in grid])
    i = int(np.argmin(gaps))
    if i == 0 or i == grid.size - 1:
        raise ValueError(
            f"gap minimum at bracket edge lambda={grid[i]:.6g}; widen "
            f"lambda_bracket={lambda_bracket}"
        )
    res = minimize_scalar(
        gap,
        bracket=(grid[i - 1], grid[i], grid[i + 1]),
        method="golden",
        options={"xtol": xtol},
    )
    lam_c = float(res.x)
    return CriticalPointResult(
        n_particles=n_particles,
        lambda_c=lam_c,
        gap=float(res.fun),
        levels=(lower, upper),
    )


# ---------------------------------------------------------------------------
# delta optimization


def default_delta_grid() -> np.ndarray:
    return np.logspace(-6.0, -1.0, 25)


def _peak_window(n_particles: int, lambda_c: float, n_points: int) -> np.ndarray:
    # Width ~ N^(-2/3) tracks the narrowing critical region.
    half = 8.0 * n_particles ** (-2.0 / 3.0)
    return np.linspace(lambda_c - half, lambda_c + half, n_points)


def optimize_delta(
    n_particles: int,
    method: str,
    *,
    temperature: float = 0.0,
    lambda_c: float | None = None,
    delta_grid: np.ndarray | None = None,
    window_points: int = 41,
    epsilon0: float = 1e-4,
    refine: bool = True,
    tunneling: float = 1.0,
    threads: int = 1,
) -> DeltaOptimization:
    """Tilt delta* whose chi(lambda) peak is closest to lambda_c^(N).

    Scans ``delta_grid`` (default: 25 points, logarithmic over
    [1e-6, 1e-1]); ties break toward smaller delta.  When the peak offset
    changes sign across the grid, a root find in log(delta) refines delta*
    to the crossing.  The returned ``within_tolerance`` flag records
    whether the final offset is below half a window-grid step.

    Parameters
    ----------
    n_particles : int
    method : str
        "moment", "classical" or "quantum".
    lambda_c : float, optional
        Precomputed finite-size critical point; located via the gap
        minimum at zero tilt when omitted.

    Returns
    -------
    DeltaOptimization
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; valid: {METHODS}")
    if lambda_c is None:
        lambda_c = locate_critical_gap(n_particles, tunneling=tunneling).lambda_c
    deltas = default_delta_grid() if delta_grid is None else np.asarray(delta_grid)
    if deltas.size < 2 or np.any(deltas <= 0):
        raise ValueError("delta_grid must hold >= 2 positive values")
    deltas = np.sort(deltas)
    window = _peak_window(n_particles, lambda_c, window_points)
    tol = 0.5 * (window[1] - window[0])

    def offset(delta: float) -> float | None:
        config = ScanConfig(
            params_template=ModelParams(
                n_particles=n_particles, tunneling=tunneling, imbalance=delta
            ),
            lambda_grid=window,
            temperature=temperature,
            which=(method,),
            epsilon0=epsilon0,
            threads=threads,
        )
        peak = scan_lambda(config).peak(method)
        if not peak.interior:
            return None
        return peak.lambda_peak - lambda_c

    offsets = [offset(d) for d in deltas]
    valid = [(d, o) for d, o in zip(deltas, offsets) if o is not None]
    if not valid:
        raise ValueError(
            f"no delta in [{deltas[0]:.3g}, {deltas[-1]:.3g}] produced an "
            f"interior peak for method {method!r}"
        )
    # Strict < keeps the earlier (smaller) delta on ties.
    best_delta, best_off = valid[0]
    for d, o in valid[1:]:
        if abs(o) < abs(best_off):
            best_delta, best_off = d, o
    if refine:
        bracket = None
        for (d1, o1), (d2, o2) in zip(valid[:-1], valid[1:]):
            if o1 == 0.0:
                bracket = None
                best_delta, best_off = d1, o1
                break
            if o1 * o2 < 0:
                bracket = (d1, d2)
                break
        if bracket is not None:
            log_star = brentq(
                lambda u: offset(float(np.exp(u))),
                np.log(bracket[0]),
                np.log(bracket[1]),
                xtol=1e-3,
            )
            cand = float(np.exp(log_star))
            cand_off = offset(cand)
            if cand_off is not None and abs(cand_off) < abs(best_off):
                best_delta, best_off = cand, cand_off
    return DeltaOptimization(
        n_particles=n_particles,
        method=method,
        delta=float(best_delta),
        lambda_c=float(lambda_c),
        peak_lambda=float(lambda_c + best_off),
        peak_offset=float(best_off),
        within_tolerance=bool(abs(best_off) <= tol),
    )


# ---------------------------------------------------------------------------
# power laws and the scaling study


def fit_power_law(x: np.ndarray, y: np.ndarray) -> PowerLawFit:
    """Fit y = a x^b by least squares on (log x, log y).

    Raises
    ------
    ValueError
        For fewer than 3 points or non-positive data.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size != y.size:
        raise ValueError(f"length mismatch: x {x.size}, y {y.size}")
    if x.size < 3:
        raise ValueError(f"need >= 3 points for a power-law fit, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("power-law fit requires positive x and y")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return PowerLawFit(
        prefactor=float(np.exp(intercept)),
        exponent=float(slope),
        r_squared=float(r2),
    )


def scaling_study(
    n_values=(200, 300, 500, 700, 1000),
    temperature: float = 0.0,
    *,
    delta_grid: np.ndarray | None = None,
    window_points: int = 41,
    epsilon0: float = 1e-4,
    tunneling: float = 1.0,
    threads: int = 1,
) -> ScalingStudyResult:
    """Optimized susceptibilities against N with power-law fits.

    Per N: locate lambda_c^(N), optimize delta separately for each method
    (their peaks sit at slightly different tilts), then evaluate chi at
    (lambda_c^(N), delta*).  Fits are chi/N against N for each method,
    plus the critical-point shift -1 - lambda_c^(N) against N.

    Returns
    -------
    ScalingStudyResult
    """
    n_values = np.asarray(list(n_values), dtype=int)
    if n_values.size < 3:
        raise ValueError(f"need >= 3 system sizes, got {n_values.size}")
    lambda_c = np.empty(n_values.size)
    delta_star = {m: np.empty(n_values.size) for m in METHODS}
    chi = {m: np.empty(n_values.size) for m in METHODS}
    for i, n in enumerate(n_values):
        crit = locate_critical_gap(int(n), tunneling=tunneling)
        lambda_c[i] = crit.lambda_c
        for m in METHODS:
            opt = optimize_delta(
                int(n),
                m,
                temperature=temperature,
                lambda_c=crit.lambda_c,
                delta_grid=delta_grid,
                window_points=window_points,
                epsilon0=epsilon0,
                tunneling=tunneling,
                threads=threads,
            )
            delta_star[m][i] = opt.delta
            point = chi_at_point(
                ModelParams(
                    n_particles=int(n),
                    tunneling=tunneling,
                    lambda_control=crit.lambda_c,
                    imbalance=opt.delta,
                ),
                temperature=temperature,
                which=(m,),
                epsilon0=epsilon0,
            )
            chi[m][i] = point[m]
    fits = {
        m: fit_power_law(n_values, chi[m] / n_values) for m in METHODS
    }
    shift_fit = fit_power_law(n_values, -1.0 - lambda_c)
    return ScalingStudyResult(
        n_values=n_values,
        temperature=temperature,
        lambda_c=lambda_c,
        delta_star=delta_star,
        chi=chi,
        fits=fits,
        shift_fit=shift_fit,
    )
