"""Two-mode Bose-Hubbard (Josephson) model: Hamiltonian, spectra, thermal states.

The model describes N bosons in two modes through collective spin operators
J_x, J_y, J_z with j = N/2:

    H = -Omega * J_x + zeta * J_z**2 + delta * J_z

In the J_z eigenbasis {|m>, m = -j..j} the Hamiltonian is a real symmetric
tridiagonal matrix: J_z**2 and J_z are diagonal, and J_x couples adjacent m.
The dimensionless control parameter is lambda = N * zeta / Omega, with a
symmetry-breaking quantum phase transition at lambda = -1 (attractive side).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal


class EigensolverError(RuntimeError):
    """Raised when the tridiagonal eigensolver fails to converge."""


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the two-mode model.

    Parameters
    ----------
    n_particles : int
        Total boson number N >= 1.  Matrix dimension is N + 1.
    tunneling : float
        Rabi coupling Omega > 0.  Sets the energy unit.
    lambda_control : float
        Dimensionless interaction lambda = N * zeta / Omega.  Negative
        (attractive) values probe the symmetry-breaking transition.
    imbalance : float
        Symmetry-breaking tilt delta, in units of Omega when tunneling is 1.
    """

    n_particles: int
    tunneling: float = 1.0
    lambda_control: float = 0.0
    imbalance: float = 0.0

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError(f"n_particles must be >= 1, got {self.n_particles}")
        if self.tunneling <= 0:
            raise ValueError(f"tunneling must be > 0, got {self.tunneling}")

    @property
    def interaction(self) -> float:
        """Bare interaction zeta = lambda * Omega / N."""
        return self.lambda_control * self.tunneling / self.n_particles

    @property
    def dimension(self) -> int:
        return self.n_particles + 1

    def replace(self, **kwargs) -> "ModelParams":
        data = {
            "n_particles": self.n_particles,
            "tunneling": self.tunneling,
            "lambda_control": self.lambda_control,
            "imbalance": self.imbalance,
        }
        data.update(kwargs)
        return ModelParams(**data)


@dataclass(frozen=True)
class TridiagonalHamiltonian:
    """Symmetric tridiagonal representation of H in the J_z basis.

    Attributes
    ----------
    diagonal : ndarray, shape (N+1,)
        zeta * m**2 + delta * m for m = -j..j in ascending order.
    offdiagonal : ndarray, shape (N,)
        -(Omega/2) * sqrt(j(j+1) - m(m+1)) coupling |m> and |m+1>.
    params : ModelParams
    """

    diagonal: np.ndarray
    offdiagonal: np.ndarray
    params: ModelParams

    @property
    def dimension(self) -> int:
        return self.diagonal.size

    @property
    def m_values(self) -> np.ndarray:
        j = self.params.n_particles / 2.0
        return np.arange(self.dimension) - j


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues and eigenvectors of a Hamiltonian, ascending order.

    ``eigenvectors[:, k]`` is the k-th eigenstate in the J_z basis.  May hold
    only the lowest part of the spectrum (``n_levels <= dimension``).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    params: ModelParams

    @property
    def n_levels(self) -> int:
        return self.eigenvalues.size

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def ground_state(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    def gap(self, upper: int = 2, lower: int = 0) -> float:
        """Energy difference E_upper - E_lower."""
        if upper >= self.n_levels or lower >= self.n_levels:
            raise ValueError(
                f"levels ({lower}, {upper}) not available, spectrum holds "
                f"{self.n_levels}"
            )
        return float(self.eigenvalues[upper] - self.eigenvalues[lower])


@dataclass(frozen=True)
class ThermalState:
    """Gibbs state on a (possibly truncated) eigenbasis.

    ``weights[k]`` is the normalized Boltzmann weight of ``spectrum``'s k-th
    level.  At temperature zero only the ground state carries weight.
    """

    spectrum: Spectrum
    weights: np.ndarray
    temperature: float

    @property
    def rank(self) -> int:
        return self.weights.size


@dataclass(frozen=True)
class DistributionOverM:
    """Probability distribution of J_z outcomes m = -j..j.

    Normalized to 1 over the full m grid; probabilities are non-negative by
    construction (Born rule on real amplitudes).
    """

    m_values: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        if self.m_values.size != self.probabilities.size:
            raise ValueError(
                f"m grid ({self.m_values.size}) and probabilities "
                f"({self.probabilities.size}) differ in length"
            )

    @property
    def mean(self) -> float:
        return float(self.m_values @ self.probabilities)

    @property
    def variance(self) -> float:
        mu = self.mean
        return float(((self.m_values - mu) ** 2) @ self.probabilities)


def build_hamiltonian(params: ModelParams) -> TridiagonalHamiltonian:
    """Assemble the tridiagonal matrix for the given parameters.

    Parameters
    ----------
    params : ModelParams

    Returns
    -------
    TridiagonalHamiltonian
        Diagonal and first off-diagonal of the real symmetric matrix.
    """
    n = params.n_particles
    j = n / 2.0
    m = np.arange(n + 1, dtype=float) - j
    zeta = params.interaction
    diag = zeta * m * m + params.imbalance * m
    # J_x matrix element between m and m+1: sqrt(j(j+1) - m(m+1)) / 2
    mm = m[:-1]
    off = -0.5 * params.tunneling * np.sqrt(j * (j + 1.0) - mm * (mm + 1.0))
    return TridiagonalHamiltonian(diagonal=diag, offdiagonal=off, params=params)


def _select_sign(vectors: np.ndarray) -> np.ndarray:
    """Fix each eigenvector's overall sign: largest-|amplitude| entry > 0."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def diagonalize(
    hamiltonian: TridiagonalHamiltonian,
    n_levels: int | None = None,
) -> Spectrum:
    """Solve the symmetric tridiagonal eigenproblem.

    Parameters
    ----------
    hamiltonian : TridiagonalHamiltonian
    n_levels : int, optional
        If given, compute only the lowest ``n_levels`` eigenpairs (bisection
        plus inverse iteration).  Default: the full spectrum via the implicit
        QL/QR algorithm.

    Returns
    -------
    Spectrum
        Ascending eigenvalues; eigenvector signs fixed so the
        largest-magnitude component of each vector is positive.
    """
    d = hamiltonian.diagonal
    e = hamiltonian.offdiagonal
    dim = d.size
    if n_levels is not None:
        if not 1 <= n_levels <= dim:
            raise ValueError(f"n_levels must be in [1, {dim}], got {n_levels}")
    if dim == 1:
        return Spectrum(d.copy(), np.ones((1, 1)), hamiltonian.params)
    try:
        if n_levels is None or n_levels == dim:
            vals, vecs = eigh_tridiagonal(d, e)
        else:
            vals, vecs = eigh_tridiagonal(
                d, e, select="i", select_range=(0, n_levels - 1)
            )
    except np.linalg.LinAlgError as err:
        raise EigensolverError(
            f"tridiagonal solver failed for dimension {dim} "
            f"(params={hamiltonian.params})"
        ) from err
    return Spectrum(vals, _select_sign(vecs), hamiltonian.params)


def eigenvalues_only(
    hamiltonian: TridiagonalHamiltonian,
    n_levels: int | None = None,
) -> np.ndarray:
    """Lowest ``n_levels`` eigenvalues (all if None), no eigenvectors."""
    d = hamiltonian.diagonal
    e = hamiltonian.offdiagonal
    if d.size == 1:
        return d.copy()
    try:
        if n_levels is None or n_levels == d.size:
            return eigh_tridiagonal(d, e, eigvals_only=True)
        return eigh_tridiagonal(
            d, e, eigvals_only=True, select="i", select_range=(0, n_levels - 1)
        )
    except np.linalg.LinAlgError as err:
        raise EigensolverError(
            f"tridiagonal solver failed for dimension {d.size} "
            f"(params={hamiltonian.params})"
        ) from err


def thermal_state(spectrum: Spectrum, temperature: float) -> ThermalState:
    """Boltzmann weights over the levels of ``spectrum``.

    Weights are exp(-(E_k - E_0)/T) normalized over the retained levels; the
    ground-energy shift keeps the exponentials in range for any spectrum.
    T = 0 is the pure ground state (k_B = 1 throughout).

    Parameters
    ----------
    spectrum : Spectrum
    temperature : float
        T >= 0 in the same units as the eigenvalues.

    Returns
    -------
    ThermalState
    """
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0.0:
        w = np.zeros(spectrum.n_levels)
        w[0] = 1.0
        return ThermalState(spectrum, w, 0.0)
    shifted = spectrum.eigenvalues - spectrum.eigenvalues[0]
    w = np.exp(-shifted / temperature)
    return ThermalState(spectrum, w / w.sum(), float(temperature))


def equilibrium_state(
    params: ModelParams,
    temperature: float,
    rel_cutoff: float = 1e-12,
    full_fraction: float = 0.25,
) -> ThermalState:
    """Build the Gibbs state, solving only for thermally occupied levels.

    Levels with relative weight exp(-(E - E_0)/T) below ``rel_cutoff`` are
    discarded before normalization; the neglected weight is at most
    dimension * rel_cutoff.  Falls back to a full diagonalization when the
    occupied window covers more than ``full_fraction`` of the spectrum,
    where the partial (bisection) driver is slower than QL/QR.

    Parameters
    ----------
    params : ModelParams
    temperature : float
    rel_cutoff : float
        Relative Boltzmann weight below which levels are dropped.
    full_fraction : float
        Occupation fraction beyond which the full solver is used.

    Returns
    -------
    ThermalState
    """
    h = build_hamiltonian(params)
    if temperature == 0.0:
        return thermal_state(diagonalize(h, n_levels=1), 0.0)
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0, got {temperature}")
    dim = h.dimension
    e0 = float(eigenvalues_only(h, n_levels=1)[0])
    window = temperature * np.log(1.0 / rel_cutoff)
    d, e = h.diagonal, h.offdiagonal
    if dim == 1:
        spect = diagonalize(h)
        return thermal_state(spect, temperature)
    # Count eigenvalues in the occupied window before extracting vectors.
    n_occ = int(
        np.count_nonzero(
            eigh_tridiagonal(d, e, eigvals_only=True) <= e0 + window
        )
    ) if dim <= 64 else None
    if n_occ is None:
        try:
            in_window = eigh_tridiagonal(
                d, e, eigvals_only=True, select="v",
                select_range=(e0 - 1.0, e0 + window),
            )
        except np.linalg.LinAlgError as err:
            raise EigensolverError(
                f"tridiagonal solver failed for dimension {dim} "
                f"(params={params})"
            ) from err
        n_occ = max(in_window.size, 1)
    if n_occ >= full_fraction * dim:
        spect = diagonalize(h)
    else:
        spect = diagonalize(h, n_levels=n_occ)
    state = thermal_state(spect, temperature)
    keep = state.weights > rel_cutoff * state.weights[0]
    if np.all(keep):
        return state
    sub = Spectrum(
        spect.eigenvalues[keep], spect.eigenvectors[:, keep], params
    )
    w = state.weights[keep]
    return ThermalState(sub, w / w.sum(), float(temperature))


def jz_distribution(
    state: ThermalState, weight_cutoff: float = 0.0
) -> DistributionOverM:
    """J_z outcome distribution P(m) = sum_k w_k |<m|psi_k>|^2.

    Parameters
    ----------
    state : ThermalState
    weight_cutoff : float
        Levels with weight <= cutoff are skipped; the remaining weights are
        renormalized.  Default keeps everything.

    Returns
    -------
    DistributionOverM
    """
    spect = state.spectrum
    keep = state.weights > weight_cutoff
    if not np.any(keep):
        raise ValueError(
            f"weight_cutoff={weight_cutoff} removed every level"
        )
    w = state.weights[keep]
    w = w / w.sum()
    vecs = spect.eigenvectors[:, keep]
    probs = (vecs * vecs) @ w
    j = spect.params.n_particles / 2.0
    m = np.arange(probs.size) - j
    return DistributionOverM(m_values=m, probabilities=probs)


def jz_moments(state: ThermalState) -> tuple[float, float]:
    """Mean and variance of J_z in the given state.

    Returns
    -------
    (mean, variance) : tuple of float
    """
    dist = jz_distribution(state)
    return dist.mean, dist.variance
