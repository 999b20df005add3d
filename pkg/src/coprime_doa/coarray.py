"""Difference-coarray processing: covariance, lag selection, pseudo-spectrum.

Pipeline (the feature extractor feeding the classifiers):

    snapshots -> covariance R -> vec(R) -> coarray vector (lags -MN..MN)
              -> pseudo-spectrum over an angle grid -> min-max normalization

The vectorized covariance is indexed by sensor pairs; the entry for pair
(i, j) carries phase exp(-j 2 pi (p_i - p_j) d sin(theta)), so grouping by
the position difference p_i - p_j and averaging repeated lags yields the
observation of a virtual uniform array with 2MN + 1 elements.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .array_model import CoprimeGeometry, SourceScenario, SnapshotMatrix, \
    WAVELENGTH, steering_matrix
from .errors import DegenerateConstant, EmptySnapshots, MissingLag, ShapeMismatch

HERMITIAN_RTOL = 1e-12
PSD_EIG_TOL = 1e-9


@dataclass
class CovarianceMatrix:
    """Hermitian PSD covariance, tagged ``sample`` or ``analytic``."""

    data: np.ndarray
    source: str = "sample"

    def __post_init__(self):
        r = np.asarray(self.data, dtype=np.complex128)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ShapeMismatch("covariance must be square")
        scale = max(np.abs(r).max(), 1e-300)
        if np.abs(r - r.conj().T).max() > HERMITIAN_RTOL * scale:
            raise ValueError("covariance is not Hermitian")
        trace = float(np.trace(r).real)
        min_eig = float(np.linalg.eigvalsh(r).min())
        if min_eig < -PSD_EIG_TOL * max(trace, 1e-300):
            raise ValueError(f"covariance not PSD: min eigenvalue {min_eig}")
        self.data = r


@dataclass(frozen=True)
class AngleGrid:
    """Uniform angle grid: W = floor((max - min) / step) + 1 points."""

    min_deg: float
    max_deg: float
    step_deg: float

    def __post_init__(self):
        if self.step_deg <= 0.0:
            raise ValueError("step must be positive")
        if self.max_deg <= self.min_deg:
            raise ValueError("max must exceed min")

    @property
    def width(self) -> int:
        return int(np.floor((self.max_deg - self.min_deg) / self.step_deg + 1e-9)) + 1

    @property
    def angles(self) -> np.ndarray:
        return self.min_deg + self.step_deg * np.arange(self.width)


@dataclass
class CoarrayVector:
    """Deduplicated virtual-array observation, sorted by lag -MN..MN."""

    lags: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.lags = np.asarray(self.lags, dtype=int)
        self.values = np.asarray(self.values, dtype=np.complex128)
        if self.lags.shape != self.values.shape:
            raise ShapeMismatch("lags and values must align")


@dataclass
class VirtualManifold:
    """Steering matrix of the virtual ULA: one row per lag, column per angle."""

    matrix: np.ndarray
    lags: np.ndarray
    grid: AngleGrid


@dataclass
class PseudoSpectrum:
    """Real feature vector over the angle grid.

    ``imag_residual`` records the relative imaginary part discarded when
    taking the real part of B^H y; it is analytically zero for
    conjugate-symmetric coarray vectors.
    """

    values: np.ndarray
    grid: AngleGrid
    imag_residual: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.width,):
            raise ShapeMismatch("values must match grid width")


def sample_covariance(x: SnapshotMatrix) -> CovarianceMatrix:
    """Maximum-likelihood estimate R_hat = (1/Q) sum_q x(t_q) x(t_q)^H.

    Hermitian symmetry is enforced by averaging with the conjugate
    transpose.
    """
    if x.q_snapshots < 1 or x.data.size == 0:
        raise EmptySnapshots("need at least one snapshot")
    r = (x.data @ x.data.conj().T) / x.q_snapshots
    r = 0.5 * (r + r.conj().T)
    return CovarianceMatrix(r, source="sample")


def analytic_covariance(geometry: CoprimeGeometry,
                        scenario: SourceScenario) -> CovarianceMatrix:
    """Exact covariance sum_k sigma_k^2 a(theta_k) a(theta_k)^H + sigma_n^2 I."""
    a = steering_matrix(geometry, scenario.doas_deg)
    powers = np.asarray(scenario.source_powers, dtype=float)
    r = (a * powers) @ a.conj().T if scenario.num_sources else 0.0
    r = r + scenario.noise_power * np.eye(geometry.num_sensors)
    r = 0.5 * (r + np.conj(r).T)
    return CovarianceMatrix(r, source="analytic")


def vectorize_covariance(r) -> np.ndarray:
    """Column-stack a covariance matrix: vec(R), column-major order."""
    data = r.data if isinstance(r, CovarianceMatrix) else np.asarray(r)
    if data.ndim != 2 or data.shape[0] != data.shape[1]:
        raise ShapeMismatch("expected a square matrix")
    return np.ravel(data, order="F")


@lru_cache(maxsize=64)
def _lag_indices(geometry: CoprimeGeometry):
    """vec(R) indices contributing to each lag in [-MN, MN].

    vec is column-major, so R[i, j] sits at index j * L + i and carries
    lag p_i - p_j.  Pairs with |lag| > MN are discarded.
    """
    pos = geometry.positions
    n_sensors = len(pos)
    max_lag = geometry.max_lag
    groups = {lag: [] for lag in range(-max_lag, max_lag + 1)}
    for j in range(n_sensors):
        for i in range(n_sensors):
            lag = pos[i] - pos[j]
            if -max_lag <= lag <= max_lag:
                groups[lag].append(j * n_sensors + i)
    return {lag: np.asarray(idx, dtype=int) for lag, idx in groups.items()}


def select_coarray(y: np.ndarray, geometry: CoprimeGeometry) -> CoarrayVector:
    """Deduplicate vec(R) into the virtual-array observation.

    The entry for lag l is the arithmetic mean of all components whose
    sensor-pair difference equals l; lags outside [-MN, MN] are dropped
    and the result is sorted by lag.
    """
    y = np.asarray(y).ravel()
    n_sensors = geometry.num_sensors
    if y.size != n_sensors * n_sensors:
        raise ShapeMismatch(
            f"expected length {n_sensors * n_sensors}, got {y.size}")
    groups = _lag_indices(geometry)
    max_lag = geometry.max_lag
    lags = np.arange(-max_lag, max_lag + 1)
    values = np.empty(lags.size, dtype=np.complex128)
    for k, lag in enumerate(lags):
        idx = groups[int(lag)]
        if idx.size == 0:
            raise MissingLag(f"no sensor pair produces lag {lag}")
        values[k] = y[idx].mean()
    return CoarrayVector(lags, values)


def virtual_manifold(geometry: CoprimeGeometry, grid: AngleGrid) -> VirtualManifold:
    """Steering matrix of the deduplicated virtual ULA.

    Shape (2MN+1, W); row for lag l and column for theta_w holds
    exp(-j 2 pi l d sin(theta_w) / wavelength).
    """
    max_lag = geometry.max_lag
    lags = np.arange(-max_lag, max_lag + 1)
    sines = np.sin(np.deg2rad(grid.angles))
    phase = -2j * np.pi * geometry.unit_spacing_d / WAVELENGTH
    matrix = np.exp(phase * np.outer(lags, sines))
    return VirtualManifold(matrix, lags, grid)


def pseudo_spectrum(b: VirtualManifold, y_tilde: CoarrayVector) -> PseudoSpectrum:
    """Matched-filter spectrum over the grid: real part of B^H y_tilde.

    The imaginary residual is recorded; for conjugate-symmetric inputs it
    stays below 1e-9 relative.
    """
    if b.matrix.shape[0] != y_tilde.values.size:
        raise ShapeMismatch(
            f"manifold rows {b.matrix.shape[0]} != coarray length "
            f"{y_tilde.values.size}")
    z = b.matrix.conj().T @ y_tilde.values
    scale = max(float(np.abs(z).max()), 1e-300)
    residual = float(np.abs(z.imag).max()) / scale
    return PseudoSpectrum(z.real, b.grid, imag_residual=residual)


def normalize_spectrum(mu: PseudoSpectrum) -> PseudoSpectrum:
    """Affine min-max map of the values onto [0, 1]."""
    values = mu.values
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        raise DegenerateConstant("spectrum is constant; cannot normalize")
    return PseudoSpectrum((values - lo) / (hi - lo), mu.grid,
                          imag_residual=mu.imag_residual)


def extract_features(snapshots: SnapshotMatrix, geometry: CoprimeGeometry,
                     grid: AngleGrid) -> PseudoSpectrum:
    """Full front end: snapshots to normalized pseudo-spectrum."""
    r = sample_covariance(snapshots)
    y_tilde = select_coarray(vectorize_covariance(r), geometry)
    b = virtual_manifold(geometry, grid)
    return normalize_spectrum(pseudo_spectrum(b, y_tilde))


def analytic_pseudo_spectrum(geometry: CoprimeGeometry, scenario: SourceScenario,
                             grid: AngleGrid) -> PseudoSpectrum:
    """Pseudo-spectrum of the exact covariance (no snapshot noise)."""
    r = analytic_covariance(geometry, scenario)
    y_tilde = select_coarray(vectorize_covariance(r), geometry)
    return pseudo_spectrum(virtual_manifold(geometry, grid), y_tilde)


def spectrum_to_csv(spectrum: PseudoSpectrum, path) -> None:
    """Write ``angle_deg,value`` rows with full float precision."""
    lines = ["angle_deg,value"]
    for angle, value in zip(spectrum.grid.angles, spectrum.values):
        lines.append(f"{float(angle)!r},{float(value)!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
