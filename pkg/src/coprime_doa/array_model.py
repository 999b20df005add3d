"""Co-prime array geometry and narrow-band snapshot simulation.

The array is the union of two uniform linear sub-arrays sharing the
zeroth sensor: 2M elements spaced N units apart and N elements spaced
M units apart, with M, N co-prime and M < N.  All positions are integer
multiples of the fundamental spacing d (expressed in wavelengths; the
wavelength itself is fixed to 1).

Randomness: every stochastic operation takes an explicit seed and uses
numpy's PCG64 (the ``default_rng`` 64-bit generator), so results are
reproducible bit-for-bit.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadOrder, NonCoprime, OutOfRangeAngle

WAVELENGTH = 1.0


@dataclass(frozen=True)
class CoprimeGeometry:
    """Sensor positions of the two co-prime sub-arrays.

    Attributes
    ----------
    m, n : int
        The co-prime pair, m < n.
    unit_spacing_d : float
        Fundamental spacing in wavelengths (0.5 avoids spatial aliasing).
    positions : tuple[int, ...]
        Sorted distinct sensor positions in units of d.
    """

    m: int
    n: int
    unit_spacing_d: float = 0.5
    positions: tuple = ()

    @property
    def num_sensors(self) -> int:
        return len(self.positions)

    @property
    def max_lag(self) -> int:
        """Largest contiguous coarray lag, MN."""
        return self.m * self.n


@dataclass(frozen=True)
class SourceScenario:
    """K narrow-band far-field sources plus sensor noise.

    Powers are linear-scale variances.  DOAs are degrees from broadside,
    pairwise distinct, strictly inside (-90, 90).
    """

    doas_deg: tuple
    source_powers: tuple
    noise_power: float = 1.0

    def __post_init__(self):
        doas = tuple(float(t) for t in self.doas_deg)
        powers = tuple(float(p) for p in self.source_powers)
        object.__setattr__(self, "doas_deg", doas)
        object.__setattr__(self, "source_powers", powers)
        if len(doas) != len(powers):
            raise ValueError("one power per DOA required")
        if len(set(doas)) != len(doas):
            raise ValueError("DOAs must be pairwise distinct")
        for t in doas:
            if not -90.0 < t < 90.0:
                raise OutOfRangeAngle(f"DOA {t} outside (-90, 90)")
        if any(p <= 0.0 for p in powers):
            raise ValueError("source powers must be positive")
        if self.noise_power < 0.0:
            raise ValueError("noise power must be non-negative")

    @classmethod
    def from_snr(cls, doas_deg, snr_db, noise_power=1.0):
        """Build a scenario from per-source SNRs in dB.

        SNR_k = 10 log10(sigma_k^2 / sigma_n^2); a scalar ``snr_db``
        applies to every source.
        """
        doas = tuple(float(t) for t in doas_deg)
        snrs = np.broadcast_to(np.asarray(snr_db, dtype=float), (len(doas),))
        powers = tuple(noise_power * 10.0 ** (s / 10.0) for s in snrs)
        return cls(doas, powers, noise_power)

    @property
    def num_sources(self) -> int:
        return len(self.doas_deg)


@dataclass
class SnapshotMatrix:
    """Complex array output x(t) over Q snapshots, shape (sensors, Q)."""

    data: np.ndarray
    q_snapshots: int

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.complex128)
        if self.data.ndim != 2 or self.data.shape[1] != self.q_snapshots:
            raise ValueError("data must have shape (sensors, q_snapshots)")


def build_geometry(m: int, n: int, unit_spacing_d: float = 0.5) -> CoprimeGeometry:
    """Construct the co-prime geometry for a pair (m, n).

    Positions are the union of {m*k : 0 <= k <= n-1} and
    {n*k : 0 <= k <= 2m-1}; the collocated zeroth sensors leave
    n + 2m - 1 distinct elements.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive integers")
    if unit_spacing_d <= 0.0:
        raise ValueError("unit spacing must be positive")
    if math.gcd(m, n) != 1:
        raise NonCoprime(f"gcd({m}, {n}) != 1")
    if m >= n:
        raise BadOrder(f"require m < n, got m={m}, n={n}")
    sub_a = {m * k for k in range(n)}
    sub_b = {n * k for k in range(2 * m)}
    positions = tuple(sorted(sub_a | sub_b))
    return CoprimeGeometry(m, n, unit_spacing_d, positions)


def steering_vector(geometry: CoprimeGeometry, theta_deg: float,
                    wavelength: float = WAVELENGTH) -> np.ndarray:
    """Per-sensor phase response to a unit plane wave from ``theta_deg``.

    Entry i is exp(-j 2 pi (positions[i] d / wavelength) sin(theta)).
    Angles are measured from broadside; the closed interval [-90, 90]
    is accepted so that endfire responses remain evaluable.
    """
    if not -90.0 <= theta_deg <= 90.0:
        raise OutOfRangeAngle(f"theta {theta_deg} outside [-90, 90]")
    pos = np.asarray(geometry.positions, dtype=float) * geometry.unit_spacing_d
    phase = -2j * np.pi * pos / wavelength * np.sin(np.deg2rad(theta_deg))
    return np.exp(phase)


def steering_matrix(geometry: CoprimeGeometry, doas_deg) -> np.ndarray:
    """Array manifold: one steering-vector column per DOA."""
    if len(doas_deg) == 0:
        return np.zeros((geometry.num_sensors, 0), dtype=np.complex128)
    return np.column_stack([steering_vector(geometry, t) for t in doas_deg])


def simulate_snapshots(geometry: CoprimeGeometry, scenario: SourceScenario,
                       q: int, seed: int) -> SnapshotMatrix:
    """Simulate x(t) = A s(t) + n(t) over ``q`` snapshots.

    Sources and noise are circular complex Gaussian: real and imaginary
    parts are i.i.d. with half the total variance each.  Draw order is
    fixed (source real, source imag, noise real, noise imag) so a given
    seed always yields the same matrix.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    rng = np.random.default_rng(seed)
    n_sensors = geometry.num_sensors
    k = scenario.num_sources
    a = steering_matrix(geometry, scenario.doas_deg)
    x = np.zeros((n_sensors, q), dtype=np.complex128)
    if k > 0:
        amp = np.sqrt(np.asarray(scenario.source_powers) / 2.0)[:, None]
        s = amp * (rng.standard_normal((k, q)) + 1j * rng.standard_normal((k, q)))
        x += a @ s
    noise_amp = np.sqrt(scenario.noise_power / 2.0)
    x += noise_amp * (rng.standard_normal((n_sensors, q))
                      + 1j * rng.standard_normal((n_sensors, q)))
    return SnapshotMatrix(x, q)
