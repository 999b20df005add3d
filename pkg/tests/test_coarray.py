"""Coarray pipeline: covariance, lag selection, pseudo-spectrum."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coprime_doa.array_model import (
    SnapshotMatrix,
    SourceScenario,
    build_geometry,
    simulate_snapshots,
)
from coprime_doa.coarray import (
    AngleGrid,
    CoarrayVector,
    CovarianceMatrix,
    analytic_covariance,
    analytic_pseudo_spectrum,
    normalize_spectrum,
    pseudo_spectrum,
    sample_covariance,
    select_coarray,
    spectrum_to_csv,
    vectorize_covariance,
    virtual_manifold,
)
from coprime_doa.errors import (
    DegenerateConstant,
    EmptySnapshots,
    ShapeMismatch,
)

GEOM = build_geometry(3, 5, 0.5)
GRID = AngleGrid(-90.0, 90.0, 1.0)


def local_maxima(values):
    """Indices whose value exceeds both neighbours (plateaus collapse left)."""
    idx = []
    w = len(values)
    for i in range(w):
        left = values[i - 1] if i > 0 else -np.inf
        right = values[i + 1] if i < w - 1 else -np.inf
        if values[i] > left and values[i] >= right:
            if i > 0 and values[i] == values[i - 1]:
                continue
            idx.append(i)
    return idx


class TestAngleGrid:
    def test_paper_grid_width(self):
        assert AngleGrid(-15.0, 15.0, 1.0).width == 31

    def test_angles_increasing(self):
        grid = AngleGrid(-15.0, 15.0, 1.0)
        assert np.all(np.diff(grid.angles) > 0)
        np.testing.assert_allclose(grid.angles[[0, -1]], [-15.0, 15.0])

    def test_bad_step_rejected(self):
        with pytest.raises(ValueError):
            AngleGrid(-15.0, 15.0, 0.0)


class TestSampleCovariance:
    def test_single_snapshot_outer_product(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((10, 1)) + 1j * rng.standard_normal((10, 1))
        r = sample_covariance(SnapshotMatrix(x, 1))
        np.testing.assert_allclose(r.data, x @ x.conj().T, atol=1e-14)

    def test_trace_nonnegative(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((10, 7)) + 1j * rng.standard_normal((10, 7))
        r = sample_covariance(SnapshotMatrix(x, 7))
        assert np.trace(r.data).real >= 0.0

    def test_converges_to_analytic(self):
        sc = SourceScenario((4.0,), (1.0,), noise_power=1.0)
        snap = simulate_snapshots(GEOM, sc, 100_000, seed=3)
        r_hat = sample_covariance(snap).data
        r = analytic_covariance(GEOM, sc).data
        assert np.linalg.norm(r_hat - r, "fro") / np.linalg.norm(r, "fro") < 0.02

    def test_empty_rejected(self):
        with pytest.raises(EmptySnapshots):
            sample_covariance(SnapshotMatrix(np.zeros((10, 0)), 0))


class TestAnalyticCovariance:
    def test_noise_only_is_scaled_identity(self):
        sc = SourceScenario((), (), noise_power=2.5)
        r = analytic_covariance(GEOM, sc)
        np.testing.assert_allclose(r.data, 2.5 * np.eye(10), atol=1e-14)

    def test_diagonal_is_total_power(self):
        sc = SourceScenario((-8.0, 13.0), (1.5, 2.5), noise_power=0.5)
        r = analytic_covariance(GEOM, sc)
        np.testing.assert_allclose(np.diag(r.data).real,
                                   np.full(10, 1.5 + 2.5 + 0.5), atol=1e-12)

    def test_noiseless_single_source_rank_one(self):
        sc = SourceScenario((4.0,), (1.0,), noise_power=0.0)
        eig = np.linalg.eigvalsh(analytic_covariance(GEOM, sc).data)
        assert eig[-1] > 9.9
        assert abs(eig[-2]) < 1e-10


class TestVectorize:
    def test_column_stacking_order(self):
        m = np.array([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(vectorize_covariance(m), [1.0, 3.0, 2.0, 4.0])

    def test_norm_identity(self):
        rng = np.random.default_rng(2)
        a = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
        h = a @ a.conj().T
        assert np.isclose(np.linalg.norm(vectorize_covariance(h)),
                          np.linalg.norm(h, "fro"))

    def test_identity_stride_positions(self):
        n = GEOM.num_sensors
        v = vectorize_covariance(CovarianceMatrix(0.7 * np.eye(n), "analytic"))
        hits = np.flatnonzero(np.abs(v) > 0)
        np.testing.assert_array_equal(hits, np.arange(n) * (n + 1))
        np.testing.assert_allclose(v[hits], 0.7)


class TestSelectCoarray:
    def test_paper_geometry_full_lag_run(self):
        sc = SourceScenario((0.5,), (1.0,))
        y = vectorize_covariance(analytic_covariance(GEOM, sc))
        ca = select_coarray(y, GEOM)
        assert ca.values.size == 31
        np.testing.assert_array_equal(ca.lags, np.arange(-15, 16))

    @pytest.mark.parametrize("m,n", [(1, 2), (2, 3), (3, 5), (2, 5)])
    def test_lag_coverage_brute_force(self, m, n):
        # oracle: the pairwise difference set covers every lag in [-MN, MN]
        geom = build_geometry(m, n)
        diffs = {a - b for a, b in itertools.product(geom.positions, repeat=2)}
        assert set(range(-m * n, m * n + 1)) <= diffs

    def test_noise_vec_maps_to_lag_zero_impulse(self):
        y = vectorize_covariance(0.9 * np.eye(GEOM.num_sensors))
        ca = select_coarray(y, GEOM)
        zero = np.flatnonzero(ca.lags == 0)[0]
        np.testing.assert_allclose(ca.values[zero], 0.9, atol=1e-14)
        others = np.delete(ca.values, zero)
        np.testing.assert_allclose(others, 0.0, atol=1e-14)

    def test_single_source_exponential_sequence(self):
        # closed form: value(l) = sigma^2 exp(-j 2 pi l d sin(theta))
        theta, power = 20.0, 2.5
        sc = SourceScenario((theta,), (power,), noise_power=0.0)
        y = vectorize_covariance(analytic_covariance(GEOM, sc))
        ca = select_coarray(y, GEOM)
        expected = power * np.exp(
            -2j * np.pi * ca.lags * 0.5 * np.sin(np.deg2rad(theta)))
        np.testing.assert_allclose(ca.values, expected, atol=1e-12)

    def test_wrong_length_rejected(self):
        with pytest.raises(ShapeMismatch):
            select_coarray(np.zeros(11), GEOM)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=0, max_value=2**32 - 1))
    def test_conjugate_symmetry_for_hermitian_input(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((10, 10)) + 1j * rng.standard_normal((10, 10))
        h = a + a.conj().T
        ca = select_coarray(vectorize_covariance(h), GEOM)
        flipped = ca.values[::-1]
        assert np.abs(ca.values - flipped.conj()).max() < 1e-10


class TestVirtualManifold:
    def test_broadside_column_all_ones(self):
        b = virtual_manifold(GEOM, GRID)
        col = np.flatnonzero(GRID.angles == 0.0)[0]
        np.testing.assert_allclose(b.matrix[:, col], 1.0, atol=1e-15)

    def test_unit_modulus(self):
        b = virtual_manifold(GEOM, GRID)
        np.testing.assert_allclose(np.abs(b.matrix), 1.0, atol=1e-12)

    def test_lag_zero_impulse_gives_flat_response(self):
        b = virtual_manifold(GEOM, GRID)
        impulse = np.zeros(31, dtype=complex)
        impulse[15] = 1.0
        resp = b.matrix.conj().T @ impulse
        np.testing.assert_allclose(resp, 1.0, atol=1e-14)


class TestPseudoSpectrum:
    def test_lag_zero_impulse_constant_spectrum(self):
        b = virtual_manifold(GEOM, GRID)
        values = np.zeros(31, dtype=complex)
        values[15] = 3.25
        mu = pseudo_spectrum(b, CoarrayVector(np.arange(-15, 16), values))
        np.testing.assert_allclose(mu.values, 3.25, atol=1e-12)

    def test_single_source_peak_on_nearest_bin(self):
        theta = 23.4
        sc = SourceScenario((theta,), (1.0,), noise_power=0.0)
        mu = analytic_pseudo_spectrum(GEOM, sc, GRID)
        peak_angle = GRID.angles[np.argmax(mu.values)]
        assert peak_angle == 23.0  # nearest 1-degree bin

    def test_scenario_a_four_exact_maxima(self):
        doas = (-65.0, -23.0, 4.0, 36.0)
        sc = SourceScenario.from_snr(doas, 0.0)
        mu = analytic_pseudo_spectrum(GEOM, sc, GRID)
        peaks = local_maxima(mu.values)
        top4 = sorted(peaks, key=lambda i: mu.values[i])[-4:]
        assert sorted(GRID.angles[i] for i in top4) == sorted(doas)

    def test_imag_residual_small_for_hermitian_pipeline(self):
        sc = SourceScenario((-31.0, 7.0), (1.0, 2.0), noise_power=1.0)
        snap = simulate_snapshots(GEOM, sc, 256, seed=8)
        y = vectorize_covariance(sample_covariance(snap))
        mu = pseudo_spectrum(virtual_manifold(GEOM, GRID), select_coarray(y, GEOM))
        assert mu.imag_residual < 1e-9

    def test_noise_power_shifts_by_constant(self):
        doas = (-10.0, 12.0)
        mu0 = analytic_pseudo_spectrum(
            GEOM, SourceScenario(doas, (1.0, 1.0), 0.0), GRID)
        mu1 = analytic_pseudo_spectrum(
            GEOM, SourceScenario(doas, (1.0, 1.0), 3.0), GRID)
        diff = mu1.values - mu0.values
        assert diff.max() - diff.min() < 1e-9
        np.testing.assert_allclose(diff.mean(), 3.0, atol=1e-9)

    def test_shape_mismatch_rejected(self):
        b = virtual_manifold(GEOM, GRID)
        with pytest.raises(ShapeMismatch):
            pseudo_spectrum(b, CoarrayVector(np.arange(-2, 3),
                                             np.zeros(5, dtype=complex)))


class TestNormalize:
    def test_affine_map(self):
        grid = AngleGrid(-1.0, 1.0, 1.0)
        mu = normalize_spectrum(
            pseudo_spectrum_like([2.0, 4.0, 6.0], grid))
        np.testing.assert_allclose(mu.values, [0.0, 0.5, 1.0])

    def test_argmax_preserved(self):
        rng = np.random.default_rng(4)
        grid = AngleGrid(-15.0, 15.0, 1.0)
        for _ in range(10):
            vals = rng.standard_normal(31)
            mu = pseudo_spectrum_like(vals, grid)
            assert np.argmax(normalize_spectrum(mu).values) == np.argmax(vals)

    def test_constant_offset_invariant(self):
        grid = AngleGrid(-15.0, 15.0, 1.0)
        vals = np.linspace(0.0, 5.0, 31)
        a = normalize_spectrum(pseudo_spectrum_like(vals, grid))
        b = normalize_spectrum(pseudo_spectrum_like(vals + 17.5, grid))
        np.testing.assert_allclose(a.values, b.values, atol=1e-12)

    def test_degenerate_rejected(self):
        grid = AngleGrid(-1.0, 1.0, 1.0)
        with pytest.raises(DegenerateConstant):
            normalize_spectrum(pseudo_spectrum_like([1.0, 1.0, 1.0], grid))


def pseudo_spectrum_like(values, grid):
    from coprime_doa.coarray import PseudoSpectrum
    return PseudoSpectrum(np.asarray(values, dtype=float), grid)


class TestCsvExport:
    def test_header_and_roundtrip(self, tmp_path):
        sc = SourceScenario((4.0,), (1.0,))
        mu = analytic_pseudo_spectrum(GEOM, sc, AngleGrid(-15.0, 15.0, 1.0))
        path = tmp_path / "spec.csv"
        spectrum_to_csv(mu, path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "angle_deg,value"
        assert len(lines) == 32
        angle, value = lines[1].split(",")
        assert float(angle) == -15.0
        assert float(value) == mu.values[0]
