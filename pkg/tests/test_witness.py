"""Tests for the frequency-side witness construction.

Reference values were computed independently before being frozen here:
profile norms come from closed-form integrals of the piecewise-constant
packets, resonance values from the factored polynomial identity, and the
grid cross-check numbers from a pseudospectral second iterate evaluated on
a torus wide enough to resolve the packet width.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from displab.equations import (
    BenjaminOnoEquation,
    GenericEquation,
    IntermediateLongWaveEquation,
)
from displab.grid import TorusGrid, l2_norm
from displab.trajectory import uniform_times
from displab.witness import (
    FrequencyProfile,
    WitnessConfig,
    bilinear_duhamel,
    frechet_check,
    growth_scan,
    oscillatory_factor,
    overlap_length,
    q_poly,
    resonance,
    second_iterate_transform,
    witness_norm,
    witness_pair,
)
from displab.witness import _centered_resonance

KDV_STEEPENED = GenericEquation(1, {(0, 2): 1.0})
BO = BenjaminOnoEquation(b=1.0, eps=0.1, a=1.0, c=1.0, d=1.0)
ILW = IntermediateLongWaveEquation(b=1.0, eps=0.1, a1=1.0, a2=0.5,
                                   c=1.0, d=1.0, depth=1.0)


class TestResonanceAlgebra:
    def test_factorization_identity_bulk(self):
        """xi1^{2j+1} + (xi-xi1)^{2j+1} - xi^{2j+1} = (xi-xi1) Q_{2j}."""
        rng = np.random.default_rng(20240817)
        for j in (1, 2, 3, 4):
            xi = rng.uniform(-8.0, 8.0, size=10_000)
            xi1 = rng.uniform(-8.0, 8.0, size=10_000)
            power = 2 * j + 1
            lhs = xi1**power + (xi - xi1) ** power - xi**power
            rhs = (xi - xi1) * q_poly(j, xi, xi1)
            scale = np.maximum(1.0, (np.abs(xi) + np.abs(xi1)) ** power)
            assert np.max(np.abs(lhs - rhs) / scale) < 1e-12

    def test_cofactor_values(self):
        assert q_poly(1, 2.0, 1.0) == -6.0
        assert q_poly(2, 2.0, 1.0) == -30.0

    def test_cofactor_nonzero_on_diagonal(self):
        for j in (1, 2, 3):
            for xi in (0.5, 1.0, -2.0, 7.0):
                assert q_poly(j, xi, xi) != 0.0

    def test_rejects_bad_order(self):
        with pytest.raises(ValueError, match="dispersion order"):
            q_poly(0, 1.0, 1.0)

    @given(
        j=st.integers(min_value=1, max_value=3),
        xi=st.floats(min_value=-6.0, max_value=6.0),
        xi1=st.floats(min_value=-6.0, max_value=6.0),
    )
    @settings(deadline=None, max_examples=200)
    def test_factorization_identity_hypothesis(self, j, xi, xi1):
        power = 2 * j + 1
        lhs = xi1**power + (xi - xi1) ** power - xi**power
        rhs = (xi - xi1) * q_poly(j, xi, xi1)
        scale = max(1.0, (abs(xi) + abs(xi1)) ** power)
        assert abs(lhs - rhs) <= 1e-12 * scale

    def test_resonance_cubic_value(self):
        assert resonance(KDV_STEEPENED, 3.0, 1.0) == pytest.approx(-18.0)

    def test_resonance_vanishes_at_trivial_splits(self):
        xi = np.array([2.0, 5.0, -3.0])
        assert np.max(np.abs(resonance(KDV_STEEPENED, xi, 0.0 * xi))) == 0.0
        assert np.max(np.abs(resonance(KDV_STEEPENED, xi, xi))) == 0.0

    @pytest.mark.parametrize("eq", [BO, ILW], ids=["bo", "ilw"])
    def test_centered_resonance_matches_direct_sum(self, eq):
        """The cancellation-free band form equals the defining sum where the
        direct sum is still accurate."""
        rng = np.random.default_rng(5)
        xi1 = 4.0 + 3.0 * rng.random(300)
        xi2 = 0.01 + 0.5 * rng.random(300)
        xi = xi1 + xi2
        direct = resonance(eq, xi, xi1)
        centered = _centered_resonance(eq, xi, xi1, xi2)
        assert np.max(np.abs(direct - centered) / np.abs(centered)) < 1e-12


class TestOscillatoryFactor:
    def test_unit_at_zero(self):
        assert oscillatory_factor(0.0) == 1.0 + 0.0j

    def test_modulus_bounded_by_one(self):
        theta = np.linspace(-200.0, 200.0, 4001)
        assert np.max(np.abs(oscillatory_factor(theta))) <= 1.0 + 1e-15

    def test_matches_direct_quotient(self):
        theta = np.concatenate([np.linspace(1e-3, 30.0, 500),
                                -np.linspace(1e-3, 30.0, 500)])
        direct = (np.exp(1j * theta) - 1.0) / (1j * theta)
        assert np.max(np.abs(oscillatory_factor(theta) - direct)) < 1e-14


class TestProfiles:
    def test_low_packet_norm(self):
        """amp^2 (alpha/2) / 2pi = 1/4pi regardless of N."""
        for n in (8.0, 256.0):
            cfg = WitnessConfig(KDV_STEEPENED, n, steepening_order=2)
            low = witness_pair(cfg).low
            assert low.h_s_norm(0.0) == pytest.approx((4.0 * np.pi) ** -0.5,
                                                      rel=1e-12)

    def test_high_packet_plain_norm(self):
        cfg = WitnessConfig(KDV_STEEPENED, 64.0, steepening_order=2)
        high = witness_pair(cfg).high
        assert high.h_s_norm(0.0) == pytest.approx((2.0 * np.pi) ** -0.5,
                                                   rel=1e-12)

    def test_high_packet_sobolev_norm_saturates(self):
        """With the N^{-s} amplitude the H^s size tends to (2pi)^{-1/2}."""
        cfg = WitnessConfig(KDV_STEEPENED, 1024.0, sobolev_index=2.0,
                            steepening_order=2)
        high = witness_pair(cfg).high
        assert high.h_s_norm(2.0) == pytest.approx((2.0 * np.pi) ** -0.5,
                                                   rel=1e-4)

    def test_real_variant_norm(self):
        cfg = WitnessConfig(KDV_STEEPENED, 32.0, steepening_order=2,
                            real_valued=True)
        low = witness_pair(cfg).low
        assert low.h_s_norm(0.0) == pytest.approx((8.0 * np.pi) ** -0.5,
                                                  rel=1e-12)
        lows = sorted(piece[0] for piece in low.pieces)
        assert lows[0] == -cfg.alpha

    def test_sampling_is_half_open(self):
        grid = TorusGrid(np.pi, 16)
        profile = FrequencyProfile(((2.0, 4.0, 1.5),))
        field = profile.sample(grid)
        values = {int(k): field.coeffs[i]
                  for i, k in enumerate(grid.wavenumbers)}
        assert values[2] == 1.5 and values[3] == 1.5
        assert values[4] == 0.0 and values[1] == 0.0

    def test_rejects_empty_piece(self):
        with pytest.raises(ValueError, match="empty profile piece"):
            FrequencyProfile(((1.0, 1.0, 2.0),))

    def test_positive_amplitude_requires_positive_piece(self):
        with pytest.raises(ValueError, match="positive-frequency"):
            FrequencyProfile(((-2.0, -1.0, 1.0),)).positive_amplitude()


class TestWitnessConfig:
    def test_epsilon_range(self):
        for bad in (0.0, 1.0, -0.5):
            with pytest.raises(ValueError, match="epsilon"):
                WitnessConfig(KDV_STEEPENED, 8.0, epsilon=bad,
                              steepening_order=2)

    def test_wave_number_floor(self):
        with pytest.raises(ValueError, match="wave number"):
            WitnessConfig(KDV_STEEPENED, 1.0, steepening_order=2)

    def test_generic_needs_steepening_order(self):
        with pytest.raises(ValueError, match="steepening order"):
            WitnessConfig(KDV_STEEPENED, 8.0)

    def test_steepening_order_must_exceed_dispersion_order(self):
        with pytest.raises(ValueError, match="must exceed"):
            WitnessConfig(KDV_STEEPENED, 8.0, steepening_order=1)

    def test_steepening_term_must_be_present(self):
        eq = GenericEquation(1, {(1, 1): 1.0})
        with pytest.raises(ValueError, match="no u d\\^2u term"):
            WitnessConfig(eq, 8.0, steepening_order=2)

    def test_steepening_order_rejected_off_generic(self):
        with pytest.raises(ValueError, match="only to the generic"):
            WitnessConfig(BO, 8.0, steepening_order=2)

    def test_time_must_be_positive(self):
        with pytest.raises(ValueError, match="time must be positive"):
            WitnessConfig(KDV_STEEPENED, 8.0, steepening_order=2, time=0.0)

    def test_resolution_guard(self):
        eq = GenericEquation(2, {(0, 3): 1.0})
        with pytest.raises(ValueError, match="outruns double precision"):
            WitnessConfig(eq, 512.0, steepening_order=3)

    def test_alpha_and_support(self):
        cfg = WitnessConfig(KDV_STEEPENED, 16.0, epsilon=0.5,
                            steepening_order=2)
        assert cfg.alpha == pytest.approx(2.0**-10, rel=1e-14)
        lo, hi = cfg.support
        assert lo == pytest.approx(16.0 + cfg.alpha / 2, rel=1e-14)
        assert hi == pytest.approx(16.0 + 2 * cfg.alpha, rel=1e-14)

    def test_predicted_exponents(self):
        assert WitnessConfig(KDV_STEEPENED, 8.0, epsilon=0.5,
                             steepening_order=2).predicted_exponent == 0.75
        eq = GenericEquation(2, {(0, 4): 1.0})
        assert WitnessConfig(eq, 8.0, epsilon=0.5,
                             steepening_order=4).predicted_exponent == 1.75
        assert WitnessConfig(BO, 8.0, epsilon=0.5).predicted_exponent == 0.75
        assert WitnessConfig(ILW, 8.0,
                             epsilon=0.25).predicted_exponent == 0.875


class TestTransform:
    def test_zero_time_gives_zero(self):
        cfg = WitnessConfig(BO, 16.0)
        xi = np.linspace(16.0, 16.0 + 2 * cfg.alpha, 7)
        assert np.max(np.abs(second_iterate_transform(cfg, xi, 0.0))) == 0.0

    def test_vanishes_off_the_interaction_band(self):
        cfg = WitnessConfig(KDV_STEEPENED, 16.0, steepening_order=2)
        xi = np.array([0.5, 15.0, 16.0, 16.0 + 3 * cfg.alpha, -17.0])
        assert np.max(np.abs(second_iterate_transform(cfg, xi, 1.0))) == 0.0

    def test_overlap_profile_is_a_trapezoid(self):
        cfg = WitnessConfig(KDV_STEEPENED, 8.0, steepening_order=2)
        n, a = cfg.wave_number, cfg.alpha
        assert overlap_length(cfg, n + 1.25 * a) == pytest.approx(a / 2,
                                                                  rel=1e-12)
        assert overlap_length(cfg, n + 0.75 * a) == pytest.approx(a / 4,
                                                                  rel=1e-12)
        assert overlap_length(cfg, n + 1.75 * a) == pytest.approx(a / 4,
                                                                  rel=1e-12)
        assert overlap_length(cfg, n + a / 2) == 0.0
        assert overlap_length(cfg, n + 2 * a) == 0.0

    def test_short_time_limit_matches_closed_form(self):
        """As t -> 0 the oscillation freezes and the integral collapses to
        weight(xi) * overlap * amplitude product / 2pi."""
        cfg = WitnessConfig(KDV_STEEPENED, 8.0, steepening_order=2)
        xi = np.array([8.0 + 1.25 * cfg.alpha])
        t = 1e-8
        value = second_iterate_transform(cfg, xi, t)[0] / t
        pair = witness_pair(cfg)
        amps = pair.low.positive_amplitude() * pair.high.positive_amplitude()
        expected = (1j * xi[0]) ** 2 * overlap_length(cfg, xi)[0] * amps / (
            2.0 * np.pi)
        assert abs(value - expected) / abs(expected) < 1e-4

    def test_norm_insensitive_to_sobolev_index(self):
        """The N^{-s} data normalization cancels the output weight on a band
        of relative width alpha/N."""
        values = []
        for s in (-1.0, 0.0, 2.0):
            cfg = WitnessConfig(KDV_STEEPENED, 64.0, sobolev_index=s,
                                steepening_order=2)
            values.append(witness_norm(cfg))
        spread = (max(values) - min(values)) / min(values)
        assert spread < 0.01

    def test_norm_grows_linearly_before_the_resonance_turns(self):
        cfg = WitnessConfig(KDV_STEEPENED, 32.0, steepening_order=2)
        values = [witness_norm(cfg, t) for t in (0.25, 0.5, 1.0)]
        assert values[0] < values[1] < values[2]
        assert values[1] / values[0] == pytest.approx(2.0, abs=0.05)
        assert values[2] / values[1] == pytest.approx(2.0, abs=0.05)

    def test_real_variant_is_one_quarter(self):
        """Halving both packet amplitudes quarters the bilinear output."""
        base = WitnessConfig(KDV_STEEPENED, 64.0, steepening_order=2)
        real = WitnessConfig(KDV_STEEPENED, 64.0, steepening_order=2,
                             real_valued=True)
        assert witness_norm(real) == pytest.approx(0.25 * witness_norm(base),
                                                   rel=1e-10)

    def test_deep_water_transform_matches_benjamin_ono(self):
        """A channel deep enough that even the low packet sits in the
        deep-water regime (depth >> 1/alpha) reproduces the deep-water
        model when a1 + a2 = a; at moderate depth the gap is set by
        coth(depth xi) - 1 at the low frequency and shrinks with depth."""
        cfg_bo = WitnessConfig(BO, 16.0)
        xi = np.linspace(16.0 + 0.6 * cfg_bo.alpha, 16.0 + 1.9 * cfg_bo.alpha,
                         11)
        b = second_iterate_transform(cfg_bo, xi, 1.0)
        gaps = []
        for depth in (40.0, 1e3, 1e6):
            deep = IntermediateLongWaveEquation(b=1.0, eps=0.1, a1=0.75,
                                                a2=0.25, c=1.0, d=1.0,
                                                depth=depth)
            a = second_iterate_transform(WitnessConfig(deep, 16.0), xi, 1.0)
            gaps.append(np.max(np.abs(a - b)) / np.max(np.abs(b)))
        assert gaps[0] < 1e-4
        assert gaps[1] < gaps[0]
        assert gaps[2] < 1e-10


class TestGrowthScan:
    def test_needs_four_wave_numbers(self):
        cfg = WitnessConfig(KDV_STEEPENED, 8.0, steepening_order=2)
        with pytest.raises(ValueError, match="at least 4"):
            growth_scan(cfg, [8.0, 16.0, 32.0])

    def test_generic_growth_law(self):
        """Fitted exponent k - j - eps/2 = 0.75 for the steepened cubic."""
        cfg = WitnessConfig(KDV_STEEPENED, 16.0, epsilon=0.5,
                            steepening_order=2)
        report = growth_scan(cfg, [2.0**m for m in range(4, 11)])
        assert report.predicted_exponent == 0.75
        assert abs(report.slope - report.predicted_exponent) < 0.1
        assert report.residual < 0.05

    def test_epsilon_moves_the_exponent(self):
        for eps in (0.25, 2.0 / 3.0):
            cfg = WitnessConfig(KDV_STEEPENED, 16.0, epsilon=eps,
                                steepening_order=2)
            report = growth_scan(cfg, [2.0**m for m in range(4, 11)])
            assert abs(report.slope - report.predicted_exponent) < 0.05

    def test_steepening_order_shifts_the_slope_by_one(self):
        scans = []
        for k in (3, 4):
            eq = GenericEquation(2, {(0, k): 1.0})
            cfg = WitnessConfig(eq, 8.0, epsilon=0.5, steepening_order=k)
            scans.append(growth_scan(cfg, [2.0**m for m in range(3, 8)]))
        assert scans[0].predicted_exponent == 0.75
        assert scans[1].predicted_exponent == 1.75
        assert abs(scans[0].slope - 0.75) < 0.1
        assert abs((scans[1].slope - scans[0].slope) - 1.0) < 0.01

    @pytest.mark.parametrize("eq", [BO, ILW], ids=["bo", "ilw"])
    def test_shear_family_growth_law(self, eq):
        cfg = WitnessConfig(eq, 16.0, epsilon=0.5)
        report = growth_scan(cfg, [2.0**m for m in range(4, 11)])
        assert report.predicted_exponent == 0.75
        assert abs(report.slope - report.predicted_exponent) < 0.1

    def test_report_rows_and_json(self):
        cfg = WitnessConfig(KDV_STEEPENED, 16.0, steepening_order=2)
        ns = [16.0, 32.0, 64.0, 128.0]
        report = growth_scan(cfg, ns)
        assert report.csv_header() == [
            "N", "alpha", "norm", "predicted_exponent", "slope", "residual"]
        rows = report.csv_rows()
        assert len(rows) == 4
        assert rows[0][0] == 16.0
        assert rows[2][1] == pytest.approx(64.0**-2.5, rel=1e-14)
        assert all(row[4] == report.slope for row in rows)
        payload = report.to_json_dict()
        assert payload["norms"] == list(report.norms)
        assert payload["time"] == 1.0


class TestGridCrossCheck:
    def test_torus_second_iterate_matches_transform(self):
        """Pseudospectral second iterate on a wide torus against the
        quadrature transform, N = 8 and a dyadically aligned packet width
        (eps = 2/3 makes alpha = 2^-8, a multiple of the mode spacing
        2^-12). Trapezoid time stepping at 33 nodes and the one-cell shift
        of the half-open lattice convolution both sit far inside the 5%
        tolerance."""
        eq = KDV_STEEPENED
        cfg = WitnessConfig(eq, 8.0, epsilon=2.0 / 3.0, steepening_order=2)
        quad = witness_norm(cfg, 1.0)

        grid = TorusGrid(4096.0 * np.pi, 2**17)
        pair = witness_pair(cfg)
        phi = pair.low.sample(grid)
        psi = pair.high.sample(grid)
        assert np.count_nonzero(phi.coeffs) == 8
        assert np.count_nonzero(psi.coeffs) == 16

        times = uniform_times(0.0, 1.0, 33)
        final = bilinear_duhamel(eq, phi, psi, times).field(-1)
        n, a = cfg.wave_number, cfg.alpha
        band = (grid.wavenumbers >= n + a / 2) & (grid.wavenumbers < n + 2 * a)
        grid_norm = np.sqrt(np.sum(np.abs(final.coeffs[band]) ** 2)
                            / (2.0 * grid.half_length))
        assert abs(quad - grid_norm) / quad < 0.05


def gaussian_pair(grid):
    phi = grid.field_from_function(lambda x: np.exp(-(x / 4.0) ** 2))
    psi = grid.field_from_function(
        lambda x: x * np.exp(-(x / 5.0) ** 2) / 5.0)
    return phi, psi


class TestFrechetCheck:
    def test_differences_converge_at_first_order(self):
        grid = TorusGrid(16.0 * np.pi, 256)
        phi, psi = gaussian_pair(grid)
        report = frechet_check(KDV_STEEPENED, phi, psi, time=0.5,
                               deltas=[1e-1, 1e-2, 1e-3])
        assert all(report.converged)
        f, s = report.first_errors, report.second_errors
        assert f[2] < 1e-4
        for coarse, fine in zip(f[:-1], f[1:]):
            assert 8.0 < coarse / fine < 12.0
        for coarse, fine in zip(s[:-1], s[1:]):
            assert 8.0 < coarse / fine < 12.0

    def test_linear_flow_has_exact_differentials(self):
        grid = TorusGrid(16.0 * np.pi, 256)
        phi, psi = gaussian_pair(grid)
        report = frechet_check(GenericEquation(1, {}), phi, psi, time=0.5,
                               deltas=[1e-2, 1e-3])
        assert max(report.first_errors) < 1e-12
        assert max(report.second_errors) < 1e-10

    def test_diagonal_pair(self):
        grid = TorusGrid(16.0 * np.pi, 256)
        phi, _ = gaussian_pair(grid)
        report = frechet_check(KDV_STEEPENED, phi, phi, time=0.5,
                               deltas=[1e-2, 1e-3])
        s = report.second_errors
        assert 8.0 < s[0] / s[1] < 12.0

    def test_divergent_solves_are_skipped_not_raised(self):
        grid = TorusGrid(16.0 * np.pi, 256)
        phi, psi = gaussian_pair(grid)
        report = frechet_check(KDV_STEEPENED, 1e6 * phi, psi, time=0.5,
                               deltas=[1.0], max_iter=8)
        assert report.converged == (False,)
        assert np.isnan(report.first_errors[0])
        rows = report.csv_rows()
        assert rows[0][3] is False

    def test_grid_mismatch_rejected(self):
        phi, _ = gaussian_pair(TorusGrid(16.0 * np.pi, 256))
        psi, _ = gaussian_pair(TorusGrid(8.0 * np.pi, 256))
        with pytest.raises(ValueError, match="different grids"):
            frechet_check(KDV_STEEPENED, phi, psi, time=0.5, deltas=[1e-2])

    def test_report_serialization(self):
        grid = TorusGrid(16.0 * np.pi, 256)
        phi, psi = gaussian_pair(grid)
        report = frechet_check(KDV_STEEPENED, phi, psi, time=0.25,
                               deltas=[1e-2, 1e-3])
        assert report.csv_header() == [
            "delta", "first_difference_error", "second_difference_error",
            "converged"]
        payload = report.to_json_dict()
        assert payload["deltas"] == [1e-2, 1e-3]
        assert len(payload["second_errors"]) == 2
