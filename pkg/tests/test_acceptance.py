"""Acceptance gate: one test per shipped guarantee, run at the stated
tolerance.

Each test ends with a single ``conclude`` call that prints a pass/fail
line naming the guarantee, so a verbose run reads as a checklist. The
numeric brackets are the ones frozen by the unit suites; nothing here is
tuned to the grids used below.
"""

from dataclasses import replace

import numpy as np

from displab.cli import EXIT_PASS, main
from displab.dyadic import DyadicDecomposition
from displab.equations import (
    BenjaminOnoEquation,
    GenericEquation,
    IntermediateLongWaveEquation,
    picard_map,
)
from displab.estimates import (
    block_ensemble,
    mode_ensemble,
    random_ensemble,
    verify_bernstein,
    verify_equivalences,
    verify_localized,
    verify_maximal,
    verify_smoothing,
)
from displab.grid import TorusGrid, l2_norm
from displab.norms import besov_norm, xt_seminorms
from displab.solver import SolveConfig, picard_solve, reference_solve
from displab.trajectory import uniform_times
from displab.witness import (
    WitnessConfig,
    bilinear_duhamel,
    frechet_check,
    growth_scan,
    q_poly,
    witness_norm,
    witness_pair,
)

LINEAR = GenericEquation(1)
KDV = GenericEquation(1, coeffs={(0, 1): -6.0})
KDV_STEEPENED = GenericEquation(1, {(0, 2): 1.0})
BO = BenjaminOnoEquation(b=1.0, eps=0.1, a=1.0, c=1.0, d=1.0)
ILW = IntermediateLongWaveEquation(b=1.0, eps=0.1, a1=1.0, a2=0.5,
                                   c=1.0, d=1.0, depth=1.0)
KAPPA = 0.25


def conclude(label: str, ok: bool) -> None:
    print(f"{label}: {'pass' if ok else 'fail'}")
    assert ok, label


def kdv_soliton(x, t):
    return 2 * KAPPA**2 / np.cosh(KAPPA * (x - 4 * KAPPA**2 * t)) ** 2


def test_growth_law_for_the_generic_family():
    cfg = WitnessConfig(KDV_STEEPENED, 16.0, sobolev_index=0.0, epsilon=0.5,
                        time=1.0, steepening_order=2)
    report = growth_scan(cfg, [2.0**m for m in range(4, 11)])
    ok = (report.predicted_exponent == 0.75
          and abs(report.slope - 0.75) <= 0.1)
    conclude("second-iterate growth exponent 0.75 +/- 0.1, steepened cubic,"
             f" fitted {report.slope:.3f}", ok)


def test_growth_law_for_the_shear_families():
    slopes = {}
    for name, eq in (("benjamin_ono", BO), ("intermediate_long_wave", ILW)):
        report = growth_scan(WitnessConfig(eq, 16.0, epsilon=0.5),
                             [2.0**m for m in range(4, 11)])
        slopes[name] = report.slope
        assert report.predicted_exponent == 0.75
    ok = all(abs(s - 0.75) <= 0.1 for s in slopes.values())
    conclude("second-iterate growth exponent 0.75 +/- 0.1 for both"
             " nonlocal-shear families, fitted "
             + ", ".join(f"{k} {v:.3f}" for k, v in slopes.items()), ok)


def test_resonance_factorization_identity():
    rng = np.random.default_rng(20240817)
    worst = 0.0
    for j in (1, 2, 3, 4):
        xi = rng.uniform(-8.0, 8.0, size=10_000)
        xi1 = rng.uniform(-8.0, 8.0, size=10_000)
        power = 2 * j + 1
        lhs = xi1**power + (xi - xi1) ** power - xi**power
        rhs = (xi - xi1) * q_poly(j, xi, xi1)
        scale = np.maximum(1.0, (np.abs(xi) + np.abs(xi1)) ** power)
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / scale)))
    ok = (worst < 1e-12
          and q_poly(1, 2.0, 1.0) == -6.0
          and q_poly(2, 2.0, 1.0) == -30.0)
    conclude("resonance factorization exact to 1e-12 on 10^4 pairs for"
             f" j in 1..4 (worst {worst:.2e}) with pinned cofactor values",
             ok)


def test_small_wave_number_oracle_agreement():
    cfg = WitnessConfig(KDV_STEEPENED, 8.0, epsilon=2.0 / 3.0,
                        steepening_order=2)
    quad = witness_norm(cfg, 1.0)

    grid = TorusGrid(4096.0 * np.pi, 2**17)
    pair = witness_pair(cfg)
    phi = pair.low.sample(grid)
    psi = pair.high.sample(grid)
    final = bilinear_duhamel(KDV_STEEPENED, phi, psi,
                             uniform_times(0.0, 1.0, 33)).field(-1)
    n, a = cfg.wave_number, cfg.alpha
    band = (grid.wavenumbers >= n + a / 2) & (grid.wavenumbers < n + 2 * a)
    grid_norm = np.sqrt(np.sum(np.abs(final.coeffs[band]) ** 2)
                        / (2.0 * grid.half_length))
    gap = abs(quad - grid_norm) / quad
    conclude("quadrature witness norm at N=8 matches the grid second"
             f" iterate within 5% (gap {gap:.2e})", gap < 0.05)


def test_picard_solver_guarantees():
    grid = TorusGrid(20 * np.pi, 256)
    u0 = grid.field_from_function(lambda x: 0.2 * np.exp(-(x**2)))
    small = picard_solve(KDV, u0, SolveConfig(horizon=0.25, dt=1 / 128))
    residual = xt_seminorms(
        picard_map(KDV, u0, small.trajectory) - small.trajectory, 1).total
    contracts = small.converged and all(r < 1.0 for r in small.ratios)

    sol0 = grid.field_from_function(lambda x: kdv_soliton(x, 0.0))
    exact = grid.field_from_function(lambda x: kdv_soliton(x, 1.0))
    tracked = picard_solve(KDV, sol0, SolveConfig(horizon=1.0, dt=1 / 512))
    picard_err = (l2_norm(tracked.trajectory.field(-1) - exact)
                  / l2_norm(exact))
    reference = reference_solve(KDV, sol0, 1.0, 1e-3, store_stride=100)
    ref_err = l2_norm(reference.field(-1) - exact) / l2_norm(exact)

    ok = (contracts and residual <= 1e-10
          and tracked.converged and picard_err < 1e-4 and ref_err < 1e-6)
    conclude("picard contracts on small data (fixed-point residual"
             f" {residual:.1e}), soliton errors {picard_err:.1e} picard /"
             f" {ref_err:.1e} reference", ok)


def test_flow_map_derivative_identities():
    grid = TorusGrid(16.0 * np.pi, 256)
    phi = grid.field_from_function(lambda x: np.exp(-(x / 4.0) ** 2))
    psi = grid.field_from_function(
        lambda x: x * np.exp(-(x / 5.0) ** 2) / 5.0)
    report = frechet_check(KDV_STEEPENED, phi, psi, time=0.5,
                           deltas=[1e-2, 1e-3])
    first_ratio = report.first_errors[0] / report.first_errors[1]
    second_ratio = report.second_errors[0] / report.second_errors[1]
    ok = (all(report.converged)
          and 8.0 < first_ratio < 12.0
          and 8.0 < second_ratio < 12.0
          and report.first_errors[-1] < 1e-4)
    conclude("flow-map differences converge at first order in delta"
             f" (error ratios {first_ratio:.1f} first,"
             f" {second_ratio:.1f} second over a decade)", ok)


def test_linear_estimate_suite():
    grid = TorusGrid(16 * np.pi, 512)
    fine = TorusGrid(16 * np.pi, 1024)
    modes = verify_bernstein(mode_ensemble(grid, [1, 2, 3]), 1,
                             levels=(1, 2, 3))
    exact = all(row[3] == 1.0 for row in modes.rows)

    slope = verify_bernstein(random_ensemble(fine, 4, seed=7, band=15.0),
                             1, levels=(1, 2, 3))
    flat = abs(slope.fitted_exponent) <= 0.1

    blocks = block_ensemble(TorusGrid(32 * np.pi, 4096), levels=range(5),
                            seed=23)
    energy = verify_localized(LINEAR, blocks, 1.0, "energy")
    equality = all(abs(row[3] - 1.0) <= 1e-12 for row in energy.rows)

    localized_ok = True
    for family, weighted, retarded in (
            ("energy", False, True), ("energy", True, False),
            ("energy", True, True), ("smoothing", False, False),
            ("smoothing", False, True), ("smoothing", True, False),
            ("smoothing", True, True), ("maximal", False, False),
            ("maximal", False, True), ("maximal_l4", False, True)):
        report = verify_localized(LINEAR, blocks, 1.0, family,
                                  weighted=weighted, retarded=retarded)
        localized_ok &= (report.passed and report.fitted_exponent
                         <= report.predicted_exponent + 0.1)

    smooth = random_ensemble(fine, 3, seed=11, band=2.0)
    stable = True
    for variant in ("free", "retarded_energy", "retarded_smoothing"):
        report = verify_smoothing(LINEAR, smooth, 0.5, variant=variant)
        stable &= abs(report.fitted_exponent) <= 0.05
    for variant in ("quarter", "weighted"):
        report = verify_maximal(LINEAR, smooth, 0.5, variant=variant)
        stable &= report.fitted_exponent <= 0.05

    ok = exact and flat and equality and localized_ok and stable
    conclude("estimate suite: derivative cost exact on pure modes and flat"
             " across levels, free-energy equality to 1e-12, localized"
             " exponents within 0.1, smoothing and maximal dilation-stable"
             " within 0.05", ok)


def test_norm_machinery():
    grid = TorusGrid(np.pi, 64)
    decomp = DyadicDecomposition(grid)
    rng = np.random.default_rng(6)
    coeffs = np.where(np.abs(grid.wavenumbers) <= 2.0**decomp.l_max,
                      rng.normal(size=64) + 1j * rng.normal(size=64), 0.0)
    f = grid.field_from_coeffs(coeffs)
    reconstruction = l2_norm(decomp.reconstruct(f) - f) / l2_norm(f)

    ens = random_ensemble(TorusGrid(16 * np.pi, 512), 6, seed=41, band=6.0)
    weighted = verify_equivalences(ens, "weighted", k=1)
    ratios = [row[3] for row in weighted.rows]
    # regression bracket frozen from the first measurement of this seed
    bracketed = 0.55 <= min(ratios) and max(ratios) <= 0.75

    block_sum = verify_equivalences(ens, "block_sum", s=2.75, disp_order=1)
    injection = (block_sum.guard == "geometric constant 1 + sqrt(r/(1-r)) = 2"
                 and all(row[3] <= 1.0 + 1e-9 for row in block_sum.rows))

    mode = TorusGrid(np.pi, 64).field_from_function(
        lambda x: np.exp(8j * x))
    value = besov_norm(mode, 0.25, q=1)
    exact = abs(value - 2**0.75 * np.sqrt(2 * np.pi)) <= 1e-12 * value

    ok = reconstruction < 1e-12 and bracketed and injection and exact
    conclude("norm machinery: partition reconstruction"
             f" {reconstruction:.1e}, two-sided weighted ratios in the"
             " frozen bracket, block-sum constant exactly 2, pure-mode"
             " dyadic norm exact", ok)


def test_determinism_and_refinement(tmp_path):
    config = tmp_path / "run.toml"
    config.write_text("""
seed = 7
[equation]
family = "generic"
disp_order = 1
[grid]
half_length = 50.26548245743669
n_modes = 512
[experiment]
kind = "verify"
estimate = "bernstein"
order = 1
levels = [1, 2, 3]
band = 15.0
""")
    artifacts = []
    codes = []
    for sub in ("a", "b"):
        out = tmp_path / sub
        codes.append(main(["run", "--config", str(config),
                           "--out", str(out)]))
        artifacts.append((out / "run_estimate.csv").read_bytes())
    identical = (codes == [EXIT_PASS, EXIT_PASS]
                 and artifacts[0] == artifacts[1])

    fits = {}
    rows = {}
    for n_modes, n_times in ((1024, 257), (2048, 513)):
        ens = random_ensemble(TorusGrid(16 * np.pi, n_modes), 1,
                              seed=11, band=2.0)
        report = verify_smoothing(LINEAR, ens, 0.5, variant="free",
                                  n_times=n_times)
        fits[n_modes] = report.fitted_exponent
        rows[n_modes] = [row[3] for row in report.rows]
    ratio_gap = max(abs(a - b) / a for a, b in zip(rows[1024], rows[2048]))
    slope_gap = abs(fits[1024] - fits[2048])

    cfg = WitnessConfig(KDV_STEEPENED, 8.0, epsilon=0.5, steepening_order=2)
    doubled = replace(cfg, n_outer=2 * cfg.n_outer, n_inner=2 * cfg.n_inner)
    quad_gap = abs(witness_norm(cfg) - witness_norm(doubled)) / witness_norm(cfg)

    ok = (identical and ratio_gap < 0.05 and slope_gap < 0.02
          and quad_gap < 0.05)
    conclude("identical seeds give byte-identical artifacts; doubling grid,"
             f" time, and quadrature resolution moves ratios {ratio_gap:.1e}"
             f" and slopes {slope_gap:.1e}", ok)
