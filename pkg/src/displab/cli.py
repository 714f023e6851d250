"""Config-driven experiment runner.

One experiment per run, described by a TOML config of flat sections:

* ``[equation]``: ``family`` is "generic", "benjamin_ono", or
  "intermediate_long_wave". The generic family takes ``disp_order`` plus
  coefficient keys ``a_<m>_<k>`` (the coefficient of d^m u * d^k u, e.g.
  ``a_0_1 = -6.0``); the other families take their named constants.
* ``[grid]``: ``half_length`` and ``n_modes``.
* ``[time]``: ``horizon`` (default 1.0), ``dt`` (solve only), ``n_times``.
* ``[experiment]``: ``kind`` plus the kind's own keys (see EXPERIMENTS).
* ``[output]``: ``directory``, ``prefix``, ``json``.
* top-level ``seed``.

CSV artifacts are deterministic given config and seed; the JSON summary
(``--json`` or ``output.json``) carries the timestamp. Exit codes: 0 when
every pass flag is true, 1 when a completed run fails its criterion, 2 for
config or precondition errors. Unknown keys are rejected by name.
"""

from __future__ import annotations

import argparse
import re
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib

from displab.dyadic import DyadicDecomposition
from displab.equations import (
    BenjaminOnoEquation,
    GenericEquation,
    IntermediateLongWaveEquation,
)
from displab.estimates import (
    block_ensemble,
    mode_ensemble,
    packet_ensemble,
    random_ensemble,
    verify_bernstein,
    verify_bilinear,
    verify_equivalences,
    verify_localized,
    verify_maximal,
    verify_smoothing,
)
from displab.grid import TorusGrid, l2_norm
from displab.norms import (
    NormReport,
    besov_report,
    sobolev_report,
    weighted_besov_report,
    weighted_sobolev_report,
)
from displab.reporting import write_csv, write_json
from displab.solver import SolveConfig, picard_solve
from displab.witness import WitnessConfig, frechet_check, growth_scan

__all__ = [
    "ConfigError",
    "EXIT_CONFIG",
    "EXIT_FAIL",
    "EXIT_PASS",
    "EXPERIMENTS",
    "experiment_table",
    "main",
    "run_config",
]

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2

EXPERIMENTS = (
    ("solve", "small-data fixed-point iteration; contraction distances and"
              " the trajectory mass profile"),
    ("illposed", "growth law of the second iterate across wave numbers;"
                 " fitted slope against the predicted k - j - eps/2"),
    ("verify", "one estimate family; both sides of the inequality, ratios,"
               " and the fitted scan exponent"),
    ("norms", "norm table with per-block dyadic breakdown for a configured"
              " profile"),
    ("frechet", "flow-map derivative probes at zero data; first and mixed"
                " second differences"),
)


class ConfigError(ValueError):
    """Raised for config problems; the message names the offending key."""


def _load(path):
    try:
        with open(path, "rb") as handle:
            return tomllib.load(handle)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as err:
        raise ConfigError(f"config parse error in {path}: {err}") from None


def _check_keys(section, mapping, allowed, extra_pattern=None):
    for key in mapping:
        if key in allowed:
            continue
        if extra_pattern is not None and extra_pattern.fullmatch(key):
            continue
        raise ConfigError(f"unknown config key {section}.{key}")


def _require(mapping, section, key):
    if key not in mapping:
        raise ConfigError(f"missing config key {section}.{key}")
    return mapping[key]


def _table(data, name, required=True):
    block = data.get(name)
    if block is None:
        if required:
            raise ConfigError(f"missing config section {name}")
        return None
    if not isinstance(block, dict):
        raise ConfigError(f"config section {name} must be a table")
    return dict(block)


def _number(value, section, key):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"config key {section}.{key} must be a number")
    return float(value)


def _integer(value, section, key):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"config key {section}.{key} must be an integer")
    return value


def _boolean(value, section, key):
    if not isinstance(value, bool):
        raise ConfigError(f"config key {section}.{key} must be a boolean")
    return value


def _text(value, section, key):
    if not isinstance(value, str):
        raise ConfigError(f"config key {section}.{key} must be a string")
    return value


def _number_list(value, section, key):
    if not isinstance(value, list) or not value:
        raise ConfigError(
            f"config key {section}.{key} must be a nonempty array of numbers")
    return [_number(item, section, key) for item in value]


def _integer_list(value, section, key):
    if not isinstance(value, list) or not value:
        raise ConfigError(
            f"config key {section}.{key} must be a nonempty array of integers")
    return [_integer(item, section, key) for item in value]


# ---------------------------------------------------------------------------
# config blocks
# ---------------------------------------------------------------------------

_COEFF_KEY = re.compile(r"a_(\d+)_(\d+)")


def _build_equation(block):
    family = _text(_require(block, "equation", "family"), "equation", "family")
    if family == "generic":
        _check_keys("equation", block, {"family", "disp_order"}, _COEFF_KEY)
        order = _integer(_require(block, "equation", "disp_order"),
                         "equation", "disp_order")
        coeffs = {}
        for key, value in block.items():
            found = _COEFF_KEY.fullmatch(key)
            if found:
                pair = (int(found.group(1)), int(found.group(2)))
                coeffs[pair] = _number(value, "equation", key)
        return GenericEquation(order, coeffs)
    if family == "benjamin_ono":
        _check_keys("equation", block, {"family", "a", "b", "c", "d", "eps"})
        return BenjaminOnoEquation(
            a=_number(block.get("a", 1.0), "equation", "a"),
            b=_number(block.get("b", 1.0), "equation", "b"),
            c=_number(block.get("c", 1.0), "equation", "c"),
            d=_number(block.get("d", 1.0), "equation", "d"),
            eps=_number(block.get("eps", 1.0), "equation", "eps"))
    if family == "intermediate_long_wave":
        _check_keys("equation", block,
                    {"family", "a1", "a2", "b", "c", "d", "depth", "eps"})
        return IntermediateLongWaveEquation(
            a1=_number(block.get("a1", 1.0), "equation", "a1"),
            a2=_number(block.get("a2", 1.0), "equation", "a2"),
            b=_number(block.get("b", 1.0), "equation", "b"),
            c=_number(block.get("c", 1.0), "equation", "c"),
            d=_number(block.get("d", 1.0), "equation", "d"),
            depth=_number(block.get("depth", 1.0), "equation", "depth"),
            eps=_number(block.get("eps", 1.0), "equation", "eps"))
    raise ConfigError(
        f"unknown family {family!r} in equation.family; expected generic,"
        " benjamin_ono, or intermediate_long_wave")


def _build_grid(block):
    _check_keys("grid", block, {"half_length", "n_modes"})
    half = _number(_require(block, "grid", "half_length"),
                   "grid", "half_length")
    n_modes = _integer(_require(block, "grid", "n_modes"), "grid", "n_modes")
    return TorusGrid(half, n_modes)


def _parse_time(block):
    _check_keys("time", block, {"horizon", "dt", "n_times"})
    horizon = _number(block.get("horizon", 1.0), "time", "horizon")
    dt = _number(block["dt"], "time", "dt") if "dt" in block else None
    n_times = (_integer(block["n_times"], "time", "n_times")
               if "n_times" in block else None)
    return horizon, dt, n_times


def _parse_output(block):
    _check_keys("output", block, {"directory", "prefix", "json"})
    return (_text(block.get("directory", "."), "output", "directory"),
            _text(block.get("prefix", "run"), "output", "prefix"),
            _boolean(block.get("json", False), "output", "json"))


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _stable_sech(z):
    decay = np.exp(-np.abs(z))
    return 2.0 * decay / (1.0 + decay**2)


def _initial_field(grid, exp):
    kind = _text(exp.get("initial", "gaussian"), "experiment", "initial")
    amplitude = _number(exp.get("amplitude", 0.1), "experiment", "amplitude")
    width = _number(exp.get("width", 2.0), "experiment", "width")
    kappa = _number(exp.get("kappa", 0.25), "experiment", "kappa")
    if kind == "zero":
        return grid.field_from_function(lambda x: np.zeros_like(x))
    if kind == "gaussian":
        return grid.field_from_function(
            lambda x: amplitude * np.exp(-((x / width) ** 2)))
    if kind == "soliton":
        return grid.field_from_function(
            lambda x: 2.0 * kappa**2 * _stable_sech(kappa * x) ** 2)
    raise ConfigError(
        f"unknown profile {kind!r} in experiment.initial; expected zero,"
        " gaussian, or soliton")


_SOLVE_KEYS = {"kind", "initial", "amplitude", "width", "kappa", "max_iter",
               "tol", "norm_mode", "s"}


def _run_solve(eq, grid, times, exp):
    _check_keys("experiment", exp, _SOLVE_KEYS)
    horizon, dt, _ = times
    if dt is None:
        raise ConfigError("missing config key time.dt"
                          " (the solve experiment steps a trajectory)")
    u0 = _initial_field(grid, exp)
    config = SolveConfig(
        horizon=horizon, dt=dt,
        max_iter=_integer(exp.get("max_iter", 50), "experiment", "max_iter"),
        tol=_number(exp.get("tol", 1e-10), "experiment", "tol"),
        norm_mode=_text(exp.get("norm_mode", "x_t"), "experiment",
                        "norm_mode"),
        s=_number(exp.get("s", 2.75), "experiment", "s"))
    report = picard_solve(eq, u0, config)
    passed = report.converged and not report.diverged
    trajectory = report.trajectory
    mass_rows = [[float(t), l2_norm(trajectory.field(i))]
                 for i, t in enumerate(trajectory.times)]
    tables = [
        ("distances", ["iteration", "distance", "ratio"],
         report.distance_rows()),
        ("trajectory", ["time", "l2_norm"], mass_rows),
    ]
    return passed, tables, report.to_json_dict()


_ILLPOSED_KEYS = {"kind", "wave_numbers", "epsilon", "sobolev_index",
                  "steepening_order", "real_valued", "tolerance"}


def _run_illposed(eq, times, exp):
    _check_keys("experiment", exp, _ILLPOSED_KEYS)
    wave_numbers = _number_list(
        _require(exp, "experiment", "wave_numbers"),
        "experiment", "wave_numbers")
    kwargs = dict(
        equation=eq,
        wave_number=wave_numbers[0],
        sobolev_index=_number(exp.get("sobolev_index", 0.0), "experiment",
                              "sobolev_index"),
        epsilon=_number(exp.get("epsilon", 0.5), "experiment", "epsilon"),
        time=times[0],
        real_valued=_boolean(exp.get("real_valued", False), "experiment",
                             "real_valued"))
    if "steepening_order" in exp:
        kwargs["steepening_order"] = _integer(
            exp["steepening_order"], "experiment", "steepening_order")
    report = growth_scan(WitnessConfig(**kwargs), wave_numbers)
    tolerance = _number(exp.get("tolerance", 0.1), "experiment", "tolerance")
    passed = abs(report.slope - report.predicted_exponent) <= tolerance
    payload = report.to_json_dict()
    payload["tolerance"] = tolerance
    payload["passed"] = passed
    return passed, [("growth", report.csv_header(), report.csv_rows())], payload


_VERIFY_KEYS = {"kind", "estimate", "ensemble", "count", "band", "width",
                "wave_numbers", "levels", "profile", "order", "weighted",
                "variant", "scan", "dilations", "family", "retarded",
                "functional", "s", "k", "which"}


def _build_ensemble(grid, exp, seed):
    kind = _text(exp.get("ensemble", "random"), "experiment", "ensemble")
    width = (_number(exp["width"], "experiment", "width")
             if "width" in exp else None)
    if kind == "random":
        return random_ensemble(
            grid,
            count=_integer(exp.get("count", 4), "experiment", "count"),
            seed=seed,
            band=_number(exp.get("band", 4.0), "experiment", "band"),
            envelope_width=width)
    if kind == "packet":
        wave_numbers = _number_list(
            _require(exp, "experiment", "wave_numbers"),
            "experiment", "wave_numbers")
        return packet_ensemble(grid, wave_numbers,
                               width=4.0 if width is None else width,
                               seed=seed)
    if kind == "blocks":
        levels = _integer_list(exp.get("levels", [0, 1, 2, 3]),
                               "experiment", "levels")
        return block_ensemble(
            grid, levels, seed=seed,
            profile=_text(exp.get("profile", "random"), "experiment",
                          "profile"),
            envelope_width=width)
    if kind == "modes":
        levels = _integer_list(exp.get("levels", [0, 1, 2, 3]),
                               "experiment", "levels")
        return mode_ensemble(grid, levels)
    raise ConfigError(
        f"unknown ensemble kind {kind!r} in experiment.ensemble; expected"
        " random, packet, blocks, or modes")


def _run_verify(eq, grid, times, exp, seed):
    _check_keys("experiment", exp, _VERIFY_KEYS)
    estimate = _text(_require(exp, "experiment", "estimate"),
                     "experiment", "estimate")
    ensemble = _build_ensemble(grid, exp, seed)
    horizon, _, n_times = times
    extra = {} if n_times is None else {"n_times": n_times}
    scans = {}
    if "variant" in exp:
        scans["variant"] = _text(exp["variant"], "experiment", "variant")
    if "scan" in exp:
        scans["scan"] = _text(exp["scan"], "experiment", "scan")
    if "dilations" in exp:
        scans["dilations"] = _number_list(exp["dilations"], "experiment",
                                          "dilations")
    if estimate == "bernstein":
        report = verify_bernstein(
            ensemble,
            _integer(_require(exp, "experiment", "order"), "experiment",
                     "order"),
            levels=_integer_list(exp.get("levels", [0, 1, 2, 3]),
                                 "experiment", "levels"),
            weighted=_boolean(exp.get("weighted", False), "experiment",
                              "weighted"))
    elif estimate == "smoothing":
        report = verify_smoothing(eq, ensemble, horizon, **scans, **extra)
    elif estimate == "maximal":
        report = verify_maximal(eq, ensemble, horizon, **scans, **extra)
    elif estimate == "localized":
        report = verify_localized(
            eq, ensemble, horizon,
            family=_text(_require(exp, "experiment", "family"), "experiment",
                         "family"),
            weighted=_boolean(exp.get("weighted", False), "experiment",
                              "weighted"),
            retarded=_boolean(exp.get("retarded", False), "experiment",
                              "retarded"),
            **extra)
    elif estimate == "bilinear":
        report = verify_bilinear(
            eq, ensemble, horizon,
            functional=_text(exp.get("functional", "contraction"),
                             "experiment", "functional"),
            s=_number(exp.get("s", 0.0), "experiment", "s"),
            **extra)
    elif estimate == "equivalences":
        report = verify_equivalences(
            ensemble,
            which=_text(exp.get("which", "besov"), "experiment", "which"),
            s=_number(exp["s"], "experiment", "s") if "s" in exp else None,
            k=_integer(exp["k"], "experiment", "k") if "k" in exp else None,
            disp_order=eq.disp_order)
    else:
        raise ConfigError(
            f"unknown estimate {estimate!r} in experiment.estimate; expected"
            " bernstein, smoothing, maximal, localized, bilinear, or"
            " equivalences")
    tables = [("estimate", report.csv_header(), report.csv_rows())]
    return report.passed, tables, report.to_json_dict()


_NORMS_KEYS = {"kind", "profile", "amplitude", "width", "wave_number",
               "s", "k", "q"}


def _run_norms(grid, exp):
    _check_keys("experiment", exp, _NORMS_KEYS)
    profile = _text(exp.get("profile", "gaussian"), "experiment", "profile")
    amplitude = _number(exp.get("amplitude", 1.0), "experiment", "amplitude")
    width = _number(exp.get("width", 4.0), "experiment", "width")
    carrier = _number(exp.get("wave_number", 0.0), "experiment",
                      "wave_number")
    if profile == "gaussian":
        field = grid.field_from_function(
            lambda x: amplitude * np.exp(-((x / width) ** 2)))
    elif profile == "packet":
        field = grid.field_from_function(
            lambda x: amplitude * np.exp(1j * carrier * x)
            * np.exp(-((x / width) ** 2)))
    else:
        raise ConfigError(
            f"unknown profile {profile!r} in experiment.profile; expected"
            " gaussian or packet")
    s = _number(exp.get("s", 2.0), "experiment", "s")
    k = _integer(exp.get("k", 1), "experiment", "k")
    q = _integer(exp.get("q", 2), "experiment", "q")
    decomp = DyadicDecomposition(grid)
    reports = [
        sobolev_report(field, s, decomp),
        besov_report(field, s, q, decomp),
        weighted_sobolev_report(field, k, decomp),
        weighted_besov_report(field, float(k), q, decomp),
    ]
    passed = (all(np.isfinite(r.value) for r in reports)
              and all(r.boundary_mass < 1e-6 for r in reports))
    rows = [r.csv_row() for r in reports]
    payload = {
        "passed": passed,
        "norms": [{"name": r.name, "value": r.value,
                   "boundary_mass": r.boundary_mass,
                   "aggregation": r.aggregation,
                   "blocks": list(r.blocks)} for r in reports],
    }
    tables = [("norms", NormReport.csv_header(decomp.l_max), rows)]
    return passed, tables, payload


_FRECHET_KEYS = {"kind", "deltas", "amplitude", "width_low", "width_high"}


def _run_frechet(eq, grid, times, exp):
    _check_keys("experiment", exp, _FRECHET_KEYS)
    deltas = _number_list(exp.get("deltas", [1e-2, 1e-3]), "experiment",
                          "deltas")
    amplitude = _number(exp.get("amplitude", 1.0), "experiment", "amplitude")
    width_low = _number(exp.get("width_low", 4.0), "experiment", "width_low")
    width_high = _number(exp.get("width_high", 5.0), "experiment",
                         "width_high")
    phi = grid.field_from_function(
        lambda x: amplitude * np.exp(-((x / width_low) ** 2)))
    psi = grid.field_from_function(
        lambda x: amplitude * (x / width_high)
        * np.exp(-((x / width_high) ** 2)))
    horizon, dt, _ = times
    report = frechet_check(eq, phi, psi, horizon, deltas, dt=dt)
    shrinking = all(later < earlier for earlier, later
                    in zip(report.second_errors, report.second_errors[1:]))
    passed = all(report.converged) and (len(deltas) < 2 or shrinking)
    payload = report.to_json_dict()
    payload["passed"] = passed
    tables = [("differences", report.csv_header(), report.csv_rows())]
    return passed, tables, payload


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------

def run_config(path, out_dir=None, seed=None, want_json=False):
    """Run the experiment described at ``path``; returns (exit code, paths)."""
    data = _load(path)
    _check_keys("config", data,
                {"equation", "grid", "time", "experiment", "output", "seed"})
    exp = _table(data, "experiment")
    kind = _text(_require(exp, "experiment", "kind"), "experiment", "kind")
    registered = {name for name, _ in EXPERIMENTS}
    if kind not in registered:
        raise ConfigError(
            f"unknown kind {kind!r} in experiment.kind; expected one of "
            + ", ".join(sorted(registered)))
    if seed is None:
        seed = _integer(data.get("seed", 0), "config", "seed")
    if seed < 0:
        raise ConfigError("config key config.seed must be nonnegative")
    times = _parse_time(_table(data, "time", required=False) or {})
    directory, prefix, json_flag = _parse_output(
        _table(data, "output", required=False) or {})
    if out_dir is not None:
        directory = out_dir
    want_json = want_json or json_flag

    equation_block = _table(data, "equation", required=(kind != "norms"))
    eq = _build_equation(equation_block) if equation_block else None
    grid_block = _table(data, "grid", required=(kind != "illposed"))
    grid = _build_grid(grid_block) if grid_block else None

    if kind == "solve":
        passed, tables, payload = _run_solve(eq, grid, times, exp)
    elif kind == "illposed":
        passed, tables, payload = _run_illposed(eq, times, exp)
    elif kind == "verify":
        passed, tables, payload = _run_verify(eq, grid, times, exp, seed)
    elif kind == "norms":
        passed, tables, payload = _run_norms(grid, exp)
    else:
        passed, tables, payload = _run_frechet(eq, grid, times, exp)

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = [write_csv(out / f"{prefix}_{name}.csv", header, rows)
             for name, header, rows in tables]
    if want_json:
        summary = {
            "experiment": kind,
            "passed": passed,
            "seed": seed,
            "config": str(path),
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "report": payload,
        }
        paths.append(write_json(out / f"{prefix}_summary.json", summary))
    return (EXIT_PASS if passed else EXIT_FAIL), paths


def experiment_table() -> str:
    width = max(len(name) for name, _ in EXPERIMENTS)
    return "\n".join(f"{name.ljust(width)}  {text}"
                     for name, text in EXPERIMENTS)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="displab",
        description="config-driven experiments for dispersive equations")
    commands = parser.add_subparsers(dest="command", required=True)
    runner = commands.add_parser("run", help="run one configured experiment")
    runner.add_argument("--config", required=True,
                        help="path to the TOML run config")
    runner.add_argument("--out", default=None,
                        help="output directory (overrides output.directory)")
    runner.add_argument("--seed", type=int, default=None,
                        help="seed override (overrides top-level seed)")
    runner.add_argument("--json", action="store_true",
                        help="also write the JSON summary")
    commands.add_parser(
        "list-experiments",
        help="table mapping each experiment to the result it exercises")
    args = parser.parse_args(argv)

    if args.command == "list-experiments":
        print(experiment_table())
        return EXIT_PASS

    try:
        code, paths = run_config(args.config, out_dir=args.out,
                                 seed=args.seed, want_json=args.json)
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    for path in paths:
        print(f"wrote {path}")
    print("pass" if code == EXIT_PASS else "fail")
    return code


if __name__ == "__main__":
    sys.exit(main())
