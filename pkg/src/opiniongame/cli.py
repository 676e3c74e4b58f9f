"""Command-line front end: check existence, solve games, run scenarios.

Configs are YAML documents (schema documented in the README).  Games carry
weights either as raw matrices or as agent profiles plus a gain rule;
scenarios are either full specifications or one of the named presets.
Trajectories are exported as RFC-4180-style CSV (comma separated, one
header row, decimal points, LF line endings) with floats serialized in
shortest round-trip form; every run writes a manifest listing each output
file with its data row count.

Exit codes: 0 success / unique equilibrium, 1 configuration error,
2 no equilibrium at the requested horizon.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .game import (InadmissibleWeightsError, GameSpec, NoNashEquilibriumError,
                   assemble, check_existence, solve)
from .matfun import CRITICAL_TIME_RTOL, spectral
from .multistage import (PRESETS, ConstantRho, FixedBias, IntervalRho,
                         MatrixRho, RhoOverride, ScenarioSpec,
                         StageNonexistenceError, UniformBias, run_scenario)
from .weights import AgentProfile, ConstantGain, PairTableGain, StatusAffineGain

OUTPUT_DIR_ENV = "OPINIONGAME_OUT"

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NO_EQUILIBRIUM = 2


class ConfigError(Exception):
    """Malformed or semantically invalid configuration."""


def _fmt(x) -> str:
    """Shortest decimal representation that round-trips the float."""
    return repr(float(x))


def load_config(path) -> dict:
    """Parse a YAML config file, surfacing line/column diagnostics."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    text = p.read_text()
    if not text.strip():
        raise ConfigError(f"config file is empty: {p}")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"invalid YAML{where}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    return data


def _require(cfg: dict, key: str, context: str):
    if key not in cfg:
        raise ConfigError(f"missing field '{key}' in {context}")
    return cfg[key]


def _matrix(value, d: int, context: str) -> np.ndarray:
    try:
        M = np.asarray(value, float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{context}: not a numeric matrix") from exc
    if M.shape != (d, d):
        raise ConfigError(f"{context}: expected a {d}x{d} matrix, got shape {M.shape}")
    return M


def parse_gamma(cfg, context: str = "gamma"):
    if not isinstance(cfg, dict) or "rule" not in cfg:
        raise ConfigError(f"{context}: expected a mapping with a 'rule' field")
    rule = cfg["rule"]
    if rule == "constant":
        return ConstantGain(float(_require(cfg, "value", context)))
    if rule == "affine_status":
        return StatusAffineGain(float(_require(cfg, "alpha", context)),
                                float(_require(cfg, "beta", context)))
    if rule == "table":
        pairs = _require(cfg, "pairs", context)
        table = {}
        for key, vec in pairs.items():
            i, j = (int(part) for part in str(key).split(","))
            table[(i - 1, j - 1)] = np.asarray(vec, float)
        return PairTableGain(table=table)
    raise ConfigError(f"{context}: unknown rule '{rule}' "
                      "(expected constant | affine_status | table)")


def parse_profile(cfg: dict, d: int, context: str) -> AgentProfile:
    corr = cfg.get("correlation", 0.0)
    if np.isscalar(corr):
        R = np.full((d, d), float(corr))
        np.fill_diagonal(R, 0.0)
    else:
        R = _matrix(corr, d, f"{context}.correlation")
    try:
        return AgentProfile(
            attributes=np.asarray(cfg.get("attributes", [0.0]), float),
            epsilon=float(_require(cfg, "epsilon", context)),
            correlations=R,
            c=float(cfg.get("c", 1.0)),
            stubborn_diag=np.asarray(_require(cfg, "stubborn_diag", context), float),
        )
    except ValueError as exc:
        raise ConfigError(f"{context}: {exc}") from exc


def parse_game_config(cfg: dict) -> GameSpec:
    if cfg.get("kind") != "game":
        raise ConfigError("expected a config with kind: game")
    n = int(_require(cfg, "n", "game config"))
    d = int(_require(cfg, "issues", "game config"))
    T = float(_require(cfg, "horizon", "game config"))
    biases_cfg = _require(cfg, "biases", "game config")
    biases = {}
    for label, vec in biases_cfg.items():
        idx = int(label) - 1
        biases[idx] = np.asarray(vec, float)
    if sorted(biases) != list(range(n)):
        raise ConfigError("biases must cover agents 1..n")
    weights_cfg = _require(cfg, "weights", "game config")
    source = _require(weights_cfg, "source", "weights")

    if source == "raw":
        stub_cfg = _require(weights_cfg, "stubbornness", "weights")
        stubbornness = {int(label) - 1: _matrix(M, d, f"stubbornness[{label}]")
                        for label, M in stub_cfg.items()}
        influence = {}
        for entry in weights_cfg.get("influence", []):
            i = int(_require(entry, "i", "influence entry")) - 1
            j = int(_require(entry, "j", "influence entry")) - 1
            influence[(i, j)] = _matrix(_require(entry, "matrix", "influence entry"),
                                        d, f"influence[{i + 1},{j + 1}]")
    elif source == "profile":
        profiles_cfg = _require(weights_cfg, "profiles", "weights")
        profiles = {int(label) - 1: parse_profile(p, d, f"profiles[{label}]")
                    for label, p in profiles_cfg.items()}
        if sorted(profiles) != list(range(n)):
            raise ConfigError("profiles must cover agents 1..n")
        gamma = parse_gamma(_require(weights_cfg, "gamma", "weights"))
        edges_cfg = weights_cfg.get("edges", "complete")
        if edges_cfg == "complete":
            edges = [(i, j) for i in range(n) for j in range(n) if i != j]
        else:
            edges = [(int(e[0]) - 1, int(e[1]) - 1) for e in edges_cfg]
        from .multistage import _gamma_for_pair
        from .weights import build_influence_root, build_stubbornness, square_to_weight

        stubbornness = {i: build_stubbornness(profiles[i]) for i in range(n)}
        influence = {}
        for (i, j) in edges:
            V = build_influence_root(profiles[i], profiles[j], biases[i], biases[j],
                                     _gamma_for_pair(gamma, i, j))
            W = square_to_weight(V)
            if np.any(W != 0.0):
                influence[(i, j)] = W
    else:
        raise ConfigError(f"weights.source must be raw or profile, got '{source}'")

    try:
        return GameSpec(n=n, d=d, T=T, stubbornness=stubbornness,
                        influence=influence, biases=biases)
    except (ValueError, InadmissibleWeightsError) as exc:
        raise ConfigError(f"invalid game: {exc}") from exc


def parse_scenario_config(cfg: dict, seed: int) -> ScenarioSpec:
    if cfg.get("kind") != "scenario":
        raise ConfigError("expected a config with kind: scenario")
    if "preset" in cfg:
        return build_preset(cfg["preset"], seed)
    d = int(_require(cfg, "issues", "scenario config"))
    stages = int(_require(cfg, "stages", "scenario config"))
    T = float(_require(cfg, "horizon", "scenario config"))
    gamma = parse_gamma(_require(cfg, "gamma", "scenario config"))

    rho_cfg = _require(cfg, "rho", "scenario config")
    if np.isscalar(rho_cfg):
        rho = ConstantRho(float(rho_cfg))
    elif isinstance(rho_cfg, dict) and "low" in rho_cfg:
        rho = IntervalRho(float(rho_cfg["low"]), float(rho_cfg["high"]),
                          bool(rho_cfg.get("symmetric", False)))
    elif isinstance(rho_cfg, dict) and "matrix" in rho_cfg:
        rho = MatrixRho(np.asarray(rho_cfg["matrix"], float))
    else:
        raise ConfigError("rho must be a scalar, {low, high[, symmetric]} or {matrix}")

    profiles, group_of, bias_init = [], [], {}
    for group in _require(cfg, "groups", "scenario config"):
        name = str(_require(group, "name", "group"))
        size = int(_require(group, "size", f"group {name}"))
        profile = parse_profile(group, d, f"group {name}")
        profiles.extend(profile for _ in range(size))
        group_of.extend(name for _ in range(size))
        if "bias" in group:
            bias_init[name] = FixedBias(tuple(float(v) for v in group["bias"]))
        elif "bias_interval" in group:
            lo, hi = (float(v) for v in group["bias_interval"])
            bias_init[name] = UniformBias(lo, hi, bool(group.get("open_interval", False)))
        else:
            raise ConfigError(f"group {name}: needs 'bias' or 'bias_interval'")

    overrides = tuple(
        RhoOverride(str(_require(o, "from", "override")),
                    str(_require(o, "to", "override")),
                    float(_require(o, "rho", "override")))
        for o in cfg.get("overrides", [])
    )
    try:
        return ScenarioSpec(d=d, profiles=profiles, group_of=tuple(group_of),
                            bias_init=bias_init, stage_count=stages, T_stage=T,
                            rho=rho, gamma=gamma, seed=seed, overrides=overrides)
    except ValueError as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc


def build_preset(name: str, seed: int) -> ScenarioSpec:
    if name not in PRESETS:
        raise ConfigError(
            f"unknown preset '{name}'; valid presets: {', '.join(sorted(PRESETS))}"
        )
    return PRESETS[name](seed)


def _digest(payload: str) -> str:
    return hashlib.sha256(payload.encode()).hexdigest()


def _write_trajectory_csv(path: Path, stage: int, grid, states, controls,
                          n: int, d: int) -> int:
    """Write the long-format trajectory table; returns the data row count."""
    rows = 0
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["stage", "t", "agent", "issue", "kind", "value"])
        for k, t in enumerate(grid):
            for agent in range(n):
                for issue in range(d):
                    col = agent * d + issue
                    writer.writerow([stage, _fmt(t), agent + 1, issue + 1, "x",
                                     _fmt(states[k, col])])
                    writer.writerow([stage, _fmt(t), agent + 1, issue + 1, "u",
                                     _fmt(controls[k, col])])
                    rows += 2
    return rows


def _write_manifest(out_dir: Path, payload: dict):
    payload = dict(payload)
    payload["tool_version"] = __version__
    payload["created_utc"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_out(args) -> Path:
    out = args.out or os.environ.get(OUTPUT_DIR_ENV) or "out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_check(args) -> int:
    spec = parse_game_config(load_config(args.config))
    assembly = assemble(spec)
    info = spectral(assembly.Q)
    verdict = check_existence(assembly, spec.T, tol=args.tol_critical)
    eigs = ", ".join(f"{lam.real:.6g}" + (f"{lam.imag:+.6g}j" if lam.imag else "")
                     for lam in sorted(info.eigenvalues, key=lambda z: -z.real))
    print(f"eigenvalues of Q: {eigs}")
    horizons = verdict.critical_horizons.all_times()
    if horizons:
        print("critical horizons below 2T: "
              + ", ".join(f"{t:.6g}" for t in horizons))
    else:
        print("critical horizons below 2T: none")
    print(f"condition estimate of f(QT): {verdict.condition_estimate:.6g}")
    if verdict.unique_equilibrium:
        print(f"unique Nash equilibrium exists at T = {spec.T:g}")
        return EXIT_OK
    matched = ", ".join(f"T_k = {tk:.6g} (r = {r:.6g})" for r, tk in verdict.matches)
    print(f"NO Nash equilibrium at T = {spec.T:g}; matched critical times: {matched}")
    return EXIT_NO_EQUILIBRIUM


def cmd_solve(args) -> int:
    spec = parse_game_config(load_config(args.config))
    out_dir = _resolve_out(args)
    try:
        sol = solve(spec, tol_critical=args.tol_critical)
    except NoNashEquilibriumError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NO_EQUILIBRIUM
    sample = sol.sample(args.grid)
    csv_path = out_dir / "trajectory.csv"
    rows = _write_trajectory_csv(csv_path, 0, sample.grid, sample.states,
                                 sample.controls, spec.n, spec.d)
    _write_manifest(out_dir, {
        "command": "solve",
        "config_digest": _digest(Path(args.config).read_text()),
        "seed": None,
        "grid_points": args.grid,
        "outputs": [{"path": csv_path.name, "rows": rows}],
    })
    print(f"wrote {csv_path} ({rows} data rows)")
    return EXIT_OK


def cmd_scenario(args) -> int:
    if args.preset:
        make_spec = lambda seed: build_preset(args.preset, seed)
        digest = _digest(f"preset:{args.preset}")
    else:
        if not args.config:
            raise ConfigError("scenario needs a config file or --preset")
        cfg = load_config(args.config)
        make_spec = lambda seed: parse_scenario_config(cfg, seed)
        digest = _digest(Path(args.config).read_text())

    out_dir = _resolve_out(args)
    outputs, failures, summary_rows = [], [], []
    base_seed = args.seed
    for seed in range(base_seed, base_seed + args.seeds):
        spec = make_spec(seed)
        groups = spec.groups()
        try:
            records = run_scenario(spec, grid_points=args.grid,
                                   tol_critical=args.tol_critical)
        except StageNonexistenceError as exc:
            failures.append({"seed": seed, "stage": exc.stage, "message": str(exc)})
            print(f"seed {seed}: {exc}", file=sys.stderr)
            continue
        seed_dir = out_dir / f"seed_{seed}"
        for rec in records:
            path = seed_dir / f"stage_{rec.stage}.csv"
            rows = _write_trajectory_csv(path, rec.stage, rec.trajectory.grid,
                                         rec.trajectory.states, rec.trajectory.controls,
                                         spec.n, spec.d)
            outputs.append({"path": str(path.relative_to(out_dir)), "rows": rows})
            finals = rec.final_opinions.reshape(spec.n, spec.d)
            named = list(groups.items()) + [("all", list(range(spec.n)))]
            for gname, members in named:
                vals = finals[members]
                for issue in range(spec.d):
                    col = vals[:, issue]
                    summary_rows.append([seed, rec.stage, gname, issue + 1,
                                         _fmt(col.mean()), _fmt(col.max() - col.min())])

    summary_path = out_dir / "summary.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["seed", "stage", "group", "issue", "mean", "spread"])
        writer.writerows(summary_rows)
    outputs.append({"path": summary_path.name, "rows": len(summary_rows)})
    _write_manifest(out_dir, {
        "command": "scenario",
        "config_digest": digest,
        "seed": base_seed,
        "seeds": args.seeds,
        "grid_points": args.grid,
        "outputs": outputs,
        "failures": failures,
    })
    print(f"wrote {len(outputs)} files under {out_dir}"
          + (f" ({len(failures)} failed seeds)" if failures else ""))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opiniongame",
        description="Differential-game opinion dynamics: existence checks, "
                    "equilibrium trajectories and multi-stage scenarios.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="decide Nash-equilibrium existence")
    p_check.add_argument("config")
    p_check.add_argument("--tol-critical", type=float, default=CRITICAL_TIME_RTOL)
    p_check.set_defaults(func=cmd_check)

    p_solve = sub.add_parser("solve", help="export equilibrium trajectories as CSV")
    p_solve.add_argument("config")
    p_solve.add_argument("--grid", type=int, default=201,
                         help="number of sample times (default 201)")
    p_solve.add_argument("--out", default=None,
                         help=f"output directory (default ${OUTPUT_DIR_ENV} or ./out)")
    p_solve.add_argument("--tol-critical", type=float, default=CRITICAL_TIME_RTOL)
    p_solve.set_defaults(func=cmd_solve)

    p_scen = sub.add_parser("scenario", help="run a multi-stage scenario")
    p_scen.add_argument("config", nargs="?", default=None)
    p_scen.add_argument("--preset", default=None,
                        help=f"named scenario: {', '.join(sorted(PRESETS))}")
    p_scen.add_argument("--seed", type=int, default=0, help="base RNG seed")
    p_scen.add_argument("--seeds", type=int, default=1,
                        help="number of consecutive seeds to run")
    p_scen.add_argument("--grid", type=int, default=101,
                        help="sample times per stage (default 101)")
    p_scen.add_argument("--out", default=None)
    p_scen.add_argument("--tol-critical", type=float, default=CRITICAL_TIME_RTOL)
    p_scen.set_defaults(func=cmd_scenario)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
