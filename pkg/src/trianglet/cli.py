"""Command-line scenario runner.

Usage: ``trianglet <subcommand> --config run.json [--seed N] [--out DIR] [--set key=value ...]``

Every subcommand writes its artifacts plus ``<subcommand>.manifest.json``
into the output directory. Exit status: 0 success, 1 configuration error, 2 numerical
integrity error, 3 partial result.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import build_scenario, load_config
from .errors import (ConfigError, ContractViolation, DomainError, NumericalIntegrityError,
                     ReconstructionFailed)
from .inequality import default_grid, fuzz_soundness, s_delta, sweep, write_sweep_csv, xi_coefficients
from .protocol import (EventTable, OutcomeDistribution, delta_from, exact_delta,
                       exact_distribution, match_events_detailed, misalignment_sweep,
                       run_pipeline, sample_tables, win_counts)
from .states import bell_phi_plus, eberhard_state, psi_r
from .stats import (PValueInput, beta_win, mutual_information_suite, pvalue_analytic_bound_log10,
                    pvalue_exact_log10, write_mi_csv)
from .tomography import (fidelity_report, mle_reconstruct, reconstruction_json,
                         simulate_tomography)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PARTIAL = 0, 1, 2, 3
TABLE_FILES = ("ac", "bc", "t1", "t2", "t3", "t4")


def _json_float(x: float):
    return None if (x is None or not math.isfinite(x)) else x


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    def __init__(self, cfg: dict, digest: str):
        self.cfg = cfg
        self.digest = digest
        self.out = Path(cfg["output_dir"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts: list[str] = []

    def path(self, name: str) -> Path:
        self.artifacts.append(name)
        return self.out / name

    def manifest(self, subcommand: str, status: int) -> None:
        doc = {
            "subcommand": subcommand,
            "exit_code": status,
            "config_sha256": self.digest,
            "seed": self.cfg["seed"],
            "versions": {"trianglet": __version__, "numpy": np.__version__,
                         "python": ".".join(platform.python_version_tuple()[:2])},
            "artifacts": {n: _sha256(self.out / n) for n in sorted(self.artifacts)},
            "annotations": self.cfg.get("annotations", {}),
        }
        _write_json(self.out / f"{subcommand}.manifest.json", doc)


def _pipeline(run: Run):
    scenario = build_scenario(run.cfg)
    result = run_pipeline(scenario)
    if len(result.events) == 0:
        raise DomainError("matching produced no events")
    return scenario, result


def cmd_distribution(run: Run) -> int:
    scenario = build_scenario(run.cfg)
    exact_distribution(scenario).to_csv(run.path("distribution.csv"))
    return EXIT_OK


def cmd_sample(run: Run) -> int:
    tables = sample_tables(build_scenario(run.cfg))
    for name in TABLE_FILES:
        tables[name].to_csv(run.path(f"{name}.csv"))
    return EXIT_OK


def cmd_match(run: Run) -> int:
    src = Path(run.cfg["match"].get("input_dir", run.cfg["output_dir"]))
    try:
        t = {n: EventTable.from_csv(src / f"{n}.csv") for n in TABLE_FILES}
    except OSError as exc:
        raise ConfigError(f"cannot read event tables from {src}: {exc}") from None
    res = match_events_detailed(t["ac"], t["bc"], [t[f"t{k}"] for k in range(1, 5)])
    res.events.to_csv(run.path("events.csv"))
    n, c = win_counts(res.events) if len(res.events) else (0, 0)
    _write_json(run.path("match_summary.json"), {
        "events": len(res.events), "dropped_pairs": res.dropped,
        "delta": _json_float(delta_from(res.events)) if len(res.events) else None,
        "win_trials": n, "wins": c})
    if res.partial:
        print(f"warning: AB table exhausted, {res.dropped} pairs dropped", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _grid(cfg: dict):
    g = cfg["grid"]
    if "points" in g:
        return [tuple(p) for p in g["points"]]
    return default_grid(g["n_eps1"], g["n_eps2"], (g["eps1_min"], g["eps1_max"]),
                        (g["eps2_min"], g["eps2_max"]))


def cmd_sweep(run: Run) -> int:
    status = EXIT_OK
    if run.cfg["grid"]["source"] == "exact":
        scenario = build_scenario(run.cfg)
        dist, delta, counts = exact_distribution(scenario), exact_delta(scenario), None
    else:
        _, res = _pipeline(run)
        dist = OutcomeDistribution.from_events(res.events)
        delta, counts = delta_from(res.events), win_counts(res.events)
        status = EXIT_PARTIAL if res.partial else EXIT_OK
    results = sweep(dist, delta, _grid(run.cfg), counts)
    write_sweep_csv(results, run.path("sweep.csv"))
    return status


def cmd_mutual_info(run: Run) -> int:
    _, res = _pipeline(run)
    write_mi_csv(mutual_information_suite(res.events, run.cfg["mi_log_base"]),
                 run.path("mutual_info.csv"))
    return EXIT_PARTIAL if res.partial else EXIT_OK


def cmd_pvalue(run: Run) -> int:
    pv = run.cfg["pvalue"]
    status = EXIT_OK
    if "n" in pv and "c" in pv:
        n, c, source = pv["n"], pv["c"], "config"
    elif "n" in pv or "c" in pv:
        raise ConfigError("pvalue.n and pvalue.c must be given together")
    else:
        _, res = _pipeline(run)
        (n, c), source = win_counts(res.events), "simulated events"
        status = EXIT_PARTIAL if res.partial else EXIT_OK
    if "beta_win" in pv:
        bw = pv["beta_win"]
    else:
        xi1, xi2 = xi_coefficients(exact_distribution(build_scenario(run.cfg)), pv["eps1"], pv["eps2"])
        bw = beta_win(xi1, xi2)
    inp = PValueInput(n=n, c=c, beta_win=bw)
    try:
        bound = pvalue_analytic_bound_log10(inp)
    except DomainError:
        bound = math.nan
    _write_json(run.path("pvalue.json"), {
        "n": n, "c": c, "counts_source": source, "beta_win": bw,
        "eps1": pv["eps1"], "eps2": pv["eps2"],
        "log10_pvalue_exact": pvalue_exact_log10(inp),
        "log10_pvalue_bound": _json_float(bound)})
    return status


def _tomography_target(cfg: dict, scenario):
    """State to measure and the pure state its fidelity is quoted against."""
    link = cfg["tomography"]["link"]
    # in bit labels both C links ideally carry phi+
    if link == "AC":
        return scenario.rho_ac, bell_phi_plus(), "phi_plus"
    if link == "BC":
        return scenario.rho_bc, bell_phi_plus(), "phi_plus"
    if scenario.pdl is None:
        return scenario.rho_ab, eberhard_state(scenario.theta), "eberhard"
    return scenario.rho_ab, psi_r(scenario.pdl.r), "psi_r"


def cmd_tomography(run: Run) -> int:
    scenario = build_scenario(run.cfg)
    tc = run.cfg["tomography"]
    rho, target, name = _tomography_target(run.cfg, scenario)
    counts = simulate_tomography(rho, tc["shots_per_setting"], run.cfg["seed"])
    counts.to_csv(run.path("tomography_counts.csv"))
    rec = mle_reconstruct(counts)
    boot_seed = np.random.SeedSequence([run.cfg["seed"], 1])
    report = fidelity_report(rec.rho, target, counts, tc["bootstrap"], seed=boot_seed)
    run.path("reconstruction.json").write_text(reconstruction_json(rec, report, name), encoding="utf-8")
    return EXIT_OK


def cmd_lhv_fuzz(run: Run) -> int:
    fz = run.cfg["lhv_fuzz"]
    rep = fuzz_soundness(fz["n_models"], run.cfg["seed"], fz["max_k"], fz["include_adversarial"])
    _write_json(run.path("lhv_fuzz.json"), {
        "models": rep.n_models, "violations": rep.n_violations,
        "max_S_delta": rep.max_S_delta, "worst": rep.worst,
        "violating_models": [{"model": m, "S_delta": s} for m, s in rep.violations]})
    return EXIT_OK


def cmd_misalign(run: Run) -> int:
    scenario = build_scenario(run.cfg)
    if scenario.pdl is None:
        raise ConfigError("misalign needs a physical or paper_like scenario")
    m = run.cfg["misalign"]
    gammas = np.linspace(m["gamma_min"], m["gamma_max"], m["n_points"])
    delta = exact_delta(scenario)
    cells = ["p" + "".join(map(str, idx)) for idx in np.ndindex(2, 2, 2, 2)]
    lines = [",".join(["gamma_deg", *cells, "S_delta"])]
    for g, dist in misalignment_sweep(scenario, gammas):
        vals = [format(v, ".17g") for v in dist.p.ravel()]
        lines.append(",".join([format(g, ".17g"), *vals, format(s_delta(dist, delta, 1.0, 1.0), ".17g")]))
    run.path("misalign.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


COMMANDS = {
    "distribution": cmd_distribution,
    "sample": cmd_sample,
    "match": cmd_match,
    "sweep": cmd_sweep,
    "mutual-info": cmd_mutual_info,
    "pvalue": cmd_pvalue,
    "tomography": cmd_tomography,
    "lhv-fuzz": cmd_lhv_fuzz,
    "misalign": cmd_misalign,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trianglet", description="Triangle-network nonlocality simulator")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the root seed")
        p.add_argument("--out", default=None, help="override output_dir")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config key (dotted path)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg, digest = load_config(args.config, args.overrides, args.seed, args.out)
        run = Run(cfg, digest)
        status = COMMANDS[args.subcommand](run)
        run.manifest(args.subcommand, status)
        return status
    except (ConfigError, ContractViolation, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalIntegrityError, ReconstructionFailed) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
