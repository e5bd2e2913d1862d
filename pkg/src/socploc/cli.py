"""Command-line entry point.

Configuration is a flat ``key=value`` file; every key is also a flag of the
same name (``--p 0.1`` overrides ``p=0.3`` from the file). The resolved
configuration is written to ``<out>/config.cfg`` and parses back to the same
values.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import harness
from .conic import Method
from .crlb import SurfaceMode, crlb_surface
from .measurement import measure
from .network import ConfigError, NetworkConfig, deploy_uniform
from .solver import Status

EXPERIMENTS = ("table1", "table2", "cdf", "rmse-surface", "crlb-surface", "scaling")
COMMANDS = ("deploy", "measure", "localize", "experiment", "crlb")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


# key -> (NetworkConfig field or None, parser, description)
KEYS = {
    "N_d": ("side", float, "side length of the square area (m)"),
    "nodes": ("nodes", int, "total node count"),
    "p": ("anchor_fraction", float, "anchor fraction"),
    "R": ("radio_range", float, "radio range (m)"),
    "g": ("los_prob", float, "LOS probability"),
    "eta_l": ("eta_l", float, "noise std per unit length"),
    "eta_n": ("eta_n", float, "NLOS bias mean per unit length"),
    "dimension": ("dimension", int, "spatial dimension (2 or 3)"),
    "placement": ("placement", str, "anchor placement: random-uniform or boundary"),
    "method": (None, str, "mln-socp or d-socp"),
    "seed": (None, int, "base seed"),
    "trials": (None, int, "Monte Carlo trials"),
    "out": (None, str, "output directory"),
    "experiment": (None, str, "experiment name: " + ", ".join(EXPERIMENTS)),
    "spacing": (None, float, "grid spacing for surfaces (m)"),
    "mode": (None, str, "CRLB surface mode: network or anchors"),
}
DESCRIPTIONS = {"N_d": "side length"}


@dataclass(frozen=True)
class RunConfig:
    network: NetworkConfig
    method: Method = Method.MLN_SOCP
    seed: int = 0
    trials: int = 1
    out: str = "out"
    experiment: str | None = None
    spacing: float = 1.0
    mode: SurfaceMode = SurfaceMode.NETWORK

    def to_text(self) -> str:
        values = self.as_dict()
        return "".join(f"{k}={values[k]!r}\n" if isinstance(values[k], float) else f"{k}={values[k]}\n"
                       for k in KEYS if values.get(k) is not None)

    def as_dict(self) -> dict:
        net = {f.name: getattr(self.network, f.name) for f in fields(NetworkConfig)}
        out = {}
        for key, (attr, _, _) in KEYS.items():
            value = net[attr] if attr else getattr(self, key)
            if hasattr(value, "value"):
                value = value.value
            out[key] = value
        return out


def read_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    values = {}
    for n, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value, got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key] = value
    return values


def parse_config(file_values: dict | None = None, flag_values: dict | None = None,
                 required=("N_d",), defaults: dict | None = None) -> RunConfig:
    """Merge defaults, file values and flag overrides (in that order) and validate.

    Unset flags are ``None`` and leave the file value alone. Unknown keys
    and invalid values raise :class:`UsageError`.
    """
    merged = dict(defaults or {})
    merged.update(file_values or {})
    merged.update({k: v for k, v in (flag_values or {}).items() if v is not None})
    unknown = sorted(set(merged) - set(KEYS))
    if unknown:
        raise UsageError(f"unknown key(s) {', '.join(unknown)}; valid keys: {', '.join(KEYS)}")
    for key in required:
        if key not in merged:
            raise UsageError(f"missing required key {key!r} ({DESCRIPTIONS.get(key, KEYS[key][2])})")

    typed = {}
    for key, raw in merged.items():
        conv = KEYS[key][1]
        try:
            typed[key] = conv(raw) if not isinstance(raw, conv) else raw
        except ValueError as exc:
            raise UsageError(f"{key}: cannot parse {raw!r} as {conv.__name__}") from exc
        if conv is float and not math.isfinite(typed[key]):
            raise UsageError(f"{key}: must be finite")

    net_kwargs = {KEYS[k][0]: v for k, v in typed.items() if KEYS[k][0]}
    try:
        network = NetworkConfig(**net_kwargs)
    except ValueError as exc:  # ConfigError and bad enum values
        raise UsageError(f"invalid configuration: {exc}") from exc
    try:
        method = Method(typed.get("method", Method.MLN_SOCP.value))
        mode = SurfaceMode(typed.get("mode", SurfaceMode.NETWORK.value))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    experiment = typed.get("experiment")
    if experiment is not None and experiment not in EXPERIMENTS:
        raise UsageError(f"unknown experiment {experiment!r}; choose one of: {', '.join(EXPERIMENTS)}")
    trials = typed.get("trials", 1)
    if trials < 1:
        raise UsageError("trials must be >= 1")
    spacing = typed.get("spacing", 1.0)
    if not spacing > 0:
        raise UsageError("spacing must be positive")
    return RunConfig(network, method, typed.get("seed", 0), trials, typed.get("out", "out"),
                     experiment, spacing, mode)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value configuration file")
    for key, (_, _, desc) in KEYS.items():
        common.add_argument(f"--{key}", dest=key, default=None, help=desc)
    parser = _Parser(prog="socploc", description="Per-node SOCP localization toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "deploy": "random deployment -> topology.json",
        "measure": "deployment and range measurements -> measurements.csv",
        "localize": "localize every unknown node -> estimates.csv, summary.json",
        "experiment": "run a named experiment (" + ", ".join(EXPERIMENTS) + ")",
        "crlb": "CRLB surface -> crlb.csv, summary.json",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common], help=helps[name])
        if name == "experiment":
            p.add_argument("name", nargs="?", help="experiment name (overrides the experiment key)")
    return parser


def _write(out: Path, name: str, text: str):
    (out / name).write_text(text, newline="\n")


def _dump_json(obj) -> str:
    return json.dumps(harness._jsonable(obj), indent=2, sort_keys=True) + "\n"


def _prepare(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        _write(out, "config.cfg", cfg.to_text())
    except OSError as exc:
        raise UsageError(f"output directory {out} is not writable: {exc}") from exc
    return out


def cmd_deploy(cfg: RunConfig) -> int:
    out = _prepare(cfg)
    topo = _deploy(cfg)
    _write(out, "topology.json", topo.to_json())
    return EXIT_OK


def _deploy(cfg):
    try:
        return deploy_uniform(cfg.network, cfg.seed)
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc


def cmd_measure(cfg: RunConfig) -> int:
    out = _prepare(cfg)
    topo = _deploy(cfg)
    meas = measure(topo, cfg.network.eta_l, cfg.network.eta_n, cfg.seed)
    _write(out, "topology.json", topo.to_json())
    _write(out, "measurements.csv", meas.to_csv())
    return EXIT_OK


def cmd_localize(cfg: RunConfig) -> int:
    """Trial ``k`` uses seed ``seed + k``."""
    out = _prepare(cfg)
    net = cfg.network
    coords = "xyz"[: net.dimension]
    header = (["trial", "node"] + [f"true_{c}" for c in coords] + [f"est_{c}" for c in coords]
              + ["error", "p_i", "status"])
    rows, errors, unloc, failures, unknowns = [], [], 0, 0, 0
    for k in range(cfg.trials):
        seed = cfg.seed + k
        topo = _deploy(replace(cfg, seed=seed))
        unknowns += topo.n_unknown
        meas = measure(topo, net.eta_l, net.eta_n, seed, anchors_only=True)
        res = harness.localize_topology(topo, meas, net.los_prob, cfg.method, net.eta_l, net.eta_n, seed)
        unloc += res.unlocalizable
        for r in res.nodes:
            failures += r.status is Status.NUMERICAL_FAILURE
            errors.append(r.error)
            rows.append([k, r.node, *r.truth, *r.estimate, r.error, r.p_i, r.status.value])
    _write(out, "estimates.csv", harness._csv(header, rows))
    e = np.array(errors)
    summary = {
        "method": cfg.method.value,
        "trials": cfg.trials,
        "unknown_nodes": unknowns,
        "localized": int(e.size),
        "unlocalizable": unloc,
        "numerical_failures": failures,
        "mean_error": float(e.mean()) if e.size else None,
        "median_error": float(np.median(e)) if e.size else None,
        "max_error": float(e.max()) if e.size else None,
    }
    if unknowns == 0:
        summary["note"] = "no unknown nodes: nothing to localize"
    _write(out, "summary.json", _dump_json(summary))
    return EXIT_NUMERICAL if failures else EXIT_OK


def _crlb(cfg: RunConfig):
    try:
        return crlb_surface(cfg.network, cfg.spacing, cfg.mode)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _crlb_summary(grid) -> dict:
    return {"minimum": grid.minimum, "argmin": grid.argmin, "spacing": grid.spacing, "mode": grid.mode.value,
            "anchors": grid.anchors.tolist(), "points": int(grid.values.size),
            "excluded": int(np.sum(~np.isfinite(grid.values))),
            "eta_l": grid.params.eta_l, "eta_n": grid.params.eta_n, "g": grid.params.g}


def cmd_crlb(cfg: RunConfig) -> int:
    out = _prepare(cfg)
    grid = _crlb(cfg)
    _write(out, "crlb.csv", grid.to_csv())
    _write(out, "summary.json", _dump_json(_crlb_summary(grid)))
    return EXIT_OK


def cmd_experiment(cfg: RunConfig) -> int:
    """Artifacts plus manifest.json (config echo, seeds, status, wall time).

    table1, table2 and cdf sweep fixed parameter grids and use only seed and
    trials from the configuration; the other experiments take the network
    configuration as their base.
    """
    if cfg.experiment is None:
        raise UsageError(f"no experiment given; choose one of: {', '.join(EXPERIMENTS)}")
    out = _prepare(cfg)
    t0 = time.perf_counter()
    name, status, failures = cfg.experiment, "ok", 0
    if name == "crlb-surface":
        grid = _crlb(cfg)
        _write(out, "crlb.csv", grid.to_csv())
        _write(out, "report.json", _dump_json(_crlb_summary(grid)))
    else:
        try:
            report = _run_named(cfg)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        status = report.status
        failures = sum(c.failures for c in report.cells)
        _write(out, "report.json", report.to_json())
        _write(out, "raw.csv", report.raw_csv())
        if report.cdf:
            _write(out, "cdf.csv", report.cdf_csv())
        if report.surface:
            _write(out, "surface.csv", report.surface_csv())
    manifest = {
        "experiment": name,
        "config": cfg.as_dict(),
        "base_seed": cfg.seed,
        "trials": cfg.trials,
        "seed_rule": "cell c, trial k -> sha256(base_seed/c/k)",
        "status": status,
        "numerical_failures": failures,
        "wall_time_s": round(time.perf_counter() - t0, 3),
    }
    _write(out, "manifest.json", _dump_json(manifest))
    return EXIT_NUMERICAL if failures else EXIT_OK


def _run_named(cfg: RunConfig) -> harness.ExperimentReport:
    name, t, seed = cfg.experiment, cfg.trials, cfg.seed
    if name == "table1":
        return harness.run_table1(t, seed)
    if name == "table2":
        return harness.run_table2(t, seed)
    if name == "cdf":
        return harness.run_cdf(t, base_seed=seed)
    if name == "rmse-surface":
        return harness.run_rmse_surface(cfg.network, t, cfg.spacing, seed)
    return harness.run_scaling_check(t, seed, cfg.network)


# N_d is needed wherever the configuration describes the network actually built
_REQUIRED = {
    "deploy": ("N_d",),
    "measure": ("N_d",),
    "localize": ("N_d",),
    "crlb": ("N_d",),
}
_EXPERIMENT_REQUIRED = {"rmse-surface": ("N_d",), "crlb-surface": ("N_d",), "scaling": ("N_d",)}
_DISPATCH = {"deploy": cmd_deploy, "measure": cmd_measure, "localize": cmd_localize,
             "experiment": cmd_experiment, "crlb": cmd_crlb}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_values = read_config_file(args.config) if args.config else {}
        flags = {k: getattr(args, k) for k in KEYS}
        if args.command == "experiment" and args.name:
            flags["experiment"] = args.name
        required = _REQUIRED.get(args.command, ())
        if args.command == "experiment":
            name = flags["experiment"] or file_values.get("experiment")
            required = _EXPERIMENT_REQUIRED.get(name, ())
        defaults = {"trials": harness.DEFAULT_TRIALS} if args.command == "experiment" else None
        cfg = parse_config(file_values, flags, required, defaults)
        return _DISPATCH[args.command](cfg)
    except UsageError as exc:
        print(f"socploc: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
