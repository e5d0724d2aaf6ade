"""Command-line entry point: ``cavity-hom {simulate,hom,sweep,optimize,version} ...``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .dynamics import simulate
from .interference import visibility
from .models import build_lambda, build_two_level
from .optimizer import optimize_drive, reference_target
from .sweep import SweepRequest, optimal_kappa_curve, optimized_sweep, sweep_visibility

log = logging.getLogger("cavity_hom")


def fmt(x) -> str:
    return f"{float(x):.12g}"


def write_csv(path: Path, header: list[str], columns) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([fmt(v) for v in row])
    return path


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        d = {"kind": type(obj).__name__}
        d.update({f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)})
        return d
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating, float)):
        return float(fmt(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path: Path, payload: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _prefix(cfg: RunConfig, override: str | None) -> Path:
    return Path(override or cfg.prefix)


def _with_suffix(prefix: Path, suffix: str) -> Path:
    return prefix.with_name(prefix.name + suffix)


def _model(source, gamma32_target):
    if source.system == "two_level":
        return build_two_level(source.params)
    return build_lambda(source.params, source.drive, gamma32_target)


def _source_echo(source) -> dict:
    return {"system": source.system, "params": source.params, "drive": source.drive}


def cmd_simulate(cfg: RunConfig, prefix: Path) -> list[Path]:
    em = simulate(_model(cfg.source, cfg.gamma32_target), cfg.grid, coherence=False)
    phi = em.wavefunction
    return [
        write_csv(_with_suffix(prefix, "_phi.csv"), ["t", "phi_out"], [cfg.grid.times, phi.values]),
        write_json(_with_suffix(prefix, "_summary.json"), {
            "efficiency": phi.efficiency,
            "source": _source_echo(cfg.source),
            "grid": cfg.grid,
            "gamma32_target": cfg.gamma32_target,
        }),
    ]


def cmd_hom(cfg_a: RunConfig, cfg_b: RunConfig, prefix: Path) -> list[Path]:
    if cfg_a.grid != cfg_b.grid:
        raise ConfigError(f"grid mismatch between sources: {cfg_a.grid} vs {cfg_b.grid}")
    ga = simulate(_model(cfg_a.source, cfg_a.gamma32_target), cfg_a.grid).coherence
    gb = simulate(_model(cfg_b.source, cfg_b.gamma32_target), cfg_b.grid).coherence
    res = visibility(ga, gb)
    return [
        write_csv(_with_suffix(prefix, "_g2.csv"), ["tau", "g2"], [res.tau_values, res.g2_values]),
        write_json(_with_suffix(prefix, "_hom.json"), {
            "g2_zero": res.g2_zero,
            "g2_limit": res.g2_limit,
            "g2_limit_numeric": res.g2_limit_numeric,
            "visibility": res.visibility,
            "raw_overlap": res.raw_overlap,
            "photon_numbers": [ga.photon_number, gb.photon_number],
            "sources": [_source_echo(cfg_a.source), _source_echo(cfg_b.source)],
            "grid": cfg_a.grid,
        }),
    ]


def _sweep_request(cfg: RunConfig) -> SweepRequest:
    if cfg.sweep is None:
        raise ConfigError("the sweep command needs a [sweep] table")
    ref = cfg.reference
    if ref is not None and ref.system != cfg.source.system:
        raise ConfigError("reference and swept systems must be of the same type")
    return SweepRequest(
        system=cfg.source.system,
        axis1=cfg.sweep.axis1,
        axis2=cfg.sweep.axis2,
        mode=cfg.sweep.mode,
        base_params=cfg.source.params,
        reference_params=ref.params if ref else None,
        drive=cfg.source.drive,
        reference_drive=ref.drive if ref else None,
        grid=cfg.grid,
        gamma32_target=cfg.gamma32_target,
    )


def _map_columns(vmap):
    a, b = np.meshgrid(vmap.axis1.values, vmap.axis2.values, indexing="ij")
    return [a.ravel(), b.ravel(), vmap.values.ravel()]


def cmd_sweep(cfg: RunConfig, prefix: Path, threads: int | None) -> list[Path]:
    req = _sweep_request(cfg)
    header = [req.axis1.name, req.axis2.name, "V"]
    meta = {
        "system": req.system,
        "mode": req.mode,
        "axis1": req.axis1,
        "axis2": req.axis2,
        "base_params": req.base_params,
        "reference_params": req.reference_params,
        "drive": req.drive,
        "reference_drive": req.reference_drive or req.drive,
        "grid": req.grid,
        "gamma32_target": req.gamma32_target,
    }
    if cfg.sweep.optimize:
        before, after = optimized_sweep(req, cfg.optimizer, threads)
        meta.update(optimizer=cfg.optimizer, mode="reference",
                    high_area={"before": before.high_area(), "after": after.high_area()},
                    warnings=before.warnings)
        return [
            write_csv(_with_suffix(prefix, "_map_before.csv"), header, _map_columns(before)),
            write_csv(_with_suffix(prefix, "_map_after.csv"), header, _map_columns(after)),
            write_json(_with_suffix(prefix, "_map.json"), meta),
        ]
    vmap = sweep_visibility(req, threads)
    meta["warnings"] = vmap.warnings
    if {req.axis1.name, req.axis2.name} == {"g", "kappa"}:
        meta["optimal_kappa_curve"] = optimal_kappa_curve(vmap)
    return [
        write_csv(_with_suffix(prefix, "_map.csv"), header, _map_columns(vmap)),
        write_json(_with_suffix(prefix, "_map.json"), meta),
    ]


def cmd_optimize(cfg: RunConfig, prefix: Path) -> list[Path]:
    if cfg.source.system != "lambda":
        raise ConfigError("optimize needs a Lambda-type [system]")
    if cfg.reference is None or cfg.reference.system != "lambda":
        raise ConfigError("optimize needs a Lambda-type [reference] table")
    opt = cfg.optimizer
    target, ref_g, ref_phi = reference_target(
        cfg.reference.params, cfg.reference.drive, cfg.grid, opt.n_segments, cfg.gamma32_target)
    before = simulate(_model(cfg.source, cfg.gamma32_target), cfg.grid)
    res = optimize_drive(target, cfg.source.params, ref_g, opt, cfg.source.drive, cfg.grid,
                         cfg.gamma32_target)
    after = simulate(build_lambda(cfg.source.params, res.drive, cfg.gamma32_target), cfg.grid)
    t = cfg.grid.times
    v_before = visibility(ref_g, before.coherence, tau_sweep=False).visibility
    return [
        write_csv(_with_suffix(prefix, "_drive.csv"), ["t", "omega_d"],
                  [res.drive.knot_times, res.drive.knots]),
        write_csv(_with_suffix(prefix, "_history.csv"), ["iteration", "V"],
                  [np.arange(len(res.visibility_history)), res.visibility_history]),
        write_csv(_with_suffix(prefix, "_phi_reference.csv"), ["t", "phi_out"], [t, ref_phi.values]),
        write_csv(_with_suffix(prefix, "_phi_before.csv"), ["t", "phi_out"], [t, before.wavefunction.values]),
        write_csv(_with_suffix(prefix, "_phi_after.csv"), ["t", "phi_out"], [t, after.wavefunction.values]),
        write_json(_with_suffix(prefix, "_optimize.json"), {
            "status": res.status,
            "iterations": res.iterations,
            "visibility_before": v_before,
            "visibility_initial_knots": res.initial_visibility,
            "visibility_after": res.final_visibility,
            "interfered": _source_echo(cfg.source),
            "reference": _source_echo(cfg.reference),
            "optimizer": opt,
            "grid": cfg.grid,
        }),
    ]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cavity-hom", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, n_configs=1):
        if n_configs == 1:
            p.add_argument("config", help="TOML run configuration")
        else:
            p.add_argument("config", help="TOML configuration of source A")
            p.add_argument("config_b", help="TOML configuration of source B")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="override a scalar config entry")
        p.add_argument("--out", help="output path prefix (overrides output.prefix)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes (default: $CAVITY_HOM_THREADS or CPU count)")

    common(sub.add_parser("simulate", help="emit one photon and write its wavefunction"))
    common(sub.add_parser("hom", help="HOM correlation and visibility of two sources"), 2)
    common(sub.add_parser("sweep", help="visibility map over two parameters"))
    common(sub.add_parser("optimize", help="shape the drive of [system] to match [reference]"))
    sub.add_parser("version", help="print the package version")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "version":
        print(__version__)
        return 0
    try:
        cfg = load_config(args.config, args.overrides)
        prefix = _prefix(cfg, args.out)
        if args.command == "simulate":
            written = cmd_simulate(cfg, prefix)
        elif args.command == "hom":
            cfg_b = load_config(args.config_b, args.overrides)
            written = cmd_hom(cfg, cfg_b, prefix)
        elif args.command == "sweep":
            written = cmd_sweep(cfg, prefix, args.threads)
        else:
            written = cmd_optimize(cfg, prefix)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
