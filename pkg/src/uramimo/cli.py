"""Command-line front end: run / sweep / convergence / validate.

Each experiment writes its artifacts (results CSV, figure CSV, JSON summary,
run manifest) into the chosen output directory and nowhere else.  The
manifest embeds the fully resolved configuration, the backend, and the seed
derivation, so pointing ``--config`` at a previous ``manifest.json`` replays
the run and reproduces the CSV outputs byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, config as config_mod, kernels, selfcheck
from .errors import ConfigError, UramimoError
from .simulate import (
    aggregate,
    config_at_snr,
    convergence_experiment,
    make_pool,
    run_trials,
    snr_sweep,
)
from .streams import DOMAIN_CHANNEL_SPEC, DOMAIN_CODEBOOK, DOMAIN_PARITY, derived_seed

OUTPUT_DIR_ENV = "URAMIMO_OUT"

VERBS = ("run", "sweep", "convergence", "validate")


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _write_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def emit_figure_data(results, kind: str, path) -> None:
    """Figure-ready CSV.

    ``kind="fig1"`` expects ``{policy: DetectionResult}`` and writes one row
    per recorded iteration per policy; ``kind="fig2"`` expects sweep rows
    ``(snr_db, m, channel_mode, p_e)`` and writes them sorted by
    (m, channel_mode, snr_db).
    """
    if kind == "fig1":
        if not isinstance(results, dict) or not results:
            raise ConfigError("fig1 needs a policy -> detection-result mapping")
        rows = []
        for policy, result in results.items():
            if getattr(result, "e_gamma", None) is None:
                raise ConfigError("fig1 needs traces with a ground-truth error column")
            for idx in range(result.e_gamma.size):
                rows.append((idx + 1, result.e_gamma[idx], policy))
        _write_csv(path, ("iteration", "e_gamma", "policy"), rows)
    elif kind == "fig2":
        try:
            rows = sorted(
                ((float(s), int(m), str(mode), float(pe)) for s, m, mode, pe in results),
                key=lambda r: (r[1], r[2], r[0]),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"fig2 needs (snr_db, m, channel_mode, p_e) rows: {exc}") from exc
        _write_csv(path, ("snr_db", "m", "channel_mode", "p_e"), rows)
    else:
        raise ConfigError(f"unknown figure kind {kind!r}")


def _load_any_config(path: str):
    """Load an INI config or a manifest JSON; returns (cfg, manifest|None)."""
    text = Path(path).read_text(encoding="utf-8")
    stripped = text.lstrip()
    if stripped.startswith("{"):
        manifest = json.loads(text)
        if "config" not in manifest or "verb" not in manifest:
            raise ConfigError(f"{path}: JSON input is not a run manifest")
        return config_mod.config_from_jsonable(manifest["config"]), manifest
    return config_mod.parse_config_text(text, source=path), None


def _resolve_output_dir(args) -> Path:
    if args.out:
        return Path(args.out)
    env = os.environ.get(OUTPUT_DIR_ENV, "").strip()
    if env:
        return Path(env)
    return Path("uramimo-out")


def _stream_seed_table(cfg) -> dict:
    master = cfg["scenario"]["master_seed"]
    return {
        "master_seed": master,
        "codebook": derived_seed(master, DOMAIN_CODEBOOK),
        "parity": cfg["treecode"]["parity_seed"],
        "channel_spec": cfg["channel"]["seed"],
        "spawn_key_scheme": "(domain, trial, slot[, extra]) under master_seed; "
        "domains: codebook=0 parity=1 messages=2 channel=3 noise=4 detector=5 channel_spec=6",
    }


def _write_manifest(out_dir: Path, verb: str, cfg, backend: str, outputs, duration: float) -> None:
    manifest = {
        "tool": "uramimo",
        "version": __version__,
        "verb": verb,
        "backend": backend,
        "config": cfg,
        "stream_seeds": _stream_seed_table(cfg),
        "outputs": sorted(outputs),
        "duration_s": duration,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    _write_json(out_dir / "manifest.json", manifest)


def _grid_cells(cfg):
    for m in cfg["scenario"]["m"]:
        for mode in cfg["channel"]["mode"]:
            yield m, mode


def _do_run(cfg, out_dir: Path) -> list[str]:
    scenario = config_mod.scenario_from_config(cfg)
    pool = make_pool(scenario.workers)
    try:
        reports = run_trials(scenario, pool=pool)
    finally:
        if pool is not None:
            pool.close()
            pool.join()
    rows = [
        (t, r.p_md, r.p_fa, r.p_e, int(r.overflow), r.n_decoded)
        for t, r in enumerate(reports)
    ]
    _write_csv(
        out_dir / "results.csv",
        ("trial", "p_md", "p_fa", "p_e", "overflow", "n_decoded"),
        rows,
    )
    p_md, p_fa, p_e, overflows = aggregate(reports)
    _write_json(
        out_dir / "summary.json",
        {
            "config": cfg,
            "metrics": {
                "p_md": p_md,
                "p_fa": p_fa,
                "p_e": p_e,
                "overflow_count": overflows,
                "trials": scenario.trials,
            },
        },
    )
    return ["results.csv", "summary.json"]


def _do_sweep(cfg, out_dir: Path) -> list[str]:
    grid = cfg["scenario"]["snr_grid_db"]
    if not grid:
        raise ConfigError("sweep needs scenario.snr_grid_db")
    rows = []
    for m, mode in _grid_cells(cfg):
        scenario = config_mod.scenario_from_config(cfg, m=m, mode=mode)
        for point in snr_sweep(scenario, grid):
            rows.append((point.snr_db, m, mode, point.p_md, point.p_fa, point.p_e))
    _write_csv(
        out_dir / "results.csv",
        ("snr_db", "m", "channel_mode", "p_md", "p_fa", "p_e"),
        rows,
    )
    emit_figure_data(
        [(r[0], r[1], r[2], r[5]) for r in rows], "fig2", out_dir / "fig2.csv"
    )
    _write_json(
        out_dir / "summary.json",
        {
            "config": cfg,
            "metrics": [
                {
                    "snr_db": r[0],
                    "m": r[1],
                    "channel_mode": r[2],
                    "p_md": r[3],
                    "p_fa": r[4],
                    "p_e": r[5],
                }
                for r in rows
            ],
        },
    )
    return ["results.csv", "fig2.csv", "summary.json"]


def _do_convergence(cfg, out_dir: Path) -> list[str]:
    scenario = config_mod.scenario_from_config(cfg)
    policies = cfg["detector"]["policies"]
    outcome = convergence_experiment(scenario, policies)
    trace_rows = []
    for policy, res in outcome.results.items():
        for idx in range(res.coordinates.size):
            trace_rows.append(
                (
                    idx + 1,
                    policy,
                    int(res.coordinates[idx]),
                    res.steps[idx],
                    res.rewards[idx],
                    res.costs[idx],
                    res.e_gamma[idx],
                )
            )
    _write_csv(
        out_dir / "results.csv",
        ("iteration", "policy", "coordinate", "d", "reward", "f", "e_gamma"),
        trace_rows,
    )
    emit_figure_data(outcome.results, "fig1", out_dir / "fig1.csv")
    terminal = {
        policy: float(res.e_gamma[-1]) for policy, res in outcome.results.items()
    }
    _write_json(
        out_dir / "summary.json",
        {"config": cfg, "metrics": {"terminal_e_gamma": terminal}},
    )
    return ["results.csv", "fig1.csv", "summary.json"]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="uramimo",
        description="Unsourced-random-access simulation experiments.",
    )
    parser.add_argument("verb", choices=VERBS)
    parser.add_argument("--config", help="scenario INI file, or a manifest.json to replay")
    parser.add_argument("--out", help=f"output directory (default ${OUTPUT_DIR_ENV} or ./uramimo-out)")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override one config value (repeatable); unknown keys are rejected",
    )
    parser.add_argument(
        "--backend",
        choices=("auto",) + kernels.available_backends(),
        default=None,
        help="kernel backend (default: manifest's when replaying, else auto)",
    )
    args = parser.parse_args(argv)

    try:
        if args.verb == "validate":
            ok = selfcheck.run_selfcheck()
            return 0 if ok else 1

        if not args.config:
            parser.error(f"{args.verb} requires --config")
        cfg, manifest = _load_any_config(args.config)
        if manifest is not None and manifest.get("verb") != args.verb:
            raise ConfigError(
                f"manifest records verb {manifest.get('verb')!r}, not {args.verb!r}"
            )
        if args.overrides:
            cfg = config_mod.apply_overrides(cfg, args.overrides)
        if args.seed is not None:
            cfg = config_mod.apply_overrides(cfg, [f"scenario.master_seed={args.seed}"])
            cfg["channel"]["seed"] = None
            cfg["treecode"]["parity_seed"] = None
        cfg = config_mod.finalize_config(cfg)

        backend = args.backend
        if backend is None and manifest is not None:
            backend = manifest.get("backend")
        if backend and backend != "auto":
            kernels.set_default_backend(backend)
        backend_used = kernels.default_backend()

        out_dir = _resolve_output_dir(args)
        out_dir.mkdir(parents=True, exist_ok=True)

        start = time.monotonic()
        if args.verb == "run":
            outputs = _do_run(cfg, out_dir)
        elif args.verb == "sweep":
            outputs = _do_sweep(cfg, out_dir)
        else:
            outputs = _do_convergence(cfg, out_dir)
        duration = time.monotonic() - start
        _write_manifest(out_dir, args.verb, cfg, backend_used, outputs, duration)
        print(f"{args.verb}: wrote {', '.join(outputs)} and manifest.json to {out_dir}")
        return 0
    except UramimoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
