"""Command-line entry point.

Subcommands:
  run     execute a campaign, write per-drop CSV, summary JSON, plot data
  solve   run the solvers on a system instance file
  layout  export layout plus one sample drop as JSON

Exit codes: 0 success, 2 configuration error, 3 infeasibility,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import __version__, geometry, harness
from .config import ScenarioConfig, config_to_dict, load_config, watts_to_dbm
from .errors import (
    ConfigurationError,
    HetPowerError,
    InfeasibleError,
    NumericalError,
    PlacementError,
)
from .gain_matrix import system_from_text
from .solvers import select_solver

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetpower",
        description="Downlink power control in multi-layer cellular networks",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo campaign")
    run.add_argument("--config", type=Path, default=None, help="JSON config file")
    run.add_argument("--out", type=Path, required=True, help="output directory")
    run.add_argument("--drops", type=int, default=None, help="drops per outage level")
    run.add_argument("--seed", type=int, default=None, help="campaign base seed")
    run.add_argument(
        "--discard",
        default=None,
        help="discarded users: single value '3' or range '3:10'",
    )
    run.add_argument("--overlay", choices=("on", "off"), default=None)
    run.add_argument("--solver", choices=("analytic", "lp", "auto"), default=None)

    solve = sub.add_parser("solve", help="solve a system instance file")
    solve.add_argument("matrix_file", type=Path)
    solve.add_argument("--solver", choices=("analytic", "lp", "auto"), default="auto")
    solve.add_argument("--rate", type=float, default=None, help="retarget all users to 2**rate - 1")
    solve.add_argument("--gamma", type=float, default=None, help="retarget all users to this linear SINR")
    solve.add_argument("--cap-macro-dbm", type=float, default=None)
    solve.add_argument("--cap-micro-dbm", type=float, default=None)
    solve.add_argument("--cap-pico-dbm", type=float, default=None)
    solve.add_argument("--out", type=Path, default=None, help="write the allocation as JSON")

    layout = sub.add_parser("layout", help="export layout geometry and a sample drop")
    layout.add_argument("--config", type=Path, default=None)
    layout.add_argument("--out", type=Path, required=True, help="output JSON path")
    layout.add_argument("--seed", type=int, default=None)
    return parser


def _load_scenario(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    updates = {}
    if getattr(args, "drops", None) is not None:
        updates["drops"] = args.drops
    if getattr(args, "seed", None) is not None:
        updates["base_seed"] = args.seed
    if getattr(args, "solver", None) is not None:
        updates["solver_mode"] = args.solver
    if getattr(args, "overlay", None) is not None:
        updates["overlay"] = dataclasses.replace(
            cfg.overlay, enabled=args.overlay == "on"
        )
    if getattr(args, "discard", None) is not None:
        text = str(args.discard)
        try:
            if ":" in text:
                lo, hi = (int(p) for p in text.split(":", 1))
            else:
                lo = hi = int(text)
        except ValueError:
            raise ConfigurationError(
                f"--discard must be 'k' or 'lo:hi', got {text!r}"
            ) from None
        updates.update(discard_count=lo, discard_min=lo, discard_max=hi)
    if updates:
        cfg = dataclasses.replace(cfg, **updates)
    cfg.validate()
    return cfg


def _provenance(cfg: ScenarioConfig) -> dict:
    return {"version": __version__, "config": config_to_dict(cfg)}


def _cmd_run(args) -> int:
    cfg = _load_scenario(args)
    summary = harness.run_campaign(cfg)
    if all(lvl.solved == 0 for lvl in summary.levels):
        print("error: every drop at every outage level was infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(harness.records_csv(summary.records))
    (out / "plot_data.csv").write_text(harness.plot_data_csv(summary))
    payload = _provenance(cfg)
    payload["summary"] = harness.summary_dict(summary)
    (out / "summary.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    for lvl in summary.levels:
        mean = "n/a" if lvl.mean_gain_dB is None else f"{lvl.mean_gain_dB:.2f} dB"
        print(
            f"outage {lvl.outage_pct:5.2f}% (discard {lvl.discard_count}): "
            f"mean gain {mean} over {lvl.solved} drops ({lvl.infeasible} infeasible)"
        )
    return EXIT_OK


def _retarget(system, gamma: float):
    """Rescale every user's target; rows of the normalized blocks scale along."""
    scale = gamma / system.targets
    return dataclasses.replace(
        system,
        targets=system.targets * scale,
        noise_load=system.noise_load * scale,
        interference={l: m * scale[:, None] for l, m in system.interference.items()},
    )


def _cmd_solve(args) -> int:
    try:
        text = args.matrix_file.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {args.matrix_file}: {exc}") from exc
    system = system_from_text(text)
    if args.rate is not None and args.gamma is not None:
        raise ConfigurationError("--rate and --gamma are mutually exclusive")
    if args.rate is not None:
        system = _retarget(system, 2.0 ** args.rate - 1.0)
    elif args.gamma is not None:
        if args.gamma <= 0:
            raise ConfigurationError("--gamma must be positive")
        system = _retarget(system, args.gamma)
    caps = {}
    for layer, dbm in (
        ("macro", args.cap_macro_dbm),
        ("micro", args.cap_micro_dbm),
        ("pico", args.cap_pico_dbm),
    ):
        if dbm is not None:
            caps[layer] = 10.0 ** ((dbm - 30.0) / 10.0)
    try:
        alloc = select_solver(system, caps, mode=args.solver)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        if exc.spectral_radius is not None:
            print(f"spectral_radius = {exc.spectral_radius!r}", file=sys.stderr)
        return EXIT_INFEASIBLE

    print(f"solver_path = {alloc.solver_path}")
    if alloc.spectral_radius is not None:
        print(f"spectral_radius = {alloc.spectral_radius!r}")
    print(f"residual = {alloc.residual!r}")
    print(f"total_power_W = {alloc.total_power_W!r}")
    for layer, powers in alloc.powers.items():
        for i, watts in enumerate(powers):
            dbm = f"{watts_to_dbm(float(watts)):8.2f} dBm" if watts > 0 else "     off"
            print(f"{layer}[{i}] = {float(watts):.9g} W ({dbm.strip()})")
    for i, sinr in enumerate(alloc.achieved_sinr):
        print(f"sinr[{i}] = {float(sinr):.9g}")
    if args.out is not None:
        payload = {"version": __version__, "allocation": alloc.to_json_dict(alloc_tx_ids(system))}
        args.out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def alloc_tx_ids(system) -> dict:
    return {l: system.tx_ids[l] for l in system.layers}


def _cmd_layout(args) -> int:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    cfg.validate()
    seed = cfg.base_seed if args.seed is None else args.seed
    scene = harness.build_scene(cfg)
    drop = geometry.drop_users(
        scene.layout, scene.wrap, cfg.propagation, seed, cfg.placement_max_attempts
    )
    payload = _provenance(cfg)
    payload["seed"] = seed
    payload["transmitters"] = geometry.layout_records(scene.layout, scene.overlay)
    payload["users"] = geometry.drop_records(drop)
    if scene.overlay is not None:
        payload["overlay_total"] = scene.overlay.total_count
        payload["per_cell_counts"] = scene.overlay.per_cell_counts.tolist()
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    macro = sum(1 for t in payload["transmitters"] if t["layer"] == "macro")
    print(f"wrote {args.out}: {macro} sectors, overlay "
          f"{payload.get('overlay_total', 0)} microcells, {len(payload['users'])} users")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": _cmd_run, "solve": _cmd_solve, "layout": _cmd_layout}
    try:
        return handlers[args.command](args)
    except (ConfigurationError, PlacementError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except HetPowerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
