"""Monte Carlo campaign driver.

One drop = place users, measure all gains at the uniform learning power,
discard the worst users, then solve the macro-only baseline and the
two-layer overlay scenario on the *same* realization (same positions,
same shadowing). The reported power gain
``10*log10(baseline_total / twolayer_total)`` therefore isolates the
effect of the overlay rather than realization noise.

Seeds: drop d of a campaign uses ``base_seed + d`` at every outage level,
and each drop derives independent sub-streams for placement (which owns
the macro shadowing) and for micro shadowing, so toggling the overlay
cannot perturb the macro draws.
"""

from __future__ import annotations

import dataclasses
import io
import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .config import ScenarioConfig
from .errors import ConfigurationError, InfeasibleError, SolutionValidityError
from .gain_matrix import (
    LayeredGains,
    build_single_layer,
    build_two_layer,
    microcell_association_mask,
)
from .solvers import PowerAllocation, select_solver, solve_single_layer

CSV_COLUMNS = (
    "outage_pct",
    "drop",
    "seed",
    "baseline_W",
    "twolayer_W",
    "gain_dB",
    "solver_path",
    "feasible",
)


@dataclass(frozen=True)
class Scene:
    """Immutable geometry shared by all drops of a campaign."""

    layout: geometry.HexLayout
    wrap: geometry.WrapAroundMap
    overlay: geometry.ManhattanOverlay | None


def build_scene(config: ScenarioConfig) -> Scene:
    layout = geometry.build_hex_layout(
        config.layout.cell_count, config.layout.cell_radius_km
    )
    wrap = geometry.build_wrap_map(layout)
    overlay = None
    if config.overlay.enabled:
        overlay = geometry.build_manhattan_overlay(
            layout,
            config.overlay.block_m,
            config.overlay.street_m,
            (config.overlay.grid_offset_x_km, config.overlay.grid_offset_y_km),
        )
    return Scene(layout=layout, wrap=wrap, overlay=overlay)


def run_learning_phase(drop: geometry.UserDrop, config: ScenarioConfig, scene: Scene) -> LayeredGains:
    """Measure the full gain matrices for this drop's realization.

    Feedback is assumed perfect, so the matrices are the exact link gains
    (placement's macro shadowing draws are reused; micro shadowing comes
    from the drop's dedicated sub-stream). Each user is paired with its
    serving sector and, when the overlay is on, with its best microcell.
    """
    n = scene.layout.num_sectors
    g = geometry.macro_gain_matrix(
        drop.positions, scene.layout, scene.wrap, drop.macro_shadow_dB, config.propagation
    )
    if scene.overlay is not None:
        rng = geometry.placement_rng(drop.rng_seed, 1)
        shadow = rng.normal(
            0.0, config.propagation.shadow_sigma_dB, size=(n, scene.overlay.total_count)
        )
        h_full = geometry.micro_gain_matrix(
            drop.positions, scene.overlay, scene.wrap, shadow, config.propagation
        )
        assigned = np.argmax(h_full, axis=1)
        h = h_full[:, assigned]
        micro_ids = assigned
    else:
        h = np.zeros((n, n))
        micro_ids = np.full(n, -1)
    return LayeredGains(
        gains={"macro": g, "micro": h},
        targets=np.full(n, config.target_sinr),
        noise_W=np.full(n, config.noise_W),
        user_ids=np.arange(n),
        tx_ids={"macro": np.arange(n), "micro": micro_ids},
    )


def learning_sinr(gains: LayeredGains, learning_power_W: float) -> np.ndarray:
    """Macro-only SINR with every sector at the uniform learning power."""
    g = gains.gains["macro"]
    signal = np.diag(g) * learning_power_W
    interference = (g.sum(axis=1) - np.diag(g)) * learning_power_W
    return signal / (interference + np.asarray(gains.noise_W))


def discard_users(
    gains: LayeredGains,
    k: int,
    learning_power_W: float = 5.0,
    metric: str = "sinr",
):
    """Drop the k worst users; returns (reduced gains, discarded ids).

    metric "sinr" ranks by learning-phase SINR under uniform power,
    "path_loss" by the serving macro gain alone. Exact ties discard the
    lower user index first (stable sort).
    """
    n = gains.num_users
    if not 0 <= k < n:
        raise ConfigurationError(f"discard count {k} must be in [0, {n})")
    if metric == "sinr":
        key = learning_sinr(gains, learning_power_W)
    elif metric == "path_loss":
        key = np.diag(gains.gains["macro"])
    else:
        raise ConfigurationError(f"unknown discard metric {metric!r}")
    order = np.argsort(key, kind="stable")
    discarded = np.sort(order[:k])
    keep = np.sort(order[k:])
    ids = tuple(int(gains.user_ids[i]) for i in discarded)
    return gains.subset(keep), ids


@dataclass(frozen=True)
class DropResult:
    """Paired baseline/overlay outcome of a single drop."""

    seed: int
    discard_count: int
    outage_pct: float
    feasible: bool
    baseline_feasible: bool
    twolayer_feasible: bool
    infeasible_cause: str | None
    baseline_total_W: float | None
    twolayer_total_W: float | None
    gain_dB: float | None
    discarded_user_ids: tuple
    solver_path_baseline: str | None
    solver_path_twolayer: str | None
    sleep_count: int | None
    drop_index: int = 0


@dataclass(frozen=True)
class CampaignLevel:
    discard_count: int
    outage_pct: float
    solved: int
    infeasible: int
    mean_gain_dB: float | None
    std_gain_dB: float | None


@dataclass(frozen=True)
class CampaignSummary:
    levels: tuple
    records: tuple
    user_count: int
    gamma_linear: float


def _macro_only(gains: LayeredGains) -> LayeredGains:
    return LayeredGains(
        gains={"macro": gains.gains["macro"]},
        targets=gains.targets,
        noise_W=gains.noise_W,
        user_ids=gains.user_ids,
        tx_ids={"macro": gains.tx_ids["macro"]},
    )


def run_drop(seed: int, config: ScenarioConfig, scene: Scene | None = None) -> DropResult:
    """Placement -> learning -> discard -> paired solves -> gain."""
    if scene is None:
        scene = build_scene(config)
    drop = geometry.drop_users(
        scene.layout,
        scene.wrap,
        config.propagation,
        seed,
        max_attempts=config.placement_max_attempts,
    )
    gains = run_learning_phase(drop, config, scene)
    reduced, discarded = discard_users(
        gains, config.discard_count, config.learning_power_W, config.discard_metric
    )
    outage_pct = 100.0 * config.discard_count / gains.num_users

    baseline: PowerAllocation | None = None
    twolayer: PowerAllocation | None = None
    cause = None
    try:
        baseline = solve_single_layer(build_single_layer(_macro_only(reduced)))
    except (InfeasibleError, SolutionValidityError) as exc:
        cause = f"baseline: {exc}"
    # Macro sectors whose user has a better micro link stay silent (their
    # column is eliminated); the LP fallback never forces, since caps may
    # need the macro route even for those users.
    mask = microcell_association_mask(reduced) if config.force_sleep else None
    try:
        twolayer = select_solver(
            build_two_layer(reduced),
            config.caps_W(),
            mode=config.solver_mode,
            force_sleep_mask=mask,
        )
    except (InfeasibleError, SolutionValidityError) as exc:
        cause = (cause + "; " if cause else "") + f"twolayer: {exc}"

    gain = None
    if baseline is not None and twolayer is not None:
        gain = 10.0 * math.log10(baseline.total_power_W / twolayer.total_power_W)
    return DropResult(
        seed=int(seed),
        discard_count=config.discard_count,
        outage_pct=outage_pct,
        feasible=baseline is not None and twolayer is not None,
        baseline_feasible=baseline is not None,
        twolayer_feasible=twolayer is not None,
        infeasible_cause=cause,
        baseline_total_W=None if baseline is None else baseline.total_power_W,
        twolayer_total_W=None if twolayer is None else twolayer.total_power_W,
        gain_dB=gain,
        discarded_user_ids=discarded,
        solver_path_baseline=None if baseline is None else baseline.solver_path,
        solver_path_twolayer=None if twolayer is None else twolayer.solver_path,
        sleep_count=None
        if twolayer is None
        else int(twolayer.macro_sleep_flags(config.sleep_threshold_W).sum()),
    )


def run_campaign(config: ScenarioConfig) -> CampaignSummary:
    """Sweep the discard range; ``drops`` drops per level, seeds base_seed+d.

    The same drop seeds are reused at every outage level (common random
    numbers), so level-to-level differences are due to the discard count
    alone. Infeasible drops are counted per level and never enter means.
    """
    config.validate()
    scene = build_scene(config)
    records = []
    levels = []
    for k in range(config.discard_min, config.discard_max + 1):
        cfg_k = dataclasses.replace(config, discard_count=k)
        gains_db = []
        infeasible = 0
        for d in range(config.drops):
            result = dataclasses.replace(
                run_drop(config.base_seed + d, cfg_k, scene), drop_index=d
            )
            records.append(result)
            if result.feasible:
                gains_db.append(result.gain_dB)
            else:
                infeasible += 1
        mean = float(np.mean(gains_db)) if gains_db else None
        std = float(np.std(gains_db, ddof=1)) if len(gains_db) > 1 else None
        levels.append(
            CampaignLevel(
                discard_count=k,
                outage_pct=100.0 * k / config.user_count,
                solved=len(gains_db),
                infeasible=infeasible,
                mean_gain_dB=mean,
                std_gain_dB=std,
            )
        )
    return CampaignSummary(
        levels=tuple(levels),
        records=tuple(records),
        user_count=config.user_count,
        gamma_linear=config.target_sinr,
    )


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_csv(records) -> str:
    """Per-drop records in the stable CSV schema (see CSV_COLUMNS)."""
    out = io.StringIO()
    out.write(",".join(CSV_COLUMNS) + "\n")
    for r in records:
        row = (
            r.outage_pct,
            r.drop_index,
            r.seed,
            r.baseline_total_W,
            r.twolayer_total_W,
            r.gain_dB,
            r.solver_path_twolayer,
            r.feasible,
        )
        out.write(",".join(_csv_cell(v) for v in row) + "\n")
    return out.getvalue()


def plot_data_csv(summary: CampaignSummary) -> str:
    """Outage level vs mean/std gain, enough to redraw the gain figure."""
    out = io.StringIO()
    out.write("outage_pct,mean_gain_dB,std_gain_dB,solved,infeasible\n")
    for lvl in summary.levels:
        row = (lvl.outage_pct, lvl.mean_gain_dB, lvl.std_gain_dB, lvl.solved, lvl.infeasible)
        out.write(",".join(_csv_cell(v) for v in row) + "\n")
    return out.getvalue()


def summary_dict(summary: CampaignSummary) -> dict:
    return {
        "user_count": summary.user_count,
        "gamma_linear": summary.gamma_linear,
        "levels": [dataclasses.asdict(lvl) for lvl in summary.levels],
        "drops_total": len(summary.records),
        "drops_solved": sum(1 for r in summary.records if r.feasible),
        "drops_infeasible": sum(1 for r in summary.records if not r.feasible),
    }
