"""Cell geometry: hexagonal layout, wrap-around, street grid, user drops.

Conventions (fixed once, everything downstream relies on them):

* flat-top hexagons with circumradius ``cell_radius_km``, sites at the
  hexagon centers, axial coordinates mapped as
  ``x = 1.5*R*q``, ``y = sqrt(3)*R*(r + q/2)``;
* three sectors per site with boresights at 30, 150 and 270 degrees;
* wrap-around realized as the 6 nearest translations of the cluster
  tiling lattice plus the identity (7 images total).

All positions are in km.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import propagation
from .errors import ConfigurationError, PlacementError

SECTORS_PER_SITE = 3
SECTOR_BORESIGHTS_DEG = (30.0, 150.0, 270.0)

# Street-grid anchor (km) that makes the 19-cell reference overlay come out
# at exactly 467 microcells; see build_manhattan_overlay.
DEFAULT_GRID_OFFSET_KM = (0.0, 0.0375)


def _rings_for_count(cell_count: int) -> int:
    """Number of hexagonal rings for a centered hexagonal cell count."""
    rings = 0
    while True:
        count = 1 + 3 * rings * (rings + 1)
        if count == cell_count:
            return rings
        if count > cell_count:
            supported = [1 + 3 * k * (k + 1) for k in range(6)]
            raise ConfigurationError(
                f"cell_count={cell_count} is not a centered hexagonal number; "
                f"supported: {supported} (pattern 1+3k(k+1))"
            )
        rings += 1


def _axial_to_xy(q, r, radius_km: float) -> tuple[float, float]:
    return 1.5 * radius_km * q, math.sqrt(3.0) * radius_km * (r + q / 2.0)


@dataclass(frozen=True)
class HexLayout:
    """Macro site positions and per-site sector boresights."""

    cell_count: int
    cell_radius_km: float
    site_positions: np.ndarray  # (S, 2)
    sector_boresights_deg: np.ndarray  # (S, 3)

    @property
    def num_sites(self) -> int:
        return self.site_positions.shape[0]

    @property
    def num_sectors(self) -> int:
        return self.num_sites * SECTORS_PER_SITE

    @property
    def sector_site(self) -> np.ndarray:
        """Site index of every sector, shape (3S,)."""
        return np.repeat(np.arange(self.num_sites), SECTORS_PER_SITE)

    @property
    def sector_positions(self) -> np.ndarray:
        """Position of every sector's site, shape (3S, 2)."""
        return self.site_positions[self.sector_site]

    @property
    def sector_boresight(self) -> np.ndarray:
        """Boresight of every sector in degrees, shape (3S,)."""
        return self.sector_boresights_deg.reshape(-1)


def build_hex_layout(cell_count: int = 19, cell_radius_km: float = 1.0) -> HexLayout:
    """Centered hexagonal cluster of 3-sector sites.

    cell_count must be a centered hexagonal number (1, 7, 19, 37, ...);
    adjacent sites end up sqrt(3)*cell_radius_km apart.
    """
    if cell_radius_km <= 0:
        raise ConfigurationError("cell_radius_km must be positive")
    rings = _rings_for_count(cell_count)
    coords = []
    for q in range(-rings, rings + 1):
        for r in range(-rings, rings + 1):
            if (abs(q) + abs(r) + abs(q + r)) / 2 <= rings:
                coords.append((q, r))
    positions = np.array(
        [_axial_to_xy(q, r, cell_radius_km) for q, r in coords], dtype=float
    )
    boresights = np.tile(np.array(SECTOR_BORESIGHTS_DEG), (len(coords), 1))
    return HexLayout(
        cell_count=cell_count,
        cell_radius_km=cell_radius_km,
        site_positions=positions,
        sector_boresights_deg=boresights,
    )


@dataclass(frozen=True)
class WrapAroundMap:
    """Identity plus the six shortest cluster-tiling translations."""

    image_offsets: np.ndarray  # (7, 2), row 0 is the identity


def build_wrap_map(layout: HexLayout) -> WrapAroundMap:
    """Toroidal wrap of the cluster: the cluster tiles the plane under the
    lattice generated by the axial displacement (rings+1, rings); the six
    nearest lattice points give the replica offsets."""
    rings = _rings_for_count(layout.cell_count)
    v1 = np.array(_axial_to_xy(rings + 1, rings, layout.cell_radius_km))
    # rotate by 60 degrees in axial coords: (q, r) -> (-r, q+r)
    v2 = np.array(_axial_to_xy(-rings, 2 * rings + 1, layout.cell_radius_km))
    offsets = np.array(
        [(0.0, 0.0), v1, -v1, v2, -v2, v2 - v1, v1 - v2], dtype=float
    )
    return WrapAroundMap(image_offsets=offsets)


def wrapped_displacement(a, b, wrap: WrapAroundMap):
    """Minimum-image displacement and distance from b to a.

    Broadcasts over leading axes; returns ``(disp, dist)`` where disp is the
    vector from b to the closest wrap image of a.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = a - b
    cand = diff[..., None, :] + wrap.image_offsets  # (..., 7, 2)
    dist = np.linalg.norm(cand, axis=-1)
    best = np.argmin(dist, axis=-1)
    disp = np.take_along_axis(cand, best[..., None, None], axis=-2)[..., 0, :]
    return disp, np.take_along_axis(dist, best[..., None], axis=-1)[..., 0]


def wrapped_distance(a, b, wrap: WrapAroundMap):
    """Minimum distance over the 7 cluster images; symmetric, <= direct."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = a - b
    cand = diff[..., None, :] + wrap.image_offsets
    out = np.linalg.norm(cand, axis=-1).min(axis=-1)
    return out if getattr(out, "ndim", 0) else float(out)


def in_hexagon(points, center, radius_km: float):
    """Membership test for a flat-top hexagon (boundary included)."""
    d = np.asarray(points, dtype=float) - np.asarray(center, dtype=float)
    x, y = d[..., 0], d[..., 1]
    c = math.sqrt(3.0) / 2.0 * radius_km
    s3 = math.sqrt(3.0) / 2.0
    return (
        (np.abs(y) <= c)
        & (np.abs(s3 * x + 0.5 * y) <= c)
        & (np.abs(s3 * x - 0.5 * y) <= c)
    )


@dataclass(frozen=True)
class ManhattanOverlay:
    """Microcell positions on a Manhattan street grid, clipped per cell."""

    block_size_m: float
    street_width_m: float
    positions: np.ndarray  # (M, 2) km
    per_cell_counts: np.ndarray  # (S,)
    grid_offset_km: tuple[float, float]

    @property
    def total_count(self) -> int:
        return self.positions.shape[0]


def build_manhattan_overlay(
    layout: HexLayout,
    block_m: float = 200.0,
    street_m: float = 30.0,
    grid_offset_km: tuple[float, float] = DEFAULT_GRID_OFFSET_KM,
) -> ManhattanOverlay:
    """Microcells on every other street junction of a global Manhattan grid.

    Street centerlines run in both axes with pitch block+street; equipment
    sits on alternating junctions (checkerboard), which reproduces the
    standard urban micro deployment density of ~9.5 sites/km^2. The grid is
    anchored at the cluster center plus ``grid_offset_km``; the default
    offset calibrates the 19-cell reference layout to 467 microcells total.
    Junctions are kept when they fall inside the hexagon of their nearest
    site, so every cell's count is reported individually.
    """
    if block_m <= 0 or street_m <= 0:
        raise ConfigurationError("block_m and street_m must be positive")
    pitch = (block_m + street_m) / 1000.0
    sites = layout.site_positions
    reach = np.abs(sites).max() + layout.cell_radius_km + pitch
    n = int(reach / pitch) + 1
    ii, jj = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1), indexing="ij")
    keep = (ii + jj) % 2 == 0
    pts = np.stack(
        [
            ii[keep] * pitch + grid_offset_km[0],
            jj[keep] * pitch + grid_offset_km[1],
        ],
        axis=-1,
    )
    d2 = ((pts[:, None, :] - sites[None, :, :]) ** 2).sum(axis=-1)
    nearest = d2.argmin(axis=1)
    inside = in_hexagon(pts, sites[nearest], layout.cell_radius_km)
    positions = pts[inside]
    counts = np.bincount(nearest[inside], minlength=layout.num_sites)
    if np.any(counts == 0):
        empty = np.flatnonzero(counts == 0).tolist()
        raise ConfigurationError(
            f"street grid (block={block_m} m, street={street_m} m) places no "
            f"microcells in cells {empty}"
        )
    return ManhattanOverlay(
        block_size_m=block_m,
        street_width_m=street_m,
        positions=positions,
        per_cell_counts=counts,
        grid_offset_km=tuple(grid_offset_km),
    )


def relative_angle_deg(vec, boresight_deg):
    """Angle of vec off a boresight direction, normalized to [-180, 180]."""
    ang = np.degrees(np.arctan2(np.asarray(vec)[..., 1], np.asarray(vec)[..., 0]))
    return (ang - boresight_deg + 180.0) % 360.0 - 180.0


def macro_gain_matrix(points, layout: HexLayout, wrap: WrapAroundMap, shadow_dB, params):
    """Linear gains from every macro sector to every point, (U, 3S).

    Uses the wrapped minimum-image displacement both for the distance and
    for the off-boresight angle, so a user near the cluster edge sees the
    replica sector it is actually closest to.
    """
    pts = np.asarray(points, dtype=float)
    disp, dist = wrapped_displacement(
        pts[:, None, :], layout.sector_positions[None, :, :], wrap
    )
    theta = relative_angle_deg(disp, layout.sector_boresight[None, :])
    loss = propagation.link_loss_dB("macro", dist, shadow_dB, params, theta_deg=theta)
    return propagation.gain_from_loss(loss)


def micro_gain_matrix(points, overlay: ManhattanOverlay, wrap: WrapAroundMap, shadow_dB, params, layer: str = "micro"):
    """Linear gains from every overlay transmitter to every point, (U, M)."""
    pts = np.asarray(points, dtype=float)
    _, dist = wrapped_displacement(
        pts[:, None, :], overlay.positions[None, :, :], wrap
    )
    loss = propagation.link_loss_dB(layer, dist, shadow_dB, params)
    return propagation.gain_from_loss(loss)


@dataclass(frozen=True)
class UserDrop:
    """One realization of user positions, one user per sector.

    macro_shadow_dB keeps the shadowing draws used during placement so the
    learning phase sees exactly the link budget that admitted each user
    (the best-server property then holds by construction).
    """

    positions: np.ndarray  # (3S, 2)
    serving_sector: np.ndarray  # (3S,)
    rng_seed: int
    macro_shadow_dB: np.ndarray  # (3S, 3S) user x sector


def placement_rng(seed: int, stream: int) -> np.random.Generator:
    """Deterministic per-drop sub-stream (0: placement, 1: micro, 2: pico)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))


def _sample_in_hexagon(rng: np.random.Generator, center, radius_km: float) -> np.ndarray:
    c = math.sqrt(3.0) / 2.0 * radius_km
    while True:
        pt = center + rng.uniform([-radius_km, -c], [radius_km, c])
        if in_hexagon(pt, center, radius_km):
            return pt


_PLACEMENT_BATCH = 64


def drop_users(
    layout: HexLayout,
    wrap: WrapAroundMap,
    params,
    seed: int,
    max_attempts: int = 10000,
) -> UserDrop:
    """Place users one by one until every sector holds exactly one.

    Each candidate is drawn uniformly over the cluster (uniform cell, then
    uniform position in its hexagon), gets fresh shadowing to every macro
    sector, and is kept only if the sector it receives most strongly from
    (at uniform learning power, so the comparison is on gains) still has an
    empty slot; otherwise the candidate is discarded and a new one drawn.
    Accepted draws are retained so the learning phase sees the same budget
    that admitted each user, making the serving link the row maximum by
    construction.

    The attempt budget is max_attempts per sector (spent globally); running
    out raises PlacementError naming an unfilled sector.
    """
    rng = placement_rng(seed, 0)
    n_sec = layout.num_sectors
    n_site = layout.num_sites
    positions = np.zeros((n_sec, 2))
    shadows = np.zeros((n_sec, n_sec))
    filled = np.zeros(n_sec, dtype=bool)
    remaining = n_sec
    budget = max_attempts * n_sec
    spent = 0
    while spent < budget:
        batch = min(_PLACEMENT_BATCH, budget - spent)
        spent += batch
        sites = rng.integers(n_site, size=batch)
        pts = np.stack(
            [
                _sample_in_hexagon(
                    rng, layout.site_positions[s], layout.cell_radius_km
                )
                for s in sites
            ]
        )
        draws = rng.normal(0.0, params.shadow_sigma_dB, size=(batch, n_sec))
        gains = macro_gain_matrix(pts, layout, wrap, draws, params)
        best = np.argmax(gains, axis=1)
        for b in range(batch):
            sector = int(best[b])
            if filled[sector]:
                continue
            filled[sector] = True
            positions[sector] = pts[b]
            shadows[sector] = draws[b]
            remaining -= 1
            if remaining == 0:
                return UserDrop(
                    positions=positions,
                    serving_sector=np.arange(n_sec),
                    rng_seed=int(seed),
                    macro_shadow_dB=shadows,
                )
    raise PlacementError(int(np.flatnonzero(~filled)[0]), max_attempts)


def layout_records(layout: HexLayout, overlay: ManhattanOverlay | None = None) -> list[dict]:
    """Flat per-transmitter records for JSON export and plotting."""
    records = []
    for sector in range(layout.num_sectors):
        site = sector // SECTORS_PER_SITE
        x, y = layout.site_positions[site]
        records.append(
            {
                "id": sector,
                "site": site,
                "layer": "macro",
                "x_km": float(x),
                "y_km": float(y),
                "boresight_deg": float(layout.sector_boresight[sector]),
            }
        )
    if overlay is not None:
        for k, (x, y) in enumerate(overlay.positions):
            records.append(
                {
                    "id": k,
                    "site": None,
                    "layer": "micro",
                    "x_km": float(x),
                    "y_km": float(y),
                    "boresight_deg": None,
                }
            )
    return records


def drop_records(drop: UserDrop) -> list[dict]:
    return [
        {
            "id": int(i),
            "x_km": float(drop.positions[i, 0]),
            "y_km": float(drop.positions[i, 1]),
            "serving_sector": int(drop.serving_sector[i]),
        }
        for i in range(drop.positions.shape[0])
    ]
