"""Normalized interference systems assembled from per-link channel gains.

A ``LayeredGains`` instance holds, per layer, the N x N matrix of linear
gains between every user and the layer transmitter serving each user
(entry [i, j] is the gain from user j's transmitter to user i). From it
the solvers' normalized description is built: every user's balance row is
divided by its serving macro gain, giving

* per layer, a zero-diagonal interference matrix whose row i is scaled by
  user i's SINR target;
* per layer, the diagonal of serving-gain ratios relative to the macro
  serving gain (all ones for the macro layer itself);
* a noise load vector target*noise/serving_gain.

Stacking the layer blocks yields the rectangular balance equation
``serving_matrix @ x = interference_matrix @ x + noise_load`` over the
stacked per-layer power vector x.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ServingLinkError
from .propagation import LAYERS


def _as_matrix(a, n: int, name: str) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.shape != (n, n):
        raise ConfigurationError(f"{name} must be {n}x{n}, got {m.shape}")
    if np.any(m < 0):
        raise ConfigurationError(f"{name} has negative entries")
    return m


@dataclass(frozen=True)
class LayeredGains:
    """Per-layer serving-transmitter gain matrices plus targets and noise."""

    gains: dict  # layer name -> (N, N) linear gains
    targets: np.ndarray  # (N,) linear SINR targets
    noise_W: np.ndarray  # (N,) noise powers
    user_ids: np.ndarray = None  # original user indices, default arange
    tx_ids: dict = None  # layer name -> (N,) transmitter labels

    def __post_init__(self):
        n = len(self.targets)
        if "macro" not in self.gains:
            raise ConfigurationError("macro layer is required")
        for layer in self.gains:
            if layer not in LAYERS:
                raise ConfigurationError(f"unknown layer {layer!r}")
            _as_matrix(self.gains[layer], n, f"gains[{layer!r}]")
        if np.any(np.asarray(self.targets) <= 0):
            raise ConfigurationError("SINR targets must be positive")
        if np.any(np.asarray(self.noise_W) <= 0):
            raise ConfigurationError("noise powers must be positive")
        if self.user_ids is None:
            object.__setattr__(self, "user_ids", np.arange(n))
        if self.tx_ids is None:
            object.__setattr__(
                self, "tx_ids", {layer: np.arange(n) for layer in self.gains}
            )

    @property
    def num_users(self) -> int:
        return len(self.targets)

    @property
    def layers(self) -> tuple:
        return tuple(l for l in LAYERS if l in self.gains)

    def subset(self, keep) -> "LayeredGains":
        """Restrict to the users selected by ``keep`` (indices or mask)."""
        keep = np.asarray(keep)
        if keep.dtype == bool:
            keep = np.flatnonzero(keep)
        return LayeredGains(
            gains={l: g[np.ix_(keep, keep)] for l, g in self.gains.items()},
            targets=np.asarray(self.targets)[keep],
            noise_W=np.asarray(self.noise_W)[keep],
            user_ids=np.asarray(self.user_ids)[keep],
            tx_ids={l: np.asarray(t)[keep] for l, t in self.tx_ids.items()},
        )


@dataclass(frozen=True)
class NormalizedSystem:
    """Normalized balance system for 1..3 layers.

    interference[layer] has zero diagonal; serving_ratio[layer] is the
    diagonal of the corresponding serving block (ones for the macro
    layer). Layer order follows LAYERS.
    """

    targets: np.ndarray  # (N,)
    noise_load: np.ndarray  # (N,)
    interference: dict  # layer -> (N, N)
    serving_ratio: dict  # layer -> (N,)
    user_ids: np.ndarray = None
    tx_ids: dict = None

    def __post_init__(self):
        if self.user_ids is None:
            object.__setattr__(self, "user_ids", np.arange(self.num_users))
        if self.tx_ids is None:
            object.__setattr__(
                self, "tx_ids", {l: np.arange(self.num_users) for l in self.layers}
            )

    @property
    def num_users(self) -> int:
        return len(self.targets)

    @property
    def layers(self) -> tuple:
        return tuple(l for l in LAYERS if l in self.interference)

    @property
    def num_layers(self) -> int:
        return len(self.interference)

    def serving_matrix(self) -> np.ndarray:
        """Row-rank-N block matrix [diag(r_macro) | diag(r_micro) | ...]."""
        return np.hstack([np.diag(self.serving_ratio[l]) for l in self.layers])

    def interference_matrix(self) -> np.ndarray:
        return np.hstack([self.interference[l] for l in self.layers])

    def right_inverse(self) -> np.ndarray:
        """Moore-Penrose right inverse of the serving matrix.

        With diagonal blocks the Gram matrix is diagonal, so the inverse is
        closed-form and entrywise nonnegative: column i carries
        r_l[i] / sum_l r_l[i]^2 in layer block l.
        """
        gram = np.zeros(self.num_users)
        for l in self.layers:
            gram += self.serving_ratio[l] ** 2
        return np.vstack([np.diag(self.serving_ratio[l] / gram) for l in self.layers])

    def iteration_matrix(self) -> np.ndarray:
        """Stacked coupling matrix whose spectral radius decides feasibility."""
        if self.num_layers == 1:
            return self.interference["macro"]
        return self.right_inverse() @ self.interference_matrix()

    def iteration_offset(self) -> np.ndarray:
        if self.num_layers == 1:
            return self.noise_load.copy()
        return self.right_inverse() @ self.noise_load

    def split(self, x) -> dict:
        """Split a stacked power vector into per-layer vectors."""
        n = self.num_users
        x = np.asarray(x, dtype=float)
        return {l: x[k * n : (k + 1) * n] for k, l in enumerate(self.layers)}

    def residual(self, x) -> np.ndarray:
        """Balance residual serving@x - interference@x - noise_load."""
        x = np.asarray(x, dtype=float)
        return self.serving_matrix() @ x - self.interference_matrix() @ x - self.noise_load

    def achieved_sinr(self, x) -> np.ndarray:
        """Per-user linear SINR for a stacked power vector."""
        x = np.asarray(x, dtype=float)
        useful = self.serving_matrix() @ x
        interf = self.interference_matrix() @ x
        return self.targets * useful / (interf + self.noise_load)

    def to_text(self) -> str:
        """Plain-text dump (row-major) for debugging and shell-level solves."""
        out = io.StringIO()
        out.write(f"users {self.num_users}\n")
        out.write(f"layers {self.num_layers}\n")
        def vec(name, v):
            out.write(name + "\n")
            out.write(" ".join(repr(float(x)) for x in v) + "\n")
        def mat(name, m):
            out.write(name + "\n")
            for row in m:
                out.write(" ".join(repr(float(x)) for x in row) + "\n")
        vec("targets", self.targets)
        vec("noise_load", self.noise_load)
        for l in self.layers:
            vec(f"serving_ratio {l}", self.serving_ratio[l])
            mat(f"interference {l}", self.interference[l])
        return out.getvalue()


def system_from_text(text: str) -> NormalizedSystem:
    """Parse the ``to_text`` format; raises ConfigurationError on malformed input."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    pos = 0

    def next_line():
        nonlocal pos
        if pos >= len(lines):
            raise ConfigurationError("truncated system file")
        ln = lines[pos]
        pos += 1
        return ln

    def expect_header(key):
        parts = next_line().split()
        if len(parts) != 2 or parts[0] != key:
            raise ConfigurationError(f"expected '{key} <int>' header")
        try:
            return int(parts[1])
        except ValueError as exc:
            raise ConfigurationError(f"bad {key} header") from exc

    def read_vector(label, n):
        got = next_line()
        if got != label:
            raise ConfigurationError(f"expected block {label!r}, got {got!r}")
        vals = next_line().split()
        if len(vals) != n:
            raise ConfigurationError(f"block {label!r}: expected {n} values")
        try:
            return np.array([float(v) for v in vals])
        except ValueError as exc:
            raise ConfigurationError(f"block {label!r}: non-numeric value") from exc

    def read_matrix(label, n):
        got = next_line()
        if got != label:
            raise ConfigurationError(f"expected block {label!r}, got {got!r}")
        rows = []
        for _ in range(n):
            vals = next_line().split()
            if len(vals) != n:
                raise ConfigurationError(f"block {label!r}: expected {n} columns")
            try:
                rows.append([float(v) for v in vals])
            except ValueError as exc:
                raise ConfigurationError(f"block {label!r}: non-numeric value") from exc
        return np.array(rows)

    n = expect_header("users")
    num_layers = expect_header("layers")
    if not 1 <= num_layers <= len(LAYERS):
        raise ConfigurationError(f"layers must be 1..{len(LAYERS)}")
    targets = read_vector("targets", n)
    noise_load = read_vector("noise_load", n)
    interference = {}
    serving_ratio = {}
    for l in LAYERS[:num_layers]:
        serving_ratio[l] = read_vector(f"serving_ratio {l}", n)
        interference[l] = read_matrix(f"interference {l}", n)
    if pos != len(lines):
        raise ConfigurationError("trailing content after system blocks")
    system = NormalizedSystem(
        targets=targets,
        noise_load=noise_load,
        interference=interference,
        serving_ratio=serving_ratio,
    )
    _validate_system(system)
    return system


def _validate_system(system: NormalizedSystem) -> None:
    for l in system.layers:
        m = system.interference[l]
        if np.any(np.diag(m) != 0):
            raise ConfigurationError(f"interference[{l!r}] must have a zero diagonal")
        if np.any(m < 0) or np.any(system.serving_ratio[l] < 0):
            raise ConfigurationError(f"layer {l!r} has negative entries")
    if np.any(system.targets <= 0):
        raise ConfigurationError("targets must be positive")
    if np.any(system.noise_load < 0):
        raise ConfigurationError("noise_load must be nonnegative")
    if np.any(system.serving_ratio["macro"] != 1.0):
        raise ConfigurationError("macro serving ratios must be 1")


def _build(gains: LayeredGains, layers: tuple) -> NormalizedSystem:
    n = gains.num_users
    g = gains.gains["macro"]
    serving = np.diag(g).copy()
    if np.any(serving == 0):
        bad = np.asarray(gains.user_ids)[serving == 0].tolist()
        raise ServingLinkError(f"zero serving macro gain for users {bad}")
    targets = np.asarray(gains.targets, dtype=float)
    noise = np.asarray(gains.noise_W, dtype=float)
    interference = {}
    serving_ratio = {}
    for l in layers:
        h = gains.gains[l]
        m = targets[:, None] * h / serving[:, None]
        np.fill_diagonal(m, 0.0)
        interference[l] = m
        if l == "macro":
            serving_ratio[l] = np.ones(n)
        else:
            serving_ratio[l] = np.diag(h) / serving
    return NormalizedSystem(
        targets=targets,
        noise_load=targets * noise / serving,
        interference=interference,
        serving_ratio=serving_ratio,
        user_ids=np.asarray(gains.user_ids).copy(),
        tx_ids={l: np.asarray(gains.tx_ids[l]).copy() for l in layers},
    )


def build_single_layer(gains: LayeredGains) -> NormalizedSystem:
    """Macro-only normalized system."""
    return _build(gains, ("macro",))


def build_two_layer(gains: LayeredGains) -> NormalizedSystem:
    """Macro + micro normalized system (micro gains may be all zero)."""
    if "micro" not in gains.gains:
        raise ConfigurationError("two-layer build requires a micro layer")
    return _build(gains, ("macro", "micro"))


def build_multi_layer(gains: LayeredGains, layer_count: int) -> NormalizedSystem:
    """First ``layer_count`` layers in macro/micro/pico order."""
    if not 1 <= layer_count <= len(LAYERS):
        raise ConfigurationError(f"layer_count must be 1..{len(LAYERS)}")
    layers = LAYERS[:layer_count]
    for l in layers:
        if l not in gains.gains:
            raise ConfigurationError(f"layer {l!r} missing from gains")
    return _build(gains, layers)


def microcell_association_mask(gains: LayeredGains) -> np.ndarray:
    """True where a user's best micro link beats its serving macro link."""
    if "micro" not in gains.gains:
        raise ConfigurationError("association mask requires a micro layer")
    return np.diag(gains.gains["micro"]) > np.diag(gains.gains["macro"])
