"""Power-allocation solvers over the normalized balance system.

Closed forms invert ``(I - T)`` for the stacked coupling matrix T (plain
interference matrix for one layer, right-inverse times interference blocks
for two or three), the distributed scheme iterates ``x <- T x + offset``,
and the capped problem is a linear program solved by the dense simplex.
Feasibility is decided by the Perron root of T: targets are jointly
reachable with finite nonnegative powers iff it is below one.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DivergenceError,
    InfeasibleError,
    NumericalError,
    SolutionValidityError,
)
from .gain_matrix import LayeredGains, NormalizedSystem, build_multi_layer
from .simplex import LpInfeasibleError, solve_lp_dense

# Closed-form components within this of zero are floating-point noise and
# snapped to 0; anything more negative is a reported validity failure.
_NEGATIVE_NOISE = 1e-10
_RESIDUAL_LIMIT = 1e-6


@dataclass(frozen=True)
class FeasibilityReport:
    """Perron root of a nonnegative coupling matrix and its eigenvector."""

    spectral_radius: float
    feasible: bool  # spectral_radius < 1
    dominant_eigenvector: np.ndarray  # nonnegative, unit 1-norm


@dataclass(frozen=True)
class IterationTrace:
    total_power_W: tuple
    iterations: int
    converged: bool


@dataclass(frozen=True)
class PowerAllocation:
    """Per-transmitter downlink powers with layer tags and diagnostics."""

    powers: dict  # layer -> (N,) W
    total_power_W: float
    feasible: bool
    cap_violations: tuple  # (layer, user index, power W, cap W)
    achieved_sinr: np.ndarray  # (N,) linear
    solver_path: str  # analytic | iterative | lp | lp-fallback
    spectral_radius: float | None
    residual: float  # max-norm balance residual relative to the noise load

    @property
    def layers(self) -> tuple:
        return tuple(self.powers)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.powers[l] for l in self.powers])

    def macro_sleep_flags(self, threshold_W: float = 1e-3) -> np.ndarray:
        """Macro sectors effectively off because lower layers carry the user."""
        return self.powers["macro"] < threshold_W

    def to_json_dict(self, tx_ids=None, sleep_threshold_W: float = 1e-3) -> dict:
        transmitters = []
        for layer, p in self.powers.items():
            ids = None if tx_ids is None else tx_ids.get(layer)
            for i, watts in enumerate(p):
                watts = float(watts)
                transmitters.append(
                    {
                        "layer": layer,
                        "index": i,
                        "tx_id": int(ids[i]) if ids is not None else i,
                        "power_W": watts,
                        "power_dBm": 10.0 * np.log10(watts * 1000.0) if watts > 0 else None,
                        "asleep": bool(layer == "macro" and watts < sleep_threshold_W),
                    }
                )
        return {
            "solver_path": self.solver_path,
            "feasible": self.feasible,
            "total_power_W": self.total_power_W,
            "spectral_radius": self.spectral_radius,
            "residual": self.residual,
            "achieved_sinr": [float(s) for s in self.achieved_sinr],
            "cap_violations": [
                {"layer": l, "index": int(i), "power_W": float(p), "cap_W": float(cp)}
                for (l, i, p, cp) in self.cap_violations
            ],
            "transmitters": transmitters,
        }


def _balance(m: np.ndarray, sweeps: int = 10):
    """Diagonal similarity scaling equalizing row and column sums.

    Leaves the spectrum untouched while tightening the row-sum bound on
    the Perron root, which keeps the power-iteration shift proportionate.
    Returns (balanced matrix, diagonal d) with balanced = D m D^-1.
    """
    n = m.shape[0]
    d = np.ones(n)
    a = m.copy()
    for _ in range(sweeps):
        r = a.sum(axis=1)
        c = a.sum(axis=0)
        ok = (r > 0) & (c > 0)
        s = np.ones(n)
        s[ok] = np.sqrt(c[ok] / r[ok])
        s = np.clip(s, 1e-8, 1e8)
        if np.allclose(s, 1.0, rtol=1e-3):
            break
        a *= s[:, None]
        a /= s[None, :]
        d *= s
    return a, d


def spectral_radius(matrix, tol: float = 1e-10, max_iters: int = 10000) -> FeasibilityReport:
    """Perron root of a square nonnegative matrix by power iteration.

    Starts from the all-ones vector on a balanced copy of the matrix. A
    positive diagonal shift keeps the iteration convergent on cyclic
    patterns (zero-diagonal interference matrices are 2-cyclic for N=2)
    without moving the Perron vector; the shift is subtracted from the
    converged eigenvalue. Balancing and shift are similarity/offset
    transforms, so the reported root is exact for the input matrix.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("spectral_radius expects a square matrix")
    if np.any(m < 0):
        raise ValueError("spectral_radius expects a nonnegative matrix")
    n = m.shape[0]
    if n == 0:
        return FeasibilityReport(0.0, True, np.zeros(0))
    if float(m.sum()) == 0.0:
        return FeasibilityReport(0.0, True, np.full(n, 1.0 / n))
    a, d = _balance(m)
    shift = 0.5 * float(a.sum(axis=1).max())
    x = np.full(n, 1.0 / n)
    rho = 0.0
    for _ in range(max_iters):
        y = a @ x + shift * x
        norm = y.sum()  # y >= 0 for nonnegative a and x
        if norm == 0.0:
            return FeasibilityReport(0.0, True, np.abs(x / d) / np.abs(x / d).sum())
        rho_new = float(x @ y) / float(x @ x) - shift
        x = y / norm
        if abs(rho_new - rho) <= tol * max(abs(rho_new), 1e-12):
            rho = max(rho_new, 0.0)
            vec = np.maximum(x / d, 0.0)
            return FeasibilityReport(rho, rho < 1.0, vec / vec.sum())
        rho = rho_new
    residual = float(np.max(np.abs(a @ x - rho * x)))
    err = NumericalError(
        f"power iteration did not converge in {max_iters} iterations "
        f"(estimate {rho:.9f})",
        iterations=max_iters,
        residual=residual,
        last_iterate=x / d,
    )
    err.estimate = max(rho, 0.0)
    raise err


def _allocation_from_stacked(system: NormalizedSystem, x: np.ndarray, path: str, rho: float | None) -> PowerAllocation:
    u_scale = float(np.max(np.abs(system.noise_load)))
    res = float(np.max(np.abs(system.residual(x)))) / max(u_scale, 1e-300)
    return PowerAllocation(
        powers=system.split(x),
        total_power_W=float(x.sum()),
        feasible=True,
        cap_violations=(),
        achieved_sinr=system.achieved_sinr(x),
        solver_path=path,
        spectral_radius=rho,
        residual=res,
    )


def _closed_form(system: NormalizedSystem, force_sleep_mask=None) -> PowerAllocation:
    """Solve serving@x = interference@x + noise_load for the stacked powers.

    With ``force_sleep_mask`` set, the macro variables of the flagged users
    are eliminated (their columns dropped) before inverting, which forces
    those sectors to zero power. The reduced serving blocks stay diagonal,
    so the right inverse remains closed-form.
    """
    n = system.num_users
    layers = system.layers
    nvar = n * len(layers)
    serving = system.serving_matrix()
    interf = system.interference_matrix()
    active = np.ones(nvar, dtype=bool)
    if force_sleep_mask is not None:
        mask = np.asarray(force_sleep_mask, dtype=bool)
        if mask.shape != (n,):
            raise ValueError("force_sleep_mask must have one flag per user")
        active[:n] = ~mask
        gram = np.zeros(n)
        for l in layers:
            r = system.serving_ratio[l].copy()
            if l == "macro":
                r[mask] = 0.0
            gram += r * r
        if np.any(gram == 0.0):
            bad = np.asarray(system.user_ids)[gram == 0.0].tolist()
            raise InfeasibleError(
                f"users {bad} have no serving link left after forcing macro sleep"
            )
        blocks = []
        for l in layers:
            r = system.serving_ratio[l].copy()
            if l == "macro":
                r[mask] = 0.0
            blocks.append(np.diag(r / gram))
        right_inv = np.vstack(blocks)[active]
        coupling = right_inv @ interf[:, active]
        offset = right_inv @ system.noise_load
    elif len(layers) == 1:
        coupling = system.interference["macro"]
        offset = system.noise_load
    else:
        right_inv = system.right_inverse()
        coupling = right_inv @ interf
        offset = right_inv @ system.noise_load

    rho = None
    resolved = True
    try:
        report = spectral_radius(coupling)
        rho = report.spectral_radius
        if not report.feasible:
            raise InfeasibleError(
                f"targets infeasible: coupling spectral radius {rho:.6f} >= 1",
                spectral_radius=rho,
            )
    except NumericalError as exc:
        # Perron root too close to 1 (clustered eigenvalues) for the power
        # iteration to resolve; the solved vector's sign decides exactly,
        # since with strictly positive noise loads x >= 0 iff rho < 1.
        rho = getattr(exc, "estimate", None)
        resolved = False
    try:
        sol = np.linalg.solve(np.eye(coupling.shape[0]) - coupling, offset)
    except np.linalg.LinAlgError as exc:
        raise InfeasibleError(
            "coupling matrix has a unit eigenvalue; targets are on the "
            "feasibility boundary",
            spectral_radius=rho,
        ) from exc
    x = np.zeros(nvar)
    x[active] = sol
    low = float(sol.min(initial=0.0))
    if low < -_NEGATIVE_NOISE:
        if not resolved:
            raise InfeasibleError(
                f"targets infeasible: solved power went negative ({low:.3e}) "
                f"with Perron root near 1 (estimate {rho})",
                spectral_radius=rho,
            )
        raise SolutionValidityError(
            f"closed-form power went negative ({low:.3e}); solution rejected"
        )
    x = np.maximum(x, 0.0)
    u_scale = max(float(np.max(np.abs(system.noise_load))), 1e-300)
    res = float(np.max(np.abs(system.residual(x)))) / u_scale
    if res > _RESIDUAL_LIMIT:
        raise NumericalError(
            f"balance residual {res:.3e} exceeds {_RESIDUAL_LIMIT}", residual=res
        )
    return _allocation_from_stacked(system, x, "analytic", rho)


def solve_single_layer(system: NormalizedSystem) -> PowerAllocation:
    """Minimal-power solution for a macro-only system (targets met with equality)."""
    if system.num_layers != 1:
        raise ValueError("solve_single_layer expects a 1-layer system")
    return _closed_form(system)


def solve_two_layer(system: NormalizedSystem, force_sleep_mask=None) -> PowerAllocation:
    """Closed-form stacked solution for a macro+micro system."""
    if system.num_layers != 2:
        raise ValueError("solve_two_layer expects a 2-layer system")
    return _closed_form(system, force_sleep_mask)


def solve_multi_layer(system: NormalizedSystem, force_sleep_mask=None) -> PowerAllocation:
    """Closed-form stacked solution for any 1..3-layer system."""
    return _closed_form(system, force_sleep_mask)


def iterate_distributed(
    system: NormalizedSystem,
    p0=None,
    max_iters: int = 10000,
    tol: float = 1e-9,
    power_ceiling_W: float = 1e6,
):
    """Distributed fixed-point update x <- T x + offset.

    Each transmitter rescales its power from locally measured interference;
    for spectral radius below one this converges to the closed-form
    solution from any nonnegative start. Returns (allocation, trace); the
    trace logs total power per iteration. Total power beyond
    ``power_ceiling_W`` raises DivergenceError, which in exact arithmetic
    happens iff the spectral radius is >= 1.
    """
    coupling = system.iteration_matrix()
    offset = system.iteration_offset()
    nvar = coupling.shape[0]
    x = np.zeros(nvar) if p0 is None else np.asarray(p0, dtype=float).copy()
    if x.shape != (nvar,):
        raise ValueError(f"p0 must have shape ({nvar},)")
    if np.any(x < 0):
        raise ValueError("p0 must be componentwise nonnegative")
    totals = []
    for it in range(1, max_iters + 1):
        x_new = coupling @ x + offset
        total = float(x_new.sum())
        totals.append(total)
        if total > power_ceiling_W:
            raise DivergenceError(total, it)
        change = float(np.max(np.abs(x_new - x)))
        x = x_new
        if change <= tol * max(float(np.max(np.abs(x))), 1e-300):
            trace = IterationTrace(tuple(totals), it, True)
            return _allocation_from_stacked(system, x, "iterative", None), trace
    raise NumericalError(
        f"distributed iteration did not converge in {max_iters} iterations",
        iterations=max_iters,
        last_iterate=x,
    )


def _caps_vector(system: NormalizedSystem, caps) -> np.ndarray:
    n = system.num_users
    out = np.full(n * system.num_layers, np.inf)
    if caps:
        for k, l in enumerate(system.layers):
            cap = caps.get(l)
            if cap is not None:
                out[k * n : (k + 1) * n] = cap
    return out


def solve_lp_system(system: NormalizedSystem, caps=None) -> PowerAllocation:
    """Minimum total power under SINR and per-layer cap constraints.

    The SINR constraints are the normalized balance rows with >= in place
    of equality, so the LP minimizes over a superset of the closed form's
    equality solution and its optimum can only be lower.
    """
    a_ge = system.serving_matrix() - system.interference_matrix()
    b_ge = system.noise_load
    upper = _caps_vector(system, caps)
    nvar = a_ge.shape[1]
    try:
        sol = solve_lp_dense(np.ones(nvar), a_ge, b_ge, upper)
    except LpInfeasibleError as exc:
        users = [int(system.user_ids[i]) for i in exc.binding_users if i < system.num_users]
        raise InfeasibleError(
            f"LP infeasible under caps; binding users {users}",
            binding_users=users,
        ) from exc
    x = sol.x
    slack = b_ge - a_ge @ x
    res = float(np.max(slack)) / max(float(np.max(np.abs(b_ge))), 1e-300)
    return PowerAllocation(
        powers=system.split(x),
        total_power_W=float(x.sum()),
        feasible=True,
        cap_violations=(),
        achieved_sinr=system.achieved_sinr(x),
        solver_path="lp",
        spectral_radius=None,
        residual=max(res, 0.0),
    )


def solve_lp(gains: LayeredGains, caps=None) -> PowerAllocation:
    """LP solve straight from layered gains (all present layers used)."""
    system = build_multi_layer(gains, len(gains.layers))
    return solve_lp_system(system, caps)


def find_cap_violations(allocation: PowerAllocation, caps) -> tuple:
    if not caps:
        return ()
    out = []
    for layer, p in allocation.powers.items():
        cap = caps.get(layer)
        if cap is None:
            continue
        for i in np.flatnonzero(p > cap * (1.0 + 1e-9) + 1e-15):
            out.append((layer, int(i), float(p[i]), float(cap)))
    return tuple(out)


def select_solver(system: NormalizedSystem, caps=None, mode: str = "auto", force_sleep_mask=None) -> PowerAllocation:
    """Closed form first; fall back to the LP when a cap is exceeded.

    mode "analytic" never falls back (cap violations are recorded on the
    allocation), mode "lp" always uses the LP, mode "auto" dispatches.
    Raises a combined InfeasibleError when both routes fail.
    """
    if mode not in ("analytic", "lp", "auto"):
        raise ValueError(f"unknown solver mode {mode!r}")
    if mode == "lp":
        return solve_lp_system(system, caps)
    analytic_failure = None
    try:
        alloc = _closed_form(system, force_sleep_mask)
        violations = find_cap_violations(alloc, caps)
        if not violations:
            return alloc
        alloc = replace(alloc, cap_violations=violations)
        if mode == "analytic":
            return alloc
        analytic_failure = f"cap violations {violations}"
    except (InfeasibleError, SolutionValidityError) as exc:
        if mode == "analytic":
            raise
        analytic_failure = exc
    try:
        lp_alloc = solve_lp_system(system, caps)
    except InfeasibleError as exc:
        raise InfeasibleError(
            f"both solver paths failed: analytic ({analytic_failure}); lp ({exc})",
            spectral_radius=getattr(analytic_failure, "spectral_radius", None),
            binding_users=exc.binding_users,
        ) from exc
    return replace(lp_alloc, solver_path="lp-fallback")
