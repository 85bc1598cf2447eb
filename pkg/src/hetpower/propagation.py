"""Link-budget primitives: path loss, sector antenna pattern, shadowing, MCL.

Distances are in km, the carrier frequency in MHz, losses and gains in dB.
Linear channel gains are dimensionless power ratios ``10**(-loss/10)``.

Two environments are modeled, following the ETSI/3GPP urban test
deployments: a macro layer (base stations above rooftop, 3-sector
antennas) and a micro layer (street-level base stations, omnidirectional).
A pico layer reuses the micro model with a configurable loss offset since
no separate model is standardized for it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

LAYERS = ("macro", "micro", "pico")

# Distance floor used by link-level functions so that coincident positions
# produce an MCL-clamped loss instead of an infinite gain.
_MIN_LINK_DISTANCE_KM = 1e-9


@dataclass(frozen=True)
class PropagationParams:
    """Propagation constants; defaults are the urban reference values.

    The reduced-form slope/intercept pairs are the standard constants at
    2000 MHz (macro height 15 m above average rooftop). ``validate``
    cross-checks them against the general formulas.
    """

    carrier_MHz: float = 2000.0
    macro_bs_height_m: float = 15.0  # above average rooftop
    macro_slope_dB: float = 37.6
    macro_intercept_dB: float = 128.15
    micro_slope_dB: float = 40.0
    micro_intercept_dB: float = 148.0
    shadow_sigma_dB: float = 10.0
    mcl_macro_dB: float = 70.0
    mcl_micro_dB: float = 53.0
    mcl_pico_dB: float = 53.0  # no standardized value; micro default
    g_tx_dBi: float = 11.0
    g_rx_dBi: float = 0.0
    theta_3dB_deg: float = 65.0
    a_max_dB: float = 20.0
    pico_offset_dB: float = 0.0  # pico loss = micro loss + offset

    def mcl_dB(self, layer: str) -> float:
        if layer == "macro":
            return self.mcl_macro_dB
        if layer == "micro":
            return self.mcl_micro_dB
        if layer == "pico":
            return self.mcl_pico_dB
        raise ConfigurationError(f"unknown layer {layer!r}; expected one of {LAYERS}")

    def validate(self) -> None:
        """Raise ConfigurationError on out-of-domain or inconsistent values.

        The reduced-form constants must agree with the general path-loss
        formulas evaluated at the configured height/frequency to within
        0.05 dB (intercept at 1 km, slope per decade).
        """
        scalars = {
            "carrier_MHz": self.carrier_MHz,
            "macro_slope_dB": self.macro_slope_dB,
            "macro_intercept_dB": self.macro_intercept_dB,
            "micro_slope_dB": self.micro_slope_dB,
            "micro_intercept_dB": self.micro_intercept_dB,
            "shadow_sigma_dB": self.shadow_sigma_dB,
            "mcl_macro_dB": self.mcl_macro_dB,
            "mcl_micro_dB": self.mcl_micro_dB,
            "mcl_pico_dB": self.mcl_pico_dB,
            "g_tx_dBi": self.g_tx_dBi,
            "g_rx_dBi": self.g_rx_dBi,
            "theta_3dB_deg": self.theta_3dB_deg,
            "a_max_dB": self.a_max_dB,
        }
        for name, value in scalars.items():
            if not np.isfinite(value):
                raise ConfigurationError(f"propagation.{name} must be finite, got {value!r}")
        if self.carrier_MHz <= 0:
            raise ConfigurationError("propagation.carrier_MHz must be positive")
        if self.shadow_sigma_dB < 0:
            raise ConfigurationError("propagation.shadow_sigma_dB must be >= 0")
        for name in ("mcl_macro_dB", "mcl_micro_dB", "mcl_pico_dB"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"propagation.{name} must be positive")
        if self.theta_3dB_deg <= 0:
            raise ConfigurationError("propagation.theta_3dB_deg must be positive")

        tol = 0.05
        gen_slope = 40.0 * (1.0 - 4e-3 * self.macro_bs_height_m)
        gen_intercept = macro_path_loss_general_dB(
            1.0, self.macro_bs_height_m, self.carrier_MHz
        )
        if abs(gen_slope - self.macro_slope_dB) > tol:
            raise ConfigurationError(
                f"macro_slope_dB={self.macro_slope_dB} disagrees with the general "
                f"form ({gen_slope:.4f}) beyond {tol} dB"
            )
        if abs(gen_intercept - self.macro_intercept_dB) > tol:
            raise ConfigurationError(
                f"macro_intercept_dB={self.macro_intercept_dB} disagrees with the "
                f"general form ({gen_intercept:.4f}) beyond {tol} dB"
            )
        micro_intercept = micro_path_loss_general_dB(1.0, self.carrier_MHz)
        if abs(micro_intercept - self.micro_intercept_dB) > tol:
            raise ConfigurationError(
                f"micro_intercept_dB={self.micro_intercept_dB} disagrees with the "
                f"general form ({micro_intercept:.4f}) beyond {tol} dB"
            )
        if abs(self.micro_slope_dB - 40.0) > tol:
            raise ConfigurationError(
                f"micro_slope_dB={self.micro_slope_dB} disagrees with the general "
                f"form (40.0) beyond {tol} dB"
            )


_DEFAULTS = PropagationParams()


def _check_positive_distance(d_km) -> np.ndarray:
    d = np.asarray(d_km, dtype=float)
    if np.any(d <= 0):
        raise ValueError("path-loss distance must be positive (km)")
    return d


def macro_path_loss_dB(d_km, params: PropagationParams = _DEFAULTS):
    """Urban macro path loss, reduced form: slope*log10(d) + intercept.

    At the defaults this is 37.6*log10(d) + 128.15 dB with d in km.
    """
    d = _check_positive_distance(d_km)
    out = params.macro_slope_dB * np.log10(d) + params.macro_intercept_dB
    return out if out.ndim else float(out)


def macro_path_loss_general_dB(d_km, bs_height_m: float = 15.0, carrier_MHz: float = 2000.0):
    """General urban macro path loss.

    40*(1 - 4e-3*dh)*log10(d) - 18*log10(dh) + 21*log10(f) + 80, with dh the
    base-station height above average rooftop in m, d in km, f in MHz.
    Reduces to the 37.6/128.15 form at dh=15 m, f=2000 MHz.
    """
    d = _check_positive_distance(d_km)
    if bs_height_m <= 0:
        raise ValueError("base-station height above rooftop must be positive")
    out = (
        40.0 * (1.0 - 4e-3 * bs_height_m) * np.log10(d)
        - 18.0 * np.log10(bs_height_m)
        + 21.0 * np.log10(carrier_MHz)
        + 80.0
    )
    return out if out.ndim else float(out)


def micro_path_loss_dB(d_km, params: PropagationParams = _DEFAULTS):
    """Street-level micro path loss, reduced form: 40*log10(d) + 148 dB at 2 GHz."""
    d = _check_positive_distance(d_km)
    out = params.micro_slope_dB * np.log10(d) + params.micro_intercept_dB
    return out if out.ndim else float(out)


def micro_path_loss_general_dB(d_km, carrier_MHz: float = 2000.0):
    """General micro path loss: 40*log10(d) + 30*log10(f) + 49 (d km, f MHz).

    Aggregates free-space, rooftop-to-street diffraction and multi-screen
    diffraction for the standard urban street parameters.
    """
    d = _check_positive_distance(d_km)
    out = 40.0 * np.log10(d) + 30.0 * np.log10(carrier_MHz) + 49.0
    return out if out.ndim else float(out)


def sector_antenna_gain_dB(theta_deg, params: PropagationParams = _DEFAULTS):
    """Horizontal 3-sector pattern A(theta) = -min(12*(theta/theta3dB)^2, Amax).

    theta is the angle off boresight; any input angle is normalized into
    [-180, 180] first. Result is in dBi relative to the sector peak.
    """
    th = np.asarray(theta_deg, dtype=float)
    th = (th + 180.0) % 360.0 - 180.0
    out = -np.minimum(12.0 * (th / params.theta_3dB_deg) ** 2, params.a_max_dB)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class LinkGain:
    """One transmitter-to-user link budget with its logged components.

    loss_dB is the effective loss after the MCL floor; gain_linear is
    10**(-loss_dB/10). antenna_dBi is the total antenna gain (tx pattern
    included for macro sectors, rx gain included for all layers).
    """

    loss_dB: float
    gain_linear: float
    path_loss_dB: float
    antenna_dBi: float
    shadow_dB: float
    mcl_applied: bool


def link_loss_dB(layer, d_km, shadow_dB, params: PropagationParams = _DEFAULTS, theta_deg=None):
    """Effective link loss max(PL + shadow - G_tx - G_rx, MCL), vectorized.

    Macro links include the sector pattern (theta_deg required); micro and
    pico links are omnidirectional. Distances at or below the coincidence
    floor are clamped so the MCL keeps the loss finite.
    """
    d = np.maximum(np.asarray(d_km, dtype=float), _MIN_LINK_DISTANCE_KM)
    if layer == "macro":
        if theta_deg is None:
            raise ValueError("macro links require the off-boresight angle")
        pl = macro_path_loss_dB(d, params)
        antenna = params.g_tx_dBi + sector_antenna_gain_dB(theta_deg, params) + params.g_rx_dBi
    elif layer in ("micro", "pico"):
        pl = micro_path_loss_dB(d, params)
        if layer == "pico":
            pl = pl + params.pico_offset_dB
        antenna = params.g_tx_dBi + params.g_rx_dBi
    else:
        raise ConfigurationError(f"unknown layer {layer!r}; expected one of {LAYERS}")
    return np.maximum(pl + shadow_dB - antenna, params.mcl_dB(layer))


def link_gain(layer, d_km, shadow_dB, params: PropagationParams = _DEFAULTS, theta_deg=None) -> LinkGain:
    """Scalar link budget with component bookkeeping.

    Returns a LinkGain whose loss recomposes exactly as
    max(path_loss + shadow - antenna, MCL).
    """
    d = max(float(d_km), _MIN_LINK_DISTANCE_KM)
    if layer == "macro":
        if theta_deg is None:
            raise ValueError("macro links require the off-boresight angle")
        pl = float(macro_path_loss_dB(d, params))
        antenna = float(
            params.g_tx_dBi + sector_antenna_gain_dB(theta_deg, params) + params.g_rx_dBi
        )
    elif layer in ("micro", "pico"):
        pl = float(micro_path_loss_dB(d, params))
        if layer == "pico":
            pl += params.pico_offset_dB
        antenna = params.g_tx_dBi + params.g_rx_dBi
    else:
        raise ConfigurationError(f"unknown layer {layer!r}; expected one of {LAYERS}")
    mcl = params.mcl_dB(layer)
    unclamped = pl + float(shadow_dB) - antenna
    clamped = unclamped < mcl
    loss = mcl if clamped else unclamped
    return LinkGain(
        loss_dB=loss,
        gain_linear=10.0 ** (-loss / 10.0),
        path_loss_dB=pl,
        antenna_dBi=antenna,
        shadow_dB=float(shadow_dB),
        mcl_applied=bool(clamped),
    )


def gain_from_loss(loss_dB):
    """Linear power gain for a loss in dB."""
    return 10.0 ** (-np.asarray(loss_dB, dtype=float) / 10.0)
