"""Link budget: beam geometry, transmit power, achievable rate, detection SNR.

All internal power math is in watts; dBm appears only at conversion helpers.
Angles are radians internally.

Note on the wavelength: we compute lambda_w = c / fc (the dimensionally
consistent definition). Some write-ups of this link model carry the inverted
form fc / c, which has units of 1/m and cannot enter the SNR scaling factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.constants import c as SPEED_OF_LIGHT
from scipy.special import ndtri


def watt_to_dbm(p_w: float) -> float:
    """Convert power in watts to dBm. Rejects non-positive power."""
    if p_w <= 0.0:
        raise ValueError(f"power must be positive for dBm conversion, got {p_w}")
    return 10.0 * math.log10(p_w * 1e3)


def dbm_to_watt(p_dbm: float) -> float:
    """Convert power in dBm to watts."""
    return 10.0 ** (p_dbm / 10.0) * 1e-3


def qfunc(x: float) -> float:
    """Gaussian tail probability Q(x) = P[N(0,1) > x]."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def qfunc_inv(p: float) -> float:
    """Inverse of the Gaussian tail function. p strictly inside (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"Q^-1 argument must be in (0,1), got {p}")
    return -float(ndtri(p))


@dataclass(frozen=True)
class RadioConfig:
    """Geometry, spectrum and noise parameters of the BS-to-road link.

    theta_rad: total angular coverage of the BS.
    d0_m: perpendicular distance from the BS to the road.
    num_sublinks: number S of equal road sub-links.
    w_tot_hz: bandwidth.
    fc_hz: carrier frequency.
    xi: antenna efficiency, 0 < xi <= 1.
    n0_dbm_hz: noise power spectral density in dBm/Hz (converted internally).
    delta_t_s: micro time-slot duration.
    """

    theta_rad: float
    d0_m: float
    num_sublinks: int
    w_tot_hz: float
    fc_hz: float
    xi: float
    n0_dbm_hz: float
    delta_t_s: float

    def __post_init__(self) -> None:
        if not 0.0 < self.theta_rad < math.pi:
            raise ValueError(f"theta_rad must be in (0, pi), got {self.theta_rad}")
        if self.d0_m <= 0.0:
            raise ValueError(f"d0_m must be positive, got {self.d0_m}")
        if self.num_sublinks < 1:
            raise ValueError(f"num_sublinks must be >= 1, got {self.num_sublinks}")
        if self.w_tot_hz <= 0.0 or self.fc_hz <= 0.0:
            raise ValueError("bandwidth and carrier frequency must be positive")
        if not 0.0 < self.xi <= 1.0:
            raise ValueError(f"xi must be in (0, 1], got {self.xi}")
        if self.delta_t_s <= 0.0:
            raise ValueError(f"delta_t_s must be positive, got {self.delta_t_s}")

    @property
    def delta_s_m(self) -> float:
        """Sub-link length: the road span 2*d0*tan(theta/2) split into S parts."""
        return 2.0 * self.d0_m * math.tan(self.theta_rad / 2.0) / self.num_sublinks

    @property
    def n0_w_hz(self) -> float:
        return dbm_to_watt(self.n0_dbm_hz)

    @property
    def half_span_m(self) -> float:
        return self.d0_m * math.tan(self.theta_rad / 2.0)


@dataclass(frozen=True)
class DetectionSpec:
    """Target false-alarm and mis-detection probabilities for beam training."""

    p_fa: float
    p_md: float

    def __post_init__(self) -> None:
        for name, val in (("p_fa", self.p_fa), ("p_md", self.p_md)):
            if not 0.0 < val < 1.0:
                raise ValueError(f"{name} must be strictly inside (0,1), got {val}")

    @classmethod
    def symmetric(cls, epsilon: float) -> "DetectionSpec":
        return cls(p_fa=epsilon, p_md=epsilon)


def gamma_factor(cfg: RadioConfig) -> float:
    """SNR scaling factor: lambda_w^2 * xi / (8*pi*N0*W_tot), lambda_w = c/fc."""
    lambda_w = SPEED_OF_LIGHT / cfg.fc_hz
    return lambda_w**2 * cfg.xi / (8.0 * math.pi * cfg.n0_w_hz * cfg.w_tot_hz)


def beam_angles(cfg: RadioConfig, s: int) -> tuple[float, float]:
    """Angular support [lo, hi] of the s-th beam, s in 1..S.

    The s-th beam covers the road segment [(s-1)*delta_s, s*delta_s] measured
    from the road edge at -d0*tan(theta/2).
    """
    if not 1 <= s <= cfg.num_sublinks:
        raise ValueError(f"sub-link index {s} out of range 1..{cfg.num_sublinks}")
    lo = math.atan((-cfg.half_span_m + (s - 1) * cfg.delta_s_m) / cfg.d0_m)
    hi = math.atan((-cfg.half_span_m + s * cfg.delta_s_m) / cfg.d0_m)
    return lo, hi


def total_power(cfg: RadioConfig, target_snr: float, n_beams: int) -> float:
    """Total transmit power sustaining target_snr over n_beams sub-links.

    Linear in both the target SNR and the number of covered sub-links;
    independent of which sub-links are covered.
    """
    if target_snr <= 0.0:
        raise ValueError(f"target_snr must be positive, got {target_snr}")
    if not 1 <= n_beams <= cfg.num_sublinks:
        raise ValueError(f"n_beams {n_beams} out of range 1..{cfg.num_sublinks}")
    return target_snr * cfg.delta_s_m * cfg.d0_m * n_beams / gamma_factor(cfg)


def achievable_rate(cfg: RadioConfig, p_total_w: float, n_beams: int) -> float:
    """Achievable rate (bit/s) for total power p_total_w spread over n_beams."""
    if p_total_w < 0.0:
        raise ValueError(f"p_total_w must be non-negative, got {p_total_w}")
    if n_beams < 1:
        raise ValueError(f"n_beams must be >= 1, got {n_beams}")
    snr = gamma_factor(cfg) * p_total_w / (cfg.delta_s_m * cfg.d0_m * n_beams)
    return cfg.w_tot_hz * math.log2(1.0 + snr)


def detection_snr(spec: DetectionSpec) -> float:
    """Linear SNR required for the target (P_FA, P_MD) detection performance.

    Neyman-Pearson threshold test on a Gaussian channel gives
    SNR = (Q^-1(P_FA) - Q^-1(P_D))^2 with P_D = 1 - P_MD.
    """
    p_d = 1.0 - spec.p_md
    diff = qfunc_inv(spec.p_fa) - qfunc_inv(p_d)
    return diff * diff


def min_bt_power(cfg: RadioConfig, spec: DetectionSpec) -> float:
    """Minimum per-beam power (W) meeting the detection SNR target."""
    return detection_snr(spec) * cfg.delta_s_m * cfg.d0_m / gamma_factor(cfg)
