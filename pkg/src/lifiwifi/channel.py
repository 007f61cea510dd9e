"""LiFi line-of-sight and WiFi breakpoint channel models.

Rates are bits/second throughout. Link matrices are AP-major: row ``i`` is
AP ``i`` (LiFi rows first), column ``k`` is user ``k``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import LifiParams, WifiParams
from .geometry import Scenario, UserState, link_geometry_matrix

_E_OVER_2PI = math.e / (2 * math.pi)


@dataclass(frozen=True)
class ChannelSnapshot:
    """Per-slot link quality. ``snr`` is the interference-free variant used by SSS."""

    sinr: np.ndarray
    rate: np.ndarray
    snr: np.ndarray
    slot_index: int = 0

    @property
    def n_aps(self) -> int:
        return self.rate.shape[0]

    @property
    def n_users(self) -> int:
        return self.rate.shape[1]


# -- LiFi ---------------------------------------------------------------------

def lambertian_index(half_intensity_angle: float) -> float:
    # cos(pi/3) comes out one ulp above 0.5; snapping keeps m(60 deg) == 1
    c = round(math.cos(half_intensity_angle), 15)
    if not 0 < half_intensity_angle < math.pi / 2 or c <= 0:
        raise ValueError(f"half-intensity angle must lie in (0, pi/2), got {half_intensity_angle}")
    return -math.log(2) / math.log(c)


def concentrator_gain(params: LifiParams) -> float:
    return params.refractive_index ** 2 / math.sin(params.fov_semi_angle) ** 2


def _in_fov(params: LifiParams, cos_incidence):
    psi = np.arccos(np.clip(cos_incidence, -1.0, 1.0))
    return (psi >= 0) & (psi <= params.fov_semi_angle)


def lifi_channel_gain(params: LifiParams, distance: float, cos_irradiation: float, cos_incidence: float) -> float:
    """LoS optical DC gain of one LED/PD link; exactly 0 outside the receiver FoV."""
    if distance <= 0:
        raise ValueError("co-located LED and photodiode")
    if not _in_fov(params, cos_incidence):
        return 0.0
    m = lambertian_index(params.half_intensity_angle)
    return ((m + 1) * params.pd_area / (2 * math.pi * distance ** 2)
            * cos_irradiation ** m * params.optical_filter_gain
            * concentrator_gain(params) * cos_incidence)


def lifi_gain_matrix(params: LifiParams, distance: np.ndarray, cosine: np.ndarray) -> np.ndarray:
    if np.any(distance <= 0):
        raise ValueError("co-located LED and photodiode")
    m = lambertian_index(params.half_intensity_angle)
    gain = ((m + 1) * params.pd_area / (2 * math.pi * distance ** 2)
            * cosine ** m * params.optical_filter_gain
            * concentrator_gain(params) * cosine)
    return np.where(_in_fov(params, cosine), gain, 0.0)


def _received(params: LifiParams, gains):
    return (params.responsivity * np.asarray(gains, dtype=float) * params.tx_optical_power) ** 2


def lifi_sinr(params: LifiParams, gains, serving_ap: int) -> float:
    """SINR at one user served by ``serving_ap``; every other LiFi AP interferes."""
    power = _received(params, gains)
    if not 0 <= serving_ap < power.size:
        raise IndexError(f"serving AP {serving_ap} out of range")
    interference = power.sum() - power[serving_ap]
    return float(power[serving_ap] / (params.noise_psd * params.bandwidth + interference))


def lifi_sinr_matrix(params: LifiParams, gains: np.ndarray) -> np.ndarray:
    power = _received(params, gains)
    noise = params.noise_psd * params.bandwidth
    interference = power.sum(axis=0, keepdims=True) - power
    return power / (noise + interference)


def lifi_snr_matrix(params: LifiParams, gains: np.ndarray) -> np.ndarray:
    return _received(params, gains) / (params.noise_psd * params.bandwidth)


def lifi_rate(params: LifiParams, sinr):
    """Lower bound on achievable rate for intensity-modulated optical links."""
    r = params.bandwidth / 2 * np.log2(1 + _E_OVER_2PI * np.asarray(sinr, dtype=float))
    return float(r) if np.ndim(r) == 0 else r


# -- WiFi ---------------------------------------------------------------------

def free_space_loss(params: WifiParams, d):
    return 20 * np.log10(d) + 20 * math.log10(params.carrier_freq) - 147.5


def wifi_path_loss(params: WifiParams, d, rng: np.random.Generator | None = None):
    """Breakpoint path loss in dB; ``rng=None`` disables shadow fading."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be > 0")
    far = d > params.breakpoint_distance
    loss = free_space_loss(params, d) + np.where(far, 35 * np.log10(d / params.breakpoint_distance), 0.0)
    if rng is not None:
        sigma = np.where(far, params.shadow_sigma_far, params.shadow_sigma_near)
        loss = loss + rng.normal(0.0, 1.0, size=d.shape) * sigma
    return float(loss) if loss.ndim == 0 else loss


def rician_factor(params: WifiParams, d):
    return np.where(np.asarray(d) <= params.breakpoint_distance, 1.0, 0.0)


def wifi_channel_transfer(params: WifiParams, loss_db, d, rng: np.random.Generator | None = None):
    """Complex channel amplitude with Rician small-scale fading.

    With ``rng=None`` the small-scale factor is replaced by its RMS value of
    one, so ``|H|^2`` equals the large-scale gain exactly.
    """
    loss_db = np.asarray(loss_db, dtype=float)
    large = np.sqrt(10.0 ** (-loss_db / 10))
    if rng is None:
        h = large.astype(complex)
    else:
        kr = rician_factor(params, np.broadcast_to(d, loss_db.shape))
        phase = rng.uniform(0.0, 2 * math.pi, size=loss_db.shape)
        scatter = (rng.normal(size=loss_db.shape) + 1j * rng.normal(size=loss_db.shape)) / math.sqrt(2)
        h = large * (np.sqrt(kr / (1 + kr)) * np.exp(1j * phase) + np.sqrt(1 / (1 + kr)) * scatter)
    return complex(h) if h.ndim == 0 else h


def wifi_sinr_and_rate(params: WifiParams, h):
    """Noise-limited SNR and the rate with the half-bandwidth prefactor."""
    gamma = np.abs(np.asarray(h)) ** 2 * params.tx_power / (params.noise_psd * params.bandwidth)
    rate = params.bandwidth / 2 * np.log2(1 + gamma)
    if np.ndim(gamma) == 0:
        return float(gamma), float(rate)
    return gamma, rate


# -- assembly -----------------------------------------------------------------

def build_snapshot(
    scenario: Scenario,
    users: list[UserState],
    lifi: LifiParams,
    wifi: WifiParams,
    slot: int = 0,
    rng: np.random.Generator | None = None,
    blockage_mask: np.ndarray | None = None,
    blockage_attenuation: float = 1e-3,
) -> ChannelSnapshot:
    """Evaluate every (AP, user) link. ``rng=None`` gives deterministic channels."""
    n_l, n_aps, k = scenario.n_lifi, scenario.n_aps, len(users)
    dist, cosine = link_geometry_matrix(scenario, users)
    sinr = np.zeros((n_aps, k))
    snr = np.zeros((n_aps, k))
    rate = np.zeros((n_aps, k))
    if k == 0:
        return ChannelSnapshot(sinr, rate, snr, slot)

    if n_l:
        gains = lifi_gain_matrix(lifi, dist[:n_l], cosine[:n_l])
        if blockage_mask is not None:
            blockage_mask = np.asarray(blockage_mask, dtype=bool)
            if blockage_mask.shape != gains.shape:
                raise RuntimeError(f"blockage mask shape {blockage_mask.shape} != {gains.shape}")
            gains = np.where(blockage_mask, gains * blockage_attenuation, gains)
        sinr[:n_l] = lifi_sinr_matrix(lifi, gains)
        snr[:n_l] = lifi_snr_matrix(lifi, gains)
        rate[:n_l] = lifi_rate(lifi, sinr[:n_l])

    if n_aps > n_l:
        d_w = dist[n_l:]
        loss = wifi_path_loss(wifi, d_w, rng)
        h = wifi_channel_transfer(wifi, loss, d_w, rng)
        gamma, r = wifi_sinr_and_rate(wifi, h)
        sinr[n_l:] = gamma
        snr[n_l:] = gamma
        rate[n_l:] = r
    return ChannelSnapshot(sinr, rate, snr, slot)
