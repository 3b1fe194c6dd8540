"""Reproducible Rician-fading scenario generation.

Geometry: the BS talks to K single-antenna users only through an IRS with N
reflecting elements; direct links are blocked.  The BS sits on the IRS
boresight at distance D, users are evenly spread on a half-circle of radius r
around the IRS.  Both arrays are uniform linear with half-wavelength spacing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class ScenarioConfig:
    """All system parameters of one scenario.

    gamma is the per-user minimum SINR in linear scale, sigma2 the per-user
    noise variance in watts.  L phase levels per IRS element means each
    element picks a phase from {0, 2*pi/L, ..., (L-1)*2*pi/L}.
    """
    M: int
    K: int
    N: int
    L: int
    gamma: np.ndarray
    sigma2: np.ndarray
    D: float = 25.0
    r: float = 10.0
    L0: float = 1e-3
    alpha_BI: float = 2.2
    alpha_IU: float = 2.8
    beta_BI: float = 1.0
    beta_IU: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gamma", np.atleast_1d(np.asarray(self.gamma, dtype=float)))
        object.__setattr__(self, "sigma2", np.atleast_1d(np.asarray(self.sigma2, dtype=float)))
        if min(self.M, self.K, self.N, self.L) < 1:
            raise ValueError("M, K, N, L must all be >= 1")
        if self.gamma.shape != (self.K,) or self.sigma2.shape != (self.K,):
            raise ValueError("gamma and sigma2 must have length K")
        if np.any(self.gamma <= 0) or np.any(self.sigma2 <= 0):
            raise ValueError("gamma and sigma2 must be strictly positive")
        for nm in ("D", "r", "L0", "beta_BI", "beta_IU"):
            if getattr(self, nm) < 0 or (nm in ("D", "r", "L0") and getattr(self, nm) <= 0):
                raise ValueError(f"{nm} must be positive")

    def with_(self, **kwargs) -> "ScenarioConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class ChannelSet:
    """One realization: F (N x M, BS->IRS) and per-user IRS->user vectors."""
    F: np.ndarray
    h: np.ndarray  # (K, N) complex; row k is user k's channel

    def __post_init__(self):
        if not (np.all(np.isfinite(self.F.real)) and np.all(np.isfinite(self.F.imag))
                and np.all(np.isfinite(self.h.real)) and np.all(np.isfinite(self.h.imag))):
            raise ValueError("non-finite channel entries")


def path_gain(d: float, alpha: float, L0: float) -> float:
    """Distance-power law L0 * d**(-alpha), linear power gain at distance d meters."""
    if d <= 0:
        raise ValueError(f"distance must be positive, got {d}")
    if L0 <= 0:
        raise ValueError(f"reference gain must be positive, got {L0}")
    return L0 * d ** (-alpha)


def place_users(cfg: ScenarioConfig) -> tuple[np.ndarray, np.ndarray]:
    """Distances and azimuth angles of the K users.

    Users sit on a half-circle of radius r around the IRS at angles
    pi*k/(K+1), k = 1..K, so no user lies on the array axis.
    """
    angles = np.pi * np.arange(1, cfg.K + 1) / (cfg.K + 1)
    dists = np.full(cfg.K, cfg.r)
    return dists, angles


def array_response(n_elems: int, angle: float) -> np.ndarray:
    """ULA response with half-wavelength spacing; angle measured from the array axis."""
    return np.exp(1j * np.pi * np.arange(n_elems) * np.cos(angle))


def _rician(rng: np.random.Generator, los: np.ndarray, gain: float, beta: float) -> np.ndarray:
    nlos = (rng.standard_normal(los.shape) + 1j * rng.standard_normal(los.shape)) / np.sqrt(2.0)
    mix = np.sqrt(beta / (1.0 + beta)) * los + np.sqrt(1.0 / (1.0 + beta)) * nlos
    return np.sqrt(gain) * mix


def generate_channels(cfg: ScenarioConfig) -> ChannelSet:
    """Draw one Rician channel realization, deterministic in cfg.seed.

    The BS->IRS line-of-sight component is the outer product of the IRS and BS
    array responses along the boresight; each IRS->user LoS component is the
    IRS response towards that user.  NLoS parts are i.i.d. unit-variance
    circularly-symmetric Gaussian, so per-entry mean power equals the path
    gain of the link.
    """
    streams = np.random.SeedSequence(cfg.seed).spawn(1 + cfg.K)
    rng_f = np.random.default_rng(streams[0])

    boresight = np.pi / 2.0
    F_los = np.outer(array_response(cfg.N, boresight), array_response(cfg.M, boresight).conj())
    F = _rician(rng_f, F_los, path_gain(cfg.D, cfg.alpha_BI, cfg.L0), cfg.beta_BI)

    dists, angles = place_users(cfg)
    h = np.empty((cfg.K, cfg.N), dtype=complex)
    for k in range(cfg.K):
        rng_k = np.random.default_rng(streams[1 + k])
        h_los = array_response(cfg.N, angles[k])
        h[k] = _rician(rng_k, h_los, path_gain(dists[k], cfg.alpha_IU, cfg.L0), cfg.beta_IU)
    return ChannelSet(F=F, h=h)


# ---------------------------------------------------------------------------
# serialization (JSON, complex entries as re/im pairs)
# ---------------------------------------------------------------------------

def _encode(a: np.ndarray):
    return {"re": a.real.tolist(), "im": a.imag.tolist()}


def _decode(d) -> np.ndarray:
    return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)


def save_channels(path, chans: ChannelSet) -> None:
    """Write a channel set to a JSON file for replay or cross-checking."""
    payload = {"format": "irsopt-channels-v1", "F": _encode(chans.F), "h": _encode(chans.h)}
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)


def load_channels(path) -> ChannelSet:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != "irsopt-channels-v1":
        raise ValueError("not an irsopt channel file")
    return ChannelSet(F=_decode(payload["F"]), h=_decode(payload["h"]))
