"""Shared fixtures for the test suite: small, fast scenario builders."""

import numpy as np

from irsopt.channel import ChannelSet, ScenarioConfig, generate_channels
from irsopt.reformulation import build_reformulated

# -117 dBm thermal noise floor used throughout the desk-scale scenarios
NOISE_W = 10.0 ** (-117.0 / 10.0) / 1000.0


def desk_config(seed: int = 0, M: int = 3, K: int = 2, N: int = 4, L: int = 2,
                gamma_db: float = 5.0, sigma2_w: float = NOISE_W) -> ScenarioConfig:
    gamma = np.full(K, 10.0 ** (gamma_db / 10.0))
    return ScenarioConfig(M=M, K=K, N=N, L=L, gamma=gamma,
                          sigma2=np.full(K, sigma2_w), seed=seed)


def desk_instance(seed: int = 0, **kwargs):
    cfg = desk_config(seed=seed, **kwargs)
    data = build_reformulated(generate_channels(cfg), cfg.L)
    return data, cfg


def mixed_feasibility_instance():
    """Hand-built instance where feasibility depends on the phase selection.

    IRS rows 0 and 1 are identical and user 0's channel weights them equally,
    so user 0's composite channel is (theta_0 + theta_1) * f: it vanishes
    exactly when the two elements pick opposite binary phases, making those
    selections infeasible, while aligned selections are well conditioned.
    """
    rng = np.random.default_rng(7)
    amp = 1e-6
    f = (rng.normal(size=2) + 1j * rng.normal(size=2)) * amp
    F = np.vstack([f, f, (rng.normal(size=2) + 1j * rng.normal(size=2)) * amp])
    h = np.array([[1.0, 1.0, 0.0],
                  rng.normal(size=3) + 1j * rng.normal(size=3)])
    cfg = ScenarioConfig(M=2, K=2, N=3, L=2, gamma=np.full(2, 10.0 ** 0.5),
                         sigma2=np.full(2, NOISE_W), seed=0)
    data = build_reformulated(ChannelSet(F=F, h=h), cfg.L)
    return data, cfg
