import numpy as np
import pytest

from irsopt.channel import (
    ChannelSet,
    ScenarioConfig,
    array_response,
    generate_channels,
    load_channels,
    path_gain,
    place_users,
    save_channels,
)
from helpers import desk_config


def test_config_validation():
    with pytest.raises(ValueError):
        desk_config(K=0)
    with pytest.raises(ValueError):
        ScenarioConfig(M=2, K=2, N=2, L=2, gamma=np.array([1.0]), sigma2=np.array([1.0, 1.0]))
    with pytest.raises(ValueError):
        ScenarioConfig(M=2, K=1, N=2, L=2, gamma=np.array([-1.0]), sigma2=np.array([1.0]))
    with pytest.raises(ValueError):
        desk_config().with_(D=0.0)


def test_with_replaces_fields():
    cfg = desk_config(seed=3)
    cfg2 = cfg.with_(N=7)
    assert cfg2.N == 7 and cfg2.seed == 3 and cfg.N == 4


def test_generation_shapes_and_determinism():
    cfg = desk_config(seed=11, M=3, K=2, N=5)
    a = generate_channels(cfg)
    b = generate_channels(cfg)
    assert a.F.shape == (5, 3) and a.h.shape == (2, 5)
    assert np.array_equal(a.F, b.F) and np.array_equal(a.h, b.h)
    c = generate_channels(cfg.with_(seed=12))
    assert not np.allclose(a.F, c.F)


def test_channel_magnitude_tracks_path_gain():
    # with many elements the empirical per-entry power approaches the gain
    cfg = desk_config(seed=0, N=64, M=8)
    ch = generate_channels(cfg)
    gain = path_gain(cfg.D, cfg.alpha_BI, cfg.L0)
    assert np.mean(np.abs(ch.F) ** 2) == pytest.approx(gain, rel=0.3)


def test_place_users_off_axis():
    dists, angles = place_users(desk_config(K=4))
    assert np.all(dists > 0)
    assert np.all((angles > 0) & (angles < np.pi))


def test_array_response_unit_modulus():
    v = array_response(6, 1.234)
    assert np.allclose(np.abs(v), 1.0)


def test_path_gain_validation():
    with pytest.raises(ValueError):
        path_gain(0.0, 2.0, 1e-3)
    with pytest.raises(ValueError):
        path_gain(1.0, 2.0, 0.0)


def test_save_load_roundtrip(tmp_path):
    ch = generate_channels(desk_config(seed=5))
    path = tmp_path / "ch.json"
    save_channels(path, ch)
    back = load_channels(path)
    assert np.allclose(ch.F, back.F) and np.allclose(ch.h, back.h)


def test_load_rejects_foreign_file(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format": "something-else"}')
    with pytest.raises(ValueError):
        load_channels(path)


def test_channelset_rejects_nonfinite():
    with pytest.raises(ValueError):
        ChannelSet(F=np.array([[np.inf + 0j]]), h=np.array([[1.0 + 0j]]))
