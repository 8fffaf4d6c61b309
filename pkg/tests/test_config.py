import math

import pytest

from gaterace.config import (
    ConfigError,
    EnvConfig,
    SEED_ENV_VAR,
    config_from_dict,
    difficulty_preset,
    load_config,
    save_config,
)


def test_defaults_valid_and_rates():
    cfg = EnvConfig().validate()
    assert cfg.physics_hz == 250.0
    assert cfg.control_hz == 25.0
    assert cfg.substeps == 10
    assert cfg.camera.width == 480 and cfg.camera.height == 270
    assert cfg.camera.hfov == pytest.approx(math.pi / 2)
    assert cfg.camera.d_max == 20.0


def test_load_config_defaults_from_empty_file(tmp_path):
    p = tmp_path / "empty.yaml"
    p.write_text("")
    cfg = load_config(p)
    assert cfg == EnvConfig()


def test_load_config_overrides(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("camera:\n  d_max: 20\ndrone:\n  mass: 0.8\nseed: 5\n")
    cfg = load_config(p)
    assert cfg.camera.d_max == 20
    assert cfg.drone.mass == 0.8
    assert cfg.seed == 5


def test_invalid_mass_names_invariant(tmp_path):
    p = tmp_path / "bad.yaml"
    p.write_text("drone:\n  mass: 0\n")
    with pytest.raises(ConfigError, match="mass > 0"):
        load_config(p)


def test_malformed_yaml_rejected(tmp_path):
    p = tmp_path / "broken.yaml"
    p.write_text("drone: [unclosed\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(p)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        config_from_dict({"drone": {"massive": 1.0}})


def test_rate_consistency_rejected_not_fixed():
    with pytest.raises(ConfigError, match="physics_hz"):
        config_from_dict({"physics_hz": 250, "control_hz": 25, "substeps": 9})


def test_roundtrip_identical(tmp_path):
    cfg = config_from_dict({
        "drone": {"mass": 0.81, "inertia": [0.002, 0.0021, 0.004]},
        "bounds": {"n_wall": 7, "bar_probability": 0.25},
        "rewards": {"collision_value": -12.5},
        "episode_time_limit": 11.0,
    })
    p = tmp_path / "rt.yaml"
    save_config(cfg, p)
    assert load_config(p) == cfg


def test_roundtrip_default(tmp_path):
    cfg = EnvConfig().validate()
    p = tmp_path / "d.yaml"
    save_config(cfg, p)
    assert load_config(p) == cfg


def test_seed_env_var_override(tmp_path, monkeypatch):
    p = tmp_path / "c.yaml"
    p.write_text("seed: 5\n")
    monkeypatch.setenv(SEED_ENV_VAR, "99")
    assert load_config(p).seed == 99


def test_presets_match_difficulty_table():
    l1 = difficulty_preset(1)
    assert (l1.n_wall, l1.n_tree, l1.n_orbit) == (12, 4, 0)
    assert l1.rel_pose_lo == (-0.3, -0.3, 6.0, 0.0, 0.0)
    assert l1.rel_pose_hi == (0.3, 0.3, 18.0, 3.14, 0.2)
    assert l1.wp_size_range == (1.4, 2.0)
    assert l1.wall_size_lo == (0.2, 1.5, 1.5)
    assert l1.wall_size_hi == (0.2, 2.5, 2.5)

    l2 = difficulty_preset(2)
    assert (l2.n_wall, l2.n_tree, l2.n_orbit) == (24, 8, 0)
    assert l2.rel_pose_lo == l1.rel_pose_lo and l2.rel_pose_hi == l1.rel_pose_hi

    l3 = difficulty_preset(3)
    assert (l3.n_wall, l3.n_tree, l3.n_orbit) == (24, 8, 60)
    assert l3.orbit_params.waypoints == (0, 1)

    l4 = difficulty_preset(4)
    assert (l4.n_wall, l4.n_tree, l4.n_orbit) == (24, 8, 60)
    assert l4.rel_pose_lo == (-1.0, -0.4, 6.0, 0.0, 0.0)
    assert l4.rel_pose_hi == (1.0, 0.4, 18.0, 3.14, 0.3)


def test_presets_satisfy_invariants():
    for level in (1, 2, 3, 4):
        difficulty_preset(level).validate()


def test_preset_out_of_range():
    for level in (0, 5, -1, 9):
        with pytest.raises(ConfigError):
            difficulty_preset(level)


def test_reward_weight_invariants():
    with pytest.raises(ConfigError, match="collision_value"):
        config_from_dict({"rewards": {"collision_value": 1.0}})
    with pytest.raises(ConfigError, match="waypoint_value"):
        config_from_dict({"rewards": {"waypoint_value": -1.0}})


def test_spin_direction_invariant():
    with pytest.raises(ConfigError, match="spin_directions"):
        config_from_dict({"drone": {"spin_directions": [1, 1, 1, -1]}})


def test_sparse_values_post_weight_scale():
    cfg = EnvConfig()
    assert cfg.rewards.collision_value == -10.0
    assert cfg.rewards.waypoint_value == 5.0
