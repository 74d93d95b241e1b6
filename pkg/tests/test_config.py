import math

import pytest

from pswlsim.config import ExperimentConfig, config_from_dict, load_config
from pswlsim.errors import ConfigError


def test_defaults_validate():
    cfg = ExperimentConfig()
    cfg.validate()
    assert cfg.reliability.mu == pytest.approx(math.log(3000.0))
    assert cfg.restart_threshold == pytest.approx(2 * cfg.controller.exit_threshold)
    assert cfg.gap_ref == pytest.approx(2 * cfg.controller.exit_threshold)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        config_from_dict({"array": {"original_disks": 3, "oops": 1}})
    with pytest.raises(ConfigError, match="unknown key"):
        config_from_dict({"typo_section": {}})


def test_scheme_raid_compatibility():
    with pytest.raises(ConfigError, match="supports raid0"):
        config_from_dict({"array": {"scaling_scheme": "fastscale",
                                    "raid_level": "raid5"}})
    with pytest.raises(ConfigError, match="supports raid5"):
        config_from_dict({"array": {"scaling_scheme": "gsr",
                                    "raid_level": "raid0"}})
    with pytest.raises(ConfigError, match="supports raid6"):
        config_from_dict({"array": {"scaling_scheme": "sdm",
                                    "raid_level": "raid5"}})
    # rr goes anywhere
    for raid in ("raid0", "raid5", "raid6"):
        disks = 4
        config_from_dict({"array": {"scaling_scheme": "rr", "raid_level": raid,
                                    "original_disks": disks}})


def test_explicit_wear_length_checked():
    with pytest.raises(ConfigError, match="entries"):
        config_from_dict({
            "array": {"original_disks": 3, "scaling_disks": 1},
            "initial_wear": {"mode": "explicit", "pe_counts": [1, 2]}})


def test_policy_kind_checked():
    with pytest.raises(ConfigError, match="policy"):
        config_from_dict({"policy": {"kind": "nonsense"}})


def test_policy_params_namespaced():
    cfg = config_from_dict({"policy": {"kind": "swans",
                                       "swans": {"stddev_threshold": 2.5},
                                       "edm": {"gap_threshold": 9.0}}})
    assert cfg.policy.swans.stddev_threshold == 2.5
    assert cfg.policy.edm.gap_threshold == 9.0
    assert cfg.policy.lazy_wl.k_ban == 0.2  # untouched default


def test_round_trip_through_dict():
    cfg = config_from_dict({
        "array": {"original_disks": 4, "scaling_disks": 2,
                  "raid_level": "raid6", "scaling_scheme": "sdm"},
        "run": {"seed": 42}})
    again = config_from_dict(cfg.to_dict())
    assert again == cfg


def test_load_toml(tmp_path):
    path = tmp_path / "exp.toml"
    path.write_text(
        '[array]\noriginal_disks = 3\nscaling_disks = 1\n'
        'raid_level = "raid0"\nscaling_scheme = "fastscale"\n'
        '[workload]\nops = 500\n[run]\nseed = 9\n')
    cfg = load_config(str(path))
    assert cfg.array.scaling_scheme == "fastscale"
    assert cfg.run.seed == 9


def test_load_toml_syntax_error(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("not [valid toml")
    with pytest.raises(ConfigError):
        load_config(str(path))
