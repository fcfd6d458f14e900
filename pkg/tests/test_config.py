from pathlib import Path

import pytest

from config.settings import PipelineConfig, load_config, read_config_file, read_env
from utils.errors import ConfigError


def test_defaults():
    config = load_config(environ={})
    assert config == PipelineConfig()
    assert (config.window, config.stride, config.latent_dim) == (32, 8, 16)
    assert config.scales == (1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0)


def test_shipped_config_matches_defaults():
    shipped = Path(__file__).resolve().parents[1] / "config" / "pipeline.toml"
    assert load_config(shipped, environ={}) == PipelineConfig()


def test_precedence(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("seed = 3\nepochs = 5\nlog_level = \"debug\"\n")
    config = load_config(path, overrides={"epochs": 2, "latent_dim": None}, environ={"AFP_SEED": "11"})
    assert config.seed == 11
    assert config.epochs == 2
    assert config.latent_dim == 16
    assert config.log_level == "DEBUG"


def test_config_path_from_environment(tmp_path):
    path = tmp_path / "env.toml"
    path.write_text("stride = 4\n")
    assert load_config(environ={"AFP_CONFIG": str(path)}).stride == 4


def test_scales_from_cli_string():
    config = load_config(overrides={"scales": "1,2, 4"}, environ={})
    assert config.scales == (1.0, 2.0, 4.0)


def test_sweep_list_from_file(tmp_path):
    path = tmp_path / "sweep.toml"
    path.write_text("latent_sweep = [4, 8]\n")
    assert read_config_file(path) == {"latent_sweep": (4, 8)}


@pytest.mark.parametrize(
    "text",
    ["colour = 1\n", "window = \"big\"\n", "[section]\nwindow = 32\n", "window = 32.5\n", "window = true\n", "window = \n"],
)
def test_bad_files(tmp_path, text):
    path = tmp_path / "bad.toml"
    path.write_text(text)
    with pytest.raises(ConfigError):
        read_config_file(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml", environ={})


@pytest.mark.parametrize(
    "overrides",
    [{"window": 20}, {"window": 512}, {"stride": 0}, {"scales": "2,1"}, {"scales": "0.25"}, {"log_level": "loud"}],
)
def test_invalid_values(overrides):
    with pytest.raises(ConfigError) as excinfo:
        load_config(overrides=overrides, environ={})
    assert excinfo.value.stage == "config"


def test_env_reads_only_known_keys():
    assert read_env({"AFP_SEED": "4", "AFP_EPOCHS": "9", "AFP_LOG_LEVEL": ""}) == {"seed": 4}


def test_derived_configs():
    config = load_config(overrides={"seed": 6, "epochs": 3}, environ={})
    assert config.train_config().seed == 6
    assert config.train_config(seed=1).epochs == 3
    spec = config.synth_spec()
    assert (spec.width, spec.height, spec.tow_count, spec.seed) == (256, 256, 8, 6)
    assert config.to_dict()["scales"] == list(config.scales)
