from pathlib import Path

import pytest

from hdldev.config import load_config, parse_config
from hdldev.errors import ConfigError

CATALOG = Path(__file__).resolve().parents[1] / "configs" / "catalog.ini"


def test_catalog_config_parses():
    cfg = load_config(CATALOG)
    assert cfg.grid.n_sites == 16
    assert cfg.ell == 256
    assert cfg.reaction.birth.family == "logistic"
    assert cfg.perturbation.amplitude == 0.3
    assert cfg.initial.b == 0.5
    assert (cfg.t_final, cfg.seed, cfg.replicas) == (0.25, 0, 20)
    assert len(cfg.config_hash) == 16


def test_hash_tracks_text():
    text = CATALOG.read_text()
    assert parse_config(text).config_hash == parse_config(text).config_hash
    assert parse_config(text).config_hash != parse_config(text + "\n").config_hash


def test_overrides_skip_none():
    cfg = load_config(CATALOG)
    assert cfg.with_overrides(seed=7, replicas=None).seed == 7
    assert cfg.with_overrides(replicas=None).replicas == 20


@pytest.mark.parametrize("edit", [
    ("alpha = 2", "alpha = 2\nbeta = 1"),          # unknown key
    ("[run]", "[extra]\nx = 1\n\n[run]"),         # unknown section
    ("birth = logistic", "birth = cubic"),        # unknown family
    ("temporal = constant", "temporal = linear"),  # slope missing
    ("t_final = 0.25", "t_final = -1"),
    ("replicas = 20", "replicas = many"),
    ("a = 1.0", "a = -3.0"),
])
def test_bad_configs_raise(edit):
    text = CATALOG.read_text().replace(*edit)
    with pytest.raises(ConfigError):
        parse_config(text)


def test_missing_section():
    with pytest.raises(ConfigError):
        parse_config("[grid]\nn_sites = 4\n")
