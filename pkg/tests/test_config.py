import json

import pytest

from config import Backend, Mode, default_config, load_config, with_delta
from logging_config import ModelError


def _write(tmp_path, content):
    path = tmp_path / "config.json"
    path.write_text(content if isinstance(content, str) else json.dumps(content))
    return str(path)


def test_defaults():
    config = load_config()
    assert config is default_config
    assert config.pipeline.mode == Mode.STRONG_SOFT
    assert config.pipeline.cckp_backend == Backend.GREEDY
    assert config.decomposition.epsilon is None


def test_overrides_are_merged(tmp_path):
    config = load_config(_write(tmp_path, {"pipeline": {"mode": "weak", "cckp_backend": "qptas"},
                                           "qptas": {"epsilon": 0.1}, "log_level": "INFO"}))
    assert config.pipeline.mode == Mode.WEAK
    assert config.pipeline.cckp_backend == Backend.QPTAS
    assert config.pipeline.max_cut_rounds == default_config.pipeline.max_cut_rounds
    assert config.qptas.epsilon == 0.1
    assert config.log_level == "INFO"
    assert default_config.pipeline.mode == Mode.STRONG_SOFT


@pytest.mark.parametrize("content", [
    {"pipeline": {"colour": 1}},
    {"pipeline": {"mode": "sideways"}},
    {"lp": 3},
    [1, 2],
    "{not json",
])
def test_bad_overrides(tmp_path, content):
    with pytest.raises(ModelError):
        load_config(_write(tmp_path, content))


def test_with_delta():
    config = with_delta(default_config, 0.25)
    assert config.pipeline.delta == 0.25
    assert config.decomposition.delta == 0.25
    with pytest.raises(ModelError):
        with_delta(default_config, 1.0)
