import json
import logging
import math

import pytest

from besovnet.config import (LoggingSettings, Settings, configure_logging, env_layer, flat_file_layer,
                             load_config, resolve_env_var)
from besovnet.errors import ConfigError


@pytest.fixture
def json_file(tmp_path):
    def write(data):
        path = tmp_path / 'config.json'
        path.write_text(json.dumps(data))
        return path
    return write


@pytest.fixture
def flat_file(tmp_path):
    def write(text):
        path = tmp_path / 'run.conf'
        path.write_text(text)
        return path
    return write


def test_defaults(json_file):
    settings = load_config(config_file=json_file({}), environ={})
    assert settings == Settings()
    assert settings.target.tau is None
    assert settings.wavelet.L == 3 and settings.wavelet.L_dual == 3
    assert settings.compile.surrogate_width is None


def test_example_file_loads(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    settings = load_config(environ={})
    assert settings.sweep.Ns == [16, 32, 64, 128, 256, 512]
    assert settings.target.kind == 'random_series'


def test_json_layer(json_file):
    settings = load_config(config_file=json_file({'target': {'alpha': 2.0, 'p': 'inf'}}), environ={})
    assert settings.target.alpha == 2.0
    assert math.isinf(settings.target.p)
    assert settings.target.d == 1


def test_env_layer_keeps_declared_case():
    environ = {
        'BESOVNET_TARGET_ALPHA': '2.5',
        'BESOVNET_SWEEP_NS': '4,8,16',
        'BESOVNET_WAVELET_L_DUAL': '5',
        'BESOVNET_SWEEP_GADGET_EPS': '0.1,0.01',
        'BESOVNET_BOGUS_X': '1',
        'HOME': '/root',
    }
    assert env_layer(environ) == {
        'target': {'alpha': 2.5},
        'sweep': {'Ns': [4, 8, 16], 'gadget_eps': [0.1, 0.01]},
        'wavelet': {'L_dual': 5},
    }


def test_env_layer_resolves_references(monkeypatch):
    monkeypatch.setenv('BESOVNET_TEST_KIND', 'cusp')
    assert env_layer({'BESOVNET_TARGET_KIND': '${BESOVNET_TEST_KIND}'}) == {'target': {'kind': 'cusp'}}


def test_flat_file_layer(flat_file):
    path = flat_file('target.kind=cusp\nsweep.Ns=4,8\ncompile.r_class=2\ntarget.p=inf\n')
    assert flat_file_layer(path) == {
        'target': {'kind': 'cusp', 'p': 'inf'},
        'sweep': {'Ns': [4, 8]},
        'compile': {'r_class': 2},
    }


def test_precedence(json_file, flat_file):
    config_file = json_file({'target': {'alpha': 2.0, 'd': 2, 'seed': 4}})
    environ = {'BESOVNET_TARGET_ALPHA': '2.5', 'BESOVNET_TARGET_D': '3'}
    overrides = {'target.alpha': 3.0, 'target.seed': None}
    settings = load_config(overrides, config_file=config_file, environ=environ)
    assert (settings.target.alpha, settings.target.d, settings.target.seed) == (3.0, 3, 4)
    settings = load_config(overrides, flat_file=flat_file('target.alpha=3.5\n'),
                           config_file=config_file, environ=environ)
    assert settings.target.alpha == 3.5


def test_invalid_value_names_key(json_file):
    with pytest.raises(ConfigError) as excinfo:
        load_config({'target.d': 'two'}, config_file=json_file({}), environ={})
    assert excinfo.value.key == 'target.d'
    with pytest.raises(ConfigError) as excinfo:
        load_config({'target.colour': 'red'}, config_file=json_file({}), environ={})
    assert excinfo.value.key == 'target.colour'
    with pytest.raises(ConfigError, match='sweep.format'):
        load_config({'sweep.format': 'xml'}, config_file=json_file({}), environ={})


def test_bad_files(tmp_path, json_file, flat_file):
    broken = tmp_path / 'broken.json'
    broken.write_text('{"target": ')
    with pytest.raises(ConfigError):
        load_config(config_file=broken, environ={})
    with pytest.raises(ConfigError):
        load_config(config_file=tmp_path / 'absent.json', environ={})
    with pytest.raises(ConfigError):
        load_config(flat_file=tmp_path / 'absent.conf', config_file=json_file({}), environ={})
    with pytest.raises(ConfigError):
        load_config({'alpha': 2.0}, config_file=json_file({}), environ={})


def test_resolve_env_var(monkeypatch):
    monkeypatch.setenv('BESOVNET_TEST_VALUE', 'abc')
    monkeypatch.delenv('BESOVNET_TEST_MISSING', raising=False)
    assert resolve_env_var('${BESOVNET_TEST_VALUE}') == 'abc'
    assert resolve_env_var('${BESOVNET_TEST_MISSING}') == ''
    assert resolve_env_var('plain') == 'plain'
    assert resolve_env_var(3) == 3


def test_configure_logging():
    configure_logging(LoggingSettings(), 'debug')
    assert logging.getLogger().level == logging.DEBUG
    configure_logging(LoggingSettings(level='WARNING'))
    assert logging.getLogger().level == logging.WARNING
