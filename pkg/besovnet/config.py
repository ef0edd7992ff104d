"""
Besovnet configuration

Settings are layered, later layers win:

    defaults < config.json (or config.example.json) < .env < BESOVNET_<SECTION>_<KEY>
    < CLI flags < --config FILE (flat `section.key=value` lines)
"""

import json
import logging
import os
from pathlib import Path
from typing import Any, Literal, Optional

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from besovnet.errors import ConfigError

logger = logging.getLogger(__name__)

CONFIG_PATH = Path('config.json')
CONFIG_EXAMPLE_PATH = Path(__file__).parent.parent / 'config.example.json'
ENV_PREFIX = 'BESOVNET_'


def _float_or_inf(value):
    if isinstance(value, str) and value.strip().lower() in ('inf', 'infinity', '+inf'):
        return float('inf')
    return value


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid')


class WaveletSettings(_Section):
    L: int = 3
    L_dual: int = 3


class TargetSettings(_Section):
    kind: Literal['random_series', 'cusp', 'spline_bump'] = 'random_series'
    d: int = 1
    alpha: float = 1.5
    p: float = 2.0
    # tau and q default to the critical line 1/tau = alpha/d + 1/p, q = tau
    tau: Optional[float] = None
    q: Optional[float] = None
    seed: int = 0
    box: tuple[float, float] = (0.0, 1.0)
    J: int = 12
    j0: int = 2
    theta: float = 0.5
    center: Optional[list[float]] = None
    radius: float = 0.3
    beta: float = 1.5
    bumps: int = 3

    @field_validator('p', 'tau', 'q', mode='before')
    @classmethod
    def allow_inf(cls, value):
        return _float_or_inf(value)


class CompileSettings(_Section):
    r_class: int = 1
    eps: Optional[float] = None
    # None: derived from the accuracy of each factor
    surrogate_width: Optional[float] = None


class SweepSettings(_Section):
    Ns: list[int] = [16, 32, 64, 128, 256, 512]
    drop: int = 2
    gadget: Optional[Literal['mult2', 'square', 'multd-repu']] = None
    gadget_eps: list[float] = [1e-1, 1e-2, 1e-3, 1e-4]
    gadget_dims: list[int] = [2, 3, 4, 6, 8, 12, 16]
    gadget_K: float = 1.0
    gadget_grid: int = 129
    output: str = 'rates.csv'
    format: Literal['csv', 'json'] = 'csv'


class LoggingSettings(_Section):
    level: str = 'INFO'
    format: str = '%(asctime)s %(levelname)s %(name)s: %(message)s'


class Settings(_Section):
    wavelet: WaveletSettings = WaveletSettings()
    target: TargetSettings = TargetSettings()
    compile: CompileSettings = CompileSettings()
    sweep: SweepSettings = SweepSettings()
    logging: LoggingSettings = LoggingSettings()


def resolve_env_var(value: Any) -> Any:
    """Resolve environment variable references like ${VAR_NAME}."""
    if isinstance(value, str) and value.startswith("${") and value.endswith("}"):
        env_var = value[2:-1]
        resolved = os.environ.get(env_var, "")
        if not resolved:
            logger.warning("Environment variable %s not set", env_var)
        return resolved
    return value


def load_config_file(path: Optional[Path] = None) -> dict:
    """Load config.json, falling back to config.example.json; {} when neither exists."""
    candidates = [Path(path)] if path else [CONFIG_PATH, CONFIG_EXAMPLE_PATH]
    for candidate in candidates:
        if candidate.exists():
            try:
                with open(candidate) as f:
                    return json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(str(candidate), f"not valid JSON: {e}") from e
    if path:
        raise ConfigError(str(path), "config file not found")
    return {}


def _parse_value(raw: str) -> Any:
    raw = raw.strip()
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        pass
    if ',' in raw:
        return [_parse_value(part) for part in raw.split(',') if part.strip()]
    return raw


def _set_dotted(tree: dict, dotted: str, value: Any):
    section, _, key = dotted.partition('.')
    if not key:
        raise ConfigError(dotted, "expected section.key")
    tree.setdefault(section, {})[key] = value


def _merge(base: dict, layer: dict) -> dict:
    out = dict(base)
    for key, value in layer.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def env_layer(environ=None) -> dict:
    """BESOVNET_<SECTION>_<KEY> variables as a nested dict."""
    environ = os.environ if environ is None else environ
    sections = set(Settings.model_fields)
    tree: dict = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):]
        section, _, key = rest.partition('_')
        section = section.lower()
        if section not in sections or not key:
            continue
        fields = getattr(Settings.model_fields[section].annotation, 'model_fields', {})
        # keys keep their declared case (L, J, Ns)
        match = next((f for f in fields if f.lower() == key.lower()), key.lower())
        tree.setdefault(section, {})[match] = _parse_value(resolve_env_var(raw))
    return tree


def flat_file_layer(path) -> dict:
    """`section.key=value` lines read with python-dotenv."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(str(path), "config file not found")
    tree: dict = {}
    for dotted, raw in dotenv_values(path).items():
        if raw is None:
            raise ConfigError(dotted, "missing value")
        _set_dotted(tree, dotted, _parse_value(raw))
    return tree


def load_config(overrides: Optional[dict] = None, flat_file=None, config_file=None,
                environ=None, use_dotenv: bool = True) -> Settings:
    """
    Build Settings from every layer.

    Args:
        overrides: CLI flags as {"section.key": value}; None values are skipped.
        flat_file: Path given with --config.
        config_file: Explicit JSON file instead of config.json / config.example.json.
        environ: Environment mapping (default os.environ).

    Raises:
        ConfigError: A value fails validation; the error names its key.
    """
    if use_dotenv and environ is None:
        load_dotenv()
    tree = _merge(Settings().model_dump(), load_config_file(config_file))
    tree = _merge(tree, env_layer(environ))
    cli: dict = {}
    for dotted, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(cli, dotted, value)
    tree = _merge(tree, cli)
    if flat_file:
        tree = _merge(tree, flat_file_layer(flat_file))
    try:
        return Settings.model_validate(tree)
    except ValidationError as e:
        first = e.errors()[0]
        key = '.'.join(str(part) for part in first['loc'])
        raise ConfigError(key, first['msg']) from e


def configure_logging(settings: LoggingSettings, level: Optional[str] = None):
    logging.basicConfig(level=(level or settings.level).upper(), format=settings.format, force=True)
