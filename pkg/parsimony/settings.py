# -*- coding: utf-8 -*-

import copy
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml

from .exceptions import ConfigError

logger = logging.getLogger(__name__)


def recursive_update(original_dict: dict, new_dict: dict) -> dict:
    """Merge new_dict into a copy of original_dict, nested sections key by key

    Neither argument is modified, so preset documents can be layered safely.
    """
    merged = copy.deepcopy(original_dict)
    for new_key, new_value in new_dict.items():
        current = merged.get(new_key)
        if isinstance(new_value, dict):
            merged[new_key] = recursive_update(
                current if isinstance(current, dict) else {}, new_value
            )
        else:
            merged[new_key] = copy.deepcopy(new_value)
    return merged


# Configurations are loaded from the defaults of the package and eventually a local config.yaml file
config_files = [
    Path(__file__).parent / "resources" / "default_config.yaml",
    Path("config.yaml"),
]

config = {}
for config_file in config_files:
    if config_file.exists():
        new_config = yaml.safe_load(config_file.read_text())
        if isinstance(new_config, dict):
            config = recursive_update(config, new_config)


PRESETS_DIR = Path(__file__).parent / "resources" / "presets"
KNOB_SECTIONS = ("procspec", "ssm", "pseudotrue", "macromodels", "cli")
DEFAULT_KNOBS = {
    key: value for section in KNOB_SECTIONS for key, value in config[section].items()
}

# Keys each section of a run configuration may carry
RUN_SCHEMA = {
    "process": {"F", "H", "Sigma", "gammas", "tail_rate", "arma"},
    "nk": {
        "beta",
        "sigma",
        "delta",
        "kappa",
        "shock_gamma0",
        "shock_gamma1",
    },
    "rbc": {"beta", "sigma", "varphi", "delta", "alpha", "rho", "sigma_eps"},
    "dmp": {
        "beta",
        "s",
        "p",
        "alpha",
        "delta",
        "rho_a",
        "rho_s",
        "b",
        "corr_as",
        "sd_ratio",
    },
    "ge_pe": {"H", "b", "c", "g", "beta", "alphas", "sigmas", "d"},
    "knobs": set(DEFAULT_KNOBS),
}


def available_presets() -> tuple:
    return tuple(sorted(path.stem for path in PRESETS_DIR.glob("*.yaml")))


def read_document(path: Path) -> dict:
    try:
        document = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as error:
        raise ConfigError(f"Could not parse {str(path)!r}: {error}") from error
    if document is None:
        return {}
    if not isinstance(document, dict):
        raise ConfigError(f"{str(path)!r} must hold a mapping at the top level")
    return document


def validate_run_document(document: dict) -> dict:
    """Reject unknown sections, unknown keys and non-positive knobs"""
    unknown_sections = set(document) - set(RUN_SCHEMA)
    if unknown_sections:
        raise ConfigError(f"Unknown configuration sections: {sorted(unknown_sections)}")
    for section, content in document.items():
        if not isinstance(content, dict):
            raise ConfigError(f"Section {section!r} must be a mapping")
        unknown_keys = set(content) - RUN_SCHEMA[section]
        if unknown_keys:
            raise ConfigError(
                f"Unknown keys in section {section!r}: {sorted(unknown_keys)}"
            )
    for knob, value in document.get("knobs", {}).items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"Knob {knob!r} must be numeric, got {value!r}")
        if value <= 0:
            raise ConfigError(f"Knob {knob!r} must be positive, got {value!r}")
    return document


@dataclass
class RunConfig:
    """Everything one CLI command needs

    Parameters
    ----------
    sections
        Validated run document: process spec and/or calibrations plus knob overrides
    output_dir
        Directory receiving the result files
    format
        'csv' or 'json' for tabular outputs
    seed
        Seed of every random draw of the run
    tolerance
        Convergence tolerance of the equilibrium fixed points
    """

    sections: Dict[str, Any] = field(default_factory=dict)
    output_dir: Path = field(default=Path(config["output-dir"]))
    format: str = config["format"]
    seed: int = config["seed"]
    tolerance: float = config["tolerance"]

    def __post_init__(self):
        self.output_dir = Path(self.output_dir)
        validate_run_document(self.sections)
        if self.format not in ("csv", "json"):
            raise ConfigError(f"Unknown output format {self.format!r}")
        if self.tolerance <= 0:
            raise ConfigError(f"Tolerance must be positive, got {self.tolerance!r}")

    @classmethod
    def load(
        cls,
        config_path: Optional[Union[str, Path]] = None,
        preset: Optional[str] = None,
        **kwargs,
    ) -> "RunConfig":
        """Merge a named preset and a user document, user keys winning"""
        document = {}
        if preset is not None:
            preset_path = PRESETS_DIR / f"{preset}.yaml"
            if not preset_path.exists():
                raise ConfigError(
                    f"Unknown preset {preset!r}. Available: {', '.join(available_presets())}"
                )
            document = recursive_update(document, read_document(preset_path))
        if config_path is not None:
            if not Path(config_path).exists():
                raise ConfigError(f"Config file {str(config_path)!r} does not exist")
            document = recursive_update(document, read_document(Path(config_path)))
        kwargs = {key: value for key, value in kwargs.items() if value is not None}
        return cls(sections=validate_run_document(document), **kwargs)

    def section(self, name: str) -> dict:
        if name not in self.sections:
            raise ConfigError(
                f"This command needs a {name!r} section; pass --config or --preset"
            )
        return self.sections[name]

    def knob(self, name: str):
        return self.sections.get("knobs", {}).get(name, DEFAULT_KNOBS[name])
