"""
Run configuration for cmcurves.

Configuration can come from a plain ``key = value`` file, a YAML file, the
environment (CM_* variables) or a dictionary; CLI flags override files and
CM_SEED overrides everything for the seed.
"""

import os
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator

from .errors import ConfigurationError

ENV_KEYS = {
    "CM_TAU": "tau",
    "CM_N": "n",
    "CM_DT": "dt",
    "CM_T_END": "t_end",
    "CM_SEED": "seed",
    "CM_TOL": "tol",
    "CM_OUTPUT_DIR": "output_dir",
    "CM_FORMAT": "format",
}


def parse_complex(value: Any) -> complex:
    """Accept a complex, a number, an [re, im] pair or an 'RE,IM' string."""
    if isinstance(value, complex):
        return value
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        text = value.strip()
        if "," in text:
            re_part, im_part = text.split(",", 1)
            return complex(float(re_part), float(im_part))
        return complex(text.replace(" ", ""))
    raise ValueError(f"Cannot interpret {value!r} as a complex number")


class KernelConfig(BaseModel):
    """Elliptic function evaluation settings."""
    trunc: int = Field(default=40, ge=4)
    pole_eps: float = Field(default=1e-9, gt=0)
    cauchy_nodes: int = Field(default=64, ge=8)
    cauchy_radius_factor: float = Field(default=0.25, gt=0, lt=0.5)
    sample_count: int = Field(default=50, ge=1)
    seed_tau_box: Tuple[float, float, float] = (0.5, 3.0, 0.5)


class DynamicsConfig(BaseModel):
    """Integrator guards."""
    collision_eps: float = Field(default=1e-4, gt=0)
    max_energy_drift: float = Field(default=1e-4, gt=0)


class CurveConfig(BaseModel):
    """Spectral curve analysis settings."""
    eps_sing: float = Field(default=1e-8, gt=0)
    cubic_eps: float = Field(default=1e-6, gt=0)
    census_grid: int = Field(default=6, ge=2)
    track_steps: int = Field(default=200, ge=4)


class RunConfig(BaseModel):
    """Main configuration model."""
    tau: complex = 1j
    n: int = Field(default=3, ge=1)
    dt: float = Field(default=1e-3, gt=0)
    t_end: float = Field(default=1.0, gt=0)
    seed: int = Field(default=20240601, ge=0)
    tol: float = Field(default=1e-10, gt=0)
    output_dir: Path = Path("cm_output")
    format: Literal["json", "csv"] = "json"
    kernel: KernelConfig = Field(default_factory=KernelConfig)
    dynamics: DynamicsConfig = Field(default_factory=DynamicsConfig)
    curve: CurveConfig = Field(default_factory=CurveConfig)

    @field_validator("tau", mode="before")
    @classmethod
    def _parse_tau(cls, value):
        return parse_complex(value)

    @field_validator("tau")
    @classmethod
    def _upper_half_plane(cls, value: complex) -> complex:
        if not value.imag > 0:
            raise ValueError(f"tau must have positive imaginary part, got {value}")
        return value

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RunConfig":
        """Create configuration from dictionary."""
        try:
            return cls(**data)
        except ValidationError as e:
            raise ConfigurationError(f"Invalid configuration: {e}") from e

    @classmethod
    def from_file(cls, config_path: str) -> "RunConfig":
        """Load configuration from a YAML file or a plain ``key = value`` file."""
        path = Path(config_path)
        if not path.exists():
            raise ConfigurationError(f"Config file not found: {config_path}")
        text = path.read_text()
        if path.suffix in (".yaml", ".yml"):
            data = yaml.safe_load(text) or {}
        else:
            data = parse_key_values(text)
        return cls.from_dict(data)

    @classmethod
    def from_env(cls, environ: Optional[Dict[str, str]] = None) -> "RunConfig":
        """Load configuration from CM_* environment variables."""
        return cls.from_dict(env_overrides(environ))

    def merged(self, overrides: Dict[str, Any]) -> "RunConfig":
        data = self.model_dump()
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ("kernel", "dynamics", "curve"):
                data[key].update(value)
            else:
                data[key] = value
        return RunConfig.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        """JSON-safe dictionary; tau becomes [re, im]."""
        data = self.model_dump(mode="python")
        data["tau"] = [self.tau.real, self.tau.imag]
        data["output_dir"] = str(self.output_dir)
        data["kernel"]["seed_tau_box"] = list(self.kernel.seed_tau_box)
        return data


def parse_key_values(text: str) -> Dict[str, Any]:
    """Parse ``key = value`` lines; '#' starts a comment, dashes in keys become underscores."""
    data: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"Line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "out":
            key = "output_dir"
        if "." in key:
            section, sub = key.split(".", 1)
            data.setdefault(section, {})[sub] = value
        else:
            data[key] = value
    return data


def env_overrides(environ: Optional[Dict[str, str]] = None) -> Dict[str, Any]:
    env = os.environ if environ is None else environ
    return {field: env[name] for name, field in ENV_KEYS.items() if env.get(name) not in (None, "")}
