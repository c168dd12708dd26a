import json
import math
import os
import re
from collections import defaultdict
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Any

import numpy as np


class ConfigError(ValueError):
    pass


# keys mirror the long flag names, with dashes as underscores
CONFIG_KEYS = ("theta", "n", "n_grid", "phi_center", "tau_grid", "sigma_grid", "gamma_ratio", "mu", "closed_form",
               "out", "format", "svg", "threads")

PHI_CENTER_CHOICES = ("zero", "half-pi", "both")

_ANGLE = re.compile(r"^\s*(?P<sign>[-+]?)\s*(?P<num>\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(?P<den>\d*\.?\d+))?\s*$")


@dataclass
class Grid:
    thetas: list[float]
    n: int
    n_grid: list[int]
    phi_center: str
    tau_grid: list[float]
    sigma_grid: list[float]
    gamma_ratios: list[float]
    mu: int
    closed_form: bool = False


@dataclass
class Output:
    out: Path
    format: str
    svg: Path | None


@dataclass
class Runtime:
    threads: int


@dataclass
class Config:
    command: str
    grid: Grid
    output: Output
    runtime: Runtime

    def echo(self) -> dict:
        """The effective configuration as plain JSON values."""
        data = asdict(self)
        data["output"] = {k: None if v is None else str(v) for k, v in data["output"].items()}
        return data


def _load_jsonc(filepath: Path) -> defaultdict:
    """
    Process a .jsonc file and return a JSON object. Comments are removed.

    Args:
        filepath (Path): The path to the JSON file.
    """
    lines = []
    for line in filepath.read_text().splitlines():
        if line.lstrip().startswith("//"):
            continue
        lines.append(line.split(" // ")[0])
    try:
        return json.loads("\n".join(lines), object_hook=defaultdict_from_dict)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{filepath}: {e}") from e


def handle_missing_key():
    return None


def defaultdict_from_dict(d: dict):
    """
    Convert a dict to a defaultdict.

    Args:
        d (dict): The dictionary to convert.

    Returns:
        defaultdict: The converted defaultdict.
    """
    dd = defaultdict(handle_missing_key)
    for k, v in d.items():
        if isinstance(v, dict):
            dd[k] = defaultdict_from_dict(v)
        else:
            dd[k] = v
    return dd


def parse_angle(value: Any) -> float:
    """
    Parse radians given as a number or as a fraction of pi such as '7pi/20', 'pi/2' or '-pi/8'.

    Raises:
        ConfigError: If the value cannot be read as an angle.
    """
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    text = str(value).strip().lower()
    match = _ANGLE.match(text)
    if match:
        numerator = float(match["num"]) if match["num"] not in ("", ".") else 1.0
        denominator = float(match["den"]) if match["den"] else 1.0
        angle = numerator * math.pi / denominator
        return -angle if match["sign"] == "-" else angle
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"not an angle: {value!r}") from None


def parse_grid(value: Any) -> list[float]:
    """
    Parse 'a:b:steps' (inclusive, evenly spaced), a comma list, a single value or a JSON list.
    """
    if isinstance(value, (list, tuple)):
        return [parse_angle(v) for v in value]
    text = str(value).strip()
    if text.count(":") == 2:
        start, stop, steps = text.split(":")
        try:
            count = int(steps)
        except ValueError:
            raise ConfigError(f"grid step count must be an integer: {value!r}") from None
        if count < 1:
            raise ConfigError(f"grid needs at least one point: {value!r}")
        return [float(x) for x in np.linspace(parse_angle(start), parse_angle(stop), count)]
    return [parse_angle(part) for part in text.split(",") if part.strip()]


def parse_int_list(value: Any) -> list[int]:
    if isinstance(value, (list, tuple)):
        items = list(value)
    else:
        items = [part for part in str(value).split(",") if part.strip()]
    try:
        numbers = [float(item) for item in items]
    except (TypeError, ValueError):
        raise ConfigError(f"not a list of integers: {value!r}") from None
    if any(int(x) != x for x in numbers):
        raise ConfigError(f"not a list of integers: {value!r}")
    return [int(x) for x in numbers]


def _as_list(value: Any) -> list:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


def _or_default(value: Any, default: Any) -> Any:
    return default if value is None else value


def merge_settings(defaults: dict, file_data: dict | None, flags: dict, command: str) -> dict:
    """
    Flags take precedence over the config file, which takes precedence over the subcommand defaults.

    A config file may hold top-level keys and a section named after the subcommand; the section wins.
    """
    merged = dict(defaults)
    if file_data:
        for source in (file_data, file_data.get(command) or {}):
            for key in CONFIG_KEYS:
                if source.get(key) is not None:
                    merged[key] = source[key]
    for key, value in flags.items():
        if key in CONFIG_KEYS and value is not None and value != []:
            merged[key] = value
    return merged


def build_config(command: str, settings: dict) -> Config:
    """
    Convert merged raw settings into typed configuration.

    Raises:
        ConfigError: If a value cannot be parsed or lies outside its documented range.
    """
    thetas = sorted(set(parse_angle(t) for t in _as_list(settings.get("theta"))))
    try:
        n = int(_or_default(settings.get("n"), 0))
        mu = int(_or_default(settings.get("mu"), 1))
        threads = int(_or_default(settings.get("threads"), os.cpu_count() or 1))
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from None
    n_grid = sorted(set(parse_int_list(settings.get("n_grid") or [])))
    tau = settings.get("tau_grid")
    sigma = settings.get("sigma_grid")
    gamma = settings.get("gamma_ratio")
    grid = Grid(
        thetas=thetas,
        n=n,
        n_grid=n_grid,
        phi_center=str(settings.get("phi_center") or "half-pi"),
        tau_grid=sorted(set(parse_grid(tau))) if tau is not None else [],
        sigma_grid=sorted(set(parse_grid(sigma))) if sigma is not None else [0.0],
        gamma_ratios=sorted(set(parse_grid(gamma))) if gamma is not None else [0.0],
        mu=mu,
        closed_form=bool(settings.get("closed_form")),
    )
    out = Path(settings.get("out") or f"{command}.csv")
    output_format = str(settings.get("format") or "csv")
    svg = settings.get("svg")
    output = Output(out, output_format, None if svg is None else Path(svg))
    config = Config(command, grid, output, Runtime(threads))
    _validate(config)
    return config


def _validate(config: Config) -> None:
    grid = config.grid
    if grid.phi_center not in PHI_CENTER_CHOICES:
        raise ConfigError(f"--phi-center must be one of {PHI_CENTER_CHOICES}, got {grid.phi_center!r}")
    if config.output.format not in ("csv", "json"):
        raise ConfigError(f"--format must be 'csv' or 'json', got {config.output.format!r}")
    if any(not 0.0 <= t <= math.pi / 2 + 1e-12 for t in grid.thetas):
        raise ConfigError(f"theta values must lie in [0, pi/2]: {grid.thetas}")
    if grid.n < 0 or grid.n % 2:
        raise ConfigError(f"--n must be an even positive integer, got {grid.n}")
    if any(n < 2 or n % 2 for n in grid.n_grid):
        raise ConfigError(f"--n-grid must contain even positive integers: {grid.n_grid}")
    if any(s < 0 for s in grid.sigma_grid):
        raise ConfigError(f"--sigma-grid must be >= 0: {grid.sigma_grid}")
    if any(g < 0 for g in grid.gamma_ratios):
        raise ConfigError(f"--gamma-ratio must be >= 0: {grid.gamma_ratios}")
    if any(t < 0 for t in grid.tau_grid):
        raise ConfigError(f"--tau-grid must be >= 0: {grid.tau_grid}")
    if grid.mu < 1:
        raise ConfigError(f"--mu must be a positive integer, got {grid.mu}")
    if config.runtime.threads < 1:
        raise ConfigError(f"--threads must be positive, got {config.runtime.threads}")


def require_cat_thetas(config: Config) -> None:
    """Readout experiments need cat inputs, so theta must stay strictly below pi/2."""
    if not config.grid.thetas:
        raise ConfigError("at least one --theta is required")
    if any(t >= math.pi / 2 for t in config.grid.thetas):
        raise ConfigError(f"readout experiments need theta < pi/2: {config.grid.thetas}")


def require_particle_number(config: Config) -> None:
    if config.grid.n < 2:
        raise ConfigError("--n is required")


def load_config(command: str, flags: dict, defaults: dict, filepath: Path | None = None) -> Config:
    """
    Load the configuration for one subcommand.

    Args:
        command (str): The subcommand name.
        flags (dict): Parsed command-line values; None means the flag was not given.
        defaults (dict): The subcommand defaults.
        filepath (Path | None): Optional .json/.jsonc config file.

    Returns:
        Config: The configuration object.
    """
    file_data = None
    if filepath is not None:
        if not filepath.is_file():
            raise ConfigError(f"config file not found: {filepath}")
        file_data = _load_jsonc(filepath)
    return build_config(command, merge_settings(defaults, file_data, flags, command))


def phi_centers(config: Config) -> list[str]:
    if config.grid.phi_center == "both":
        return ["zero", "half-pi"]
    return [config.grid.phi_center]


def require_single_phi_center(config: Config) -> None:
    if config.grid.phi_center == "both":
        raise ConfigError(f"{config.command} takes a single --phi-center, 'zero' or 'half-pi'")
