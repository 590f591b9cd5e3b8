"""Experiment configuration: a key-value file plus command-line overrides."""

from __future__ import annotations

import configparser
import re
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

from .samplers import SHIFT_MODES

PROCESSES = ("poisson", "dpp", "file")
SECTION = "experiment"


class ConfigError(ValueError):
    """Invalid configuration; ``line`` points into the source file if known."""

    def __init__(self, message: str, source: str | None = None, line: int | None = None):
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(where + message)
        self.line = line


@dataclass
class ExperimentConfig:
    d: int = 2
    L: float = 50.0
    process: str = "poisson"
    alpha: float = 2.0
    shift_mode: str = "stationarized"
    seeds: list = field(default_factory=lambda: [0])
    # spectral DPP parameters
    shape: float = 10.0
    scale_fraction: float = 1 - 1e-4
    truncation: int | None = None
    # estimator parameters
    k_max: float = 3.0
    per_decade: int = 12
    max_per_bin: int | None = None
    radii: list = field(default_factory=lambda: [1.0, 2.0, 5.0, 10.0])
    n_windows: int = 10000
    dr: float = 1.0
    r_max: float = 20.0
    ball_radius: float = 3.0
    budget: int = 1_000_000
    input: str | None = None
    out: str = "out"
    deterministic: bool = True

    def validate(self, source: str | None = None, lines: dict | None = None) -> "ExperimentConfig":
        lines = lines or {}

        def fail(key, msg):
            raise ConfigError(f"{key}: {msg}", source, lines.get(key))

        if self.d not in (1, 2, 3):
            fail("d", f"dimension must be 1, 2 or 3, got {self.d}")
        if not self.L > 0:
            fail("L", f"box side must be positive, got {self.L}")
        if self.process not in PROCESSES:
            fail("process", f"must be one of {', '.join(PROCESSES)}, got {self.process!r}")
        if self.process == "file" and not self.input:
            fail("input", "process=file needs an input point-set file")
        if not self.alpha > 0:
            fail("alpha", f"intensity must be positive, got {self.alpha}")
        if self.shift_mode not in SHIFT_MODES:
            fail("shift_mode", f"must be one of {', '.join(SHIFT_MODES)}")
        if not self.seeds or any(int(s) < 0 for s in self.seeds):
            fail("seeds", "need at least one non-negative seed")
        if not 0 < self.scale_fraction <= 1:
            fail("scale_fraction", "must lie in (0, 1]")
        if not self.shape > 0:
            fail("shape", "must be positive")
        if not self.k_max > 0:
            fail("k_max", "must be positive")
        if self.per_decade < 1:
            fail("per_decade", "must be at least 1")
        if not self.radii or any(r <= 0 for r in self.radii):
            fail("radii", "window radii must be positive")
        if self.n_windows < 2:
            fail("n_windows", "need at least two windows")
        if not self.dr > 0 or not self.r_max > self.dr:
            fail("dr", "need 0 < dr < r_max")
        if self.budget < 1:
            fail("budget", "must be positive")
        return self

    def as_dict(self) -> dict:
        return asdict(self)


def _convert(name: str, raw: str, default):
    raw = raw.strip()
    typ = {f.name: f.type for f in fields(ExperimentConfig)}[name]
    if raw.lower() in ("none", "") and "None" in str(typ):
        return None
    if name in ("seeds",):
        return parse_seeds(raw)
    if name in ("radii",):
        return [float(v) for v in re.split(r"[,\s]+", raw) if v]
    if isinstance(default, bool):
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(default, int) or "int" in str(typ):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


def parse_seeds(text: str) -> list[int]:
    """``"0-4"``, ``"1,5,9"`` or ``"0-2,7"``."""
    out = []
    for part in re.split(r"[,\s]+", str(text).strip()):
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    """Read ``[experiment]`` from an INI-style file and apply ``overrides``."""
    path = Path(path)
    text = path.read_text()
    return config_from_text(text, str(path), overrides)


def config_from_text(text: str, source: str = "<config>", overrides: dict | None = None,
                     section: str = SECTION) -> ExperimentConfig:
    parser = _parser()
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        msg = str(exc).splitlines()[0]
        if isinstance(exc, configparser.ParsingError) and exc.errors:
            line, bad = exc.errors[0]
            msg = f"cannot parse {bad.strip()!r} (expected key = value)"
        raise ConfigError(msg, source, line) from None
    if not parser.has_section(section):
        raise ConfigError(f"missing [{section}] section", source)
    key_lines = _key_lines(text, section)
    defaults = ExperimentConfig()
    known = {f.name for f in fields(ExperimentConfig)}
    values = {}
    for key, raw in parser.items(section):
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", source, key_lines.get(key))
        try:
            values[key] = _convert(key, raw, getattr(defaults, key))
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}", source, key_lines.get(key)) from None
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig(**values).validate(source, key_lines)


def _parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case sensitive (L)
    return parser


def _key_lines(text: str, section: str) -> dict:
    lines, current = {}, None
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("["):
            current = s.strip("[]").strip()
        elif current == section and s and not s.startswith(("#", ";")):
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
            lines.setdefault(key, n)
    return lines


def preset_text() -> str:
    return resources.files("hypermatch").joinpath("presets.ini").read_text()


def load_preset(name: str, scale: str = "desk", overrides: dict | None = None) -> ExperimentConfig:
    """A canned figure configuration; ``scale`` picks the ``desk`` or
    ``smoke`` variant."""
    section = f"{name}:{scale}"
    text = preset_text()
    parser = _parser()
    parser.read_string(text)
    if not parser.has_section(section):
        choices = sorted(s for s in parser.sections())
        raise ConfigError(f"no preset {section!r}; available: {', '.join(choices)}", "presets.ini")
    return config_from_text(text, "presets.ini", overrides, section=section)


def preset_names() -> list[str]:
    parser = _parser()
    parser.read_string(preset_text())
    return sorted({s.split(":")[0] for s in parser.sections()})
