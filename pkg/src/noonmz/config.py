"""Scenario configuration files.

Configs are INI documents. Every dimensional value carries its unit
(``200 um``, ``810 nm``, ``1 s``); dimensionless values must not. Unknown
sections or keys are rejected, missing keys take the defaults below.
Example::

    [source]
    kind = entangled

    [delays]
    delta_L1 = 200 um
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path as FsPath

from .experiment import Scenario, SourceKind, fringe_grid
from .spectral import SpectralModel


class ConfigError(Exception):
    def __init__(self, message: str, line: int | None = None, column: int | None = None, key: str | None = None):
        self.line, self.column, self.key = line, column, key
        where = f"line {line}, column {column}: " if line is not None else ""
        what = f"[{key}] " if key else ""
        super().__init__(f"{where}{what}{message}")


class ConfigSyntaxError(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class UnitMismatch(ConfigError):
    pass


class ConfigRangeError(ConfigError):
    pass


LENGTH_UNITS_UM = {"nm": 1e-3, "um": 1.0, "µm": 1.0, "μm": 1.0, "mm": 1e3, "m": 1e6}
TIME_UNITS_S = {"s": 1.0, "ms": 1e-3, "us": 1e-6}
RATE_UNITS_HZ = {"/s": 1.0, "1/s": 1.0, "hz": 1.0, "khz": 1e3, "k/s": 1e3}

# kind -> (default, unit table or None for dimensionless)
SCHEMA: dict[str, dict[str, tuple[str, object]]] = {
    "source": {
        "kind": ("entangled", "choice"),
        "n_photons": ("2", "int"),
        "werner_p": ("1.0", "unit_interval"),
    },
    "spectral": {
        "enabled": ("false", "bool"),
        "lambda0": ("810 nm", "length"),
        "xi_single": ("126 um", "length"),
        "xi_pump": ("300 um", "length"),
        "bin_count": ("257", "int"),
    },
    "delays": {
        "delta_l1": ("0 um", "length"),
    },
    "grid": {
        "fringe_start": ("-2 um", "length"),
        "fringe_stop": ("2 um", "length"),
        "fringe_step": ("10 nm", "length"),
        "envelope_start": ("-400 um", "length"),
        "envelope_stop": ("400 um", "length"),
        "envelope_step": ("5 um", "length"),
        "hom_start": ("-400 um", "length"),
        "hom_stop": ("400 um", "length"),
        "hom_step": ("5 um", "length"),
    },
    "detection": {
        "coupling_efficiency": ("1.0", "unit_interval"),
        "v_floor": ("1.0", "unit_interval"),
    },
    "rates": {
        "pair_rate": ("20000 /s", "rate"),
        "integration_time": ("1 s", "time"),
    },
    "run": {
        "seed": ("0", "int"),
    },
}

BUNDLED = (
    "paper_dl1_0",
    "paper_dl1_200",
    "paper_dl1_1000",
    "paper_dl1_10000",
    "paper_single_photon",
    "paper_hom",
)

_QUANTITY = re.compile(r"^([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)$")


@dataclass(frozen=True)
class RunConfig:
    """A parsed document: the scenario plus the auxiliary scan grids (um)."""

    scenario: Scenario
    envelope_grid_um: tuple[float, ...] = field(default_factory=tuple)
    hom_grid_um: tuple[float, ...] = field(default_factory=tuple)
    fringe_step_um: float = 0.01
    name: str = ""


def _locate(document: str, section: str | None, key: str | None) -> tuple[int | None, int | None]:
    current = None
    for lineno, raw in enumerate(document.splitlines(), start=1):
        line = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip().lower()
            if key is None and current == section:
                return lineno, raw.index("[") + 1
            continue
        if key is not None and current == section:
            k = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            if k == key:
                return lineno, raw.index(raw.lstrip()[0]) + 1
    return None, None


def _quantity(text: str, table: dict[str, float], kind: str, where) -> float:
    text = text.strip().strip('"').strip("'")
    m = _QUANTITY.match(text)
    if not m:
        raise ConfigSyntaxError(f"cannot read {text!r} as a {kind}", *where)
    value, unit = float(m.group(1)), m.group(2).lower()
    if not unit:
        raise UnitMismatch(f"{kind} {text!r} needs a unit ({', '.join(sorted(table))})", *where)
    if unit not in table:
        raise UnitMismatch(f"unit {unit!r} is not a {kind} unit", *where)
    return value * table[unit]


def _dimensionless(text: str, where) -> float:
    text = text.strip().strip('"').strip("'")
    m = _QUANTITY.match(text)
    if not m:
        raise ConfigSyntaxError(f"cannot read {text!r} as a number", *where)
    if m.group(2):
        raise UnitMismatch(f"dimensionless value {text!r} must not carry a unit", *where)
    return float(m.group(1))


def _grid(start: float, stop: float, step: float, where) -> tuple[float, ...]:
    if not step > 0 or not stop > start:
        raise ConfigRangeError("grid needs start < stop and a positive step", *where)
    return fringe_grid(start, stop, step)


def parse_config(document: str, name: str = "") -> RunConfig:
    parser = configparser.ConfigParser(
        inline_comment_prefixes=(";", "#"), interpolation=None, strict=True, default_section="\0"
    )
    try:
        parser.read_string(document)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigSyntaxError("key outside of any section", exc.lineno, 1) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigSyntaxError(str(exc).splitlines()[0], exc.lineno, 1) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigSyntaxError("malformed line", lineno, 1) from None

    values: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        sec = section.lower()
        if sec not in SCHEMA:
            raise UnknownKey(f"unknown section [{section}]", *_locate(document, sec, None), key=section)
        for key, raw in parser.items(section):
            if key not in SCHEMA[sec]:
                raise UnknownKey("unknown key", *_locate(document, sec, key), key=f"{sec}.{key}")
            values.setdefault(sec, {})[key] = raw

    def get(sec: str, key: str):
        default, kind = SCHEMA[sec][key]
        raw = values.get(sec, {}).get(key, default)
        where = (*_locate(document, sec, key), f"{sec}.{key}")
        if kind == "length":
            return _quantity(raw, LENGTH_UNITS_UM, "length", where)
        if kind == "time":
            return _quantity(raw, TIME_UNITS_S, "time", where)
        if kind == "rate":
            return _quantity(raw, RATE_UNITS_HZ, "rate", where)
        if kind == "bool":
            val = raw.strip().lower()
            if val not in ("true", "false", "yes", "no", "1", "0", "on", "off"):
                raise ConfigSyntaxError(f"expected a boolean, got {raw!r}", *where)
            return val in ("true", "yes", "1", "on")
        if kind == "choice":
            val = raw.strip().strip('"').lower()
            try:
                return SourceKind(val)
            except ValueError:
                choices = ", ".join(k.value for k in SourceKind)
                raise ConfigRangeError(f"{raw!r} is not one of {choices}", *where) from None
        num = _dimensionless(raw, where)
        if kind == "int":
            if num != int(num):
                raise ConfigRangeError(f"expected an integer, got {raw!r}", *where)
            return int(num)
        if kind == "unit_interval" and not 0.0 <= num <= 1.0:
            raise ConfigRangeError(f"{num} outside [0, 1]", *where)
        return num

    def where(sec, key):
        return (*_locate(document, sec, key), f"{sec}.{key}")

    for sec, key in (("spectral", "xi_single"), ("spectral", "xi_pump"), ("spectral", "lambda0")):
        if not get(sec, key) > 0:
            raise ConfigRangeError("must be positive", *where(sec, key))
    if get("spectral", "bin_count") < 1:
        raise ConfigRangeError("must be at least 1", *where("spectral", "bin_count"))
    kind = get("source", "kind")
    n = get("source", "n_photons")
    if kind is SourceKind.GHZ and not 1 <= n <= 6:
        raise ConfigRangeError("GHZ photon number must lie in 1..6", *where("source", "n_photons"))
    for sec, key in (("rates", "pair_rate"), ("rates", "integration_time")):
        if get(sec, key) < 0:
            raise ConfigRangeError("must be non-negative", *where(sec, key))
    if not math.isfinite(get("delays", "delta_l1")):
        raise ConfigRangeError("must be finite", *where("delays", "delta_l1"))

    spectral = SpectralModel(
        lambda0_nm=get("spectral", "lambda0") * 1e3,
        xi_single_um=get("spectral", "xi_single"),
        xi_pump_um=get("spectral", "xi_pump"),
        bin_count=get("spectral", "bin_count"),
        enabled=get("spectral", "enabled"),
    )
    fringe_step = get("grid", "fringe_step")
    scenario = Scenario(
        source=kind,
        n_photons={SourceKind.ENTANGLED: 2, SourceKind.SINGLE_PHOTON: 1}.get(kind, n),
        delta_l1_um=get("delays", "delta_l1"),
        delta_l2_grid_um=_grid(get("grid", "fringe_start"), get("grid", "fringe_stop"), fringe_step,
                               where("grid", "fringe_step")),
        spectral=spectral,
        coupling_efficiency=get("detection", "coupling_efficiency"),
        pair_rate=get("rates", "pair_rate"),
        integration_time_s=get("rates", "integration_time"),
        seed=get("run", "seed"),
        v_floor=get("detection", "v_floor"),
        werner_p=get("source", "werner_p"),
    )
    return RunConfig(
        scenario,
        _grid(get("grid", "envelope_start"), get("grid", "envelope_stop"), get("grid", "envelope_step"),
              where("grid", "envelope_step")),
        _grid(get("grid", "hom_start"), get("grid", "hom_stop"), get("grid", "hom_step"), where("grid", "hom_step")),
        fringe_step,
        name,
    )


def parse_scenario(document: str) -> Scenario:
    return parse_config(document).scenario


def parse_length(text: str) -> float:
    """Length with unit -> micrometres."""
    return _quantity(text, LENGTH_UNITS_UM, "length", (None, None, None))


def bundled_text(name: str) -> str:
    if name not in BUNDLED:
        raise FileNotFoundError(f"no bundled config {name!r}; choose from {', '.join(BUNDLED)}")
    return resources.files("noonmz").joinpath("configs", f"{name}.ini").read_text(encoding="utf-8")


def load_config(ref: str | None) -> RunConfig:
    """Load a bundled config by name, a file by path, or the defaults for ``None``."""
    if ref is None:
        return parse_config("", "defaults")
    path = FsPath(ref)
    if path.is_file():
        return parse_config(path.read_text(encoding="utf-8"), path.stem)
    return parse_config(bundled_text(ref), ref)
