"""File formats, spec strings and run configuration.

Model and prior specs use a ``name:key=value,...`` grammar::

    poisson
    normal:variance=1
    gamma:shape=3,rate=1
    normal:mean=0,precision=0.01

Floats are written with 17 significant digits so doubles round-trip.
"""
from __future__ import annotations

import csv
import io as _stdio
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import PowerCalError
from .models import Dataset, ExpFamilyModel, GammaPrior, NormalKnownVar, NormalPrior, Poisson, Prior


class DataFileError(PowerCalError, OSError):
    """A data file is missing, unreadable or holds no observations."""


class ConfigError(PowerCalError, ValueError):
    """A spec string or run configuration is malformed."""


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise ValueError(f"cannot serialise non-finite float {obj!r}")
        return format_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(obj[k], indent, level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON: sorted keys, 17-digit floats, trailing newline."""
    return _encode(obj, indent, 0) + "\n"


# --------------------------------------------------------------------------
# spec strings
# --------------------------------------------------------------------------

def parse_spec(text: str) -> tuple[str, dict[str, float]]:
    name, _, rest = text.strip().partition(":")
    name = name.strip().lower()
    if not name:
        raise ConfigError(f"empty spec {text!r}")
    params = {}
    if rest.strip():
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            if not eq:
                raise ConfigError(f"expected key=value in {text!r}, got {item!r}")
            try:
                params[key.strip().lower()] = float(value)
            except ValueError:
                raise ConfigError(f"non-numeric value for {key.strip()!r} in {text!r}") from None
    return name, params


def _take(params: dict, allowed: dict, text: str) -> dict:
    unknown = set(params) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys {sorted(unknown)} in {text!r}")
    out = dict(allowed)
    out.update(params)
    missing = [k for k, v in out.items() if v is None]
    if missing:
        raise ConfigError(f"missing keys {missing} in {text!r}")
    return out


def parse_model(text: str) -> ExpFamilyModel:
    name, params = parse_spec(text)
    if name == "poisson":
        _take(params, {}, text)
        return Poisson()
    if name == "normal":
        p = _take(params, {"variance": 1.0}, text)
        return NormalKnownVar(p["variance"])
    raise ConfigError(f"unknown model {name!r}; expected 'poisson' or 'normal'")


def parse_prior(text: str) -> Prior:
    name, params = parse_spec(text)
    if name == "gamma":
        p = _take(params, {"shape": None, "rate": None}, text)
        return GammaPrior(p["shape"], p["rate"])
    if name == "normal":
        p = _take(params, {"mean": 0.0, "precision": None}, text)
        return NormalPrior(p["mean"], p["precision"])
    raise ConfigError(f"unknown prior {name!r}; expected 'gamma' or 'normal'")


def model_spec_string(model: ExpFamilyModel) -> str:
    if isinstance(model, Poisson):
        return "poisson"
    if isinstance(model, NormalKnownVar):
        return f"normal:variance={format_float(model.variance)}"
    return model.spec_string()


def prior_spec_string(prior: Prior) -> str:
    if isinstance(prior, GammaPrior):
        return f"gamma:shape={format_float(prior.shape)},rate={format_float(prior.rate)}"
    if isinstance(prior, NormalPrior):
        return f"normal:mean={format_float(prior.loc)},precision={format_float(prior.precision)}"
    raise ConfigError(f"no spec string for {type(prior).__name__}")


# --------------------------------------------------------------------------
# data and CSV
# --------------------------------------------------------------------------

def read_data(path) -> Dataset:
    """One number per line; an optional first line ``x`` is a header."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataFileError(f"cannot read data file {path}: {exc}") from exc
    rows = [ln.strip() for ln in lines if ln.strip()]
    if rows and rows[0].lower() == "x":
        rows = rows[1:]
    if not rows:
        raise DataFileError(f"data file {path} holds no observations")
    try:
        values = [float(r) for r in rows]
    except ValueError as exc:
        raise DataFileError(f"non-numeric line in {path}: {exc}") from exc
    return Dataset(np.array(values))


def write_text(path, text: str) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataFileError(f"cannot write {path}: {exc}") from exc


def csv_text(header, rows, comments=()) -> str:
    buf = _stdio.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def read_csv_columns(path) -> dict[str, np.ndarray]:
    """Numeric CSV with a header row; ``#`` comment lines are skipped."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(ln for ln in fh if not ln.startswith("#"))]
    header, body = rows[0], rows[1:]
    cols = np.array(body, dtype=float).T
    return dict(zip(header, cols))


# --------------------------------------------------------------------------
# run configuration
# --------------------------------------------------------------------------

COMMANDS = ("calibrate", "posterior", "reproduce")


@dataclass
class RunConfig:
    command: str
    model: str = "poisson"
    prior: str = "gamma:shape=3,rate=1"
    method: str = "fisher"
    data: str | None = None
    seed: int = 0
    output: str | None = None
    w: float | None = None
    figure: str | None = None
    scenario: str | None = None
    points: int = 2001
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.method not in ("fisher", "kl"):
            raise ConfigError(f"unknown method {self.method!r}")
        bad = set(self.tolerances) - {"root_tol"}
        if bad:
            raise ConfigError(f"unknown tolerance keys {sorted(bad)}")
        # canonical spellings, so parse -> print -> parse is a fixed point
        self.model = model_spec_string(parse_model(self.model))
        self.prior = prior_spec_string(parse_prior(self.prior))

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return dumps(self.to_dict())
