"""
Dataset ingestion, domain rescaling, run configuration and artifact files.

Locations are mapped affinely onto ``[0, 1]`` per dimension using the
observed min/max; the response is mapped from its raw interval (configured,
or the data range widened by a margin on each side) onto ``T = [0, 1]``.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import jsonschema
import numpy as np

from .inference import Dataset
from .kernels import DomainSpec

FORMAT_VERSION = 1


class ConfigError(ValueError):
    """Invalid run configuration."""


class DataError(ValueError):
    """Unreadable or inconsistent input data."""


@dataclass(frozen=True)
class CsvSchema:
    location_columns: tuple
    response_column: str
    key_column: str | None = None
    passthrough_columns: tuple = ()

    def __init__(self, location_columns: Sequence[str], response_column: str,
                 key_column: str | None = None, passthrough_columns: Sequence[str] = ()):
        object.__setattr__(self, "location_columns", tuple(location_columns))
        object.__setattr__(self, "response_column", response_column)
        object.__setattr__(self, "key_column", key_column)
        object.__setattr__(self, "passthrough_columns", tuple(passthrough_columns))
        if not self.location_columns:
            raise ValueError("at least one location column required")

    def to_dict(self) -> dict:
        return {"locations": list(self.location_columns), "response": self.response_column,
                "key": self.key_column, "passthrough": list(self.passthrough_columns)}

    @classmethod
    def from_dict(cls, d: dict) -> "CsvSchema":
        return cls(d["locations"], d["response"], d.get("key"), d.get("passthrough", ()))


# column layout of the Swiss daily-temperature table
TEMPERATURE_SCHEMA = CsvSchema(
    location_columns=("Latitude", "Longitude", "Altitude"),
    response_column="Daily average temperature",
    key_column="Station",
    passthrough_columns=("Date",),
)


@dataclass(frozen=True)
class Rescaling:
    """Per-dimension affine map from raw ``[lower, upper]`` onto ``[0, 1]``."""

    lower: tuple
    upper: tuple

    def __init__(self, lower, upper):
        lo = tuple(float(v) for v in np.atleast_1d(lower))
        hi = tuple(float(v) for v in np.atleast_1d(upper))
        if len(lo) != len(hi) or any(not a < b for a, b in zip(lo, hi)):
            raise ValueError("rescaling needs lower < upper in every dimension")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def width(self) -> np.ndarray:
        return np.array(self.upper) - np.array(self.lower)

    def forward(self, raw) -> np.ndarray:
        return (np.asarray(raw, dtype=float) - np.array(self.lower)) / self.width

    def inverse(self, unit) -> np.ndarray:
        return np.array(self.lower) + np.asarray(unit, dtype=float) * self.width

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper)}

    @classmethod
    def from_dict(cls, d: dict) -> "Rescaling":
        return cls(d["lower"], d["upper"])


@dataclass
class DatasetRescaling:
    location: Rescaling
    response: Rescaling
    location_columns: tuple = ()
    response_column: str = ""

    def to_dict(self) -> dict:
        return {"location": self.location.to_dict(), "response": self.response.to_dict(),
                "location_columns": list(self.location_columns),
                "response_column": self.response_column}

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetRescaling":
        return cls(Rescaling.from_dict(d["location"]), Rescaling.from_dict(d["response"]),
                   tuple(d.get("location_columns", ())), d.get("response_column", ""))


@dataclass
class LoadReport:
    source: str
    rows_read: int = 0
    rows_loaded: int = 0
    rejected: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"source": self.source, "rows_read": self.rows_read,
                "rows_loaded": self.rows_loaded,
                "rejected": [{"line": ln, "error": msg} for ln, msg in self.rejected]}




def load_dataset_csv(path, schema: CsvSchema, t_interval=None,
                     t_margin: float = 0.1) -> tuple[Dataset, DatasetRescaling]:
    """Read a CSV of located observations into a rescaled :class:`Dataset`.

    Rows with a non-numeric location or response cell are skipped and listed
    (with their 1-based file line number) in ``dataset.metadata["load_report"]``.

    Raises
    ------
    DataError
        Missing file or column, empty file, no usable row, or a response
        outside a configured ``t_interval``.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: file not found")
    report = LoadReport(str(path))
    with open(path, newline="", encoding="utf-8") as fh:
        lines = fh.readlines()
    offset = 0
    while offset < len(lines) and lines[offset].startswith("#"):
        offset += 1
    reader = csv.reader(lines[offset:])
    header = next(reader, None)
    if header is None:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in header]
    needed = list(schema.location_columns) + [schema.response_column]
    needed += [c for c in (schema.key_column,) if c] + list(schema.passthrough_columns)
    missing = [c for c in needed if c not in header]
    if missing:
        raise DataError(f"{path}: missing column(s) {missing}")
    col = {c: header.index(c) for c in needed}
    locs, resp, keys = [], [], []
    extra = {c: [] for c in schema.passthrough_columns}
    for lineno, row in enumerate(reader, start=offset + 2):
        if not row or all(not cell.strip() for cell in row):
            continue
        report.rows_read += 1
        try:
            if len(row) < len(header):
                raise ValueError(f"expected {len(header)} cells, got {len(row)}")
            loc = [float(row[col[c]]) for c in schema.location_columns]
            val = float(row[col[schema.response_column]])
            if not (np.all(np.isfinite(loc)) and np.isfinite(val)):
                raise ValueError("non-finite value")
        except ValueError as exc:
            report.rejected.append((lineno, str(exc)))
            continue
        locs.append(loc)
        resp.append(val)
        if schema.key_column:
            keys.append(row[col[schema.key_column]].strip())
        for c in schema.passthrough_columns:
            extra[c].append(row[col[c]].strip())
    if report.rows_read == 0:
        raise DataError(f"{path}: no data rows")
    if not locs:
        raise DataError(f"{path}: every row was rejected (first: line {report.rejected[0][0]})")
    report.rows_loaded = len(locs)
    locs = np.array(locs)
    resp = np.array(resp)

    lo, hi = locs.min(axis=0), locs.max(axis=0)
    hi = np.where(hi > lo, hi, lo + 1.0)
    loc_map = Rescaling(lo, hi)
    if t_interval is None:
        rmin, rmax = resp.min(), resp.max()
        span = rmax - rmin if rmax > rmin else 1.0
        t_lo, t_hi = rmin - t_margin * span, rmax + t_margin * span
    else:
        t_lo, t_hi = (float(v) for v in t_interval)
        if resp.min() < t_lo or resp.max() > t_hi:
            raise DataError(f"{path}: responses fall outside the configured interval [{t_lo}, {t_hi}]")
    resp_map = Rescaling([t_lo], [t_hi])

    x = np.clip(loc_map.forward(locs), 0.0, 1.0)
    t = np.clip(resp_map.forward(resp[:, None]), 0.0, 1.0)
    rescaling = DatasetRescaling(loc_map, resp_map, schema.location_columns, schema.response_column)
    domain = DomainSpec.unit(locs.shape[1], 1)
    meta = {"source": str(path), "schema": schema.to_dict(), "rescaling": rescaling.to_dict(),
            "load_report": report.to_dict()}
    ds = Dataset(x, t, domain, np.array(keys) if schema.key_column else None,
                 {c: np.array(v) for c, v in extra.items()}, meta)
    return ds, rescaling


def holdout_split(dataset: Dataset, held_out_keys: Sequence[str]) -> tuple[Dataset, Dataset]:
    """Partition records by key: held-out keys go to the test set."""
    held = [str(k) for k in held_out_keys]
    if held and dataset.keys is None:
        raise DataError("dataset has no key column to hold out")
    if held:
        unknown = sorted(set(held) - set(dataset.keys.tolist()))
        if unknown:
            raise DataError(f"unknown key(s) {unknown}")
        test_mask = np.isin(dataset.keys, held)
    else:
        test_mask = np.zeros(dataset.n, dtype=bool)
    return dataset.subset(~test_mask), dataset.subset(test_mask)


def key_locations(dataset: Dataset) -> dict:
    """First (rescaled) location seen for each key, in order of appearance."""
    out = {}
    if dataset.keys is None:
        return out
    for k, x in zip(dataset.keys, dataset.x):
        out.setdefault(str(k), x)
    return out


# -------------------------- configuration --------------------------

_KERNEL_SCHEMA = {
    "type": "object",
    "properties": {
        "family": {"enum": ["matern", "squared_exponential", "exponential", "gaussian", "se"]},
        "nu": {"type": ["number", "null"], "enum": [0.5, 1.5, 2.5, None]},
        "variance": {"type": "number", "exclusiveMinimum": 0},
        "lengthscales": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                         "minItems": 1},
    },
    "required": ["family"],
    "additionalProperties": False,
}

_BOUNDS = {"type": "array", "minItems": 1,
           "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "seed": {"type": "integer", "minimum": 0},
        "p": {"type": "integer", "minimum": 1},
        "domain": {"type": "object",
                   "properties": {"bounds_D": _BOUNDS, "bounds_T": _BOUNDS},
                   "required": ["bounds_D", "bounds_T"], "additionalProperties": False},
        "kernel": _KERNEL_SCHEMA,
        "grid": {"type": "object",
                 "properties": {"fit_m": {"type": "integer", "minimum": 2},
                                "report_m": {"type": "integer", "minimum": 2}},
                 "additionalProperties": False},
        "data": {
            "type": "object",
            "properties": {
                "path": {"type": "string"},
                "schema": {"type": "object",
                           "properties": {
                               "locations": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                               "response": {"type": "string"},
                               "key": {"type": ["string", "null"]},
                               "passthrough": {"type": "array", "items": {"type": "string"}}},
                           "required": ["locations", "response"], "additionalProperties": False},
                "t_interval": {"type": ["array", "null"], "items": {"type": "number"},
                               "minItems": 2, "maxItems": 2},
                "t_margin": {"type": "number", "minimum": 0},
                "holdout": {"type": "array", "items": {"type": "string"}},
            },
            "required": ["path", "schema"],
            "additionalProperties": False,
        },
        "map": {"type": "object",
                "properties": {"tol": {"type": "number", "exclusiveMinimum": 0},
                               "max_iter": {"type": "integer", "minimum": 1}},
                "additionalProperties": False},
        "mcmc": {"type": "object",
                 "properties": {"beta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                                "n_iter": {"type": "integer", "minimum": 1},
                                "burn_in": {"type": "integer", "minimum": 0},
                                "thin": {"type": "integer", "minimum": 1}},
                 "additionalProperties": False},
        "hyper_grid": {
            "type": ["object", "null"],
            "properties": {
                "candidates": {"type": "array", "minItems": 1,
                               "items": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}}},
                "per_dim": {"type": "array", "minItems": 1,
                            "items": {"type": "array", "minItems": 1,
                                      "items": {"type": "number", "exclusiveMinimum": 0}}},
                "tie": {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 0}}},
                "variance": {"type": "number", "exclusiveMinimum": 0},
            },
            "additionalProperties": False,
        },
        "simulate": {"type": "object",
                     "properties": {"locations": {"type": "array", "minItems": 1,
                                                  "items": {"type": "array", "items": {"type": "number"}}},
                                    "n_samples": {"type": "integer", "minimum": 0}},
                     "additionalProperties": False},
        "predict": {"type": "object",
                    "properties": {"probs": {"type": "array", "items": {"type": "number",
                                                                        "exclusiveMinimum": 0,
                                                                        "exclusiveMaximum": 1}},
                                   "band_probs": {"type": "array", "items": {"type": "number",
                                                                             "minimum": 0, "maximum": 1},
                                                  "minItems": 2, "maxItems": 2},
                                   "locations": {"type": "array",
                                                 "items": {"type": "array", "items": {"type": "number"}}},
                                   "keys": {"type": "array", "items": {"type": "string"}}},
                    "additionalProperties": False},
        "rates": {"type": "object",
                  "properties": {"kernels": {"type": "array", "items": _KERNEL_SCHEMA, "minItems": 1},
                                 "metrics": {"type": "array", "items": {"enum": ["hellinger", "kl", "tv"]}},
                                 "gammas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                                 "offsets": {"type": "array", "items": {"type": "number", "minimum": 0}},
                                 "n_reps": {"type": "integer", "minimum": 1},
                                 "p": {"type": "integer", "minimum": 1},
                                 "grid_m": {"type": "integer", "minimum": 2},
                                 "fit_range": {"type": "array", "items": {"type": "number"},
                                               "minItems": 2, "maxItems": 2}},
                  "additionalProperties": False},
        "output": {"type": "object", "properties": {"dir": {"type": "string"}},
                   "additionalProperties": False},
    },
    "additionalProperties": False,
}

DEFAULT_CONFIG = {
    "format_version": FORMAT_VERSION,
    "seed": 0,
    "p": 250,
    "domain": {"bounds_D": [[0.0, 1.0]], "bounds_T": [[0.0, 1.0]]},
    "kernel": {"family": "matern", "nu": 2.5, "variance": 1.0},
    "grid": {"fit_m": 101, "report_m": 401},
    "map": {"tol": 1e-6, "max_iter": 10000},
    "mcmc": {"beta": 0.1, "n_iter": 50000, "burn_in": 10000, "thin": 10},
    "hyper_grid": None,
    "simulate": {"locations": [[0.1], [0.5], [0.9]], "n_samples": 0},
    "predict": {"probs": [0.1, 0.5, 0.9], "band_probs": [0.1, 0.9]},
    "rates": {"metrics": ["hellinger", "kl", "tv"], "gammas": [0.5, 1.0, 2.0],
              "n_reps": 1000, "p": 512, "grid_m": 201, "fit_range": [0.01, 0.1]},
    "output": {"dir": "slgp-out"},
}


def merge_config(base: dict, over: dict) -> dict:
    """Recursive dict update returning a new dict."""
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge_config(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def validate_config(raw: dict) -> dict:
    """Validate ``raw`` against the config schema and fill defaults.

    Raises
    ------
    ConfigError
        With the JSON path of the offending field.
    """
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = []
        for e in errors:
            where = "/".join(str(p) for p in e.absolute_path) or "<root>"
            msgs.append(f"{where}: {e.message}")
        raise ConfigError("invalid config:\n  " + "\n  ".join(msgs))
    cfg = merge_config(DEFAULT_CONFIG, raw)
    mc = cfg["mcmc"]
    if mc["burn_in"] >= mc["n_iter"]:
        raise ConfigError("mcmc/burn_in: must be smaller than mcmc/n_iter")
    if cfg["kernel"].get("family") == "matern" and cfg["kernel"].get("nu") is None:
        raise ConfigError("kernel/nu: required for the matern family")
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{path}: config file not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return validate_config(raw)


# ---------------------------- artifacts ----------------------------

def _atomic_write(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def provenance(config: dict, **extra) -> dict:
    return {"format_version": FORMAT_VERSION, "seed": config.get("seed"), "config": config, **extra}


def write_json(path, payload: dict):
    _atomic_write(path, json.dumps(payload, indent=1, sort_keys=True) + "\n")


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def write_csv(path, header: Sequence[str], rows, meta: dict | None = None):
    """Write rows as CSV, optionally preceded by one ``# {json}`` provenance line."""
    buf = io.StringIO()
    if meta is not None:
        buf.write("# " + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def read_csv_table(path) -> tuple[list, list, dict | None]:
    """Return ``(header, rows, meta)`` of a CSV written by :func:`write_csv`."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: file not found")
    meta = None
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    lines = text.splitlines(keepends=True)
    body = []
    for line in lines:
        if line.startswith("#"):
            if meta is None:
                try:
                    meta = json.loads(line[1:])
                except json.JSONDecodeError:
                    pass
            continue
        body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise DataError(f"{path}: empty file")
    return [h.strip() for h in rows[0]], [r for r in rows[1:] if r], meta


def read_density_csv(path, slice_index: int = 0):
    """Read one density slice from a CSV with ``t``-columns and a ``density`` column.

    Columns named ``x*`` (or ``location``) identify slices; ``slice_index``
    picks one, in order of first appearance.

    Returns
    -------
    (t_nodes, density)
        ``t_nodes`` has shape (M, d_T).
    """
    header, rows, _ = read_csv_table(path)
    if "density" not in header:
        raise DataError(f"{path}: no 'density' column")
    t_cols = [i for i, h in enumerate(header) if h == "t" or (h.startswith("t") and h[1:].isdigit())]
    if not t_cols:
        raise DataError(f"{path}: no response column ('t' or 't1', 't2', ...)")
    id_cols = [i for i, h in enumerate(header)
               if h == "location" or (h.startswith("x") and h[1:].isdigit())]
    di = header.index("density")
    groups: dict = {}
    for lineno, r in enumerate(rows, start=2):
        key = tuple(r[i] for i in id_cols)
        try:
            groups.setdefault(key, []).append([float(r[i]) for i in t_cols] + [float(r[di])])
        except (ValueError, IndexError):
            raise DataError(f"{path}: malformed row {lineno}") from None
    keys = list(groups)
    if not 0 <= slice_index < len(keys):
        raise DataError(f"{path}: slice {slice_index} requested, file holds {len(keys)}")
    arr = np.array(groups[keys[slice_index]])
    return arr[:, :-1], arr[:, -1]
