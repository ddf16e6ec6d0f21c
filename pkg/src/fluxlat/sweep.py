"""Gridded results, deterministic serialization and the grid-point runner."""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .errors import ValidationError


def default_threads() -> int:
    env = os.environ.get("FLUXLAT_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValidationError(f"FLUXLAT_THREADS must be an integer, got {env!r}")
        if n < 1:
            raise ValidationError(f"FLUXLAT_THREADS must be >= 1, got {n}")
        return n
    return os.cpu_count() or 1


def parallel_map(fn: Callable, points: Sequence, threads: Optional[int] = None) -> List:
    """Apply ``fn`` to every point; exceptions are returned in place of results.

    Results keep the input order regardless of completion order.
    """
    threads = threads or default_threads()

    def safe(pt):
        try:
            return fn(pt)
        except Exception as exc:  # recorded per point, the sweep continues
            return exc

    if threads == 1 or len(points) <= 1:
        return [safe(pt) for pt in points]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(safe, points))


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    return v


def config_hash(config) -> str:
    text = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def code_version() -> str:
    from . import __version__

    return __version__


@dataclass
class SweepResult:
    """Named axes (units in the names) and value arrays shaped by the axes."""

    axes: Dict[str, np.ndarray]
    values: Dict[str, np.ndarray]
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        self.axes = {k: np.asarray(v, dtype=float) for k, v in self.axes.items()}
        shape = self.shape
        for k, v in list(self.values.items()):
            v = np.asarray(v, dtype=float)
            if v.shape != shape:
                raise ValidationError(f"value {k!r} has shape {v.shape}, axes give {shape}")
            self.values[k] = v
        clash = set(self.axes) & set(self.values)
        if clash:
            raise ValidationError(f"names used both as axis and value: {sorted(clash)}")

    @property
    def shape(self):
        return tuple(len(v) for v in self.axes.values())

    def rows(self):
        """One dict per grid point in C order of the axes."""
        names = list(self.axes)
        for idx in itertools.product(*(range(n) for n in self.shape)):
            row = {name: float(self.axes[name][i]) for name, i in zip(names, idx)}
            row.update({k: float(v[idx]) for k, v in self.values.items()})
            yield row

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = list(self.axes) + list(self.values)
        writer.writerow(header)
        for row in self.rows():
            writer.writerow(["" if math.isnan(row[h]) else repr(row[h]) for h in header])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, axis_names: Sequence[str], metadata=None) -> "SweepResult":
        reader = csv.reader(io.StringIO(text))
        header = next(reader)
        data = np.array([[float(x) if x else np.nan for x in row] for row in reader], dtype=float)
        axes = {}
        for name in axis_names:
            col = data[:, header.index(name)]
            axes[name] = np.array(list(dict.fromkeys(col.tolist())))
        shape = tuple(len(v) for v in axes.values())
        values = {h: data[:, j].reshape(shape) for j, h in enumerate(header) if h not in axes}
        return cls(axes, values, dict(metadata or {}))

    def to_dict(self):
        return {
            "axes": {k: _jsonable(v) for k, v in self.axes.items()},
            "values": {k: _jsonable(v) for k, v in self.values.items()},
            "metadata": _jsonable(self.metadata),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SweepResult":
        raw = json.loads(text)
        axes = {k: np.array(v, dtype=float) for k, v in raw["axes"].items()}
        shape = tuple(len(v) for v in axes.values())
        values = {}
        for k, v in raw["values"].items():
            flat = np.array([np.nan if x is None else x for x in np.array(v, dtype=object).ravel()], dtype=float)
            values[k] = flat.reshape(shape)
        return cls(axes, values, raw.get("metadata", {}))

    def equals(self, other: "SweepResult") -> bool:
        if list(self.axes) != list(other.axes) or list(self.values) != list(other.values):
            return False
        same = lambda a, b: np.array_equal(a, b, equal_nan=True)
        return all(same(self.axes[k], other.axes[k]) for k in self.axes) and all(
            same(self.values[k], other.values[k]) for k in self.values
        )
