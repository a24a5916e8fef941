"""Instance generation and file formats for clouds, traces and reports.

Random draws use numpy's PCG64 bit generator (``np.random.default_rng``),
seeded explicitly. Cloud files are CSV with a header row of feature names
and one row per sample; in memory a cloud is a (d, n) array whose columns
are samples.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._checks import as_cloud
from .homotopy import HomotopyTrace, SolveReport, TraceRecord

FAMILIES = ("gaussian_toy", "uniform_random", "rotated_copy")
FLOAT_FORMAT = ".17g"
TRACE_COLUMNS = ("iteration", "path_position", "kappa_before", "kappa_after")


@dataclass(frozen=True)
class InstanceSpec:
    """Parameters of a generated instance.

    ``noise``, ``angle`` and ``order`` only affect ``rotated_copy``. With
    ``angle=None`` that family draws a random rotation of finite ``order``
    and builds the source from its orbits, so the target is an exact
    rotated, shuffled copy and a zero-cost plan exists. With an explicit
    ``angle`` the first two features are rotated by it and the source is
    plain Gaussian.
    """

    family: str
    n: int
    d: int
    seed: int = 0
    noise: float = 0.0
    angle: Optional[float] = None
    order: int = 4

    def __post_init__(self):
        family = self.family.replace("-", "_")
        if family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", family)
        for name in ("n", "d"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed!r}")
        if not (math.isfinite(self.noise) and self.noise >= 0):
            raise ValueError(f"noise must be finite and >= 0, got {self.noise!r}")
        if self.angle is not None and not math.isfinite(self.angle):
            raise ValueError("angle must be finite")
        if self.angle is not None and self.d < 2:
            raise ValueError("a rotation angle needs d >= 2")
        if int(self.order) != self.order or self.order < 2:
            raise ValueError(f"order must be an integer >= 2, got {self.order!r}")


def random_orthogonal(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR with sign correction)."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def _finite_order_rotation(d: int, order: int, rng: np.random.Generator) -> np.ndarray:
    # each plane turns by a random nonzero multiple of 2*pi/order
    basis = random_orthogonal(d, rng)
    core = np.eye(d)
    for p in range(d // 2):
        angle = 2 * np.pi * rng.integers(1, order) / order
        c, s = np.cos(angle), np.sin(angle)
        a, b = 2 * p, 2 * p + 1
        core[a, a], core[a, b], core[b, a], core[b, b] = c, -s, s, c
    return basis @ core @ basis.T


def _rotated_copy(spec: InstanceSpec, rng: np.random.Generator):
    n, d = spec.n, spec.d
    if spec.angle is None:
        rot = _finite_order_rotation(d, spec.order, rng)
        orbits = n // spec.order
        seeds = rng.standard_normal((d, orbits))
        pieces = [seeds]
        for _ in range(spec.order - 1):
            pieces.append(rot @ pieces[-1])
        # leftover samples sit at the origin, which every rotation fixes
        pieces.append(np.zeros((d, n - orbits * spec.order)))
        x = np.concatenate(pieces, axis=1)[:, rng.permutation(n)]
    else:
        rot = np.eye(d)
        c, s = np.cos(spec.angle), np.sin(spec.angle)
        rot[:2, :2] = [[c, -s], [s, c]]
        x = rng.standard_normal((d, n))
    y = (rot @ x)[:, rng.permutation(n)]
    if spec.noise > 0:
        y = y + spec.noise * rng.standard_normal((d, n))
    return x, y


def generate(spec: InstanceSpec) -> tuple[np.ndarray, np.ndarray]:
    """Source and target clouds, each (d, n), deterministic in ``spec``."""
    rng = np.random.default_rng(int(spec.seed))
    n, d = spec.n, spec.d
    if spec.family == "gaussian_toy":
        # two offset blobs of different shape
        x = rng.standard_normal((d, n))
        mean = np.zeros((d, 1))
        mean[0] = 2.0
        if d > 1:
            mean[1] = 1.0
        spread = np.ones((d, 1))
        spread[0] = 1.5
        if d > 1:
            spread[1] = 0.6
        y = mean + spread * rng.standard_normal((d, n))
        return x, y
    if spec.family == "uniform_random":
        return rng.random((d, n)), rng.random((d, n))
    return _rotated_copy(spec, rng)


class CloudFormatError(ValueError):
    """A cloud file is malformed. ``line`` and ``column`` are 1-based."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        where = []
        if line is not None:
            where.append(f"row {line}")
        if column is not None:
            where.append(f"column {column}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.column = column


class HeaderError(CloudFormatError):
    pass


class RaggedRowError(CloudFormatError):
    pass


class NonNumericError(CloudFormatError):
    pass


class NonFiniteError(CloudFormatError):
    pass


def _looks_numeric(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def load_cloud(path) -> np.ndarray:
    """Read a CSV cloud (rows are samples) into a (d, n) array."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or not header or all(not h.strip() for h in header):
            raise HeaderError("missing header row", line=1)
        for col, name in enumerate(header, start=1):
            if not name.strip():
                raise HeaderError("empty feature name in header", line=1, column=col)
        if all(_looks_numeric(h) for h in header):
            raise HeaderError("header row holds numbers, not feature names", line=1)
        if len(set(header)) != len(header):
            raise HeaderError("duplicate feature names in header", line=1)

        d = len(header)
        rows = []
        for row in reader:
            line = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != d:
                raise RaggedRowError(f"expected {d} fields, found {len(row)}", line=line)
            values = []
            for col, field in enumerate(row, start=1):
                try:
                    value = float(field)
                except ValueError:
                    raise NonNumericError(f"not a number: {field!r}", line=line, column=col) from None
                if not math.isfinite(value):
                    raise NonFiniteError(f"non-finite value {field!r}", line=line, column=col)
                values.append(value)
            rows.append(values)
    if not rows:
        raise CloudFormatError("file has no sample rows")
    return np.array(rows, dtype=float).T


def save_cloud(cloud, path, names=None) -> None:
    cloud = as_cloud(cloud)
    d = cloud.shape[0]
    names = list(names) if names is not None else [f"x{k}" for k in range(d)]
    if len(names) != d:
        raise ValueError(f"{len(names)} feature names for {d} features")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for sample in cloud.T:
            writer.writerow([format(v, FLOAT_FORMAT) for v in sample])


def _fmt(value) -> str:
    return "" if value is None else format(value, FLOAT_FORMAT)


def save_trace(trace: HomotopyTrace, path) -> None:
    """One CSV row per record; ``kappa_before`` is empty where undefined."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for rec in trace.records:
            writer.writerow([rec.iteration, _fmt(rec.path_position),
                             _fmt(rec.kappa_before), _fmt(rec.kappa_after)])


def load_trace(path) -> HomotopyTrace:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise HeaderError(f"trace header must be {','.join(TRACE_COLUMNS)}", line=1)
        records = [
            TraceRecord(
                iteration=int(row["iteration"]),
                path_position=float(row["path_position"]),
                kappa_before=float(row["kappa_before"]) if row["kappa_before"] else None,
                kappa_after=float(row["kappa_after"]),
            )
            for row in reader
        ]
    steps = records[0].iteration if records else 0
    return HomotopyTrace(steps, records)


def save_report(report: SolveReport, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, allow_nan=False)
        fh.write("\n")
    os.replace(tmp, path)


def load_report(path) -> SolveReport:
    with open(path, encoding="utf-8") as fh:
        return SolveReport.from_dict(json.load(fh))
