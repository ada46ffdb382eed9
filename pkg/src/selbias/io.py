"""Score-matrix ingestion, the plug-in selection-bias audit, and report emission."""

from __future__ import annotations

import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .increments import SeedSpec
from .premium import DEFAULT_REPLICAS, PremiumEstimate, g_gaussian_mc

CSV_HEADER = ("series", "family", "k", "n", "i_or_alpha", "value", "std_error")

AUDIT_NOTE = (
    "plug-in audit: E[max Z] with Z ~ N(0, estimated covariance) approximates the "
    "selection bias per sqrt(n); the optimism c/sqrt(n) assumes all models share one mean"
)


class ScoreFormatError(ValueError):
    """A score file that cannot be read as a rectangular numeric matrix."""


@dataclass(frozen=True)
class ScoreMatrix:
    """``n`` observations (rows) by ``K`` models (columns)."""

    values: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64, copy=True)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"score matrix must be 2-D with n >= 1 and K >= 1, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("score matrix has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        names = tuple(self.names) or tuple(f"model_{j + 1}" for j in range(v.shape[1]))
        if len(names) != v.shape[1]:
            raise ValueError(f"{len(names)} column names for {v.shape[1]} columns")
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_scores(path, header: str = "auto") -> ScoreMatrix:
    """Read a comma-separated score matrix.

    Parameters
    ----------
    path : str or path-like
    header : {"auto", "yes", "no"}
        With ``"auto"`` the first row is a header when any of its cells is not
        a number.

    Raises
    ------
    ScoreFormatError
        For an empty file, ragged rows, or a non-numeric cell (the message
        gives the 1-based row and column).
    """
    if header not in ("auto", "yes", "no"):
        raise ValueError(f"header must be auto, yes or no, got {header!r}")
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ScoreFormatError(f"{path}: empty score file")
    names = ()
    first = 1
    if header == "yes" or (header == "auto" and not all(_is_number(c) for c in rows[0])):
        names = tuple(c.strip() for c in rows[0])
        rows = rows[1:]
        first = 2
    if not rows:
        raise ScoreFormatError(f"{path}: no data rows")
    width = len(names) if names else len(rows[0])
    data = np.empty((len(rows), width))
    for r, row in enumerate(rows):
        if len(row) != width:
            raise ScoreFormatError(f"{path}: row {r + first} has {len(row)} cells, expected {width}")
        for c, cell in enumerate(row):
            try:
                data[r, c] = float(cell)
            except ValueError:
                raise ScoreFormatError(
                    f"{path}: non-numeric cell {cell!r} at row {r + first}, column {c + 1}") from None
    if not np.all(np.isfinite(data)):
        bad = np.argwhere(~np.isfinite(data))[0]
        raise ScoreFormatError(f"{path}: non-finite value at row {bad[0] + first}, column {bad[1] + 1}")
    return ScoreMatrix(data, names)


def save_scores(scores: ScoreMatrix, path) -> None:
    """Write with a header row; ``repr`` floats make the round trip exact."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(scores.names)
        for row in scores.values:
            w.writerow([repr(float(x)) for x in row])


@dataclass
class AuditReport:
    """Plug-in selection-bias audit of one score matrix."""

    n: int
    k: int
    names: tuple
    model_means: np.ndarray
    winner: int
    covariance: np.ndarray
    c_raw: PremiumEstimate
    c_hat: float
    optimism: float
    winner_mean: float
    debiased_mean: float
    leader_changes: int
    notes: List[str] = field(default_factory=lambda: [AUDIT_NOTE])


def leader_changes(values: np.ndarray) -> int:
    """Number of times the lowest-index leader of the running sums changes."""
    lead = np.argmax(np.cumsum(values, axis=0), axis=1)
    return int(np.count_nonzero(lead[1:] != lead[:-1]))


def audit(scores: ScoreMatrix, mc_replicas: int = DEFAULT_REPLICAS, seed: SeedSpec = SeedSpec()) -> AuditReport:
    """Estimate the winner's optimism as ``c_hat / sqrt(n)``.

    ``c_hat`` is the Monte Carlo ``E[max_k Z_k]`` for ``Z ~ N(0, Sigma_hat)``,
    clipped at zero, where ``Sigma_hat`` is the sample covariance of the rows.
    """
    X = scores.values
    n, k = X.shape
    if n < 2:
        raise ValueError("the audit needs at least 2 observations")
    means = X.mean(axis=0)
    winner = int(np.argmax(means))
    cov = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    if k == 1:
        c_raw = PremiumEstimate(0.0, 0.0, int(mc_replicas), "mc")
    else:
        c_raw = g_gaussian_mc(cov, mc_replicas, seed)
    c_hat = max(0.0, c_raw.value)
    opt = c_hat / math.sqrt(n)
    wm = float(means[winner])
    return AuditReport(n, k, scores.names, means, winner, cov, c_raw, c_hat, opt, wm, wm - opt,
                       leader_changes(X))


# ---------------------------------------------------------------------------
# long-format emission
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Record:
    """One row of the long-format output; ``None`` fields are not applicable."""

    series: str
    family: str = ""
    k: Optional[int] = None
    n: Optional[int] = None
    i_or_alpha: Optional[float] = None
    value: Optional[float] = None
    std_error: Optional[float] = None


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".9g")


def _json_value(x):
    if x is None:
        return None
    if isinstance(x, (int, np.integer)) and not isinstance(x, (bool, np.bool_)):
        return int(x)
    x = float(x)
    return None if math.isnan(x) else x


def records_to_csv(records: Iterable[Record]) -> str:
    lines = [",".join(CSV_HEADER)]
    for r in records:
        lines.append(",".join([r.series, r.family] + [_fmt(getattr(r, f)) for f in CSV_HEADER[2:]]))
    return "\n".join(lines) + "\n"


def records_to_json(records: Iterable[Record], metadata: dict) -> str:
    rows = [{f: (_json_value(getattr(r, f)) if f not in ("series", "family") else getattr(r, f))
             for f in CSV_HEADER} for r in records]
    return json.dumps({"metadata": metadata, "records": rows}, indent=2, sort_keys=True) + "\n"


def emit(records: Sequence[Record], fmt: str = "csv", path: str = "-", metadata: Optional[dict] = None) -> str:
    """Write records as long-format CSV or JSON to ``path`` (``-`` is stdout).

    NaN values mean "not reached" (a decay time beyond the horizon); in JSON
    they become ``null``.
    """
    if fmt == "csv":
        text = records_to_csv(records)
    elif fmt == "json":
        text = records_to_json(records, metadata or {})
    else:
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        parent = os.path.dirname(os.path.abspath(path))
        if not os.path.isdir(parent):
            raise OSError(f"cannot write {path}: directory {parent} does not exist")
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def parse_csv_records(text: str) -> List[dict]:
    """Parse emitted CSV back into dicts, checking the fixed header."""
    rows = list(csv.reader(text.splitlines()))
    if not rows or tuple(rows[0]) != CSV_HEADER:
        raise ValueError(f"unexpected header {rows[0] if rows else None}")
    out = []
    for row in rows[1:]:
        if len(row) != len(CSV_HEADER):
            raise ValueError(f"row has {len(row)} fields: {row}")
        out.append(dict(zip(CSV_HEADER, row)))
    return out


# ---------------------------------------------------------------------------
# run configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI invocation depends on; serialises to and from JSON."""

    command: str
    dist: str = "gaussian"
    k: int = 2
    n: int = 100
    paths: int = 10_000
    seed: int = 0
    sigma: tuple = (1.0,)
    rho: Optional[float] = None
    cov: Optional[tuple] = None
    alphas: tuple = ()
    means: tuple = ()
    fmt: str = "csv"
    out: str = "-"
    workers: int = 1
    options: tuple = ()

    def option(self, name, default=None):
        return dict(self.options).get(name, default)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sigma"] = list(self.sigma)
        d["cov"] = None if self.cov is None else [list(r) for r in self.cov]
        d["alphas"] = list(self.alphas)
        d["means"] = list(self.means)
        d["options"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.options}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        d["sigma"] = tuple(d.get("sigma", (1.0,)))
        d["cov"] = None if d.get("cov") is None else tuple(tuple(r) for r in d["cov"])
        d["alphas"] = tuple(d.get("alphas", ()))
        d["means"] = tuple(d.get("means", ()))
        d["options"] = tuple(sorted((k, tuple(v) if isinstance(v, list) else v)
                                    for k, v in d.get("options", {}).items()))
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))
