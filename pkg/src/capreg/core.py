"""Data model shared by every solver: datasets, groupings, JSON/CSV ingestion."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    ConstantColumn,
    DimensionMismatch,
    IndexOutOfRange,
    InvalidGrouping,
    InvalidNorm,
    NonFiniteData,
    NormMismatch,
)

STD_TOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """Design matrix ``x`` (n x p) and response ``y``.

    ``x_center``/``x_scale`` and ``y_center`` record the affine map from the
    original units, ``x = (x_raw - x_center) / x_scale``, so coefficients can
    be mapped back with :meth:`coef_to_original`.
    """

    x: np.ndarray
    y: np.ndarray
    standardized: bool = False
    x_center: np.ndarray | None = None
    x_scale: np.ndarray | None = None
    y_center: float = 0.0

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise DimensionMismatch(f"x must be non-empty, got shape {x.shape}")
        if y.shape[0] != x.shape[0]:
            raise DimensionMismatch(f"y has length {y.shape[0]}, x has {x.shape[0]} rows")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise NonFiniteData("x and y must be finite")
        p = x.shape[1]
        center = np.zeros(p) if self.x_center is None else self.x_center
        scale = np.ones(p) if self.x_scale is None else self.x_scale
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "x_center", _frozen(center))
        object.__setattr__(self, "x_scale", _frozen(scale))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    def coef_to_original(self, beta):
        """Return ``(intercept, beta_raw)`` in the units of the raw data."""
        beta_raw = np.asarray(beta, dtype=float) / self.x_scale
        intercept = self.y_center - float(self.x_center @ beta_raw)
        return intercept, beta_raw

    def predict_original(self, x_raw, beta):
        intercept, beta_raw = self.coef_to_original(beta)
        return np.asarray(x_raw, dtype=float) @ beta_raw + intercept

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.x).tobytes())
        h.update(np.ascontiguousarray(self.y).tobytes())
        return h.hexdigest()[:16]


def is_standardized(x, y=None, tol=STD_TOL) -> bool:
    x = np.asarray(x, dtype=float)
    ok = np.allclose(x.mean(axis=0), 0.0, atol=tol) and np.allclose(x.var(axis=0), 1.0, atol=tol)
    if y is not None:
        ok = ok and abs(float(np.mean(y))) <= tol
    return bool(ok)


def standardize(dataset: Dataset) -> Dataset:
    """Center every column and the response; scale columns to unit variance.

    Variances use the population denominator ``n`` so that ``x'x`` has ``n``
    on its diagonal afterwards.
    """
    x, y = dataset.x, dataset.y
    if dataset.n < 2:
        raise DimensionMismatch("standardization needs at least two observations")
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    for j, s in enumerate(sd):
        if s <= STD_TOL * max(1.0, abs(mean[j])):
            raise ConstantColumn(j)
    ym = float(y.mean())
    return Dataset(
        x=(x - mean) / sd,
        y=y - ym,
        standardized=True,
        x_center=dataset.x_center + dataset.x_scale * mean,
        x_scale=dataset.x_scale * sd,
        y_center=dataset.y_center + ym,
    )


def parse_norm(value) -> float:
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity", "+inf"):
            return math.inf
        value = float(value)
    value = float(value)
    if math.isnan(value):
        raise InvalidNorm("norm parameter is NaN")
    return value


def format_norm(value: float):
    return "inf" if math.isinf(value) else value


@dataclass(frozen=True)
class Grouping:
    """Ordered, possibly overlapping, index groups with their norms and weights."""

    groups: tuple
    group_norms: tuple
    overall_norm: float = 1.0
    weights: tuple = None
    p: int = None

    def __post_init__(self):
        groups = tuple(tuple(int(j) for j in g) for g in self.groups)
        if not groups:
            raise InvalidGrouping("at least one group is required")
        norms = self.group_norms
        if np.isscalar(norms) or isinstance(norms, str):
            norms = [norms] * len(groups)
        norms = tuple(parse_norm(v) for v in norms)
        weights = (1.0,) * len(groups) if self.weights is None else tuple(float(w) for w in self.weights)
        if len(norms) != len(groups):
            raise InvalidGrouping(f"gamma has {len(norms)} entries for {len(groups)} groups")
        if len(weights) != len(groups):
            raise InvalidGrouping(f"weights has {len(weights)} entries for {len(groups)} groups")
        if any(not (w > 0 and math.isfinite(w)) for w in weights):
            raise InvalidGrouping("weights must be positive and finite")
        for k, g in enumerate(groups):
            if not g:
                raise InvalidGrouping(f"group {k} is empty")
            if len(set(g)) != len(g):
                raise InvalidGrouping(f"group {k} repeats an index")
            if min(g) < 0:
                raise IndexOutOfRange(f"group {k} has a negative index")
        covered = set().union(*map(set, groups))
        p = max(covered) + 1 if self.p is None else int(self.p)
        if max(covered) >= p:
            raise IndexOutOfRange(f"group index {max(covered)} out of range for p={p}")
        if covered != set(range(p)):
            missing = sorted(set(range(p)) - covered)
            raise InvalidGrouping(f"indices {missing[:5]} are not covered by any group")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "group_norms", norms)
        object.__setattr__(self, "overall_norm", parse_norm(self.overall_norm))
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "p", p)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def is_nonoverlapping(self) -> bool:
        return sum(len(g) for g in self.groups) == self.p

    def uniform_norm(self):
        """Common within-group norm, or None when the norms differ."""
        first = self.group_norms[0]
        return first if all(g == first for g in self.group_norms) else None

    def membership(self) -> list:
        """For each predictor, the list of groups containing it."""
        out = [[] for _ in range(self.p)]
        for k, g in enumerate(self.groups):
            for j in g:
                out[j].append(k)
        return out

    def labels(self) -> np.ndarray:
        """Group label per predictor; only meaningful without overlap."""
        lab = np.empty(self.p, dtype=int)
        for k, g in enumerate(self.groups):
            lab[list(g)] = k
        return lab

    @classmethod
    def singletons(cls, p, norm=math.inf):
        return cls(tuple((j,) for j in range(p)), norm, 1.0, p=p)

    @classmethod
    def single(cls, p, norm=math.inf):
        return cls((tuple(range(p)),), norm, 1.0, p=p)

    @classmethod
    def from_labels(cls, labels, norm=math.inf, overall_norm=1.0):
        labels = np.asarray(labels)
        groups = [tuple(int(j) for j in np.flatnonzero(labels == u)) for u in np.unique(labels)]
        return cls(tuple(groups), norm, overall_norm, p=len(labels))

    def to_dict(self) -> dict:
        return {
            "groups": [list(g) for g in self.groups],
            "gamma0": format_norm(self.overall_norm),
            "gamma": [format_norm(g) for g in self.group_norms],
            "weights": list(self.weights),
        }

    @classmethod
    def from_dict(cls, data: dict, p: int | None = None) -> "Grouping":
        if not isinstance(data, dict):
            raise InvalidGrouping("grouping JSON must be an object")
        if "groups" not in data:
            raise InvalidGrouping("field 'groups' is missing")
        groups = data["groups"]
        if not isinstance(groups, list) or not all(isinstance(g, list) for g in groups):
            raise InvalidGrouping("field 'groups' must be a list of index lists")
        for g in groups:
            for j in g:
                if not isinstance(j, int) or isinstance(j, bool):
                    raise InvalidGrouping(f"field 'groups' has a non-integer index {j!r}")
        gamma = data.get("gamma", ["inf"] * len(groups))
        try:
            gamma0 = parse_norm(data.get("gamma0", 1))
            gamma = [parse_norm(v) for v in gamma]
        except (TypeError, ValueError) as exc:
            raise InvalidGrouping(f"field 'gamma' is malformed: {exc}") from exc
        return cls(tuple(map(tuple, groups)), tuple(gamma), gamma0, data.get("weights"), p=p)

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def from_json(cls, path, p: int | None = None) -> "Grouping":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InvalidGrouping(f"grouping file is not valid JSON: {exc}") from exc
        return cls.from_dict(data, p=p)


def group_normalize(dataset: Dataset, grouping: Grouping) -> Dataset:
    """Divide predictors in group k by ``q_k ** (1/gamma*)``, gamma* the dual exponent.

    Needs a common within-group norm strictly above 1; the returned dataset
    keeps the scale factors so coefficients map back to original units.
    """
    gbar = grouping.uniform_norm()
    if gbar is None:
        raise NormMismatch("group normalization needs a common within-group norm")
    if gbar <= 1.0:
        raise InvalidNorm("group normalization is undefined for gamma <= 1")
    if not grouping.is_nonoverlapping():
        raise InvalidGrouping("group normalization needs nonoverlapping groups")
    if grouping.p != dataset.p:
        raise DimensionMismatch(f"grouping covers {grouping.p} predictors, data has {dataset.p}")
    # 1/gamma* = (gamma - 1)/gamma, which is 1 at gamma = inf
    inv_dual = 1.0 if math.isinf(gbar) else (gbar - 1.0) / gbar
    factor = np.ones(dataset.p)
    for g in grouping.groups:
        factor[list(g)] = len(g) ** inv_dual
    return Dataset(
        x=dataset.x / factor,
        y=dataset.y,
        standardized=dataset.standardized and bool(np.all(factor == 1.0)),
        x_center=dataset.x_center,
        x_scale=dataset.x_scale * factor,
        y_center=dataset.y_center,
    )


def read_matrix_csv(path) -> np.ndarray:
    """Numeric CSV with an optional header row."""
    text = Path(path).read_text().strip().splitlines()
    if not text:
        raise DimensionMismatch(f"{path} is empty")
    rows = [line.split(",") for line in text if line.strip()]
    try:
        [float(v) for v in rows[0]]
    except ValueError:
        rows = rows[1:]
    try:
        arr = np.array([[float(v) for v in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise DimensionMismatch(f"{path}: non-numeric entry ({exc})") from exc
    return arr


def load_dataset(x_path, y_path) -> Dataset:
    x = read_matrix_csv(x_path)
    y = read_matrix_csv(y_path)
    if y.ndim == 2 and y.shape[1] != 1:
        raise DimensionMismatch(f"{y_path} must have a single column")
    return Dataset(x, y.ravel())


def write_matrix_csv(path, arr, header: Sequence[str] | None = None):
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    lines = [",".join(header)] if header else []
    lines += [",".join(format(float(v), ".17g") for v in row) for row in arr]
    Path(path).write_text("\n".join(lines) + "\n")
