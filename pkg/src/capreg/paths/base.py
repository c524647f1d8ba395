"""Breakpoints, piecewise-linear paths, and helpers shared by the tracers."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DegenerateDesign

COND_TOL = 1e10
ZERO_TOL = 1e-10


@dataclass
class Breakpoint:
    """Solution at one knot of the path.

    ``df`` and the set fields describe the structure in force on the segment
    just below ``lam``.
    """

    lam: float
    beta: np.ndarray
    active_groups: tuple = ()
    free: dict = field(default_factory=dict)  # group -> coordinates with zero correlation (U)
    signs: np.ndarray | None = None
    df: int | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class RegularizationPath:
    breakpoints: list
    solver: str
    fingerprint: str = ""
    complete: bool = True
    approximate: bool = False
    config: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.breakpoints)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([b.lam for b in self.breakpoints])

    @property
    def betas(self) -> np.ndarray:
        return np.array([b.beta for b in self.breakpoints])

    @property
    def dfs(self) -> np.ndarray:
        return np.array([np.nan if b.df is None else b.df for b in self.breakpoints], dtype=float)

    @property
    def lambda_max(self) -> float:
        return float(self.breakpoints[0].lam)

    def segment(self, lam: float) -> int:
        """Index t with ``lam`` in ``(lam_{t+1}, lam_t]``; -1 above the first knot."""
        lams = self.lambdas
        if lam >= lams[0]:
            return -1
        # lams decreasing; first index with lams[t] <= lam, minus one
        t = int(np.searchsorted(-lams, -lam, side="left")) - 1
        return min(max(t, 0), len(lams) - 1)

    def coef(self, lam: float) -> np.ndarray:
        """Coefficients at ``lam`` by linear interpolation between knots."""
        bps = self.breakpoints
        if lam >= bps[0].lam:
            return bps[0].beta.copy()
        if lam <= bps[-1].lam:
            return bps[-1].beta.copy()
        t = self.segment(lam)
        a, b = bps[t], bps[t + 1]
        w = (a.lam - lam) / (a.lam - b.lam)
        return a.beta + w * (b.beta - a.beta)

    def df_at(self, lam: float):
        bps = self.breakpoints
        if lam >= bps[0].lam:
            return 0
        return bps[self.segment(lam)].df

    def to_dict(self) -> dict:
        out = {
            "solver": self.solver,
            "fingerprint": self.fingerprint,
            "complete": self.complete,
            "breakpoints": [
                {
                    "lambda": float(b.lam),
                    "beta": [float(v) for v in b.beta],
                    "active_groups": [int(k) for k in b.active_groups],
                    "df": None if b.df is None else int(b.df),
                }
                for b in self.breakpoints
            ],
        }
        if self.approximate:
            out["approximate"] = True
            out["config"] = self.config
        return out

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1, default=_json_float)
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_dict(cls, data: dict) -> "RegularizationPath":
        bps = [
            Breakpoint(
                lam=float(b["lambda"]),
                beta=np.array(b["beta"], dtype=float),
                active_groups=tuple(b.get("active_groups", ())),
                df=b.get("df"),
            )
            for b in data["breakpoints"]
        ]
        return cls(
            bps,
            data.get("solver", ""),
            data.get("fingerprint", ""),
            data.get("complete", True),
            data.get("approximate", False),
            data.get("config", {}),
        )

    @classmethod
    def from_json(cls, path) -> "RegularizationPath":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _json_float(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    raise TypeError(type(v))


def solve_gram(W: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``(W'W) z = rhs`` with a condition-number guard."""
    M = W.T @ W
    if M.shape[0] == 0:
        return np.zeros_like(rhs)
    if np.linalg.cond(M) > COND_TOL:
        raise DegenerateDesign(f"active-set system is singular (size {M.shape[0]})")
    return np.linalg.solve(M, rhs)


_NO_CROSS = (-np.inf,)


def crossing(q0, q1, lam_t, slack=1e-12):
    """Largest ``lam`` in ``[0, lam_t]`` where ``q0 + q1*lam`` reaches zero from above.

    Only quantities that shrink as ``lam`` decreases (``q1 > 0``) can cross.
    Returns an array (a 1-tuple for scalar input) with ``-inf`` where no
    crossing exists.
    """
    if np.ndim(q0) == 0 and np.ndim(q1) == 0:
        a, b = float(q0), float(q1)
        if not b > 1e-14 * (1.0 + abs(a)):
            return _NO_CROSS
        root = -a / b
        if root < 0.0 or root > lam_t * (1 + slack) + slack:
            return _NO_CROSS
        return (min(root, lam_t),)
    q0 = np.atleast_1d(np.asarray(q0, dtype=float))
    q1 = np.atleast_1d(np.asarray(q1, dtype=float))
    out = np.full(q0.shape, -np.inf)
    ok = q1 > 1e-14 * (1.0 + np.abs(q0))
    root = np.where(ok, -q0 / np.where(ok, q1, 1.0), -np.inf)
    good = ok & (root >= 0.0) & (root <= lam_t * (1 + slack) + slack)
    out[good] = np.minimum(root[good], lam_t)
    return out


def l1_entry(cu, cv, weight, lam_t, slack=1e-12):
    """Largest ``lam <= lam_t`` with ``sum|cu + cv*lam| = weight*lam`` (or -inf).

    The left side minus the right is convex and piecewise linear in ``lam`` and
    negative at ``lam_t`` for an inactive group, so the crossing is the lower
    end of its negative interval.
    """

    def f(lam):
        return np.abs(cu + cv * lam).sum() - weight * lam

    if f(0.0) <= 0.0:
        return -np.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        kinks = -cu / cv
    kinks = kinks[np.isfinite(kinks) & (kinks > 0) & (kinks < lam_t)]
    pts = np.concatenate(([0.0], np.sort(kinks), [lam_t]))
    vals = np.array([f(x) for x in pts])
    if vals[-1] >= -slack * (1 + weight * lam_t):
        # tight at lam_t: enters now only if the slack keeps shrinking below lam_t
        s = np.sign(cu + cv * lam_t)
        s = np.where(s == 0, -np.sign(cv), s)
        if (s * cv).sum() - weight < 0:
            return lam_t
        vals[-1] = -np.inf
        if len(pts) == 2 or vals[-2] < 0.0:
            # the negative interval may still end further down
            pass
    if not np.any(vals >= 0.0):
        return -np.inf
    k = int(np.flatnonzero(vals >= 0.0).max())
    if k == len(pts) - 1:
        return lam_t
    a, b = pts[k], pts[k + 1]
    fa, fb = vals[k], vals[k + 1]
    if not np.isfinite(fb):
        fb = f(b)
        if fb >= 0.0:
            return -np.inf
    return float(a + (b - a) * fa / (fa - fb))


def refires(le, lam_t, key, last, tol=1e-9):
    """True when ``key`` is the event just processed and would fire again at once."""
    return key == last and le >= lam_t - tol * max(1.0, lam_t)
