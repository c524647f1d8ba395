"""Synthetic experiment families, the model-error metric and a replication harness.

Families
--------
``grouped_factor``
    ``K`` correlated hidden factors, ``q`` noisy proxies each, fixed decaying
    coefficients on the first three groups, ``sigma = 3``.
``small_n_large_p``
    Same design with Laplace coefficients, either one draw per group
    (``grouped``) or one per predictor (``individual``).
``anova``
    Ten standard-normal main effects plus their 45 pairwise products.
``wavelet``
    Replicated Haar design on 16 time points with a coefficient tree.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .clustering import correlation_distance, pam_cluster
from .core import Dataset, Grouping, standardize
from .errors import ConfigError, InvalidShape, NotPSD
from .hierarchy import (
    anova_design,
    anova_pairs,
    build_anova_graph,
    build_haar_tree,
    compile_penalty,
    hierarchy_gap,
)
from .paths.blasso import BlassoConfig
from .paths.dispatch import fit_path
from .selection import aicc, cross_validate

FAMILIES = ("grouped_factor", "small_n_large_p", "anova", "wavelet")

ANOVA_LEVELS = {
    # (Z1Z2, Z1Z3, Z1Z4, Z2Z3, Z2Z4, Z3Z4)
    "none": (0, 0, 0, 0, 0, 0),
    "weak": (0.5, 0, 0, 0.1, 0.1, 0),
    "moderate": (1.0, 0, 0, 0.5, 0.4, 0.1),
    "strong": (5, 0, 0, 4, 2, 0),
    "very_strong": (7, 7, 7, 2, 2, 1),
}
ANOVA_MAIN = (7.0, 2.0, 1.0, 1.0)
ANOVA_SIGMA = 3.7


# ------------------------------------------------------------------ generators
def factor_covariance(k_groups: int, group_size: int) -> np.ndarray:
    """Population covariance of the factor design."""
    p = k_groups * group_size
    labels = np.repeat(np.arange(k_groups), group_size)
    lag = np.abs(labels[:, None] - labels[None, :])
    cz = np.where(lag == 0, 2.0, np.where(lag == 1, 1.0, 0.0))
    idx = np.arange(p)
    return cz + 4.0 * 0.95 ** np.abs(idx[:, None] - idx[None, :])


def gen_grouped_factor(k_groups: int, group_size: int, n: int, seed, beta=None, sigma: float = 0.0):
    """Draw the factor design; returns ``(Dataset, true Grouping, covariance)``.

    The response is ``X beta + sigma * noise`` when ``beta`` is given, else zero.
    """
    if min(k_groups, group_size, n) < 1:
        raise ConfigError("k_groups, group_size and n must be positive")
    rng = np.random.default_rng(seed)
    p = k_groups * group_size
    labels = np.repeat(np.arange(k_groups), group_size)
    cz = np.eye(k_groups) * 2.0 + (np.eye(k_groups, k=1) + np.eye(k_groups, k=-1))
    idx = np.arange(p)
    ceta = 4.0 * 0.95 ** np.abs(idx[:, None] - idx[None, :])
    Z = rng.multivariate_normal(np.zeros(k_groups), cz, size=n, method="cholesky")
    eta = rng.multivariate_normal(np.zeros(p), ceta, size=n, method="cholesky")
    X = Z[:, labels] + eta
    y = np.zeros(n) if beta is None else X @ np.asarray(beta, dtype=float) + sigma * rng.standard_normal(n)
    return Dataset(X, y), Grouping.from_labels(labels), factor_covariance(k_groups, group_size)


def gen_beta_411(p: int = 100) -> np.ndarray:
    if p < 30:
        raise InvalidShape("the decaying-coefficient profile needs p >= 30")
    beta = np.zeros(p)
    j = np.arange(10)
    beta[0:10] = 0.10 * (1 + 0.9**j)
    beta[10:20] = 0.04 * (1 + 0.9**j)
    beta[20:30] = 0.01 * (1 + 0.9**j)
    return beta


def gen_laplacian_beta(scheme: str, alpha: float, grouping, seed) -> np.ndarray:
    """Laplace coefficients with standard deviation ``alpha`` (scale ``alpha / sqrt 2``).

    ``grouping`` is a :class:`Grouping` or a label vector.
    """
    if not alpha > 0:
        raise ConfigError("alpha must be positive")
    labels = grouping.labels() if isinstance(grouping, Grouping) else np.asarray(grouping)
    rng = np.random.default_rng(seed)
    scale = alpha / math.sqrt(2.0)
    if scheme == "grouped":
        return rng.laplace(0.0, scale, size=int(labels.max()) + 1)[labels]
    if scheme == "individual":
        return rng.laplace(0.0, scale, size=labels.size)
    raise ConfigError(f"unknown Laplace scheme {scheme!r}")


def laplacian_signal_power(scheme: str, alpha: float, k_groups: int, group_size: int) -> float:
    """``E(beta' Sigma beta)`` for the Laplace schemes on the factor design."""
    S = factor_covariance(k_groups, group_size)
    if scheme == "individual":
        return alpha**2 * float(np.trace(S))
    labels = np.repeat(np.arange(k_groups), group_size)
    same = labels[:, None] == labels[None, :]
    return alpha**2 * float(S[same].sum())


def anova_beta(level: str, d: int = 10) -> np.ndarray:
    if level not in ANOVA_LEVELS:
        raise ConfigError(f"unknown interaction level {level!r}")
    pairs = anova_pairs(d)
    beta = np.zeros(d + len(pairs))
    beta[: len(ANOVA_MAIN)] = ANOVA_MAIN
    named = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    for (i, j), v in zip(named, ANOVA_LEVELS[level]):
        beta[d + pairs.index((i, j))] = v
    return beta


def gen_anova(interaction_level: str, n: int = 121, seed=0, d: int = 10, sigma: float = ANOVA_SIGMA):
    """Returns ``(Dataset, beta, graph, covariance)``; the covariance is the identity."""
    if n < 1:
        raise ConfigError("n must be positive")
    rng = np.random.default_rng(seed)
    beta = anova_beta(interaction_level, d)
    X = anova_design(rng.standard_normal((n, d)))
    y = X @ beta + sigma * rng.standard_normal(n)
    return Dataset(X, y), beta, build_anova_graph(d), np.eye(X.shape[1])


def wavelet_scenarios(path=None) -> dict:
    """Coefficient trees keyed by scenario name (bundled stand-ins unless ``path`` is given)."""
    if path is None:
        text = resources.files("capreg.data").joinpath("wavelet_scenarios.json").read_text()
    else:
        text = Path(path).read_text()
    return {k: np.array(v, dtype=float) for k, v in json.loads(text).items() if not k.startswith("_")}


def gen_wavelet(beta_tree, snr: float = 0.4, replicate_sets: int = 5, seed=0, levels: int = 4, time_points: int = 16):
    """Returns ``(Dataset, beta, graph, covariance, sigma)``.

    ``sigma`` solves ``beta' Sigma beta / sigma^2 = snr`` with ``Sigma`` the
    per-row second moment of the Haar design.
    """
    graph, H = build_haar_tree(levels, time_points)
    beta = np.asarray(beta_tree, dtype=float)
    if beta.shape != (H.shape[1],):
        raise InvalidShape(f"beta_tree needs {H.shape[1]} entries, got {beta.shape}")
    if not snr > 0 or replicate_sets < 1:
        raise ConfigError("snr must be positive and replicate_sets at least 1")
    Sigma = H.T @ H / time_points
    power = float(beta @ Sigma @ beta)
    sigma = math.sqrt(power / snr) if power > 0 else 1.0
    rng = np.random.default_rng(seed)
    X = np.vstack([H] * replicate_sets)
    y = X @ beta + sigma * rng.standard_normal(X.shape[0])
    return Dataset(X, y), beta, graph, Sigma, sigma


def model_error(beta_hat, beta_true, sigma_x) -> float:
    """``(beta_hat - beta)' Sigma (beta_hat - beta)``."""
    S = np.asarray(sigma_x, dtype=float)
    d = np.asarray(beta_hat, dtype=float) - np.asarray(beta_true, dtype=float)
    if S.shape != (d.size, d.size):
        raise InvalidShape(f"covariance shape {S.shape} does not match p={d.size}")
    if not np.allclose(S, S.T, atol=1e-10 * max(1.0, np.abs(S).max())):
        raise NotPSD("covariance is not symmetric")
    if np.linalg.eigvalsh(S).min() < -1e-10 * max(1.0, np.abs(S).max()):
        raise NotPSD("covariance has a negative eigenvalue")
    return max(float(d @ S @ d), 0.0)


# ------------------------------------------------------------------ harness
@dataclass(frozen=True)
class Arm:
    """One method column.

    ``structure``: ``none`` | ``true`` | ``pam`` | ``hierarchy``.  ``pam_factor``
    scales the true group count for PAM.  ``norm`` is the within-group norm for
    BLasso arms.  ``selection`` overrides the experiment's rule.
    """

    name: str
    solver: str
    structure: str = "none"
    pam_factor: float = 1.0
    norm: float = math.inf
    selection: str | None = None
    step_size: float | None = None


@dataclass(frozen=True)
class ExperimentSpec:
    family: str
    parameters: dict = field(default_factory=dict)
    replications: int = 1
    seed: int = 0
    lambda_selection: str = "aicc"  # "aicc" | "cv"
    folds: int = 10
    fold_scheme: str = "random"
    arms: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"family must be one of {FAMILIES}, got {self.family!r}")
        if self.replications < 1:
            raise ConfigError("replications must be at least 1")
        if self.lambda_selection not in ("aicc", "cv"):
            raise ConfigError("lambda_selection must be 'aicc' or 'cv'")
        arms = tuple(a if isinstance(a, Arm) else Arm(**a) for a in self.arms)
        object.__setattr__(self, "arms", arms)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["arms"] = [{**asdict(a), "norm": "inf" if math.isinf(a.norm) else a.norm} for a in self.arms]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentSpec":
        data = dict(data)
        arms = []
        for a in data.pop("arms", []):
            a = dict(a)
            if str(a.get("norm", "inf")) == "inf":
                a["norm"] = math.inf
            arms.append(Arm(**a))
        return cls(arms=tuple(arms), **data)


METRICS = ("model_error", "n_selected_vars", "n_selected_groups", "df", "hierarchy_gap")


@dataclass
class ExperimentReport:
    spec: dict
    per_replication: list
    summary: dict

    def to_dict(self) -> dict:
        return {"spec": self.spec, "per_replication": self.per_replication, "summary": self.summary}

    def to_json(self, path=None) -> str:
        text = json.dumps(self.to_dict(), indent=1, default=_plain)
        if path is not None:
            Path(path).write_text(text)
        return text

    def summary_rows(self):
        """``(arm, metric, mean, se)`` rows."""
        return [(arm, m, v["mean"], v["se"]) for arm, ms in self.summary.items() for m, v in ms.items()]

    def values(self, arm: str, metric: str) -> np.ndarray:
        return np.array([r[metric] for r in self.per_replication if r["arm"] == arm], dtype=float)

    def paired_difference(self, arm_a: str, arm_b: str, metric: str = "model_error"):
        """Mean and standard error of the per-replication difference ``a - b``."""
        d = self.values(arm_a, metric) - self.values(arm_b, metric)
        return float(d.mean()), float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(type(v))


def summarize(records: list) -> dict:
    out = {}
    arms = list(dict.fromkeys(r["arm"] for r in records))
    for arm in arms:
        rows = [r for r in records if r["arm"] == arm]
        out[arm] = {}
        for m in METRICS:
            v = np.array([r[m] for r in rows if r.get(m) is not None], dtype=float)
            v = v[np.isfinite(v)]
            if v.size == 0:
                continue
            se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
            out[arm][m] = {"mean": float(v.mean()), "se": se, "count": int(v.size)}
    return out


def _generate(spec: ExperimentSpec, seed):
    """Draw one replication: ``(raw Dataset, beta, covariance, true Grouping or None, graph or None)``."""
    prm = spec.parameters
    rng = np.random.default_rng(seed)
    s_beta, s_data = rng.integers(0, 2**63 - 1, size=2)
    if spec.family == "grouped_factor":
        K, q, n = prm.get("k_groups", 10), prm.get("group_size", 10), prm.get("n", 80)
        beta = np.asarray(prm["beta"], dtype=float) if "beta" in prm else gen_beta_411(K * q)
        ds, true_g, S = gen_grouped_factor(K, q, n, s_data, beta, prm.get("sigma", 3.0))
        return ds, beta, S, true_g, None
    if spec.family == "small_n_large_p":
        K, q, n = prm["k_groups"], prm["group_size"], prm.get("n", 80)
        labels = np.repeat(np.arange(K), q)
        beta = gen_laplacian_beta(prm.get("scheme", "grouped"), prm["alpha"], labels, s_beta)
        ds, true_g, S = gen_grouped_factor(K, q, n, s_data, beta, prm.get("sigma", 3.7))
        return ds, beta, S, true_g, None
    if spec.family == "anova":
        ds, beta, graph, S = gen_anova(prm.get("interaction_level", "moderate"), prm.get("n", 121), s_data, sigma=prm.get("sigma", ANOVA_SIGMA))
        return ds, beta, S, None, graph
    tree = prm.get("beta_tree")
    if tree is None:
        tree = wavelet_scenarios(prm.get("scenario_file"))[prm.get("scenario", "complete")]
    ds, beta, graph, S, _ = gen_wavelet(tree, prm.get("snr", 0.4), prm.get("replicate_sets", 5), s_data)
    return ds, beta, S, None, graph


def _structure(arm: Arm, d: Dataset, true_g, graph, seed):
    if arm.structure == "none":
        return None
    if arm.structure == "true":
        if true_g is None:
            raise ConfigError(f"arm {arm.name}: this family has no true grouping")
        return true_g if math.isinf(arm.norm) else Grouping.from_labels(true_g.labels(), norm=arm.norm)
    if arm.structure == "pam":
        if true_g is None:
            raise ConfigError(f"arm {arm.name}: PAM arms need a grouped family")
        k = max(1, min(d.p, int(round(arm.pam_factor * true_g.n_groups))))
        res = pam_cluster(correlation_distance(d), k, seed=seed)
        return res.grouping(norm=arm.norm)
    if arm.structure == "hierarchy":
        if graph is None:
            raise ConfigError(f"arm {arm.name}: this family has no hierarchy")
        if arm.solver == "hicap":
            return graph
        return compile_penalty(graph, arm.norm, p=d.p)
    raise ConfigError(f"arm {arm.name}: unknown structure {arm.structure!r}")


def run_replication(spec: ExperimentSpec, r: int) -> list:
    seeds = np.random.SeedSequence([spec.seed, r]).generate_state(3)
    raw, beta, S, true_g, graph = _generate(spec, int(seeds[0]))
    d = standardize(raw)
    rows = []
    for arm in spec.arms:
        structure = _structure(arm, d, true_g, graph, int(seeds[1]))
        how = arm.selection or spec.lambda_selection
        kw = {}
        if arm.solver == "hicap":
            kw["allow_dag"] = not graph.is_tree()
        if arm.solver == "blasso":
            kw["config"] = BlassoConfig(arm.step_size)
            how = "cv"  # no df theory for BLasso paths
        if how == "aicc":
            path = fit_path(d, arm.solver, structure, stop_df=d.n - 3, **kw)
            sel = aicc(path, d)
        else:
            sel = cross_validate(d, structure, arm.solver, spec.folds, spec.fold_scheme, int(seeds[2]), **kw)
        beta_hat = d.coef_to_original(sel.beta)[1]
        chosen = np.flatnonzero(sel.beta != 0)
        rec = {
            "replication": r,
            "arm": arm.name,
            "lambda": float(sel.chosen_lambda),
            "selection": how,
            "model_error": model_error(beta_hat, beta, S),
            "n_selected_vars": int(chosen.size),
            "n_selected_groups": None,
            "df": None if not np.isfinite(sel.df_at_chosen) else float(sel.df_at_chosen),
            "hierarchy_gap": None,
        }
        if true_g is not None:
            labels = true_g.labels()
            rec["n_selected_groups"] = int(np.unique(labels[chosen]).size)
        if graph is not None:
            rec["hierarchy_gap"] = int(hierarchy_gap(chosen, graph))
        rows.append(rec)
    return rows


def run_experiment(spec: ExperimentSpec, arms=None, jobs: int = 1) -> ExperimentReport:
    """Run every replication; any failure aborts the run."""
    if arms is not None:
        spec = ExperimentSpec(**{**asdict(spec), "arms": tuple(arms)})
    if not spec.arms:
        raise ConfigError("an experiment needs at least one arm")
    reps = range(spec.replications)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            chunks = list(ex.map(run_replication, [spec] * spec.replications, reps))
    else:
        chunks = [run_replication(spec, r) for r in reps]
    records = [row for chunk in chunks for row in chunk]
    return ExperimentReport(spec.to_dict(), records, summarize(records))
