"""Solver lookup by tag, so selection, simulation and the CLI share one entry point."""
from __future__ import annotations

from ..core import Dataset, Grouping
from ..errors import ConfigError, UnsupportedSolver
from ..hierarchy import HierarchyGraph
from .base import RegularizationPath
from .blasso import BlassoConfig, blasso_path
from .hicap import hicap_path
from .icap import icap_path, ilasso_path
from .lasso import lasso_path

SOLVERS = ("lasso", "ilasso", "icap", "hicap", "blasso")


def fit_path(
    dataset: Dataset,
    solver: str,
    structure: Grouping | HierarchyGraph | None = None,
    *,
    weights=None,
    allow_dag: bool = False,
    stop_df: int | None = None,
    config: BlassoConfig | None = None,
) -> RegularizationPath:
    """Trace the path of ``solver`` on ``dataset``.

    ``structure`` is a :class:`Grouping` for icap and blasso and a
    :class:`HierarchyGraph` for hicap; lasso and ilasso ignore it.
    """
    if solver == "lasso":
        return lasso_path(dataset, stop_df=stop_df)
    if solver == "ilasso":
        return ilasso_path(dataset, stop_df=stop_df)
    if solver == "icap":
        if not isinstance(structure, Grouping):
            raise ConfigError("icap needs a grouping")
        return icap_path(dataset, structure, stop_df=stop_df)
    if solver == "hicap":
        if not isinstance(structure, HierarchyGraph):
            raise ConfigError("hicap needs a hierarchy graph")
        return hicap_path(dataset, structure, weights=weights, allow_dag=allow_dag, stop_df=stop_df)
    if solver == "blasso":
        if not isinstance(structure, Grouping):
            raise ConfigError("blasso needs a grouping")
        return blasso_path(dataset, structure, config)
    raise UnsupportedSolver(f"unknown solver {solver!r}; choose from {', '.join(SOLVERS)}")
