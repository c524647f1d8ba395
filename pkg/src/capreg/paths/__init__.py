from .base import Breakpoint, RegularizationPath
from .blasso import BlassoConfig, blasso_path
from .hicap import hicap_path, overlap_path
from .icap import icap_path, ilasso_path
from .kkt import KKTReport, kkt_violation, max_path_violation, verify_kkt
from .lasso import lasso_path

__all__ = [
    "BlassoConfig",
    "blasso_path",
    "Breakpoint",
    "RegularizationPath",
    "hicap_path",
    "icap_path",
    "overlap_path",
    "ilasso_path",
    "lasso_path",
    "KKTReport",
    "kkt_violation",
    "max_path_violation",
    "verify_kkt",
]
