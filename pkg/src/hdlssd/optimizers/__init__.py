"""Constrained-optimization engines behind the SVM and DWD classifiers."""

from .dwd import DwdSolution, certify_dwd, solve_dwd
from .svm import SvmDualSolution, certify_svm, solve_svm_dual


def certificate(sol, dataset) -> dict:
    """Recompute the optimality residuals of either solver's output."""
    if isinstance(sol, DwdSolution):
        return certify_dwd(sol, dataset)
    if isinstance(sol, SvmDualSolution):
        return certify_svm(sol, dataset)
    raise TypeError(f"no certificate for {type(sol).__name__}")


__all__ = [
    "DwdSolution", "SvmDualSolution", "certificate", "certify_dwd", "certify_svm",
    "solve_dwd", "solve_svm_dual",
]
