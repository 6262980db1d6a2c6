"""Numerical tolerances and budgets, collected in one place."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Settings:
    herm_tol: float = 1e-12
    psd_tol: float = 1e-10
    trace_tol: float = 1e-10
    prob_tol: float = 1e-12
    # eigenvalues below support_cutoff * lambda_max are treated as exact zeros
    support_cutoff: float = 1e-12
    # trace weight outside supp(sigma) above which supp(rho) is "not contained"
    support_tol: float = 1e-10
    max_pure_dim: int = 2**20
    max_enumeration: int = 2**16
    solver_tol: float = 1e-8
    solver_max_iter: int = 10_000
    opt_tol: float = 1e-10
    prescan_points: int = 64
    s_max: float = 64.0
    alpha_max: float = 64.0
    alpha_min: float = 1e-4
    slope_step: float = 1e-4
    simplex_tol: float = 1e-9
    simplex_max_iter: int = 5_000


DEFAULTS = Settings()
