"""Rényi relative entropies (Petz and sandwiched), the Umegaki relative
entropy, and the conditional entropies built from them.

All logarithms are base 2. Divergences return ``math.inf`` when the support
condition fails; no large sentinel floats are used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from cqexp.config import DEFAULTS
from cqexp.errors import ValidationError
from cqexp.linalg import (
    as_matrix,
    check_psd,
    kron,
    mat_log2,
    mat_pow,
    partial_trace,
    support_mask,
    support_projector,
)


@dataclass(frozen=True)
class BipartiteState:
    """Density matrix on A (x) B, with A the first tensor factor."""

    state: np.ndarray
    dim_a: int
    dim_b: int

    def __post_init__(self):
        m = as_matrix(self.state)
        if self.dim_a < 1 or self.dim_b < 1 or self.dim_a * self.dim_b != m.shape[0]:
            raise ValidationError(
                f"dims {self.dim_a}x{self.dim_b} do not match state of size {m.shape[0]}"
            )
        object.__setattr__(self, "state", m)

    @property
    def dims(self) -> tuple[int, int]:
        return (self.dim_a, self.dim_b)

    def marginal_a(self) -> np.ndarray:
        return partial_trace(self.state, self.dims, [0])

    def marginal_b(self) -> np.ndarray:
        return partial_trace(self.state, self.dims, [1])


def _check_order(alpha: float) -> float:
    alpha = float(alpha)
    if not alpha > 0 or not math.isfinite(alpha):
        raise ValidationError(f"Renyi order must be positive and finite, got {alpha}")
    return alpha


def _pair(rho, sigma):
    r, s = check_psd(rho), check_psd(sigma)
    if r.shape != s.shape:
        raise ValidationError(f"dimension mismatch: {r.shape} vs {s.shape}")
    return r, s


def _outside_support(rho: np.ndarray, sigma: np.ndarray) -> bool:
    kernel = np.eye(sigma.shape[0]) - support_projector(sigma)
    return float(np.trace(kernel @ rho).real) > DEFAULTS.support_tol


def _log_ratio(q: float, alpha: float) -> float:
    if q <= 0:
        return math.inf
    return math.log2(q) / (alpha - 1.0)


def petz_divergence(rho, sigma, alpha: float) -> float:
    alpha = _check_order(alpha)
    if alpha == 1.0:
        return umegaki_divergence(rho, sigma)
    r, s = _pair(rho, sigma)
    if alpha > 1 and _outside_support(r, s):
        return math.inf
    q = float(np.trace(mat_pow(r, alpha, check=False) @ mat_pow(s, 1 - alpha, check=False)).real)
    return _log_ratio(q, alpha)


def sandwiched_divergence(rho, sigma, alpha: float) -> float:
    alpha = _check_order(alpha)
    if alpha == 1.0:
        return umegaki_divergence(rho, sigma)
    r, s = _pair(rho, sigma)
    if alpha > 1 and _outside_support(r, s):
        return math.inf
    g = mat_pow(s, (1 - alpha) / (2 * alpha), check=False)
    inner = g @ r @ g
    w = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
    w = w[support_mask(w)]
    if w.size == 0:
        return math.inf
    # log tr[inner^alpha] with the top eigenvalue factored out; large alpha overflows otherwise
    top = float(w[-1])
    log_q = alpha * math.log2(top) + math.log2(float(np.sum((w / top) ** alpha)))
    return log_q / (alpha - 1.0)


def umegaki_divergence(rho, sigma) -> float:
    r, s = _pair(rho, sigma)
    if _outside_support(r, s):
        return math.inf
    return float(np.trace(r @ (mat_log2(r) - mat_log2(s))).real)


def von_neumann_entropy(rho) -> float:
    w = np.linalg.eigvalsh(check_psd(rho))
    w = w[w > DEFAULTS.support_cutoff * max(float(w.max()), 0.0)]
    return float(-np.sum(w * np.log2(w))) + 0.0


def _as_bipartite(rho_ab) -> BipartiteState:
    if not isinstance(rho_ab, BipartiteState):
        raise ValidationError("expected a BipartiteState")
    return rho_ab


def sibson_optimizer(rho_ab: BipartiteState, alpha: float) -> np.ndarray:
    """Closed-form maximiser of ``-D_alpha(rho_AB, 1_A (x) sigma_B)`` (Petz)."""
    rho_ab = _as_bipartite(rho_ab)
    alpha = _check_order(alpha)
    red = partial_trace(mat_pow(rho_ab.state, alpha), rho_ab.dims, [1])
    # scale first: the power 1/alpha overflows for small alpha
    red = red / np.linalg.eigvalsh(red)[-1]
    opt = mat_pow(red, 1.0 / alpha, check=False)
    return opt / np.trace(opt).real


def cond_entropy_petz_up(rho_ab: BipartiteState, alpha: float) -> float:
    """H-bar^up_alpha(A|B): Petz divergence against the Sibson optimiser."""
    rho_ab = _as_bipartite(rho_ab)
    alpha = _check_order(alpha)
    if alpha == 1.0:
        return von_neumann_cond(rho_ab)
    sigma = sibson_optimizer(rho_ab, alpha)
    return -petz_divergence(rho_ab.state, kron(np.eye(rho_ab.dim_a), sigma), alpha)


def cond_entropy_sand_down(rho_ab: BipartiteState, alpha: float) -> float:
    """H-tilde^down_alpha(A|B): sandwiched divergence against ``1_A (x) rho_B``."""
    rho_ab = _as_bipartite(rho_ab)
    alpha = _check_order(alpha)
    if alpha == 1.0:
        return von_neumann_cond(rho_ab)
    marg = kron(np.eye(rho_ab.dim_a), rho_ab.marginal_b())
    return -sandwiched_divergence(rho_ab.state, marg, alpha)


def von_neumann_cond(rho_ab: BipartiteState) -> float:
    rho_ab = _as_bipartite(rho_ab)
    return von_neumann_entropy(rho_ab.state) - von_neumann_entropy(rho_ab.marginal_b())


def cond_entropy(rho_ab: BipartiteState, alpha: float, kind: str) -> float:
    """Dispatch on ``kind`` in {"petz-up", "sand-down"}."""
    if kind == "petz-up":
        return cond_entropy_petz_up(rho_ab, alpha)
    if kind == "sand-down":
        return cond_entropy_sand_down(rho_ab, alpha)
    raise ValidationError(f"unknown conditional entropy kind {kind!r}")
