"""Certified solvers for the optimal guessing probability of a CQ ensemble and
for the maximal fidelity of a CQ state to ``pi_X (x) sigma``.

Both solvers return a :class:`CertifiedValue`: ``lower`` comes from an explicit
feasible primal point and ``upper`` from an explicit dual-feasible point, so
the true optimum always lies in ``[lower, upper]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from cqexp.config import DEFAULTS
from cqexp.entropy import BipartiteState
from cqexp.errors import ConvergenceError, ValidationError
from cqexp.linalg import check_density, mat_pow, positive_part, support_basis, trace_norm
from cqexp.states import as_distribution, cq_blocks


@dataclass(frozen=True)
class CertifiedValue:
    lower: float
    upper: float
    iterations: int = 0
    witness: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    @property
    def value(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def scaled(self, w: float) -> "CertifiedValue":
        return CertifiedValue(self.lower * w, self.upper * w, self.iterations, self.witness)


@dataclass(frozen=True)
class Ensemble:
    priors: np.ndarray
    states: tuple

    def __post_init__(self):
        p = as_distribution(self.priors)
        states = tuple(check_density(s) for s in self.states)
        if len(states) != p.size:
            raise ValidationError(f"{p.size} priors but {len(states)} states")
        if len({s.shape for s in states}) != 1:
            raise ValidationError("ensemble states must share one dimension")
        object.__setattr__(self, "priors", p)
        object.__setattr__(self, "states", states)

    def weighted(self) -> list[np.ndarray]:
        return [p * s for p, s in zip(self.priors, self.states)]


def _herm(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


def helstrom(p0: float, rho0, p1: float, rho1) -> float:
    """Optimal success probability for two hypotheses."""
    r0, r1 = check_density(rho0), check_density(rho1)
    return 0.5 * (p0 + p1 + trace_norm(p0 * r0 - p1 * r1))


def _pgm(ops: Sequence[np.ndarray]) -> list[np.ndarray]:
    s = sum(ops)
    si = mat_pow(s, -0.5, check=False)
    meas = [_herm(si @ o @ si) for o in ops]
    meas[0] = meas[0] + np.eye(s.shape[0]) - mat_pow(s, 0.0, check=False)
    return meas


def pretty_good_measurement(ensemble: Ensemble) -> tuple[list[np.ndarray], float]:
    """Square-root measurement; the kernel of ``sum_x p_x rho_x`` goes to hypothesis 0."""
    ops = ensemble.weighted()
    meas = _pgm(ops)
    return meas, _success(ops, meas)


def pgm_success(ops: Sequence[np.ndarray]) -> float:
    """Success probability of the pretty-good measurement on sub-normalised ``ops``."""
    ops = [np.asarray(o, dtype=complex) for o in ops]
    if sum(float(np.trace(o).real) for o in ops) <= 0:
        return 0.0
    return _success(ops, _pgm(ops))


def _success(ops, meas) -> float:
    return float(sum(np.trace(o @ m).real for o, m in zip(ops, meas)))


def _dual_upper(ops, meas) -> float:
    """``tr sigma`` for a sigma dominating every weighted state."""
    y = _herm(sum(o @ m for o, m in zip(ops, meas)))
    gaps = [_herm(o - y) for o in ops]
    lam = max(0.0, max(float(np.linalg.eigvalsh(g)[-1]) for g in gaps))
    spread = y.shape[0] * lam
    summed = sum(float(np.sum(np.clip(np.linalg.eigvalsh(g), 0.0, None))) for g in gaps)
    return float(np.trace(y).real) + min(spread, summed)


def _repair(meas: list[np.ndarray]) -> list[np.ndarray]:
    """Renormalise a near-POVM to sum exactly to the identity."""
    meas = [positive_part(m) for m in meas]
    t = sum(meas)
    ti = mat_pow(t, -0.5, check=False)
    out = [_herm(ti @ m @ ti) for m in meas]
    out[0] = out[0] + np.eye(t.shape[0]) - mat_pow(t, 0.0, check=False)
    return out


def _pairwise_sweep(ops, meas) -> list[np.ndarray]:
    """Exact Helstrom redistribution of ``Pi_x + Pi_y`` for every pair; never decreases success."""
    meas = list(meas)
    for x, y in combinations(range(len(ops)), 2):
        r = meas[x] + meas[y]
        rh = mat_pow(_herm(r), 0.5, check=False)
        w, vec = np.linalg.eigh(_herm(rh @ (ops[x] - ops[y]) @ rh))
        pos = vec[:, w > 0]
        mx = _herm(rh @ pos @ pos.conj().T @ rh)
        meas[x], meas[y] = mx, _herm(r - mx)
    return meas


def _restrict(ops: Sequence[np.ndarray]) -> tuple[np.ndarray, list[np.ndarray]]:
    v = support_basis(sum(ops))
    return v, [_herm(v.conj().T @ o @ v) for o in ops]


def pguess_weighted(ops: Sequence[np.ndarray], tol: float | None = None, max_iter: int | None = None) -> CertifiedValue:
    """Certified ``max_POVM sum_x tr[ops[x] Pi_x]`` for sub-normalised ``ops``.

    The lower bound starts at the pretty-good measurement. Each iteration
    tries the fixed-point step ``Pi_x <- L ops_x Pi_x ops_x L`` with
    ``L = (sum_x ops_x Pi_x ops_x)^{-1/2}``, keeps it only if it raises the
    success probability, then sweeps pairwise Helstrom redistributions. The
    fixed-point step cannot grow a kernel, so near rank-deficient optima it
    stalls; the sweep never decreases the objective and carries convergence. The dual point is ``sym(sum_x ops_x Pi_x)``
    lifted until it dominates every ``ops_x``. Stops once the gap is at most
    ``tol`` times the total weight.
    """
    tol = DEFAULTS.solver_tol if tol is None else tol
    max_iter = DEFAULTS.solver_max_iter if max_iter is None else max_iter
    weight = float(sum(np.trace(o).real for o in ops))
    if weight <= 0:
        return CertifiedValue(0.0, 0.0)
    nonzero = [o for o in ops if np.trace(o).real > 0]
    if len(nonzero) == 1:
        return CertifiedValue(weight, weight)
    v, red = _restrict(ops)
    meas = _pgm(red)
    best_lo, best_up, best_meas = -np.inf, np.inf, meas
    for it in range(max_iter + 1):
        lo = _success(red, meas)
        up = _dual_upper(red, meas)
        if lo > best_lo:
            best_lo, best_meas = lo, meas
        best_up = min(best_up, up)
        if best_up - best_lo <= tol * weight:
            break
        lam = sum(o @ m @ o for o, m in zip(red, meas))
        li = mat_pow(_herm(lam), -0.5, check=False)
        cand = _repair([_herm(li @ o @ m @ o @ li) for o, m in zip(red, meas)])
        if _success(red, cand) > lo:
            meas = cand
        meas = _pairwise_sweep(red, meas)
    else:
        witness = [v @ m @ v.conj().T for m in best_meas]
        raise ConvergenceError(
            f"guessing-probability gap {best_up - best_lo:.3e} above tolerance after {max_iter} iterations",
            CertifiedValue(best_lo, best_up, max_iter, witness),
        )
    witness = [v @ m @ v.conj().T for m in best_meas]
    witness[0] = witness[0] + np.eye(v.shape[0]) - v @ v.conj().T
    return CertifiedValue(best_lo, max(best_up, best_lo), it, witness)


def pguess(ensemble: Ensemble, tol: float | None = None) -> CertifiedValue:
    return pguess_weighted(ensemble.weighted(), tol)


def _as_blocks(state) -> list[np.ndarray]:
    if isinstance(state, BipartiteState):
        return cq_blocks(state)
    return [np.asarray(b, dtype=complex) for b in state]


def fidelity_sum(blocks: Sequence[np.ndarray], sigma: np.ndarray) -> float:
    """``sum_x F(blocks[x], sigma)``."""
    total = 0.0
    for b in blocks:
        sb = mat_pow(b, 0.5, check=False)
        w = np.linalg.eigvalsh(_herm(sb @ sigma @ sb))
        total += float(np.sum(np.sqrt(np.clip(w, 0.0, None))))
    return total


class _FidelityProblem:
    """``f(sigma) = sum_x F(ops_x, sigma)`` restricted to the joint support."""

    def __init__(self, blocks: Sequence[np.ndarray]):
        self.k = len(blocks)
        self.embed, red = _restrict(blocks)
        self.dim = self.embed.shape[1]
        nz = [r for r in red if np.trace(r).real > 0]
        self.roots = [mat_pow(r, 0.5, check=False) for r in nz]
        self.bases = [support_basis(r) for r in nz]
        self.comp = [_herm(p.conj().T @ r @ p) for r, p in zip(nz, self.bases)]
        marg = sum(red)
        self.start = marg / np.trace(marg).real

    def _value(self, sigma: np.ndarray) -> float:
        total = 0.0
        for root in self.roots:
            w = np.linalg.eigvalsh(_herm(root @ sigma @ root))
            total += float(np.sum(np.sqrt(np.clip(w, 0.0, None))))
        return total

    def inner_minimisers(self, sigma: np.ndarray):
        """``W_x = s^{-1} # ops_x`` on each support, ``s`` the compression of sigma.

        Square roots are taken without a support cutoff so that ``W_x`` stays
        invertible on ill-conditioned supports. Returns None when sigma is
        singular on some support.
        """
        out = []
        for r, p in zip(self.comp, self.bases):
            ws, v = np.linalg.eigh(_herm(p.conj().T @ sigma @ p))
            if ws[0] <= 1e-14 * max(ws[-1], 1e-300):
                return None
            sh = (v * np.sqrt(ws)) @ v.conj().T
            shi = (v / np.sqrt(ws)) @ v.conj().T
            wm, u = np.linalg.eigh(_herm(sh @ r @ sh))
            root = (u * np.sqrt(np.clip(wm, 0.0, None))) @ u.conj().T
            out.append(_herm(shi @ root @ shi))
        return out

    def gradient(self, sigma: np.ndarray, ws=None) -> np.ndarray | None:
        ws = self.inner_minimisers(sigma) if ws is None else ws
        if ws is None:
            return None
        return 0.5 * sum(p @ w @ p.conj().T for p, w in zip(self.bases, ws))

    def upper(self, sigma: np.ndarray) -> float:
        """Dual bound on ``max_sigma f``.

        For any positive ``W_x`` on ``supp(ops_x)``,
        ``max f <= sqrt(sum_x tr[ops_x W_x^-1] * lambda_max(sum_x W_x))``.
        With the inner minimisers at ``sigma``, ``tr[ops_x W_x^-1] = F(ops_x, sigma)``,
        so the first factor is ``f(sigma)`` and the bound is tight at the optimum.
        """
        ws = self.inner_minimisers(sigma)
        if ws is None:
            return np.inf
        acc = sum(p @ w @ p.conj().T for p, w in zip(self.bases, ws))
        top = float(np.linalg.eigvalsh(_herm(acc))[-1])
        val = float(np.sqrt(self._value(sigma) * top))
        return val if np.isfinite(val) else np.inf

    def ascent_step(self, sigma: np.ndarray) -> np.ndarray:
        t = mat_pow(sigma, 0.5, check=False)
        acc = np.zeros_like(t)
        for root in self.roots:
            u_, _, vh = np.linalg.svd(root @ t)
            acc += (vh.conj().T @ u_.conj().T) @ root
        t = positive_part(_herm(acc))
        t = t / np.linalg.norm(t)
        return _herm(t @ t)

    def polish(self, sigma: np.ndarray, max_iter: int) -> np.ndarray:
        """L-BFGS on a square factor ``A`` with ``sigma = A A^dagger / tr(A A^dagger)``."""
        dim = self.dim

        def unpack(x):
            return (x[: dim * dim] + 1j * x[dim * dim :]).reshape(dim, dim)

        def neg(x):
            a = unpack(x)
            c = float(np.trace(a @ a.conj().T).real)
            sig = a @ a.conj().T / c
            g = self.gradient(sig)
            if g is None:
                return np.inf, np.zeros_like(x)
            f = self._value(sig)
            ga = 2 * (g @ a) / c - 2 * float(np.trace(g @ sig).real) * a / c
            return -f, -np.concatenate([ga.real.ravel(), ga.imag.ravel()])

        a0 = mat_pow(sigma, 0.5, check=False)
        x0 = np.concatenate([a0.real.ravel(), a0.imag.ravel()])
        res = minimize(neg, x0, jac=True, method="L-BFGS-B",
                       options={"maxiter": max_iter, "gtol": 1e-15, "ftol": 1e-16})
        a = unpack(res.x)
        sig = a @ a.conj().T
        return _herm(sig / np.trace(sig).real)


def max_fidelity_uniform(state, tol: float | None = None, max_iter: int | None = None) -> CertifiedValue:
    """Certified ``max_sigma F(rho_XQ, pi_X (x) sigma)^2`` for a CQ state.

    ``state`` is a :class:`BipartiteState` classical on X, or the list of its
    sub-normalised diagonal blocks; the objective is
    ``(sum_x F(blocks[x], sigma))^2 / k``, concave in sigma.

    Starts from the marginal of Q and alternates the optimal unitaries in
    ``F = max_U Re tr[U sqrt(block) sqrt(sigma)]`` with the optimal
    ``sqrt(sigma)`` for fixed unitaries; every few dozen steps an L-BFGS
    polish is tried, kept only if it improves the objective. The recorded
    lower bound therefore never decreases. The witness is the best sigma.
    """
    tol = DEFAULTS.solver_tol if tol is None else tol
    max_iter = DEFAULTS.solver_max_iter if max_iter is None else max_iter
    prob = _FidelityProblem(_as_blocks(state))
    k = prob.k
    sigma = prob.start
    best_lo, best_up, best_sigma = -np.inf, np.inf, sigma
    for it in range(max_iter + 1):
        f = prob._value(sigma)
        if f * f / k > best_lo:
            best_lo, best_sigma = f * f / k, sigma
        best_up = min(best_up, prob.upper(sigma) ** 2 / k)
        if best_up - best_lo <= tol:
            break
        if it % 25 == 24:
            cand = prob.polish(best_sigma, 500)
            if prob._value(cand) ** 2 / k >= best_lo:
                sigma = cand
                continue
        sigma = prob.ascent_step(sigma)
    else:
        raise ConvergenceError(
            f"max-fidelity gap {best_up - best_lo:.3e} above tolerance after {max_iter} iterations",
            CertifiedValue(best_lo, best_up, max_iter, prob.embed @ best_sigma @ prob.embed.conj().T),
        )
    witness = prob.embed @ best_sigma @ prob.embed.conj().T
    return CertifiedValue(best_lo, max(best_up, best_lo), it, witness)


def fidelity_to_uniform_product(state, sigma) -> float:
    """``F(rho_XQ, pi_X (x) sigma)`` for a CQ state given by blocks."""
    blocks = _as_blocks(state)
    return fidelity_sum(blocks, np.asarray(sigma, dtype=complex)) / np.sqrt(len(blocks))
