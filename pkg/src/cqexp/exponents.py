"""Reliability functions and the rate/exponent bounds built on them.

Four problems share one shape, ``sup_t  t * (something linear in rate)``:

* channel coding (symmetric CQ channel ``W``): lower bound
  ``max_{s in [0,1]} E0(s, W) - s R`` and sphere packing ``sup_{s >= 0}``;
* compression with quantum side information (CQ state ``psi_ZB``): lower bound
  ``max_{a in [1/2,1]} (1-a)/a (R - H_a(Z|B))`` and sphere packing over
  ``a in (0, 1]`` (Petz conditional entropy ``H-bar^up``);
* privacy amplification (CQ state ``psi_XC``): lower bound
  ``max_{a in [1,2]} (a-1)(H_a(X|C) - R)`` and sphere packing over ``a >= 1``
  (sandwiched conditional entropy ``H-tilde^down``).

Compression exponents are optimised over ``s = (1-a)/a`` and
privacy-amplification exponents over ``s = a - 1`` so every search runs on
``s >= 0``. Suprema that keep growing up to the search cap are reported as
``inf`` with flag ``"diverged"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from cqexp.config import DEFAULTS
from cqexp.entropy import (
    BipartiteState,
    cond_entropy_petz_up,
    cond_entropy_sand_down,
    von_neumann_cond,
)
from cqexp.errors import ConvergenceError, ValidationError
from cqexp.linalg import mat_pow
from cqexp.states import CQChannel, as_distribution, build_cq_state, is_symmetric, uniform

INTERIOR, BOUNDARY, DIVERGED = "interior", "boundary", "diverged"
_GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class ExponentPoint:
    rate: float
    exponent: float
    optimizer: float  # s for channel coding, alpha otherwise
    flag: str


@dataclass(frozen=True)
class ExponentCurve:
    samples: tuple

    def __post_init__(self):
        rates = [p.rate for p in self.samples]
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise ValidationError("curve rates must be strictly increasing")

    @property
    def rates(self) -> list[float]:
        return [p.rate for p in self.samples]

    @property
    def exponents(self) -> list[float]:
        return [p.exponent for p in self.samples]


@dataclass(frozen=True)
class RateRegion:
    """Compression and extraction rates of one linear map; ``dc + pa = log d``."""

    d: int
    dc: float

    @property
    def pa(self) -> float:
        return math.log2(self.d) - self.dc

    @classmethod
    def from_pa(cls, d: int, pa: float) -> "RateRegion":
        return cls(d, math.log2(d) - pa)

    @classmethod
    def from_code(cls, d: int, n: int, m: int) -> "RateRegion":
        return cls(d, math.log2(d) * m / n)


class Maximum(NamedTuple):
    argmax: float
    value: float
    at_lower: bool
    at_upper: bool


def _golden(fn, a: float, b: float, tol: float):
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
    return (c, fc) if fc >= fd else (d, fd)


def maximize_scalar(fn: Callable[[float], float], lo: float, hi: float, *,
                    grid: Sequence[float] | None = None, tol: float | None = None) -> Maximum:
    """Pre-scan on a grid, then golden-section inside the best bracket.

    Endpoints are always evaluated, so a monotone objective lands exactly on
    the boundary.
    """
    tol = DEFAULTS.opt_tol if tol is None else tol
    xs = np.linspace(lo, hi, DEFAULTS.prescan_points) if grid is None else np.asarray(grid, float)
    fs = [fn(float(x)) for x in xs]
    i = int(np.argmax(fs))
    cands = [(float(xs[i]), fs[i]), (float(xs[0]), fs[0]), (float(xs[-1]), fs[-1])]
    a, b = float(xs[max(i - 1, 0)]), float(xs[min(i + 1, len(xs) - 1)])
    if b > a:
        cands.append(_golden(fn, a, b, tol))
    best = max(cands, key=lambda t: t[1])
    # prefer an endpoint that ties with the interior maximum to avoid spurious interior flags
    for x, f in cands[1:3]:
        if f >= best[1] - 1e-15 and abs(x - best[0]) <= 10 * tol:
            best = (x, f)
    x, f = best
    return Maximum(x, f, abs(x - lo) <= tol, abs(x - hi) <= tol)


def _log_grid(hi: float) -> np.ndarray:
    return np.expm1(np.linspace(0.0, math.log1p(hi), DEFAULTS.prescan_points))


def _check_rate(rate: float) -> float:
    rate = float(rate)
    if not math.isfinite(rate) or rate < 0:
        raise ValidationError(f"rate must be a finite nonnegative number of bits, got {rate}")
    return rate


# --- reliability function ---------------------------------------------------


def _powered_outputs(channel: CQChannel, s: float) -> list[np.ndarray]:
    return [mat_pow(o, 1.0 / (1.0 + s), check=False) for o in channel.outputs]


def gallager_e0(s: float, p, channel: CQChannel) -> float:
    """``-log tr[(sum_z P(z) phi(z)^{1/(1+s)})^{1+s}]`` in bits."""
    s = float(s)
    if not s >= 0:
        raise ValidationError(f"E0 needs s >= 0, got {s}")
    p = as_distribution(p, channel.d)
    theta = sum(pz * a for pz, a in zip(p, _powered_outputs(channel, s)))
    tr = float(np.trace(mat_pow(theta, 1.0 + s, check=False)).real)
    return -math.log2(tr) + 0.0


class IdentityCheck(NamedTuple):
    lhs: float
    rhs: float
    gap: float


def e0_entropy_identity(s: float, channel: CQChannel) -> IdentityCheck:
    """Evaluate ``E0(s, uniform)`` and ``s (log d - H-bar^up_{1/(1+s)}(Z|B))`` separately."""
    s = float(s)
    if not s > 0:
        raise ValidationError(f"identity check needs s > 0, got {s}")
    d = channel.d
    lhs = gallager_e0(s, uniform(d), channel)
    state = build_cq_state(uniform(d), channel)
    rhs = s * (math.log2(d) - cond_entropy_petz_up(state, 1.0 / (1.0 + s)))
    return IdentityCheck(lhs, rhs, abs(lhs - rhs))


class HolevoCheck(NamedTuple):
    residuals: np.ndarray
    satisfied: bool


def holevo_condition(p, s: float, channel: CQChannel, tol: float = 1e-9) -> HolevoCheck:
    """Optimality test for the input distribution of ``E0(s, ., W)``.

    ``residual_z = tr[phi(z)^a theta^s] - sum_z' P(z') tr[phi(z')^a theta^s]`` with
    ``theta = d * sum_z P(z) phi(z)^a`` and ``a = 1/(1+s)``; for uniform P this
    is ``theta = sum_z phi(z)^a``. Satisfied when every residual is at least
    ``-tol`` and residuals vanish on the support of P.
    """
    s = float(s)
    if not s >= 0:
        raise ValidationError(f"Holevo condition needs s >= 0, got {s}")
    p = as_distribution(p, channel.d)
    powered = _powered_outputs(channel, s)
    theta = channel.d * sum(pz * a for pz, a in zip(p, powered))
    ts = mat_pow(theta, s, check=False)
    vals = np.array([float(np.trace(a @ ts).real) for a in powered])
    res = vals - float(p @ vals)
    ok = bool(np.all(res >= -tol) and np.all(np.abs(res[p > 0]) <= tol))
    return HolevoCheck(res, ok)


def _project_simplex(c: np.ndarray) -> np.ndarray:
    u = np.sort(c)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, c.size + 1)
    k = idx[u - css / idx > 0][-1]
    return np.maximum(c - css[k - 1] / k, 0.0)


class E0Optimum(NamedTuple):
    value: float
    distribution: np.ndarray
    residuals: np.ndarray


def e0_opt(s: float, channel: CQChannel, tol: float | None = None, max_iter: int | None = None) -> E0Optimum:
    """``max_P E0(s, P, W)`` by projected ascent from the uniform distribution.

    Minimises the convex ``tr[theta_P^{1+s}]``; stops when the Frank-Wolfe gap,
    an upper bound on the suboptimality of the trace, certifies an error of
    at most ``tol`` in E0.
    """
    s = float(s)
    if not s >= 0:
        raise ValidationError(f"E0 needs s >= 0, got {s}")
    tol = DEFAULTS.simplex_tol if tol is None else tol
    max_iter = DEFAULTS.simplex_max_iter if max_iter is None else max_iter
    d = channel.d
    p = uniform(d)
    if s == 0:
        return E0Optimum(0.0, p, np.zeros(d))
    powered = _powered_outputs(channel, s)

    def trace_and_grad(q):
        theta = sum(qz * a for qz, a in zip(q, powered))
        tr = float(np.trace(mat_pow(theta, 1.0 + s, check=False)).real)
        ts = mat_pow(theta, s, check=False)
        g = np.array([(1.0 + s) * float(np.trace(a @ ts).real) for a in powered])
        return tr, g

    phi, g = trace_and_grad(p)
    step = 1.0 / max(float(np.max(np.abs(g))), 1e-12)
    for _ in range(max_iter):
        fw_gap = float(g @ p - g.min())
        # E0 = -log2(phi): a trace error of fw_gap moves E0 by about fw_gap/(phi ln 2)
        if fw_gap <= tol * phi * math.log(2):
            break
        direction = _project_simplex(p - step * g) - p
        # exact line search on the sign of the directional derivative; function
        # differences near the optimum are below double precision, slopes are not
        if trace_and_grad(p + direction)[1] @ direction <= 0:
            t = 1.0
            step *= 2.0
        else:
            lo_t, hi_t = 0.0, 1.0
            for _ in range(60):
                mid = 0.5 * (lo_t + hi_t)
                if trace_and_grad(p + mid * direction)[1] @ direction <= 0:
                    lo_t = mid
                else:
                    hi_t = mid
            t = 0.5 * (lo_t + hi_t)
        p = np.clip(p + t * direction, 0.0, None)
        p = p / p.sum()
        phi, g = trace_and_grad(p)
    else:
        raise ConvergenceError("input-distribution optimisation did not converge",
                               E0Optimum(-math.log2(phi), p, holevo_condition(p, s, channel).residuals))
    return E0Optimum(-math.log2(phi) + 0.0, p, holevo_condition(p, s, channel).residuals)


def _certified_symmetric(channel: CQChannel) -> bool:
    return channel.symmetry is not None and is_symmetric(channel, channel.symmetry)


def _e0_channel(channel: CQChannel) -> Callable[[float], float]:
    if _certified_symmetric(channel):
        p = uniform(channel.d)
        return lambda s: gallager_e0(s, p, channel)
    return lambda s: e0_opt(s, channel).value


# --- channel coding ------------------------------------------------------------


def cc_exponent_lower(channel: CQChannel, rate: float) -> ExponentPoint:
    """``max_{s in [0,1]} E0(s, W) - s R`` for a certified symmetric channel."""
    rate = _check_rate(rate)
    if not _certified_symmetric(channel):
        raise ValidationError(
            "channel-coding lower bound requires a symmetric channel (attach a certifying group action)"
        )
    e0 = _e0_channel(channel)
    best = maximize_scalar(lambda s: e0(s) - s * rate, 0.0, 1.0)
    flag = BOUNDARY if best.at_lower or best.at_upper else INTERIOR
    return ExponentPoint(rate, max(best.value, 0.0), best.argmax, flag)


def cc_sphere_packing(channel: CQChannel, rate: float, s_max: float | None = None) -> ExponentPoint:
    """``sup_{s >= 0} E0(s, W) - s R`` searched on ``[0, s_max]``."""
    rate = _check_rate(rate)
    s_max = DEFAULTS.s_max if s_max is None else float(s_max)
    e0 = _e0_channel(channel)
    best = maximize_scalar(lambda s: e0(s) - s * rate, 0.0, s_max, grid=_log_grid(s_max))
    if best.at_upper:
        return ExponentPoint(rate, math.inf, best.argmax, DIVERGED)
    flag = BOUNDARY if best.at_lower else INTERIOR
    return ExponentPoint(rate, max(best.value, 0.0), best.argmax, flag)


# --- compression with quantum side information ---------------------------------


def _dc_guard(state: BipartiteState, rate: float) -> float:
    rate = _check_rate(rate)
    h = von_neumann_cond(state)
    if rate <= h:
        raise ValidationError(
            f"compression rate {rate} must exceed the conditional entropy H(Z|B) = {h:.12g}"
        )
    return rate


def _dc_objective(state: BipartiteState, rate: float):
    def fn(s: float) -> float:
        if s == 0:
            return 0.0
        return s * (rate - cond_entropy_petz_up(state, 1.0 / (1.0 + s)))

    return fn


def dc_exponent_lower(state: BipartiteState, rate: float) -> ExponentPoint:
    """``max_{a in [1/2,1]} (1-a)/a (R - H-bar^up_a(Z|B))``; optimizer reported as alpha."""
    rate = _dc_guard(state, rate)
    best = maximize_scalar(_dc_objective(state, rate), 0.0, 1.0)
    flag = BOUNDARY if best.at_lower or best.at_upper else INTERIOR
    return ExponentPoint(rate, max(best.value, 0.0), 1.0 / (1.0 + best.argmax), flag)


def dc_sphere_packing(state: BipartiteState, rate: float, alpha_min: float | None = None) -> ExponentPoint:
    """``sup_{a in (0,1]} (1-a)/a (R - H-bar^up_a(Z|B))`` with ``a`` capped below at ``alpha_min``."""
    rate = _dc_guard(state, rate)
    alpha_min = DEFAULTS.alpha_min if alpha_min is None else float(alpha_min)
    s_max = 1.0 / alpha_min - 1.0
    best = maximize_scalar(_dc_objective(state, rate), 0.0, s_max, grid=_log_grid(s_max))
    alpha = 1.0 / (1.0 + best.argmax)
    if best.at_upper:
        return ExponentPoint(rate, math.inf, alpha, DIVERGED)
    flag = BOUNDARY if best.at_lower else INTERIOR
    return ExponentPoint(rate, max(best.value, 0.0), alpha, flag)


# --- privacy amplification -----------------------------------------------------


def _pa_objective(state: BipartiteState, rate: float):
    def fn(s: float) -> float:
        if s == 0:
            return 0.0
        return s * (cond_entropy_sand_down(state, 1.0 + s) - rate)

    return fn


def pa_exponent_lower(state: BipartiteState, rate: float) -> ExponentPoint:
    """``max_{a in [1,2]} (a-1)(H-tilde^down_a(X|C) - R)`` for ``R < H(X|C)``."""
    rate = _check_rate(rate)
    h = von_neumann_cond(state)
    if rate >= h:
        raise ValidationError(f"extraction rate {rate} must be below H(X|C) = {h:.12g}")
    best = maximize_scalar(_pa_objective(state, rate), 0.0, 1.0)
    flag = BOUNDARY if best.at_lower or best.at_upper else INTERIOR
    return ExponentPoint(rate, max(best.value, 0.0), 1.0 + best.argmax, flag)


def pa_sphere_packing(state: BipartiteState, rate: float, alpha_max: float | None = None) -> ExponentPoint:
    """``sup_{a >= 1} (a-1)(H-tilde^down_a(X|C) - R)`` searched up to ``alpha_max``."""
    rate = _check_rate(rate)
    alpha_max = DEFAULTS.alpha_max if alpha_max is None else float(alpha_max)
    s_max = alpha_max - 1.0
    best = maximize_scalar(_pa_objective(state, rate), 0.0, s_max, grid=_log_grid(s_max))
    if best.at_upper:
        return ExponentPoint(rate, math.inf, 1.0 + best.argmax, DIVERGED)
    flag = BOUNDARY if best.at_lower else INTERIOR
    return ExponentPoint(rate, max(best.value, 0.0), 1.0 + best.argmax, flag)


# --- finite blocklength --------------------------------------------------------


def sp_slope(fn: Callable[[float], float], rate: float, step: float | None = None,
             lo: float = -math.inf, hi: float = math.inf) -> float:
    """Finite-difference derivative; central inside ``(lo, hi)``, one-sided at the edges."""
    h = DEFAULTS.slope_step if step is None else step
    if rate - h <= lo:
        a, b = rate, rate + h
    elif rate + h >= hi:
        a, b = rate - h, rate
    else:
        a, b = rate - h, rate + h
    fa, fb = fn(a), fn(b)
    if not (math.isfinite(fa) and math.isfinite(fb)):
        return math.inf
    return (fb - fa) / (b - a)


def finite_n_prefactor(e_sp: float, slope: float, n: int, K: float, form: str = "dc") -> float:
    """Right-hand side of the finite-blocklength sphere-packing bound.

    ``form="dc"``: ``E + (1 + |E'|)/2 * log(n)/n + K/n`` bounds ``-log(P_err)/n``.
    ``form="pa"``: ``E/2 + (1 + |E'|)/4 * log(n)/n + K/n`` bounds
    ``-log(P)/n`` for the purified distance P of a linear extractor.
    """
    if n < 2:
        raise ValidationError(f"blocklength must be at least 2, got {n}")
    if K is None:
        raise ValidationError("the constant K must be supplied")
    ln = math.log2(n) / n
    if form == "dc":
        return e_sp + 0.5 * (1 + abs(slope)) * ln + K / n
    if form == "pa":
        return 0.5 * e_sp + 0.25 * (1 + abs(slope)) * ln + K / n
    raise ValidationError(f"unknown prefactor form {form!r}")


# --- critical rate -------------------------------------------------------------


@dataclass(frozen=True)
class CriticalRate:
    rate: float | None
    outcome: str  # "crossing" or "boundary"


def _bisect(pred, lo: float, hi: float, tol: float) -> float:
    """Boundary between ``pred(lo) != pred(hi)``."""
    plo = pred(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pred(mid) == plo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def critical_rate(family: str, instance, tol: float = 1e-6, **kw) -> CriticalRate:
    """Rate at which the sphere-packing optimiser crosses into the lower bound's range.

    ``family="cc"`` (instance: CQChannel): the bounds agree for rates above the
    returned value, where the optimal ``s`` is at most 1.
    ``family="dc"`` (instance: BipartiteState ``psi_ZB``): the bounds agree for
    rates between ``H(Z|B)`` and the returned value, where the optimal alpha
    is at least 1/2.
    No crossing inside the admissible interval gives ``outcome="boundary"``.
    """
    if family == "cc":
        d = instance.d
        lo, hi = 1e-9, math.log2(d) - 1e-9

        def inside(r):
            pt = cc_sphere_packing(instance, r, kw.get("s_max"))
            return pt.flag != DIVERGED and pt.optimizer <= 1.0 + DEFAULTS.opt_tol

    elif family == "dc":
        d = instance.dim_a
        lo, hi = von_neumann_cond(instance) + 1e-9, math.log2(d) - 1e-9

        def inside(r):
            pt = dc_sphere_packing(instance, r, kw.get("alpha_min"))
            return pt.flag != DIVERGED and pt.optimizer >= 0.5 - DEFAULTS.opt_tol

    else:
        raise ValidationError(f"unknown critical-rate family {family!r}")
    if hi <= lo:
        return CriticalRate(None, BOUNDARY)
    a, b = inside(lo), inside(hi)
    if a == b:
        return CriticalRate(None, BOUNDARY)
    return CriticalRate(_bisect(inside, lo, hi, tol), "crossing")
