"""Exact finite-n experiments with linear hashes.

Everything is enumerated exactly; the only randomness is the choice of
Toeplitz hash, drawn from ``numpy`` generators seeded per table row.

* compression: ``Z^n`` is hashed to the syndrome ``H z`` and decoded with the
  side information; the error is ``1 - sum_syndrome pguess(coset ensemble)``.
* privacy amplification: the conjugate outcome ``X^n`` is hashed with an
  extractor matrix and compared with ``uniform (x) marginal``.
* channel coding: every coset of ``ker H`` is a code; the best one is kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from cqexp import exponents
from cqexp.codes import (
    FieldMatrix,
    complete_invertible,
    coset_enumerate,
    dual_map,
    random_toeplitz,
    require_prime,
    syndromes,
)
from cqexp.config import DEFAULTS
from cqexp.discrimination import (
    CertifiedValue,
    fidelity_sum,
    max_fidelity_uniform,
    pgm_success,
    pguess_weighted,
)
from cqexp.entropy import BipartiteState, von_neumann_cond
from cqexp.errors import CQExpError, ValidationError
from cqexp.states import (
    CQChannel,
    PurifiedSource,
    apply_linear_permutation,
    cq_blocks,
    dc_state,
    digits,
    index_of,
    measure_blocks,
    pa_state,
    tensor_power,
)


@dataclass
class ExperimentReport:
    n: int
    d: int
    m: int
    rate: float
    measured: float
    bound_values: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)
    breakdown: list = field(default_factory=list)
    certificate: tuple | None = None  # (lower, upper) bracket on `measured`
    status: str = "ok"
    resamples: int = 0


# --- helpers -------------------------------------------------------------------


def _single_copy(source) -> PurifiedSource:
    if not isinstance(source, PurifiedSource):
        raise ValidationError("expected a PurifiedSource")
    if source.n != 1:
        raise ValidationError("pass the single-copy source; blocklength is a separate argument")
    return source


def _check_hash(h: FieldMatrix, d: int, n: int):
    if h.d != d:
        raise ValidationError(f"hash is over Z_{h.d} but the source has d={d}")
    if h.cols != n:
        raise ValidationError(f"hash has {h.cols} columns, blocklength is {n}")


def _kron_blocks(single: Sequence[np.ndarray], d: int, n: int) -> list[np.ndarray]:
    out = []
    for idx in range(d**n):
        b = np.ones((1, 1), dtype=complex)
        for z in digits(idx, d, n):
            b = np.kron(b, single[z])
        out.append(b)
    return out


def _dc_blocks(source, n: int) -> tuple[int, list[np.ndarray]]:
    """Sub-normalised states of the side information for every string ``z^n``."""
    if isinstance(source, PurifiedSource):
        src = _single_copy(source)
        psi = tensor_power(src, n)
        return src.d, measure_blocks(psi, "z", psi.dc_side)
    if isinstance(source, BipartiteState):
        blocks = cq_blocks(source)
        d = require_prime(len(blocks))
        return d, _kron_blocks(blocks, d, n)
    raise ValidationError("compression source must be a PurifiedSource or a CQ BipartiteState")


def _sum_certified(values: Sequence[CertifiedValue]) -> CertifiedValue:
    return CertifiedValue(
        float(sum(v.lower for v in values)),
        float(sum(v.upper for v in values)),
        max((v.iterations for v in values), default=0),
    )


def _coset_values(blocks, d: int, h: FieldMatrix, tol):
    """Certified ``pguess`` of each coset ensemble, in lexicographic syndrome order."""
    out = []
    for s in syndromes(d, h.rows):
        ens = [blocks[index_of(z, d)] for z in coset_enumerate(h, s)]
        out.append((s, ens, pguess_weighted(ens, tol)))
    return out


# --- compression ----------------------------------------------------------------


def dc_error_exact(source, n: int, h: FieldMatrix, tol: float | None = None) -> ExperimentReport:
    """Exact decoding error of syndrome compression with quantum side information.

    ``source`` is a single-copy :class:`PurifiedSource` (side information on
    its compression side) or a CQ :class:`BipartiteState` ``psi_ZB``; ``h`` is
    the ``m x n`` check matrix. The optimal decoder error is certified; the
    pretty-good decoder error is reported as ``bound_values["pgm"]``.
    """
    d, blocks = _dc_blocks(source, n)
    _check_hash(h, d, n)
    per = _coset_values(blocks, d, h, tol)
    total = _sum_certified([v for _, _, v in per])
    pgm = float(sum(pgm_success(ens) for _, ens, _ in per))
    breakdown = [
        {
            "syndrome": list(s),
            "weight": float(sum(np.trace(b).real for b in ens)),
            "pguess_lower": v.lower,
            "pguess_upper": v.upper,
        }
        for s, ens, v in per
    ]
    measured = min(max(1.0 - total.value, 0.0), 1.0)
    return ExperimentReport(
        n=n, d=d, m=h.rows, rate=math.log2(d) * h.rows / n,
        measured=measured,
        bound_values={"pgm": min(max(1.0 - pgm, 0.0), 1.0)},
        breakdown=breakdown,
        certificate=(1.0 - total.upper, 1.0 - total.lower),
    )


# --- privacy amplification -----------------------------------------------------------


def _pa_blocks(psi: PurifiedSource, g: FieldMatrix) -> list[np.ndarray]:
    """Conditional states of the extracted string ``g x``, grouped classically."""
    d, n = psi.d, psi.n
    full = measure_blocks(psi, "x", psi.pa_side)
    out = [np.zeros_like(full[0]) for _ in range(d**g.rows)]
    for idx, b in enumerate(full):
        key = index_of(g.apply(digits(idx, d, n)), d) if g.rows else 0
        out[key] = out[key] + b
    return out


@dataclass(frozen=True)
class PADistance:
    report: ExperimentReport
    max_fidelity: CertifiedValue
    fidelity_marginal: float


def pa_distance_exact(source: PurifiedSource, n: int, g: FieldMatrix, tol: float | None = None) -> PADistance:
    """Purified distance of the extracted key from uniform, exactly.

    ``g`` maps ``X^n`` to the extracted string. Reports the distance to
    ``uniform (x) actual marginal`` (``measured``) and the certified
    ``max_sigma F(rho, uniform (x) sigma)^2``; the distance at the optimal sigma
    is ``sqrt(1 - max_fidelity)``.
    """
    src = _single_copy(source)
    _check_hash(g, src.d, n)
    psi = tensor_power(src, n)
    blocks = _pa_blocks(psi, g)
    k = len(blocks)
    marginal = sum(blocks)
    f_marg = fidelity_sum(blocks, marginal) / math.sqrt(k)
    mf = max_fidelity_uniform(blocks, tol)
    dist = math.sqrt(max(0.0, 1.0 - min(f_marg, 1.0) ** 2))
    report = ExperimentReport(
        n=n, d=src.d, m=n - g.rows, rate=math.log2(src.d) * g.rows / n,
        measured=dist,
        bound_values={
            "distance_optimal_sigma": math.sqrt(max(0.0, 1.0 - min(mf.value, 1.0))),
            "max_fidelity": mf.value,
        },
    )
    return PADistance(report, mf, f_marg)


# --- duality -------------------------------------------------------------------------


@dataclass(frozen=True)
class DualityResult:
    pguess: CertifiedValue  # sum over syndromes of the coset guessing probabilities
    max_fidelity: CertifiedValue
    gap: float
    per_syndrome: tuple


def duality_check(source: PurifiedSource, n: int, h: FieldMatrix, tol: float | None = None) -> DualityResult:
    """Guessing probability of the compression remainder vs. max-fidelity of its dual extractor.

    The compression side guesses ``f_hat(Z^n)`` from the side information and
    the syndrome ``H Z^n``. The dual side applies the permutation
    ``z -> M z`` (``M`` = ``H`` completed to an invertible matrix) to the
    source and reads the conjugate outcome on the last ``n - m`` registers,
    which is the string extracted by the hat rows of ``(M^-1)^T``.
    """
    src = _single_copy(source)
    _check_hash(h, src.d, n)
    d, m = src.d, h.rows
    psi = tensor_power(src, n)
    blocks = measure_blocks(psi, "z", psi.dc_side)
    per = _coset_values(blocks, d, h, tol)
    pg = _sum_certified([v for _, _, v in per])

    pair = complete_invertible(h)
    dual_map(pair.combined, m)  # raises if the completion is singular
    rotated = apply_linear_permutation(psi, pair.combined)
    dual_blocks = measure_blocks(rotated, "x", psi.pa_side, positions=range(m, n))
    mf = max_fidelity_uniform(dual_blocks, tol)
    per_syn = tuple((tuple(s), v.lower, v.upper) for s, _, v in per)
    return DualityResult(pg, mf, abs(pg.value - mf.value), per_syn)


# --- channel coding ----------------------------------------------------------------


@dataclass(frozen=True)
class CosetCode:
    syndrome: tuple
    codewords: tuple
    error: float
    certificate: tuple
    coset_errors: tuple  # (syndrome, error) for every coset


def code_from_compressor(channel: CQChannel, n: int, h: FieldMatrix, tol: float | None = None) -> CosetCode:
    """Best coset code of ``ker H`` under optimal decoding.

    Codewords are sent uniformly; each coset's error is
    ``1 - d^m pguess(coset ensemble)`` with the uniform-input compression
    ensemble, so the average over cosets is the compression error. Ties
    within the solver tolerance go to the lexicographically smallest syndrome.
    """
    if channel.symmetry is None:
        raise ValidationError("code construction from a compressor requires a symmetric channel")
    tol = DEFAULTS.solver_tol if tol is None else tol
    d = channel.d
    _check_hash(h, d, n)
    blocks = _kron_blocks([o / d for o in channel.outputs], d, n)
    scale = float(d ** h.rows)
    per = _coset_values(blocks, d, h, tol)
    errs = [(tuple(s), 1.0 - scale * v.value, (1.0 - scale * v.upper, 1.0 - scale * v.lower)) for s, _, v in per]
    best = errs[0]
    for e in errs[1:]:
        if e[1] < best[1] - scale * tol:
            best = e
    words = tuple(coset_enumerate(h, best[0]))
    return CosetCode(best[0], words, min(max(best[1], 0.0), 1.0), best[2], tuple((s, e) for s, e, _ in errs))


# --- rate scans ----------------------------------------------------------------------

SCAN_MODES = ("dc", "pa", "cc")


def _row_seed(seed: int, cell: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, cell, trial]).generate_state(1)[0])


def _rows_for_rate(rate: float, n: int, d: int) -> int:
    k = int(round(rate * n / math.log2(d)))
    return min(max(k, 0), n)


def _safe(fn, *args):
    try:
        return fn(*args).exponent
    except ValidationError:
        return math.nan


def _bounds(mode: str, problem, state, rate: float, n: int, K) -> dict:
    """Exponent bounds at ``rate``; PA bounds are halved to match the purified-distance scale."""
    if mode == "dc":
        lower = _safe(exponents.dc_exponent_lower, state, rate)
        sp_fn = lambda r: exponents.dc_sphere_packing(state, r).exponent  # noqa: E731
        sp = _safe(exponents.dc_sphere_packing, state, rate)
        edges = (von_neumann_cond(state), math.log2(state.dim_a))
        form, scale = "dc", 1.0
    elif mode == "pa":
        lower = 0.5 * _safe(exponents.pa_exponent_lower, state, rate)
        sp_fn = lambda r: exponents.pa_sphere_packing(state, r).exponent  # noqa: E731
        sp = 0.5 * _safe(exponents.pa_sphere_packing, state, rate)
        edges = (0.0, von_neumann_cond(state))
        form, scale = "pa", 0.5
    else:
        lower = _safe(exponents.cc_exponent_lower, problem, rate) if problem.symmetry is not None else math.nan
        sp_fn = lambda r: exponents.cc_sphere_packing(problem, r).exponent  # noqa: E731
        sp = _safe(exponents.cc_sphere_packing, problem, rate)
        edges = (0.0, math.log2(problem.d))
        form, scale = "dc", 1.0
    out = {"lower": lower, "sp": sp}
    if K is not None:
        if n >= 2 and math.isfinite(sp) and edges[0] < rate:
            try:
                slope = exponents.sp_slope(sp_fn, rate, lo=edges[0], hi=edges[1])
                out["K"] = exponents.finite_n_prefactor(sp / scale, slope, n, K, form)
            except ValidationError:
                out["K"] = math.nan
        else:
            out["K"] = math.inf if sp == math.inf else math.nan
    return out


def rate_scan(problem, mode: str, ns: Sequence[int], rates: Sequence[float], trials: int,
              seed: int, K: float | None = None, tol: float | None = None) -> list[ExperimentReport]:
    """One report per (n, rate, trial), in input order.

    ``problem`` is a single-copy :class:`PurifiedSource` for ``"dc"``/``"pa"``
    and a :class:`CQChannel` for ``"cc"``. Each requested rate is rounded to
    the nearest achievable ``log d * rows / n`` (rows of the check matrix for
    compression; of the extractor for privacy amplification; ``n - rows`` for
    channel coding) and the achieved rate is reported. Every row has its own
    seed, derived from ``(seed, cell, trial)``; failures mark the row instead
    of aborting.
    """
    if mode not in SCAN_MODES:
        raise ValidationError(f"unknown scan mode {mode!r}; expected one of {SCAN_MODES}")
    if trials < 1:
        raise ValidationError("need at least one trial")
    if mode == "cc":
        if not isinstance(problem, CQChannel):
            raise ValidationError("channel-coding scans take a CQChannel")
        d = problem.d
        state = None
    else:
        problem = _single_copy(problem)
        d = problem.d
        state = dc_state(problem) if mode == "dc" else pa_state(problem)
    reports = []
    cell = 0
    for n in ns:
        n = int(n)
        for rate in rates:
            rows = _rows_for_rate(float(rate), n, d)
            achieved = math.log2(d) * rows / n
            # compression: rows = checks; extraction and coding: rows = output length
            m = rows if mode == "dc" else n - rows
            bounds = _bounds(mode, problem, state, achieved, n, K)
            for trial in range(trials):
                row_seed = _row_seed(seed, cell, trial)
                rng = np.random.default_rng(row_seed)
                rep = ExperimentReport(n=n, d=d, m=m, rate=achieved, measured=math.nan,
                                       bound_values=dict(bounds), seeds=[row_seed])
                try:
                    if mode == "pa":
                        g, _, resamples = random_toeplitz(rng, n - m, n, d)
                        res = pa_distance_exact(problem, n, g, tol).report
                    else:
                        h, _, resamples = random_toeplitz(rng, m, n, d)
                        if mode == "dc":
                            res = dc_error_exact(problem, n, h, tol)
                        else:
                            code = code_from_compressor(problem, n, h, tol)
                            res = ExperimentReport(n=n, d=d, m=m, rate=achieved, measured=code.error,
                                                   certificate=code.certificate)
                    rep.measured = res.measured
                    rep.certificate = res.certificate
                    rep.breakdown = res.breakdown
                    rep.resamples = resamples
                except CQExpError as exc:
                    rep.status = f"failed:{type(exc).__name__}"
                reports.append(rep)
            cell += 1
    return reports

