import math
from itertools import product

import numpy as np
import pytest

from cqexp.codes import FieldMatrix, coset_enumerate, toeplitz
from cqexp.discrimination import helstrom
from cqexp.errors import ValidationError
from cqexp.experiments import (
    code_from_compressor,
    dc_error_exact,
    duality_check,
    pa_distance_exact,
    rate_scan,
)
from cqexp.states import purify_source, symmetric_channel

from conftest import diag_channel, random_channel, random_distribution

TOL = 1e-9


def classical_dc_error(p, w, h):
    """Brute-force MAP error of guessing z^n from (y^n, H z^n) for a memoryless source."""
    d, n = len(p), h.cols
    ny = w.shape[1]
    best = {}
    for z in product(range(d), repeat=n):
        s = tuple(h.apply(z))
        for y in product(range(ny), repeat=n):
            pr = math.prod(p[a] * w[a, b] for a, b in zip(z, y))
            key = (s, y)
            best[key] = max(best.get(key, 0.0), pr)
    return 1.0 - sum(best.values())


def classical_coset_code_error(w, h, s):
    """ML decoding error of the coset {x : Hx = s}, uniform codewords."""
    code = [x for x in product(range(w.shape[0]), repeat=h.cols) if tuple(h.apply(x)) == tuple(s)]
    total = 0.0
    for y in product(range(w.shape[1]), repeat=h.cols):
        total += max(math.prod(w[a, b] for a, b in zip(x, y)) for x in code)
    return 1.0 - total / len(code)


def test_dc_error_helstrom_oracle():
    ch = symmetric_channel("group-unitaries", base=np.diag([1.0, 0.0]),
                           unitaries=[np.eye(2), np.array([[1, 1], [1, -1]]) / math.sqrt(2)])
    src = purify_source([0.5, 0.5], ch, "z")
    h = FieldMatrix(2, [[1, 1]])
    rep = dc_error_exact(src, 2, h, TOL)
    # each syndrome leaves two equiprobable product states to tell apart
    o = ch.outputs
    per = [helstrom(0.5, np.kron(o[0], o[0]), 0.5, np.kron(o[1], o[1])),
           helstrom(0.5, np.kron(o[0], o[1]), 0.5, np.kron(o[1], o[0]))]
    want = 1 - 0.5 * sum(per)
    assert rep.measured == pytest.approx(want, abs=1e-8)
    lo, hi = rep.certificate
    assert lo <= rep.measured <= hi and hi - lo <= 2 * TOL
    assert rep.measured <= rep.bound_values["pgm"] + 1e-12


def test_dc_error_classical_oracle():
    w = np.array([[0.8, 0.2], [0.3, 0.7]])
    p = np.array([0.6, 0.4])
    src = purify_source(p, diag_channel(w), "z")
    h, _ = toeplitz([1, 0, 1], 1, 3, 2)
    rep = dc_error_exact(src, 3, h, TOL)
    assert rep.measured == pytest.approx(classical_dc_error(p, w, h), abs=1e-8)
    assert len(rep.breakdown) == 2
    assert sum(b["weight"] for b in rep.breakdown) == pytest.approx(1.0)


def test_dc_full_rank_hash_is_error_free(rng):
    src = purify_source([0.5, 0.5], random_channel(rng, 2), "z")
    rep = dc_error_exact(src, 2, FieldMatrix.identity(2, 2), TOL)
    assert rep.measured == pytest.approx(0.0, abs=1e-9)


def test_hash_shape_checked(rng):
    src = purify_source([0.5, 0.5], random_channel(rng, 2), "z")
    with pytest.raises(ValidationError):
        dc_error_exact(src, 2, FieldMatrix(2, [[1, 1, 0]]), TOL)


def test_coset_code_classical_oracle():
    w = np.array([[0.9, 0.1], [0.1, 0.9]])
    ch = symmetric_channel("bsc", p=0.1)
    h, _ = toeplitz([1, 1, 0], 1, 3, 2)
    code = code_from_compressor(ch, 3, h, TOL)
    for s, err in code.coset_errors:
        assert err == pytest.approx(classical_coset_code_error(w, h, s), abs=1e-8)
    assert code.codewords == tuple(coset_enumerate(h, code.syndrome))
    assert code.error == pytest.approx(min(e for _, e in code.coset_errors), abs=1e-8)


def test_best_coset_beats_average():
    ch = symmetric_channel("dihedral-qubit", theta=0.6, r=0.9)
    h, _ = toeplitz([1, 0, 1], 1, 3, 2)
    code = code_from_compressor(ch, 3, h, TOL)
    avg = float(np.mean([e for _, e in code.coset_errors]))
    src = purify_source([0.5, 0.5], ch, "z")
    # averaging the coset errors recovers the compression error exactly
    assert avg == pytest.approx(dc_error_exact(src, 3, h, TOL).measured, abs=1e-8)
    assert code.error <= avg + 1e-12


def test_code_needs_symmetry(rng):
    with pytest.raises(ValidationError):
        code_from_compressor(random_channel(rng, 2), 2, FieldMatrix(2, [[1, 1]]))


def test_pa_distance_perfect_key():
    ch = symmetric_channel("bsc", p=0.5)
    src = purify_source([0.5, 0.5], ch, "x")
    res = pa_distance_exact(src, 2, FieldMatrix(2, [[1, 0]]), TOL)
    # C is independent of x, so the extracted bit is uniform and decoupled
    assert res.report.measured == pytest.approx(0.0, abs=1e-6)


def test_pa_distance_fully_leaked():
    ch = symmetric_channel("bsc", p=0.0)
    src = purify_source([0.5, 0.5], ch, "x")
    res = pa_distance_exact(src, 1, FieldMatrix(2, [[1]]), TOL)
    # C holds x: F(rho_XC, pi (x) rho_C) = 1/sqrt(2)
    assert res.report.measured == pytest.approx(math.sqrt(0.5), abs=1e-8)


@pytest.mark.parametrize("family", ["z", "x"])
def test_duality_check_small(family, rng):
    src = purify_source(random_distribution(rng, 2), random_channel(rng, 2), family)
    for m in range(3):
        h, ok = toeplitz([1, 1, 0, 1][: m + 1] if m else [], m, 2, 2)
        if not ok:
            continue
        res = duality_check(src, 2, h, TOL)
        assert res.gap <= 1e-7
        assert res.pguess.gap <= TOL and res.max_fidelity.gap <= TOL


def test_rate_scan_shapes_and_determinism(rng):
    src = purify_source([0.4, 0.6], random_channel(rng, 2), "z")
    a = rate_scan(src, "dc", [2, 3], [0.5, 0.9], 2, seed=7, K=1.0)
    b = rate_scan(src, "dc", [2, 3], [0.5, 0.9], 2, seed=7, K=1.0)
    assert len(a) == 8
    assert [(r.n, r.m, r.rate, r.measured, r.seeds) for r in a] == [(r.n, r.m, r.rate, r.measured, r.seeds) for r in b]
    assert all(r.status == "ok" for r in a)
    assert a[0].rate == pytest.approx(0.5) and a[0].m == 1
    assert "K" in a[0].bound_values


def test_rate_scan_modes(rng):
    ch = symmetric_channel("bsc", p=0.1)
    cc = rate_scan(ch, "cc", [3], [0.34], 1, seed=0)
    assert cc[0].m == 2 and cc[0].status == "ok"
    src = purify_source([0.5, 0.5], ch, "z")
    pa = rate_scan(src, "pa", [2], [0.5], 1, seed=0)
    assert pa[0].m == 1 and math.isfinite(pa[0].measured)
    with pytest.raises(ValidationError):
        rate_scan(src, "qkd", [2], [0.5], 1, seed=0)
    with pytest.raises(ValidationError):
        rate_scan(src, "cc", [2], [0.5], 1, seed=0)


def test_rate_scan_marks_failures(monkeypatch, rng):
    from cqexp import experiments
    from cqexp.errors import ConvergenceError

    def boom(*a, **k):
        raise ConvergenceError("stalled")

    monkeypatch.setattr(experiments, "dc_error_exact", boom)
    src = purify_source([0.5, 0.5], random_channel(rng, 2), "z")
    rows = rate_scan(src, "dc", [2], [0.5], 1, seed=0)
    assert rows[0].status == "failed:ConvergenceError" and math.isnan(rows[0].measured)
