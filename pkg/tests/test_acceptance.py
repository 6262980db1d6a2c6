"""Acceptance criteria 1-10, each at its stated tolerance.

Every check prints one PASS/FAIL line. Run directly (``python3
tests/test_acceptance.py``) for the summary alone, or through pytest.
"""

import math
import subprocess
import sys
import time
from itertools import product
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import brentq

from cqexp import exponents as ex
from cqexp.codes import random_toeplitz
from cqexp.entropy import BipartiteState, cond_entropy_petz_up, cond_entropy_sand_down, von_neumann_cond
from cqexp.experiments import code_from_compressor, dc_error_exact, duality_check
from cqexp.linalg import partial_trace, random_density_matrix, random_pure_state
from cqexp.specfile import dump_spec
from cqexp.states import CQChannel, dc_state, pa_state, purify_source, symmetric_channel, uniform

ALPHAS = (0.5, 2 / 3, 1.5, 2.0)


def _channel(rng, d, dim=2):
    return CQChannel(d, tuple(random_density_matrix(dim, rng=rng) for _ in range(d)))


def _dist(rng, d):
    p = rng.dirichlet(np.ones(d))
    return p / p.sum()


def _h2(x):
    if x <= 0 or x >= 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def _report(num, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}"
    print(line, flush=True)
    return line


# --- criteria -------------------------------------------------------------------


def criterion_1():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for dims in ((2, 2, 2), (3, 2, 3)):
        for _ in range(50):
            psi = random_pure_state(int(np.prod(dims)), rng)
            rho = np.outer(psi, psi.conj())
            ab = BipartiteState(partial_trace(rho, dims, [0, 1]), dims[0], dims[1])
            ac = BipartiteState(partial_trace(rho, dims, [0, 2]), dims[0], dims[2])
            for a in ALPHAS:
                worst = max(worst, abs(cond_entropy_petz_up(ab, a) + cond_entropy_sand_down(ac, 1 / a)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-8 and dt < 10
    return ok, f"entropy duality on 100 pure states, max |sum| = {worst:.2e} (tol 1e-8), {dt:.1f} s (limit 10 s)"


def criterion_2():
    rng = np.random.default_rng(102)
    worst = 0.0
    for i in range(20):
        d = 2 if i % 2 == 0 else 3
        fam = "z" if i % 4 < 2 else "x"
        src = purify_source(_dist(rng, d), _channel(rng, d), fam)
        zb, xc = dc_state(src), pa_state(src)
        for a in ALPHAS:
            total = cond_entropy_petz_up(zb, a) + cond_entropy_sand_down(xc, 1 / a)
            worst = max(worst, abs(total - math.log2(d)))
    return worst <= 1e-8, f"saturation on 20 sources (both families, d=2,3), max |sum - log d| = {worst:.2e} (tol 1e-8)"


def criterion_3():
    rng = np.random.default_rng(103)
    t0 = time.perf_counter()
    worst, worst_cert, count = 0.0, 0.0, 0
    for fam in ("z", "x"):
        for n in (1, 2, 3):
            for m in range(n + 1):
                for _ in range(10):
                    src = purify_source(_dist(rng, 2), _channel(rng, 2), fam)
                    h, _, _ = random_toeplitz(rng, m, n, 2)
                    res = duality_check(src, n, h, 1e-8)
                    worst = max(worst, res.gap)
                    worst_cert = max(worst_cert, res.pguess.gap, res.max_fidelity.gap)
                    count += 1
    dt = time.perf_counter() - t0
    ok = worst <= 1e-6 and worst_cert <= 1e-8 and dt < 300
    return ok, (f"pguess vs max-fidelity on {count} Toeplitz instances, max gap = {worst:.2e} (tol 1e-6), "
                f"max certificate gap = {worst_cert:.2e} (tol 1e-8), {dt:.1f} s (limit 300 s)")


def _bsc_e0(s, p):
    a = 1 / (1 + s)
    return s - (1 + s) * math.log2(p**a + (1 - p) ** a)


def _bsc_esp(r, p):
    if r >= 1 - _h2(p):
        return 0.0
    delta = brentq(lambda x: _h2(x) - (1 - r), p, 0.5, xtol=1e-15)
    return delta * math.log2(delta / p) + (1 - delta) * math.log2((1 - delta) / (1 - p))


def criterion_4():
    e0_err = lo_err = sp_err = agree_err = 0.0
    for p in (0.05, 0.1, 0.2):
        ch = symmetric_channel("bsc", p=p)
        for s in np.linspace(0, 4, 17):
            e0_err = max(e0_err, abs(ex.gallager_e0(s, uniform(2), ch) - _bsc_e0(s, p)))
        rcrit = 1 - _h2(math.sqrt(p) / (math.sqrt(p) + math.sqrt(1 - p)))
        cap = 1 - _h2(p)
        for r in np.linspace(0.05, cap + 0.05, 20):
            er = _bsc_e0(1, p) - r if r < rcrit else _bsc_esp(r, p)
            lo = ex.cc_exponent_lower(ch, r).exponent
            sp = ex.cc_sphere_packing(ch, r).exponent
            lo_err = max(lo_err, abs(lo - er))
            sp_err = max(sp_err, abs(sp - _bsc_esp(r, p)))
            if r > rcrit:
                agree_err = max(agree_err, abs(lo - sp))
    ok = e0_err <= 1e-10 and lo_err <= 1e-8 and sp_err <= 1e-8 and agree_err <= 1e-8
    return ok, (f"BSC collapse: E0 err {e0_err:.1e} (tol 1e-10), random-coding err {lo_err:.1e}, "
                f"sphere-packing err {sp_err:.1e}, agreement above R_crit {agree_err:.1e} (tol 1e-8)")


def criterion_5():
    rng = np.random.default_rng(105)
    worst = 0.0
    for i in range(20):
        ch = _channel(rng, 2 + i % 2)
        for s in (0.25, 0.5, 1.0):
            worst = max(worst, ex.e0_entropy_identity(s, ch).gap)
    return worst <= 1e-8, f"E0-entropy identity on 20 channels x 3 values of s, max gap = {worst:.2e} (tol 1e-8)"


def criterion_6():
    fams = [
        symmetric_channel("bsc", p=0.1),
        symmetric_channel("classical-symmetric", row=[0.6, 0.3, 0.1]),
        symmetric_channel("dihedral-qubit", theta=0.7),
        symmetric_channel("dihedral-qubit", theta=0.4, r=0.8, d=4),
        symmetric_channel("group-unitaries", base=random_density_matrix(2, rng=6),
                          unitaries=[np.eye(2), np.diag([1.0, -1.0])]),
    ]
    worst, all_ok = 0.0, True
    for ch in fams:
        for s in (0.25, 0.5, 1.0, 2.0):
            chk = ex.holevo_condition(uniform(ch.d), s, ch)
            all_ok &= chk.satisfied
            worst = max(worst, float(np.max(np.abs(chk.residuals))))
    bad = CQChannel(3, (np.diag([1.0, 0, 0]), np.eye(3) / 3, np.diag([1.0, 0, 0])))
    chk = ex.holevo_condition(uniform(3), 0.5, bad)
    viol = float(np.max(np.abs(chk.residuals)))
    ok = all_ok and worst <= 1e-9 and not chk.satisfied and viol > 1e-4
    return ok, (f"Holevo condition: symmetric families max residual {worst:.1e} (tol 1e-9); "
                f"counterexample residual {viol:.3f} (needs > 1e-4)")


def criterion_7():
    rng = np.random.default_rng(107)
    order_ok, worst_eq, checked = True, 0.0, 0
    for i in range(10):
        d = 2 + i % 2
        st_ = dc_state(purify_source(_dist(rng, d), _channel(rng, d), "z"))
        h, top = von_neumann_cond(st_), math.log2(d)
        for r in np.linspace(h, top, 8)[1:-1]:
            lo, sp = ex.dc_exponent_lower(st_, r), ex.dc_sphere_packing(st_, r)
            order_ok &= lo.exponent <= sp.exponent + 1e-12
            if sp.flag != ex.DIVERGED and sp.optimizer >= 0.5:
                worst_eq = max(worst_eq, abs(lo.exponent - sp.exponent))
                checked += 1
    chans = [symmetric_channel("bsc", p=p) for p in (0.02, 0.15)]
    chans += [symmetric_channel("dihedral-qubit", theta=t, r=r) for t, r in ((0.3, 1.0), (0.6, 0.9), (1.0, 0.7))]
    chans += [symmetric_channel("classical-symmetric", row=row) for row in ([0.8, 0.1, 0.1], [0.5, 0.3, 0.2])]
    chans += [symmetric_channel("dihedral-qubit", theta=0.5, d=4), symmetric_channel("dihedral-qubit", theta=0.2, d=4)]
    chans += [symmetric_channel("group-unitaries", base=random_density_matrix(2, rng=rng),
                                unitaries=[np.eye(2), np.array([[0, 1], [1, 0]])])]
    for ch in chans:
        for r in np.linspace(0.05, math.log2(ch.d) * 0.9, 8):
            lo, sp = ex.cc_exponent_lower(ch, r), ex.cc_sphere_packing(ch, r)
            order_ok &= lo.exponent <= sp.exponent + 1e-12
            if sp.flag != ex.DIVERGED and sp.optimizer <= 1.0:
                worst_eq = max(worst_eq, abs(lo.exponent - sp.exponent))
                checked += 1
    ok = order_ok and worst_eq <= 1e-8
    return ok, (f"bound ordering on 20 instances: lower <= sphere-packing {'holds' if order_ok else 'FAILS'}; "
                f"{checked} points with the optimizer in range agree to {worst_eq:.1e} (tol 1e-8)")


def criterion_8():
    rng = np.random.default_rng(108)
    worst = 0.0
    for i in range(20):
        d = 2 + i % 2
        src = purify_source(_dist(rng, d), _channel(rng, d), "z" if i % 4 < 2 else "x")
        zb, xc = dc_state(src), pa_state(src)
        hx = von_neumann_cond(xc)
        for frac in (0.2, 0.5, 0.8):
            r_pa = frac * hx
            pa = ex.pa_exponent_lower(xc, r_pa).exponent
            dc = ex.dc_exponent_lower(zb, math.log2(d) - r_pa).exponent
            worst = max(worst, abs(pa - dc))
    return worst <= 1e-8, f"PA/DC rate duality on 20 sources x 3 rates, max |E_pa - E_dc| = {worst:.2e} (tol 1e-8)"


def criterion_9():
    rng = np.random.default_rng(109)
    pgm_ok, coset_ok, ident = True, True, 0.0
    count = 0
    for i in range(12):
        d = 2 if i < 9 else 3
        n = 2 + i % 2 if d == 2 else 2
        m = 1 + i % n
        src = purify_source(_dist(rng, d), _channel(rng, d), "z" if i % 2 else "x")
        h, _, _ = random_toeplitz(rng, m, n, d)
        rep = dc_error_exact(src, n, h, 1e-9)
        pgm_ok &= rep.measured <= rep.bound_values["pgm"] + 1e-9
        count += 1
    codes = [symmetric_channel("bsc", p=0.1), symmetric_channel("dihedral-qubit", theta=0.6, r=0.9),
             symmetric_channel("classical-symmetric", row=[0.7, 0.2, 0.1])]
    for ch in codes:
        for n, m in ((2, 1), (3, 1), (3, 2)) if ch.d == 2 else ((2, 1),):
            h, _, _ = random_toeplitz(rng, m, n, ch.d)
            code = code_from_compressor(ch, n, h, 1e-9)
            avg = float(np.mean([e for _, e in code.coset_errors]))
            comp = dc_error_exact(purify_source(uniform(ch.d), ch, "z"), n, h, 1e-9).measured
            coset_ok &= code.error <= avg + 1e-12
            ident = max(ident, abs(avg - comp))
            count += 1
    ok = pgm_ok and coset_ok and ident <= 1e-7
    return ok, (f"finite-n sanity on {count} instances: optimal <= PGM {'holds' if pgm_ok else 'FAILS'}, "
                f"best coset <= average {'holds' if coset_ok else 'FAILS'}, "
                f"average coset error = compression error to {ident:.1e}")


def criterion_10(workdir: Path):
    spec = workdir / "channel.json"
    ket = np.array([1.0, 1.0]) / math.sqrt(2)
    spec.write_text(dump_spec(CQChannel(2, (np.diag([0.9, 0.1]), np.outer(ket, ket))), [0.4, 0.6]))
    commands = [
        ["curve", "--family", "dc-sp", "--rates", "0.6:0.95:8"],
        ["curve", "--family", "cc-sp", "--rates", "0.1,0.3"],
        ["entropy", "--alpha", "0.5,1.5"],
        ["duality", "--n", "2", "--m", "1", "--trials", "3", "--seed", "4"],
        ["simulate", "--mode", "dc", "--n", "2,3", "--rates", "0.5,0.8", "--trials", "2", "--seed", "4", "--K", "1"],
        ["simulate", "--mode", "pa", "--n", "2", "--rates", "0.5", "--seed", "9"],
        ["critical-rate", "--family", "dc"],
    ]
    same = True
    for k, cmd in enumerate(commands):
        outs = []
        for rep in range(2):
            target = workdir / f"out{k}_{rep}"
            subprocess.run([sys.executable, "-m", "cqexp", *cmd, "--spec", str(spec), "--out", str(target)],
                           check=True, capture_output=True)
            outs.append(target.read_bytes())
        same &= outs[0] == outs[1] and len(outs[0]) > 0
    return same, f"{len(commands)} CLI commands run twice, outputs byte-identical: {same}"


# --- pytest entry points -----------------------------------------------------------


def _check(capsys, num, result):
    ok, detail = result
    with capsys.disabled():
        print()
        _report(num, ok, detail)
    assert ok, detail


def test_criterion_1_entropy_duality(capsys):
    _check(capsys, 1, criterion_1())


def test_criterion_2_saturation(capsys):
    _check(capsys, 2, criterion_2())


def test_criterion_3_guessing_fidelity_duality(capsys):
    _check(capsys, 3, criterion_3())


def test_criterion_4_classical_collapse(capsys):
    _check(capsys, 4, criterion_4())


def test_criterion_5_e0_entropy_identity(capsys):
    _check(capsys, 5, criterion_5())


def test_criterion_6_holevo_condition(capsys):
    _check(capsys, 6, criterion_6())


def test_criterion_7_bound_ordering(capsys):
    _check(capsys, 7, criterion_7())


def test_criterion_8_rate_duality(capsys):
    _check(capsys, 8, criterion_8())


def test_criterion_9_finite_n_sanity(capsys):
    _check(capsys, 9, criterion_9())


def test_criterion_10_determinism(capsys, tmp_path):
    _check(capsys, 10, criterion_10(tmp_path))


if __name__ == "__main__":
    import tempfile

    results = []
    for num in range(1, 11):
        if num == 10:
            with tempfile.TemporaryDirectory() as tmp:
                ok, detail = criterion_10(Path(tmp))
        else:
            ok, detail = globals()[f"criterion_{num}"]()
        _report(num, ok, detail)
        results.append(ok)
    sys.exit(0 if all(results) else 1)
