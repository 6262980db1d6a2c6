"""Command-line entry point: ``cqexp entropy|curve|duality|simulate|critical-rate``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from cqexp import exponents
from cqexp.codes import is_prime, random_toeplitz
from cqexp.config import DEFAULTS
from cqexp.entropy import cond_entropy, von_neumann_cond
from cqexp.errors import CQExpError, ValidationError
from cqexp.experiments import duality_check, rate_scan
from cqexp.specfile import load_spec
from cqexp.states import dc_state, pa_state, purify_source

CURVE_FAMILIES = ("cc-lower", "cc-sp", "dc-lower", "dc-sp", "pa-lower", "pa-sp")
ENTROPY_KINDS = ("petz-up", "sand-down")


# --- formatting ----------------------------------------------------------------


def _num(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def _jsonable(obj):
    """Non-finite floats become the strings "inf", "-inf", "nan"."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ValidationError(f"cannot write {out!r}: {exc.strerror}") from None


def _float_list(text: str, what: str) -> list[float]:
    """Comma list, or ``start:stop:count`` for an evenly spaced grid."""
    try:
        if ":" in text:
            a, b, k = text.split(":")
            return [float(x) for x in np.linspace(float(a), float(b), int(k))]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse {what} list {text!r}") from None


def _int_list(text: str, what: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse {what} list {text!r}") from None


def _load(args):
    if not args.spec:
        raise ValidationError("--spec FILE is required")
    return load_spec(args.spec, normalize=args.normalize)


def _require_prime(d: int, what: str):
    if not is_prime(d):
        raise ValidationError(f"{what} needs a prime alphabet size, got d={d}")


# --- subcommands ---------------------------------------------------------------


def cmd_entropy(args) -> str:
    spec = _load(args)
    src = purify_source(spec.distribution, spec.channel, args.source_family)
    zb, xc = dc_state(src), pa_state(src)
    kinds = ENTROPY_KINDS if args.which == "both" else (args.which,)
    dual = {"petz-up": "sand-down", "sand-down": "petz-up"}
    records = []
    for a in _float_list(args.alpha, "alpha"):
        for kind in kinds:
            h = cond_entropy(zb, a, kind)
            hd = cond_entropy(xc, 1.0 / a, dual[kind])
            records.append({"alpha": a, "kind": kind, "h_compression": h,
                            "dual_kind": dual[kind], "h_dual": hd, "sum": h + hd})
    out = {
        "d": spec.channel.d,
        "source_family": args.source_family,
        "log_d": math.log2(spec.channel.d),
        "h_compression_vn": von_neumann_cond(zb),
        "h_dual_vn": von_neumann_cond(xc),
        "records": records,
    }
    return _dump_json(out)


def _curve_point(family: str, target, rate: float, args):
    if family == "cc-lower":
        return exponents.cc_exponent_lower(target, rate)
    if family == "cc-sp":
        return exponents.cc_sphere_packing(target, rate, args.smax)
    if family == "dc-lower":
        return exponents.dc_exponent_lower(target, rate)
    if family == "dc-sp":
        return exponents.dc_sphere_packing(target, rate)
    if family == "pa-lower":
        return exponents.pa_exponent_lower(target, rate)
    return exponents.pa_sphere_packing(target, rate, args.alpha_max)


def cmd_curve(args) -> str:
    spec = _load(args)
    family = args.family
    if family.startswith("cc"):
        target = spec.channel
        if family == "cc-lower" and target.symmetry is None:
            raise ValidationError(
                "cc-lower needs a symmetric channel: no symmetry block was given and none was detected"
            )
    else:
        src = purify_source(spec.distribution, spec.channel, args.source_family)
        target = dc_state(src) if family.startswith("dc") else pa_state(src)
    rows = []
    for rate in _float_list(args.rates, "rate"):
        try:
            pt = _curve_point(family, target, rate, args)
            rows.append([_num(rate), _num(pt.exponent), _num(pt.optimizer), pt.flag])
        except ValidationError:
            # rate outside the family's admissible interval
            rows.append([_num(rate), "nan", "nan", "invalid"])
    return _csv(["rate", "exponent", "optimizer", "flag"], rows)


def cmd_duality(args) -> str:
    spec = _load(args)
    d = spec.channel.d
    _require_prime(d, "the duality check")
    n = _single_int(args.n, "n")
    m = args.m
    if not 0 <= m <= n:
        raise ValidationError(f"need 0 <= m <= n, got m={m}, n={n}")
    src = purify_source(spec.distribution, spec.channel, args.source_family)
    trials = []
    for t in range(args.trials):
        rng = np.random.default_rng([args.seed, t])
        h, seed, resamples = random_toeplitz(rng, m, n, d)
        res = duality_check(src, n, h, args.tol)
        trials.append({
            "trial": t,
            "toeplitz_seed": seed,
            "resamples": resamples,
            "pguess": res.pguess.value,
            "pguess_gap": res.pguess.gap,
            "max_fidelity": res.max_fidelity.value,
            "max_fidelity_gap": res.max_fidelity.gap,
            "max_fidelity_iterations": res.max_fidelity.iterations,
            "gap": res.gap,
        })
    out = {
        "d": d, "n": n, "m": m, "seed": args.seed, "source_family": args.source_family,
        "trials": trials,
        "max_gap": max((r["gap"] for r in trials), default=0.0),
        "max_certificate_gap": max((max(r["pguess_gap"], r["max_fidelity_gap"]) for r in trials), default=0.0),
    }
    return _dump_json(out)


def _single_int(text, what: str) -> int:
    vals = _int_list(str(text), what)
    if len(vals) != 1:
        raise ValidationError(f"--{what} takes a single integer here")
    return vals[0]


def cmd_simulate(args) -> str:
    spec = _load(args)
    d = spec.channel.d
    _require_prime(d, "simulation")
    if args.mode == "cc":
        problem = spec.channel
        if problem.symmetry is None:
            raise ValidationError("cc simulation needs a symmetric channel")
    else:
        problem = purify_source(spec.distribution, spec.channel, args.source_family)
    ns = _int_list(args.n, "n")
    rates = _float_list(args.rates, "rate")
    reports = rate_scan(problem, args.mode, ns, rates, args.trials, args.seed, K=args.K, tol=args.tol)
    header = ["n", "m", "rate", "measured", "bound_lower", "bound_sp", "status", "seed"]
    if args.K is not None:
        header.append("K")
    rows = []
    for r in reports:
        row = [r.n, r.m, _num(r.rate), _num(r.measured), _num(r.bound_values["lower"]),
               _num(r.bound_values["sp"]), r.status, r.seeds[0]]
        if args.K is not None:
            row.append(_num(r.bound_values["K"]))
        rows.append(row)
    return _csv(header, rows)


def cmd_critical_rate(args) -> str:
    spec = _load(args)
    if args.family == "cc":
        res = exponents.critical_rate("cc", spec.channel, tol=args.tol or 1e-6, s_max=args.smax)
    else:
        src = purify_source(spec.distribution, spec.channel, args.source_family)
        res = exponents.critical_rate("dc", dc_state(src), tol=args.tol or 1e-6)
    return _dump_json({"family": args.family, "rate": res.rate, "outcome": res.outcome})


# --- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", metavar="FILE", help="channel spec (JSON)")
    common.add_argument("--out", metavar="FILE", help="write output here instead of stdout")
    common.add_argument("--normalize", action="store_true",
                        help="rescale probabilities and output traces instead of rejecting them")
    common.add_argument("--source-family", choices=("z", "x"), default="z")
    common.add_argument("--tol", type=float, default=None)

    p = argparse.ArgumentParser(prog="cqexp", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("entropy", parents=[common], help="conditional Renyi entropies of the source and its dual")
    e.add_argument("--alpha", default="0.5,1,2", help="comma list of orders")
    e.add_argument("--which", choices=ENTROPY_KINDS + ("both",), default="both")
    e.set_defaults(func=cmd_entropy)

    c = sub.add_parser("curve", parents=[common], help="exponent bound against rate (CSV)")
    c.add_argument("--family", choices=CURVE_FAMILIES, required=True)
    c.add_argument("--rates", required=True, help="comma list or start:stop:count")
    c.add_argument("--smax", type=float, default=None, help="cap on s for cc-sp")
    c.add_argument("--alpha-max", type=float, default=None, help="cap on alpha for pa-sp")
    c.set_defaults(func=cmd_curve)

    dq = sub.add_parser("duality", parents=[common], help="guessing vs. max-fidelity on random hashes (JSON)")
    dq.add_argument("--n", default="2")
    dq.add_argument("--m", type=int, default=1)
    dq.add_argument("--seed", type=int, default=0)
    dq.add_argument("--trials", type=int, default=10)
    dq.set_defaults(func=cmd_duality)

    s = sub.add_parser("simulate", parents=[common], help="exact finite-n scan (CSV)")
    s.add_argument("--mode", choices=("dc", "pa", "cc"), required=True)
    s.add_argument("--n", default="2", help="comma list of blocklengths")
    s.add_argument("--rates", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--K", type=float, default=None, help="finite-n constant; the column is omitted if unset")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("critical-rate", parents=[common], help="rate where the two exponent bounds start to agree")
    r.add_argument("--family", choices=("cc", "dc"), required=True)
    r.add_argument("--smax", type=float, default=None)
    r.set_defaults(func=cmd_critical_rate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.func(args)
        _emit(text, args.out)
    except CQExpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
