"""Command line entry point: ``rotorlab <command> ...``.

Exit codes: 0 ok, 1 exact-suite failure, 2 config or input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import random
import sys
from fractions import Fraction
from pathlib import Path

from rotorlab import __version__
from rotorlab.alpha_builder import build_in_A, constant_digits, gauss_random
from rotorlab.birkhoff import DEFAULT_GUARD, make_context, random_x, sum_fast, sum_naive
from rotorlab.cf_core import (
    CfDigits,
    InsufficientDigits,
    RationalInterval,
    convergents,
    cylinder,
    expand_rational,
    format_rational,
    ostrowski_encode,
    parse_rational,
)
from rotorlab.harness import (
    ConfigError,
    VerifyConfig,
    csv_text,
    json_text,
    load_config,
    resolve_threads,
    run,
    run_verify,
    with_digest_header,
    write_manifest,
)
from rotorlab.measure_lab import (
    PsiSpec,
    a_k_measure,
    claim_m,
    coprime_density,
    diamond_vaaler,
    gibbs_probe,
    sullivan_sim,
)
from rotorlab.observable import SawtoothCombo, eval_combo, syndetic_scan
from rotorlab.temporal import SCAN_HEADER, ensemble, histogram_csv, parse_grid, scan_tdlt

EXIT_OK, EXIT_EXACT_FAILURE, EXIT_CONFIG = 0, 1, 2


# --- argument helpers --------------------------------------------------------------


def load_alpha(spec: str) -> CfDigits:
    """A digits JSON file, ``golden:LEN``, ``constant:A:LEN``, ``gauss:LEN:SEED`` or ``1,2,3``."""
    path = Path(spec)
    if path.is_file():
        return CfDigits.from_json(path.read_text())
    kind, _, rest = spec.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if kind == "golden":
            return constant_digits(1, int(parts[0]) if parts else 150)
        if kind == "constant":
            return constant_digits(int(parts[0]), int(parts[1]))
        if kind == "gauss":
            return gauss_random(int(parts[0]), int(parts[1]) if len(parts) > 1 else 0)
        return CfDigits.from_any(int(v) for v in spec.split(","))
    except (ValueError, IndexError) as exc:
        raise ConfigError("--alpha", f"cannot read {spec!r}: {exc}") from None


def load_combo(spec: str) -> SawtoothCombo:
    """A combo JSON file, inline JSON, or ``h`` for the plain sawtooth."""
    if spec == "h":
        return SawtoothCombo.sawtooth()
    path = Path(spec)
    text = path.read_text() if path.is_file() else spec
    try:
        return SawtoothCombo.from_json(text)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError("--f", f"cannot read {spec!r}: {exc}") from None


def load_x(spec: str | None, seed: int) -> Fraction:
    if spec is None or spec == "random":
        return random_x(random.Random(seed))
    try:
        return parse_rational(spec)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError("--x", str(exc)) from None


def _interval(lo: str, hi: str) -> RationalInterval:
    return RationalInterval.open(parse_rational(lo), parse_rational(hi))


# --- output ----------------------------------------------------------------------


def _digest(args: argparse.Namespace) -> str:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "threads", "handler")}
    return hashlib.sha256(f"{__version__}|{json.dumps(params, sort_keys=True, default=str)}".encode()).hexdigest()


def emit(args: argparse.Namespace, name: str, payload: dict | None = None, header=None, rows=None) -> None:
    """Write a JSON payload or a table to stdout, or into --out with a manifest."""
    digest = _digest(args)
    if rows is not None and args.format == "csv":
        text = with_digest_header(csv_text(header, rows), digest)
        name = f"{name}.csv"
    else:
        body = payload if payload is not None else {"header": list(header), "rows": [list(r) for r in rows]}
        text = json_text(body, digest)
        name = f"{name}.json"
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)
    write_manifest(out, [name], digest)
    print(f"wrote {out / name}")


# --- commands --------------------------------------------------------------------


def cmd_cf(args) -> int:
    if args.action == "expand":
        r = parse_rational(args.value)
        d = expand_rational(r.numerator, r.denominator)
        emit(args, "cf_expand", {"value": format_rational(r), "digits": list(d.digits)})
    elif args.action == "convergents":
        d = load_alpha(args.alpha)
        upto = min(args.upto, len(d))
        emit(args, "convergents", header=["k", "p", "q"], rows=((c.index, c.p, c.q) for c in convergents(d, upto)))
    elif args.action == "ostrowski":
        d = load_alpha(args.alpha)
        r = ostrowski_encode(args.n, d)
        emit(args, "ostrowski", {"n": args.n, "digits": list(r.digits)})
    else:
        prefix = [int(v) for v in args.prefix.split(",")]
        c = cylinder(prefix)
        emit(args, "cylinder", {"prefix": prefix, "interval": c.interval.to_dict(),
                                "measure": format_rational(c.measure)})
    return EXIT_OK


def cmd_observable(args) -> int:
    f = load_combo(args.f)
    if args.action == "eval":
        emit(args, "eval", {"x": args.x, "value": format_rational(eval_combo(f, parse_rational(args.x)))})
        return EXIT_OK
    rep = syndetic_scan(f, args.eps0, args.n_max)
    if args.format == "csv" and args.out is not None:
        digest = _digest(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "syndetic.csv").write_text(with_digest_header(rep.to_csv(), digest))
        write_manifest(out, ["syndetic.csv"], digest)
        print(f"wrote {out / 'syndetic.csv'}")
    else:
        emit(args, "syndetic", rep.to_dict())
    return EXIT_OK


def cmd_birkhoff(args) -> int:
    d, f = load_alpha(args.alpha), load_combo(args.f)
    ctx = make_context(d, args.n, args.guard)
    x = load_x(args.x, args.seed)
    res = (sum_naive if args.naive else sum_fast)(f, ctx, x, args.n)
    emit(args, "birkhoff", {"x": format_rational(x), "n": args.n, **res.to_dict()})
    return EXIT_OK


def cmd_temporal(args) -> int:
    d, f = load_alpha(args.alpha), load_combo(args.f)
    x = load_x(args.x, args.seed)
    if args.action == "scan":
        grid = parse_grid(args.grid)
        ctx = make_context(d, max(grid), args.guard)
        rows = scan_tdlt(f, ctx, x, grid)
        emit(args, "scan", header=SCAN_HEADER, rows=(r.as_list() for r in rows))
    else:
        ctx = make_context(d, args.N, args.guard)
        e = ensemble(f, ctx, x, args.N)
        if args.bins:
            text = histogram_csv(e, args.bins)
            lines = text.splitlines()[1:]
            emit(args, "histogram", header=["bin_lo", "bin_hi", "count"], rows=(l.split(",") for l in lines))
        else:
            emit(args, "ensemble", header=["n", "S_n"],
                 rows=((n, repr(float(v))) for n, v in enumerate(e.values, start=1)))
    return EXIT_OK


def cmd_measure(args) -> int:
    if args.action == "battery":
        rows, _ = run_verify("measure", args.seed, args.out, resolve_threads(args.threads), args.format)
        if args.out is None:
            for row in rows:
                print(json.dumps(row, sort_keys=True))
        return EXIT_OK
    if args.action == "coprime":
        res = coprime_density(args.N, _interval(args.lo, args.hi))
        emit(args, "coprime", {"N": args.N, "count": res.count, "asymptotic": res.asymptotic, "ratio": res.ratio})
    elif args.action == "ak":
        f = load_combo(args.f)
        nset = syndetic_scan(f, n_max=max(1000, math.ceil(math.exp(args.k))))
        M = args.M or claim_m(nset.lower_density_estimate)
        res = a_k_measure(nset, PsiSpec(args.c), M, args.k, _interval(args.lo, args.hi))
        emit(args, "a_k_measure", {"M": M, **res.to_dict()})
    elif args.action == "gibbs":
        rep = gibbs_probe(args.depth, args.max_digit)
        emit(args, "gibbs", {"G": rep.G, "by_depth": rep.by_depth, "bound": rep.bound, "holds": rep.holds})
    elif args.action == "sullivan":
        res = sullivan_sim(lambda k: min(0.5, 1 / k), args.D, args.horizon, args.trials, args.seed, args.coupling)
        emit(args, "sullivan", res.estimate.row("sullivan_sim", {"D": args.D, "horizon": args.horizon,
                                                                 "coupling": args.coupling}))
    else:
        stats = [diamond_vaaler(gauss_random(args.k + 1, args.seed + i), args.k) for i in range(args.draws)]
        emit(args, "diamond_vaaler", header=["seed", "statistic"],
             rows=((args.seed + i, repr(s)) for i, s in enumerate(stats)))
    return EXIT_OK


def cmd_alpha(args) -> int:
    if args.action == "constant":
        d = constant_digits(args.a, args.length)
        emit(args, "alpha", {"digits": [str(a) for a in d.digits]})
    elif args.action == "gauss":
        d = gauss_random(args.length, args.seed)
        emit(args, "alpha", {"digits": [str(a) for a in d.digits], "seed": args.seed})
    else:
        f = load_combo(args.f)
        nset = syndetic_scan(f, args.eps0)
        d, plan = build_in_A(nset, args.M, args.stages, args.budget, args.seed, args.filler, args.tail, args.growth)
        emit(args, "alpha", {"digits": [str(a) for a in d.digits], "plan": plan.to_dict()})
    return EXIT_OK


def cmd_verify(args) -> int:
    threads = resolve_threads(args.threads)
    results, status = run_verify(args.suite, args.seed, args.out, threads, args.format)
    if args.suite == "measure":
        for row in results:
            print(json.dumps(row, sort_keys=True))
        return EXIT_OK
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return status


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = args.out or cfg.outputs.get("dir") or "rotorlab-out"
    if isinstance(cfg, VerifyConfig):
        results, status = run_verify(cfg.suite, cfg.seed, out, resolve_threads(args.threads), args.format)
        if cfg.suite != "measure":
            for r in results:
                print(r.line())
        return status
    summary = run(cfg, out, resolve_threads(args.threads))
    bad = [r for r in summary["rows"] if not r["ok"]]
    print(f"{len(summary['rows']) - len(bad)}/{len(summary['rows'])} rows completed; outputs in {out}")
    for r in bad:
        print(f"row {r['index']} (x={r['x']}): {r['error']}")
    return EXIT_OK


# --- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output directory (stdout when omitted)")
    common.add_argument("--threads", type=int, default=None, help="worker count (env ROTORLAB_THREADS)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    p = argparse.ArgumentParser(prog="rotorlab", description="Ergodic sums of sawtooth observables over rotations.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    cf = sub.add_parser("cf", help="continued fractions")
    cf_sub = cf.add_subparsers(dest="action", required=True)
    e = cf_sub.add_parser("expand", parents=[common])
    e.add_argument("value")
    c = cf_sub.add_parser("convergents", parents=[common])
    c.add_argument("--alpha", required=True)
    c.add_argument("--upto", type=int, default=20)
    o = cf_sub.add_parser("ostrowski", parents=[common])
    o.add_argument("--alpha", required=True)
    o.add_argument("--n", type=int, required=True)
    y = cf_sub.add_parser("cylinder", parents=[common])
    y.add_argument("--prefix", required=True, help="comma-separated digits")
    cf.set_defaults(handler=cmd_cf)

    ob = sub.add_parser("observable", help="sawtooth combinations")
    ob_sub = ob.add_subparsers(dest="action", required=True)
    s = ob_sub.add_parser("scan", parents=[common])
    s.add_argument("--f", default="h")
    s.add_argument("--eps0", type=float, default=None)
    s.add_argument("--n-max", dest="n_max", type=int, default=1000)
    v = ob_sub.add_parser("eval", parents=[common])
    v.add_argument("--f", default="h")
    v.add_argument("--x", required=True)
    ob.set_defaults(handler=cmd_observable)

    b = sub.add_parser("birkhoff", parents=[common], help="certified ergodic sums")
    b.add_argument("--alpha", required=True)
    b.add_argument("--f", default="h")
    b.add_argument("--x", default=None, help="p/q, or omit for a seeded random x")
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--naive", action="store_true")
    b.add_argument("--guard", type=int, default=DEFAULT_GUARD)
    b.set_defaults(handler=cmd_birkhoff)

    t = sub.add_parser("temporal", help="temporal distributions")
    t_sub = t.add_subparsers(dest="action", required=True)
    for name in ("scan", "ensemble"):
        tp = t_sub.add_parser(name, parents=[common])
        tp.add_argument("--alpha", default="golden:200")
        tp.add_argument("--f", default="h")
        tp.add_argument("--x", default=None)
        tp.add_argument("--guard", type=int, default=DEFAULT_GUARD)
        if name == "scan":
            tp.add_argument("--grid", default="geometric:1e3:1e5:1.5")
        else:
            tp.add_argument("--N", type=int, required=True)
            tp.add_argument("--bins", type=int, default=0, help="emit a histogram instead of the raw sums")
    t.set_defaults(handler=cmd_temporal)

    m = sub.add_parser("measure", help="measure-theoretic checks")
    m_sub = m.add_subparsers(dest="action", required=True)
    m_sub.add_parser("battery", parents=[common])
    mc = m_sub.add_parser("coprime", parents=[common])
    mc.add_argument("--N", type=int, default=2000)
    mc.add_argument("--lo", default="0")
    mc.add_argument("--hi", default="1")
    ma = m_sub.add_parser("ak", parents=[common])
    ma.add_argument("--f", default="h")
    ma.add_argument("--k", type=int, default=8)
    ma.add_argument("--M", type=int, default=None)
    ma.add_argument("--c", type=float, default=2.1)
    ma.add_argument("--lo", default="1/10")
    ma.add_argument("--hi", default="9/10")
    mg = m_sub.add_parser("gibbs", parents=[common])
    mg.add_argument("--depth", type=int, default=4)
    mg.add_argument("--max-digit", dest="max_digit", type=int, default=4)
    ms = m_sub.add_parser("sullivan", parents=[common])
    ms.add_argument("--D", type=float, default=1.0)
    ms.add_argument("--horizon", type=int, default=10_000)
    ms.add_argument("--trials", type=int, default=1000)
    ms.add_argument("--coupling", choices=("independent", "blockwise"), default="independent")
    md = m_sub.add_parser("dv", parents=[common])
    md.add_argument("--k", type=int, default=5000)
    md.add_argument("--draws", type=int, default=100)
    m.set_defaults(handler=cmd_measure)

    a = sub.add_parser("alpha", help="rotation numbers")
    a_sub = a.add_subparsers(dest="action", required=True)
    ac = a_sub.add_parser("constant", parents=[common])
    ac.add_argument("--a", type=int, default=1)
    ac.add_argument("--length", type=int, default=150)
    ag = a_sub.add_parser("gauss", parents=[common])
    ag.add_argument("--length", type=int, default=200)
    ab = a_sub.add_parser("build", parents=[common])
    ab.add_argument("--f", default="h")
    ab.add_argument("--eps0", type=float, default=None)
    ab.add_argument("--M", type=int, default=1)
    ab.add_argument("--stages", type=int, default=3)
    ab.add_argument("--growth", type=int, default=3)
    ab.add_argument("--tail", type=int, default=150)
    ab.add_argument("--budget", type=int, default=200)
    ab.add_argument("--filler", choices=("ones", "gauss"), default="ones")
    a.set_defaults(handler=cmd_alpha)

    vf = sub.add_parser("verify", parents=[common], help="acceptance suites")
    vf.add_argument("--suite", choices=("exact", "statistical", "all", "measure"), default="all")
    vf.set_defaults(handler=cmd_verify, seed=None)

    r = sub.add_parser("run", parents=[common], help="execute an experiment config")
    r.add_argument("--config", required=True)
    r.set_defaults(handler=cmd_run)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify" and args.seed is None:
        from rotorlab.acceptance import SEED

        args.seed = SEED
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, InsufficientDigits, KeyError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
