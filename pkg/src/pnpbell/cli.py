"""Command-line entry point: ``pnpbell <subcommand> [options]``.

Data goes to stdout or ``--out``; a JSON run manifest goes to stderr or
``--manifest``. Exit status is 0 on success, 2 on usage errors and 1 when a
computation fails.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import time
from fractions import Fraction

import numpy as np

from . import __version__
from .bell import BellExpression, format_fraction, make_chsh, product_coefficients_int, to_fraction
from .lhv import CapExceeded, lhv_bound, product_lhv_bound

log = logging.getLogger("pnpbell")


class UsageError(ValueError):
    pass


def fmt(x) -> str:
    if isinstance(x, Fraction):
        return format_fraction(x)
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return f"{float(x):.12g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return format_fraction(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(f"{float(obj):.12g}")
    return obj


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def _rational(text: str) -> Fraction:
    try:
        return to_fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a rational 'p/q', got {text!r}") from None


def _expr(args) -> BellExpression:
    if getattr(args, "expr", None):
        with open(args.expr) as fh:
            return BellExpression.from_json(fh.read())
    return make_chsh()


def _require(cond: bool, message: str):
    if not cond:
        raise UsageError(message)


def _over_scale(value: Fraction, expr: BellExpression, N: int) -> str:
    """Rational over the common coefficient denominator when it divides it (10/16 style)."""
    _, scale = product_coefficients_int(expr, N)
    if scale % value.denominator == 0:
        return f"{value.numerator * (scale // value.denominator)}/{scale}"
    return format_fraction(value)


# subcommands; each returns the text written to the data stream

def cmd_chsh_info(args):
    from .quantum import Q_MAX
    e = make_chsh()
    return _json({
        "n": e.n, "m": e.m, "lhv_bound": e.lhv_bound, "algebraic_bound": e.sigma,
        "quantum_bound": Q_MAX, "coefficients_abxy": json.loads(e.to_json())["coeffs"],
    })


def cmd_lhv_bound(args):
    res = lhv_bound(_expr(args))
    return format_fraction(res.value) + "\n"


def cmd_product_bound(args):
    _require(args.n_copies >= 1, "--n-copies must be at least 1")
    expr = _expr(args)
    res = product_lhv_bound(expr, args.n_copies, cap=args.cap, prune_symmetry=args.prune_symmetry,
                            threads=args.threads)
    return _over_scale(res.value, expr, args.n_copies) + "\n"


def cmd_kappa(args):
    from .pnp import kappa_sufficient
    _require(args.n_copies >= 1, "--n-copies must be at least 1")
    return format_fraction(kappa_sufficient(_expr(args), args.n_copies, args.sigma_override)) + "\n"


def cmd_certify(args):
    from .pnp import PnpConfig, certify_pnp_lhv_bound, kappa_sufficient
    _require(args.n_copies >= 1, "--n-copies must be at least 1")
    expr = _expr(args)
    kappa = args.kappa if args.kappa is not None else kappa_sufficient(expr, args.n_copies, args.sigma_override)
    _require(kappa >= 0, "--kappa must be nonnegative")
    cert = certify_pnp_lhv_bound(PnpConfig(expr, args.n_copies, kappa), seed=args.seed)
    out = cert.to_json()
    out["n_copies"] = args.n_copies
    out["product_strategy_bound"] = expr.lhv_bound**args.n_copies if expr.lhv_bound is not None else None
    return _json(out)


def cmd_polytope(args):
    from .polytope import lemma2_report, verify_lemma1
    if args.lemma == 2:
        rep = lemma2_report(args.n_copies, 2)
        rep.pop("failures")
        return _json(rep)
    _require(args.trials >= 0, "--trials must be nonnegative")
    rep = verify_lemma1(2, 2, trials=args.trials, seed=args.seed)
    return _json(rep)


def cmd_tradeoff(args):
    from .quantum import compute_QAB, frontier_A, frontier_Q, optimal_strategy
    _require(args.q_grid >= 2, "--q-grid must be at least 2")
    e = make_chsh()
    rows = []
    for q in np.linspace(0.0, 1.0, args.q_grid):
        Q, A, _ = compute_QAB(optimal_strategy(float(q), e), e)
        a = float(frontier_A(q))
        rows.append((q, float(frontier_Q(q)), a, A, abs(a - A)))
    return _csv(["q", "Q", "A_analytic", "A_computed", "abs_error"], rows)


def cmd_eta_crit(args):
    from .efficiency import eta_crit_curve
    _require(args.max_n >= 1, "--max-n must be at least 1")
    pts = eta_crit_curve(args.max_n)
    return _csv(["N", "eta_crit", "q_opt", "boundary_flag"], [(p.N, p.value, p.q_opt, p.boundary) for p in pts])


def cmd_visibility(args):
    from .efficiency import visibility_curve
    _require(0 < args.eta <= 1, "--eta must lie in (0, 1]")
    _require(args.max_n >= 1, "--max-n must be at least 1")
    pts = visibility_curve(args.eta, args.max_n)
    return _csv(["N", "v_min", "q_opt", "attainable"],
                [(p.N, p.value if p.attainable else None, p.q_opt, p.attainable) for p in pts])


def cmd_fig2(args):
    from .efficiency import fig2_curves
    try:
        vis = [float(v) for v in args.visibilities.split(",")]
    except ValueError:
        raise UsageError("--visibilities must be a comma-separated list of numbers") from None
    _require(all(0 <= v <= 1 for v in vis), "visibilities must lie in [0, 1]")
    _require(args.epsilon >= 0, "--epsilon must be nonnegative")
    _require(args.max_n >= 1, "--max-n must be at least 1")
    curves = fig2_curves(args.epsilon, vis, args.max_n)
    rows = [(v, p.N, p.value if p.attainable else None, p.q_opt, p.attainable)
            for v, pts in curves.items() for p in pts]
    return _csv(["v", "N", "eta", "q_opt", "attainable"], rows)


def _experiment_config(args, seed):
    from .quantum import optimal_strategy
    from .simulator import ExperimentConfig
    _require(0 <= args.q <= 1, "--q must lie in [0, 1]")
    _require(0 <= args.eta <= 1, "--eta must lie in [0, 1]")
    _require(0 <= args.v <= 1, "--v must lie in [0, 1]")
    _require(args.trials >= 1, "--trials must be positive")
    _require(args.n_copies >= 1, "--n-copies must be at least 1")
    return ExperimentConfig(optimal_strategy(args.q), args.n_copies, args.eta, args.v, args.trials, seed)


def cmd_simulate(args):
    from .simulator import run_experiment
    cfg = _experiment_config(args, args.seed)
    res = run_experiment(cfg, args.kappa, threads=args.threads)
    if args.dump_counts:
        text = res.counts_csv()
        with open(args.dump_counts, "w") as fh:
            fh.write(text)
        args._extra_outputs[args.dump_counts] = text
    return _json(res.to_json())


def cmd_penalty_probe(args):
    from .simulator import penalty_bias_probe
    _require(args.repeats >= 0, "--repeats must be nonnegative")
    cfg = _experiment_config(args, args.seed)
    return _json(penalty_bias_probe(cfg, args.repeats, threads=args.threads))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write data here instead of stdout")
    common.add_argument("--manifest", help="write the run manifest here instead of stderr")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = argparse.ArgumentParser(prog="pnpbell", description="Penalized N-product Bell inequality toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        return sp

    add("chsh-info", cmd_chsh_info, "CHSH coefficients and bounds")
    sp = add("lhv-bound", cmd_lhv_bound, "exact LHV bound of a single-copy expression")
    sp.add_argument("--expr", help="JSON Bell expression (default CHSH)")
    sp = add("product-bound", cmd_product_bound, "exact LHV bound of the N-product expression")
    sp.add_argument("--n-copies", type=int, required=True)
    sp.add_argument("--prune-symmetry", action="store_true")
    sp.add_argument("--cap", type=int, default=20_000_000)
    sp.add_argument("--expr")
    sp = add("kappa", cmd_kappa, "sufficient penalty constant")
    sp.add_argument("--n-copies", type=int, required=True)
    sp.add_argument("--sigma-override", type=_rational)
    sp.add_argument("--expr")
    sp = add("certify", cmd_certify, "exact LHV bound of the penalized expression")
    sp.add_argument("--n-copies", type=int, required=True)
    sp.add_argument("--kappa", type=_rational)
    sp.add_argument("--sigma-override", type=_rational)
    sp.add_argument("--expr")
    sp = add("polytope", cmd_polytope, "marginal polytope checks")
    sp.add_argument("--lemma", type=int, choices=(1, 2), required=True)
    sp.add_argument("--n-copies", type=int, default=2, choices=(1, 2))
    sp.add_argument("--trials", type=int, default=100)
    sp = add("tradeoff", cmd_tradeoff, "optimal-family Q, A table")
    sp.add_argument("--q-grid", type=int, default=101)
    sp = add("eta-crit", cmd_eta_crit, "critical detection efficiency per N")
    sp.add_argument("--max-n", type=int, default=14)
    sp = add("visibility", cmd_visibility, "minimal visibility per N at fixed efficiency")
    sp.add_argument("--eta", type=float, default=0.75)
    sp.add_argument("--max-n", type=int, default=14)
    sp = add("fig2", cmd_fig2, "required efficiency with penalty offset and noise")
    sp.add_argument("--epsilon", type=float, default=1e-5)
    sp.add_argument("--visibilities", default="1,0.99,0.97,0.95,0.9,0.85")
    sp.add_argument("--max-n", type=int, default=14)
    for name, fn, help_ in (("simulate", cmd_simulate, "Monte Carlo lossy experiment"),
                            ("penalty-probe", cmd_penalty_probe, "bias of the empirical penalty")):
        sp = add(name, fn, help_)
        sp.add_argument("--q", type=float, default=1.0)
        sp.add_argument("--eta", type=float, default=1.0)
        sp.add_argument("--v", type=float, default=1.0)
        sp.add_argument("--n-copies", type=int, default=2)
        sp.add_argument("--trials", type=int, default=100_000)
        if name == "simulate":
            sp.add_argument("--kappa", type=_rational, default=Fraction(0))
            sp.add_argument("--dump-counts")
        else:
            sp.add_argument("--repeats", type=int, default=10)
    return p


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args._extra_outputs = {}
    start = time.perf_counter()
    try:
        _require(args.threads >= 1, "--threads must be at least 1")
        text = args.func(args)
    except UsageError as exc:
        print(f"pnpbell {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except CapExceeded as exc:
        print(f"pnpbell {args.command}: cap exceeded: {exc}; raise --cap or reduce --n-copies", file=sys.stderr)
        return 1
    except Exception as exc:  # computational failure
        print(f"pnpbell {args.command}: failed: {exc}", file=sys.stderr)
        return 1
    duration = time.perf_counter() - start

    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    outputs = {args.out or "<stdout>": _sha256(text)}
    outputs.update({path: _sha256(t) for path, t in args._extra_outputs.items()})
    params = {k: v for k, v in vars(args).items()
              if k not in ("func", "_extra_outputs", "out", "manifest", "verbose")}
    manifest = _json({
        "subcommand": args.command,
        "params": params,
        "version": __version__,
        "seed": args.seed,
        "duration_s": duration,
        "outputs": outputs,
    })
    if args.manifest:
        with open(args.manifest, "w") as fh:
            fh.write(manifest)
    else:
        sys.stderr.write(manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
