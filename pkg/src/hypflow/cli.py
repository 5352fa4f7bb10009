"""Command-line entry point.

Every command prints one JSON document on standard output, including a
manifest with the parameters, seed, version and digests of the input
files.  Bulk data (curves, histograms, samples) goes to the CSV file
named by ``--out``.  Exit status: 0 success, 2 a check failed, 1 error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DegenerateInterval, HypflowError, ValidationFailed
from .words import bundled_text, load_presentation
from .automaton import automaton_to_text, load_automaton

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2
BUNDLED = ("octagon", "z4z6")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        sys.exit(EXIT_ERROR)


class _Context:
    def __init__(self, args):
        self.args = args
        self.digests = {}
        self.start = time.time()

    def text(self, arg: str, ext: str) -> tuple:
        stem = arg[: -len(ext)] if arg.endswith(ext) else arg
        if stem in BUNDLED and not Path(arg).is_file():
            text, label = bundled_text(stem + ext), f"bundled:{stem}{ext}"
        else:
            text, label = Path(arg).read_text(), arg
        self.digests[label] = hashlib.sha256(text.encode()).hexdigest()
        return text, stem

    def automaton(self, arg):
        text, stem = self.text(arg, ".aut")
        return load_automaton(text, name=Path(stem).name)

    def presentation(self, arg):
        text, stem = self.text(arg, ".grp")
        return load_presentation(text, name=Path(stem).name)

    def rep(self, arg, u=1.0):
        from .replin import Representation, bundled_rep

        if arg in BUNDLED and not Path(arg).is_file():
            self.digests[f"bundled:{arg}"] = f"u={u!r}" if arg == "z4z6" else "closed-form"
            return bundled_rep(arg, u)
        text = Path(arg).read_text()
        self.digests[arg] = hashlib.sha256(text.encode()).hexdigest()
        return Representation.from_json(text)

    def manifest(self, seed=None) -> dict:
        params = {k: v for k, v in vars(self.args).items() if k not in ("func",)}
        return {
            "command": params.pop("command_path", None),
            "parameters": params,
            "seed": seed,
            "version": __version__,
            "inputs": self.digests,
            "wall_clock_seconds": time.time() - self.start,
        }


def _round(x):
    if isinstance(x, float):
        return x if not math.isfinite(x) else float(f"{x:.12g}")
    if isinstance(x, (np.floating,)):
        return _round(float(x))
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return _round(x.tolist())
    if isinstance(x, dict):
        return {str(k): _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    return x


def _emit(ctx: _Context, result: dict, seed=None) -> None:
    result = dict(result)
    result["manifest"] = ctx.manifest(seed)
    json.dump(_round(result), sys.stdout, indent=2, allow_nan=True)
    sys.stdout.write("\n")


def _write(path, text: str) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _grid(spec: str) -> np.ndarray:
    """``lo:hi:count`` or a comma list."""
    if ":" in spec:
        lo, hi, n = spec.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    return np.array([float(x) for x in spec.split(",")])


def _seed(args) -> int:
    from .montecarlo import seed_from_env

    return seed_from_env(args.seed)


def _component(a):
    from .spectral import maximal_components

    return max(maximal_components(a), key=lambda c: c.size)


# ---------------------------------------------------------------------------
# commands


def cmd_automaton_validate(ctx, args):
    from .automaton import validate

    report = validate(ctx.automaton(args.automaton), ctx.presentation(args.presentation), args.radius)
    _emit(ctx, {"ok": report.ok, **report.as_dict()})
    return EXIT_OK if report.ok else EXIT_FAILED


def cmd_automaton_info(ctx, args):
    from .spectral import scc_decompose

    a = ctx.automaton(args.automaton)
    comps = scc_decompose(a)
    _emit(ctx, {
        "name": a.name, "states": a.state_count, "edges": len(a.edges), "letters": a.letter_count,
        "generators": list(a.generator_names), "initial": a.initial,
        "components": [{"edges": c.size, "states": len(c.states), "period": c.period} for c in comps],
        "path_counts": a.path_counts(args.radius),
    })
    return EXIT_OK


def _emit_automaton(ctx, args, a):
    text = automaton_to_text(a)
    _write(args.out, text)
    out = {"states": a.state_count, "edges": len(a.edges)}
    if not args.out:
        out["automaton"] = text
    _emit(ctx, out)


def cmd_automaton_build_freeproduct(ctx, args):
    from .automaton import build_freeproduct_automaton

    _emit_automaton(ctx, args, build_freeproduct_automaton(args.p, args.q))
    return EXIT_OK


def cmd_automaton_build_conetype(ctx, args):
    from .automaton import build_conetype_automaton

    p = ctx.presentation(args.presentation)
    try:
        a = build_conetype_automaton(p, args.k, check_radius=args.check_radius or None)
    except ValidationFailed as err:
        _emit(ctx, {"ok": False, **err.report.as_dict()})
        return EXIT_FAILED
    _emit_automaton(ctx, args, a)
    return EXIT_OK


def cmd_growth(ctx, args):
    from .spectral import scc_decompose

    a = ctx.automaton(args.automaton)
    comps = scc_decompose(a)
    records = [c.record(i, args.tol, args.max_iters) for i, c in enumerate(comps)]
    rate = max(r["log_eigenvalue"] for r in records)
    _emit(ctx, {"growth_rate": rate, "components": records})
    return EXIT_OK


def cmd_components(ctx, args):
    from .spectral import scc_decompose

    a = ctx.automaton(args.automaton)
    recs = []
    for i, c in enumerate(scc_decompose(a)):
        rec = c.record(i, args.tol, args.max_iters)
        rec["state_ids"] = list(c.states)
        recs.append(rec)
    _emit(ctx, {"components": recs})
    return EXIT_OK


def cmd_parry_sample(ctx, args):
    from .montecarlo import sample_parry_edges
    from .spectral import parry_chain

    seed = _seed(args)
    a = ctx.automaton(args.automaton)
    c = _component(a)
    chain = parry_chain(c, args.tol, args.max_iters)
    paths = sample_parry_edges(chain, args.n, seed, 0, args.samples)
    words = c.labels[paths]
    lines = ["sample,word\n"] + [f"{i}," + " ".join(a.letter_name(int(x)) for x in w) + "\n"
                                 for i, w in enumerate(words)]
    _write(args.out, "".join(lines))
    check = chain.check()
    _emit(ctx, {"samples": args.samples, "n": args.n, "chain": check,
                "first_word": [a.letter_name(int(x)) for x in words[0]]}, seed)
    return EXIT_OK


def _potential(ctx, args, c, which: str, rep_arg, extra):
    from .thermo import LABELS, EdgePotential, extended_length_potential, rep_potential

    if which == "word":
        return EdgePotential.constant(1.0, LABELS)
    if which == "zero":
        return EdgePotential.constant(0.0, LABELS)
    if which == "rep":
        return rep_potential(ctx.rep(rep_arg, args.u), c, args.k)
    if which == "extended":
        if not args.presentation:
            raise HypflowError("--presentation is needed for the extended word metric")
        p = ctx.presentation(args.presentation)
        return extended_length_potential(c, p, [p.parse_word(w) for w in extra], args.k)
    raise HypflowError(f"unknown potential {which!r}")


def cmd_pressure(ctx, args):
    from .thermo import entropy, equilibrium_markov, mean_potential, pressure

    a = ctx.automaton(args.automaton)
    c = _component(a)
    psi = _potential(ctx, args, c, args.potential, args.rep, args.extra_generator)
    terms = [(args.scale, psi)]
    out = {"pressure": pressure(c, terms, args.tol, args.max_iters), "k": args.k, "scale": args.scale}
    if args.equilibrium:
        chain = equilibrium_markov(c, terms, args.tol, args.max_iters)
        out["entropy"], out["mean_potential"] = entropy(chain), mean_potential(chain)
    _emit(ctx, out)
    return EXIT_OK


def _curve(ctx, args):
    from .thermo import manhattan_root, pressure, pressure_curve, rep_potential

    a = ctx.automaton(args.automaton)
    c = _component(a)
    if args.rep_star:
        psi_star = rep_potential(ctx.rep(args.rep_star, args.u_star), c, args.k)
    elif args.extra_generator:
        psi_star = _potential(ctx, args, c, "extended", None, args.extra_generator)
    else:
        psi_star = _potential(ctx, args, c, "word", None, [])
    if args.rep:
        psi = rep_potential(ctx.rep(args.rep, args.u), c, args.k)

        def theta(s):
            return manhattan_root(c, psi, psi_star, s)
        mode = "rep-pair"
    else:
        def theta(s):
            return pressure(c, [(-s, psi_star)], args.tol, args.max_iters)
        mode = "word-metric"
    return pressure_curve(theta, _grid(args.s_grid), args.k), mode


def cmd_manhattan(ctx, args):
    curve, mode = _curve(ctx, args)
    _write(args.out, curve.to_csv())
    out = {"mode": mode, "k_used": curve.k_used, "derivative_at_zero": curve.derivative_at_zero,
           "tau": -curve.derivative_at_zero, "convex": curve.is_convex(), "samples": curve.samples}
    _emit(ctx, out)
    return EXIT_OK


def cmd_rate_function(ctx, args):
    from .thermo import legendre_rate

    curve, mode = _curve(ctx, args)
    rate = legendre_rate(curve, _grid(args.t_grid), on_boundary=args.on_boundary)
    _write(args.out, rate.to_csv())
    _emit(ctx, {"mode": mode, "zero_location": rate.zero_location, "tau": -curve.derivative_at_zero,
                "grid": rate.grid})
    return EXIT_OK


def cmd_rep_check(ctx, args):
    from .replin import displacement_identity_check

    rho = ctx.rep(args.rep, args.u)
    p = ctx.presentation(args.presentation) if args.presentation else None
    out = rho.consistency(p)
    rng = np.random.default_rng(_seed(args))
    words = [tuple(rng.integers(0, rho.letter_count, size=rng.integers(1, args.max_length + 1)).tolist())
             for _ in range(args.words)]
    out["displacement_deviation"] = displacement_identity_check(rho, words)
    out["ok"] = out["inverse_error"] <= 1e-12 and out["relator_error"] <= 1e-9 and \
        out["displacement_deviation"] <= 1e-6
    _emit(ctx, out, _seed(args))
    return EXIT_OK if out["ok"] else EXIT_FAILED


def cmd_rep_domination(ctx, args):
    from .replin import domination_fit

    fit = domination_fit(ctx.rep(args.rep, args.u), ctx.presentation(args.presentation), args.radius)
    _emit(ctx, fit.as_dict())
    return EXIT_OK if fit.passed else EXIT_FAILED


def cmd_rep_multicone(ctx, args):
    from .replin import cones_from_json, cones_to_json, find_multicones, multicone_check

    rho = ctx.rep(args.rep, args.u)
    a = ctx.automaton(args.automaton)
    if args.cones:
        text, _ = ctx.text(args.cones, ".cones.json")
        cones = cones_from_json(text)
    else:
        try:
            cones = find_multicones(rho, a, pad=args.pad)
        except DegenerateInterval as err:
            _emit(ctx, {"pass": False, "min_margin": None, "violations": [], "search_error": str(err)})
            return EXIT_FAILED
    if args.save:
        _write(args.save, cones_to_json(cones) + "\n")
    report = multicone_check(rho, cones, a, args.eps)
    out = report.as_dict()
    out["intervals"] = sum(len(v) for v in cones.values())
    out["violations"] = out["violations"][:20]
    _emit(ctx, out)
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_tau_ps(ctx, args):
    from .montecarlo import estimate_tau_ps
    from .spectral import parry_chain

    seed = _seed(args)
    a = ctx.automaton(args.automaton)
    c = _component(a)
    chain = parry_chain(c, args.tol, args.max_iters)
    est = estimate_tau_ps(ctx.rep(args.rep, args.u), chain, a, c, args.n, args.samples, seed, args.workers)
    _write(args.out, est.to_csv(seed))
    _emit(ctx, est.as_dict(), seed)
    return EXIT_OK


def cmd_tau_harmonic(ctx, args):
    from .montecarlo import estimate_tau_harmonic

    seed = _seed(args)
    est = estimate_tau_harmonic(ctx.rep(args.rep, args.u), ctx.presentation(args.presentation), args.n,
                                args.samples, seed, args.workers)
    _write(args.out, est.to_csv(seed))
    _emit(ctx, est.as_dict(), seed)
    return EXIT_OK


def cmd_v_rho(ctx, args):
    from .montecarlo import estimate_v_rho

    out = estimate_v_rho(ctx.rep(args.rep, args.u), ctx.presentation(args.presentation), args.radius,
                         args.window)
    _emit(ctx, out)
    return EXIT_OK


def cmd_histogram(ctx, args):
    from .montecarlo import angle_histogram
    from .spectral import parry_chain

    seed = _seed(args)
    rho = ctx.rep(args.rep, args.u)
    kw = {"workers": args.workers}
    if args.sampler == "parry":
        a = ctx.automaton(args.automaton)
        c = _component(a)
        kw.update(chain=parry_chain(c, args.tol, args.max_iters), c=c)
    else:
        kw.update(p=ctx.presentation(args.presentation))
    hist = angle_histogram(rho, args.sampler, args.bins, args.n, args.samples, seed, **kw)
    _write(args.out, hist.to_csv())
    _emit(ctx, {"sampler": args.sampler, "total": int(hist.counts.sum()), **hist.as_dict()}, seed)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def _common(p, solver=True):
    if solver:
        p.add_argument("--tol", type=float, default=1e-10, help="Perron solver tolerance")
        p.add_argument("--max-iters", type=int, default=100_000, help="Perron solver sweep limit")
    p.add_argument("--out", help="CSV (or data) output path")


def _sampling(p):
    p.add_argument("--seed", type=int, default=None, help="root seed (default: $HYPFLOW_SEED)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--n", "--steps", dest="n", type=int, default=1000, help="walk length")


def _rep_args(p, required=True, default="octagon"):
    p.add_argument("--rep", required=required and default is None, default=default,
                   help="octagon, z4z6 or a JSON file")
    p.add_argument("--u", type=float, default=1.0, help="parameter of the z4z6 family")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hypflow", description="Growth, pressure and intersection experiments on "
                                                  "automatic structures of hyperbolic groups.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    aut = sub.add_parser("automaton", help="automaton utilities")
    asub = aut.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = asub.add_parser("validate", help="check an automaton against the word problem up to a radius")
    p.add_argument("--automaton", required=True)
    p.add_argument("--presentation", required=True)
    p.add_argument("--radius", type=int, default=8)
    p.set_defaults(func=cmd_automaton_validate)
    p = asub.add_parser("info", help="states, edges and recurrent components")
    p.add_argument("--automaton", required=True)
    p.add_argument("--radius", type=int, default=6, help="path counts up to this length")
    p.set_defaults(func=cmd_automaton_info)
    p = asub.add_parser("build-freeproduct", help="geodesic automaton of Z/p * Z/q")
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_automaton_build_freeproduct)
    p = asub.add_parser("build-conetype", help="cone-type automaton from word differences")
    p.add_argument("--presentation", required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--check-radius", type=int, default=8, help="validation radius, 0 to skip")
    p.add_argument("--out")
    p.set_defaults(func=cmd_automaton_build_conetype)

    p = sub.add_parser("growth", help="exponential growth rate of an automaton")
    p.add_argument("--automaton", required=True)
    _common(p)
    p.set_defaults(func=cmd_growth)

    p = sub.add_parser("components", help="recurrent components with periods and Perron roots")
    p.add_argument("--automaton", required=True)
    _common(p)
    p.set_defaults(func=cmd_components)

    p = sub.add_parser("parry-sample", help="sample label words from the maximal-entropy chain")
    p.add_argument("--automaton", default="octagon")
    _sampling(p)
    _common(p)
    p.set_defaults(func=cmd_parry_sample, samples=10)

    def potential_args(p):
        p.add_argument("--automaton", default="octagon")
        p.add_argument("--presentation", help="needed for --extra-generator")
        p.add_argument("--k", type=int, default=4, help="block length of locally constant potentials")
        p.add_argument("--u", type=float, default=1.0, help="parameter of the z4z6 family for --rep")
        p.add_argument("--extra-generator", action="append", default=[],
                       help="word added (with its inverse) to the generating set, e.g. 's1 s2'")

    p = sub.add_parser("pressure", help="pressure of a locally constant potential")
    potential_args(p)
    p.add_argument("--potential", choices=("zero", "word", "rep", "extended"), default="zero")
    p.add_argument("--rep", default="octagon")
    p.add_argument("--scale", type=float, default=1.0, help="pressure of scale * potential")
    p.add_argument("--equilibrium", action="store_true", help="also report entropy and mean of the equilibrium chain")
    _common(p)
    p.set_defaults(func=cmd_pressure)

    def curve_args(p):
        potential_args(p)
        p.add_argument("--rep", help="second representation; omit for the word metric")
        p.add_argument("--rep-star", help="representation for the psi* length; omit to use --extra-generator")
        p.add_argument("--u-star", type=float, default=1.0)
        p.add_argument("--s-grid", default="-1:1:21", help="lo:hi:count or comma list")
        _common(p)

    p = sub.add_parser("manhattan", help="Manhattan curve samples and -theta'(0)")
    curve_args(p)
    p.set_defaults(func=cmd_manhattan)

    p = sub.add_parser("rate-function", help="Legendre rate function of a Manhattan curve")
    curve_args(p)
    p.add_argument("--t-grid", default="1.0:1.3:31")
    p.add_argument("--on-boundary", choices=("raise", "clip"), default="raise")
    p.set_defaults(func=cmd_rate_function)

    rep = sub.add_parser("rep", help="representation checks")
    rsub = rep.add_subparsers(dest="action", required=True, parser_class=_Parser)
    p = rsub.add_parser("check", help="inverse/relator consistency and the displacement identity")
    _rep_args(p)
    p.add_argument("--presentation")
    p.add_argument("--words", type=int, default=1000)
    p.add_argument("--max-length", type=int, default=50)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_rep_check)
    p = rsub.add_parser("domination", help="fit the singular value gap over a ball")
    _rep_args(p)
    p.add_argument("--presentation", default="octagon")
    p.add_argument("--radius", type=int, default=7)
    p.set_defaults(func=cmd_rep_domination)
    p = rsub.add_parser("multicone", help="verify (or search for) a strictly invariant multicone family")
    _rep_args(p)
    p.add_argument("--automaton", default="octagon")
    p.add_argument("--cones", help="JSON cone family; omit to search")
    p.add_argument("--save", help="write the cone family used to this path")
    p.add_argument("--pad", type=float, default=1e-2)
    p.add_argument("--eps", type=float, default=1e-6)
    p.set_defaults(func=cmd_rep_multicone)

    p = sub.add_parser("tau-ps", help="intersection number along Parry-chain geodesics")
    _rep_args(p)
    p.add_argument("--automaton", default="octagon")
    _sampling(p)
    _common(p)
    p.set_defaults(func=cmd_tau_ps)

    p = sub.add_parser("tau-harmonic", help="intersection number along simple random walks")
    _rep_args(p)
    p.add_argument("--presentation", default="octagon")
    _sampling(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_tau_harmonic)

    p = sub.add_parser("v-rho", help="growth rate of the representation length by counting")
    _rep_args(p)
    p.add_argument("--presentation", default="octagon")
    p.add_argument("--radius", type=int, default=8)
    p.add_argument("--window", type=float, default=1.5)
    p.set_defaults(func=cmd_v_rho)

    p = sub.add_parser("histogram", help="angles of rho(w).0 in the disk")
    _rep_args(p)
    p.add_argument("--sampler", choices=("parry", "srw"), default="parry")
    p.add_argument("--automaton", default="octagon")
    p.add_argument("--presentation", default="octagon")
    p.add_argument("--bins", type=int, default=64)
    _sampling(p)
    _common(p)
    p.set_defaults(func=cmd_histogram)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.command_path = " ".join(x for x in (args.command, getattr(args, "action", None)) if x)
    ctx = _Context(args)
    try:
        return args.func(ctx, args)
    except (HypflowError, OSError, ValueError) as err:
        sys.stderr.write(f"hypflow: error: {type(err).__name__}: {err}\n")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
