"""Command-line entry point: ``tdlab {theory,solve,learn,sweep,stats}``.

Exit codes: 0 success, 2 usage or invalid input, 3 numerical divergence,
4 theory inequality violations. Each run writes ``manifest.json`` (resolved
configuration, package version, seed) into its output directory before any
work starts. The default output directory is ``$TDLAB_OUT`` or ``./runs``,
with one subdirectory per command.
"""

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .agent import SarsaConfig, make_env, make_q, train
from .agent.sarsa import CURVE_COLUMNS
from .errors import Diverged, InsufficientData, InvalidArg, NonPositiveSpectrum, NotSymmetric
from .mdp import Mdp, chain_mdp, random_mdp, sample_instances, symmetric_mdp
from .optim import Hyperparams
from .precond import (
    ANALYSIS_COLUMNS,
    Variant,
    analysis_row,
    analyze,
    build_system,
    is_symmetric,
    iteration_rate,
    jacobi_split,
    optimal_alpha,
    plain_split,
    spectrum_jacobi,
    spectrum_plain,
    theorem1_check,
    theorem2_check,
)
from .solver import ERROR_FLOOR, config_hash, empirical_rate, iterate
from .sweep import SweepSpec, analyze_records, read_records_csv, run_sweep, write_summary_json

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_VIOLATION = 0, 2, 3, 4
OUT_ENV = "TDLAB_OUT"

log = logging.getLogger("tdprop_lab")


class UsageError(Exception):
    pass


def _out_dir(args):
    base = args.out or os.path.join(os.environ.get(OUT_ENV, "runs"), args.command)
    os.makedirs(base, exist_ok=True)
    return base


def write_manifest(out, command, config, seed):
    manifest = {"command": command, "config": config, "seed": seed, "version": __version__}
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_table(path_stem, columns, rows, fmt):
    path = f"{path_stem}.{fmt}"
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump([{c: row.get(c, "") for c in columns} for row in rows], fh, indent=1)
            fh.write("\n")
    else:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return path


def _int_range(text):
    lo, sep, hi = text.partition("-")
    try:
        return (int(lo), int(hi)) if sep else int(lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or LO-HI, got {text!r}") from None


def _float_list(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# ---------------------------------------------------------------- theory

def cmd_theory(args):
    variants = [Variant.parse(v) for v in (args.variant or ["td0"])]
    for g in args.gamma:
        if not 0.0 < g < 1.0:
            raise UsageError(f"gamma must lie in (0, 1), got {g}")
    out = _out_dir(args)
    config = {"n_states": args.n_states, "instances": args.instances, "gamma": args.gamma,
              "variants": [str(v) for v in variants], "symmetric": args.symmetric}
    write_manifest(out, "theory", config, args.seed)
    rows, violations = [], 0
    for inst_seed, m in sample_instances(args.seed, args.instances, args.n_states, args.gamma, args.symmetric):
        for v in variants:
            t1 = theorem1_check(m, v)
            a = analyze(m, v)
            t2 = theorem2_check(m, v).holds if args.symmetric else None
            violations += (not t1.holds) + (t2 is False)
            rows.append(analysis_row(v, m.gamma, m.n_states, inst_seed, a, t1.holds, t2))
    path = write_table(os.path.join(out, "theory"), ANALYSIS_COLUMNS, rows, args.format)
    print(f"{len(rows)} rows written to {path}")
    if violations:
        print(f"{violations} inequality violation(s)")
        return EXIT_VIOLATION
    print("all inequalities held")
    return EXIT_OK


# ---------------------------------------------------------------- solve

FIXTURES = {
    "two_state": ([[0.9, 0.1], [0.2, 0.8]], [1.0, 0.0]),
    "two_state_sym": ([[0.6, 0.4], [0.4, 0.6]], [1.0, 0.0]),
}


def make_mdp(generator, gamma):
    """``two_state``, ``two_state_sym``, ``random:SEED:N[:BRANCH]``, ``symmetric:SEED:N`` or ``chain:N:PL:PR``."""
    name, *parts = generator.split(":")
    try:
        if name in FIXTURES and not parts:
            p, r = FIXTURES[name]
            return Mdp(p, r, gamma)
        if name == "random" and len(parts) in (2, 3):
            seed, n = int(parts[0]), int(parts[1])
            branching = int(parts[2]) if len(parts) == 3 else n
            return random_mdp(seed, n, branching, gamma)
        if name == "symmetric" and len(parts) == 2:
            return symmetric_mdp(int(parts[0]), int(parts[1]), gamma)
        if name == "chain" and len(parts) == 3:
            return chain_mdp(int(parts[0]), float(parts[1]), float(parts[2]), gamma)
    except ValueError as exc:
        raise UsageError(f"bad generator {generator!r}: {exc}") from None
    raise UsageError(f"unknown generator {generator!r}")


def cmd_solve(args):
    if args.mdp:
        with open(args.mdp) as fh:
            m = Mdp.from_json(fh.read())
    else:
        m = make_mdp(args.generator, args.gamma)
    variant = Variant.parse(args.variant)
    sys_ = build_system(m, variant)
    split = jacobi_split(sys_) if args.splitting == "jacobi" else plain_split(sys_)
    if args.alpha == "optimal":
        if not is_symmetric(sys_.h):
            raise UsageError("alpha=optimal needs a symmetric system (real spectrum); pass a number instead")
        eigs = spectrum_jacobi(sys_) if args.splitting == "jacobi" else spectrum_plain(sys_)
        try:
            alpha = optimal_alpha(eigs).alpha_star
        except NonPositiveSpectrum as exc:
            raise UsageError(str(exc)) from None
    else:
        try:
            alpha = float(args.alpha)
        except ValueError:
            raise UsageError(f"alpha must be a number or 'optimal', got {args.alpha!r}") from None
        if not alpha >= 0:
            raise UsageError("alpha must be nonnegative")
    out = _out_dir(args)
    config = {"mdp": args.mdp, "generator": None if args.mdp else args.generator, "gamma": m.gamma,
              "variant": str(variant), "splitting": args.splitting, "alpha": alpha,
              "iters": args.iters, "tol": args.tol}
    write_manifest(out, "solve", config, None)
    predicted = iteration_rate(split, alpha)
    stem = os.path.join(out, f"trace_{config_hash(config)}")
    try:
        trace = iterate(sys_, split, alpha, max_iters=args.iters, tol=args.tol)
    except Diverged as exc:
        trace = exc.trace
        _write_trace(stem, trace, args.format)
        print(f"diverged: {exc}; predicted rate {predicted:.6g}")
        return EXIT_DIVERGED
    path = _write_trace(stem, trace, args.format)
    if alpha == 0:
        print("alpha=0: rho=1, the iterate does not move")
    emp = _printed_rate(trace)
    print(f"alpha {alpha:.6g}  empirical rate {emp}  predicted rate {predicted:.6g}")
    print(f"{trace.iterations} iterations, final error {trace.errors[-1]:.3e}; trace in {path}")
    return EXIT_OK


def _printed_rate(trace):
    # shorten the burn-in when the error reaches the float floor early
    errs = np.asarray(trace.errors)
    floor = np.flatnonzero(errs <= ERROR_FLOOR)
    end = int(floor[0]) - 1 if floor.size else len(errs) - 1
    for burn_in in (50, max(0, end - 10 - end // 2), 0):
        try:
            return f"{empirical_rate(trace, burn_in=burn_in):.6g}"
        except InsufficientData:
            continue
    return "n/a"


def _write_trace(stem, trace, fmt):
    rows = [{"iteration": i, "error_inf_norm": repr(float(e))} for i, e in enumerate(trace.errors)]
    return write_table(stem, ["iteration", "error_inf_norm"], rows, fmt)


# ---------------------------------------------------------------- learn

def cmd_learn(args):
    env = make_env(args.env)
    clip = None if args.clip.lower() == "none" else float(args.clip)
    hp = Hyperparams(alpha=args.lr, beta1=args.beta1, beta2=args.beta2, epsilon=args.eps,
                     grad_clip_norm=clip, bias_correction=args.bias_correction)
    cfg = SarsaConfig(n=args.n, gamma=args.discount, epsilon_greedy=args.epsilon_greedy,
                      actors=args.actors, total_steps=args.steps, optimizer=args.optimizer,
                      hp=hp, seed=args.seed, reward_clip=args.reward_clip,
                      all_offsets=not args.offset0_only, log_every=args.log_every)
    q = make_q(args.q, env, seed=args.seed, hidden_dim=args.hidden)
    out = _out_dir(args)
    config = {"env": args.env, "q": args.q, "hidden": args.hidden, "optimizer": args.optimizer,
              "hyperparams": vars(hp).copy(), "n": cfg.n, "gamma": cfg.gamma,
              "epsilon_greedy": cfg.epsilon_greedy, "actors": cfg.actors, "steps": cfg.total_steps,
              "reward_clip": cfg.reward_clip, "all_offsets": cfg.all_offsets, "log_every": cfg.log_every}
    write_manifest(out, "learn", config, args.seed)
    result = train(env, q, cfg)
    rows = [{k: ("" if isinstance(v, float) and np.isnan(v) else (repr(v) if isinstance(v, float) else v))
             for k, v in row.items()} for row in result.curve]
    path = write_table(os.path.join(out, "curve"), CURVE_COLUMNS, rows, args.format)
    print(f"{result.steps} steps, {len(result.episode_returns)} episodes, "
          f"average return {result.avg_return:.4f}; curve in {path}")
    if result.diverged:
        print("parameters became non-finite; run stopped")
        return EXIT_DIVERGED
    return EXIT_OK


# ---------------------------------------------------------------- sweep / stats

def cmd_sweep(args):
    try:
        with open(args.spec) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read spec {args.spec}: {exc}") from None
    if not isinstance(raw, dict):
        raise UsageError("spec must be a JSON object")
    if args.workers is not None:
        raw["workers"] = args.workers
    try:
        spec = SweepSpec.from_dict(raw)
    except TypeError as exc:
        raise UsageError(f"invalid sweep spec: {exc}") from None
    out = _out_dir(args)
    resolved = spec.to_dict()
    resolved.pop("workers")  # does not affect results
    write_manifest(out, "sweep", resolved, spec.sample_seed)

    def progress(done, total, rec):
        log.info("%d/%d %s lr=%.3g avg=%.4f%s", done, total, rec.kind, rec.lr, rec.avg_return,
                 " diverged" if rec.diverged else "")

    records, summary = run_sweep(spec, out, progress)
    print(f"{len(records)} records; summary in {os.path.join(out, 'summary.json')}")
    _print_ci(summary)
    return EXIT_OK


def _print_ci(summary):
    for subset, tables in summary["ci"].items():
        for k, e in sorted(tables["avg_return"].items()):
            print(f"  {subset:>4} {k:>6}: mean {e['mean']} CI [{e['lo']}, {e['hi']}] (n={e['n']})")
    for entry in summary["pairwise"].get("top", {}).get("avg_return", []):
        if "p" in entry:
            print(f"  top {entry['a']} vs {entry['b']}: p={entry['p']:.4g} {entry['annotation']}")


def _parse_pairs(text):
    pairs = []
    for item in text.split(","):
        a, sep, b = item.partition(":")
        if not sep or not a or not b:
            raise UsageError(f"bad pair {item!r}; expected KIND:KIND")
        pairs.append((a, b))
    return pairs


def cmd_stats(args):
    records = read_records_csv(args.records)
    if not records:
        raise UsageError("no records")
    pairs = _parse_pairs(args.pairs) if args.pairs else None
    if not 0.0 < args.top_percentile <= 1.0:
        raise UsageError("--top-percentile must lie in (0, 1]")
    out = _out_dir(args)
    config = {"records": os.path.abspath(args.records), "top_percentile": args.top_percentile,
              "pairs": pairs, "bootstrap": args.bootstrap}
    write_manifest(out, "stats", config, args.seed)
    summary = analyze_records(records, top_q=args.top_percentile, pairs=pairs,
                              n_resamples=args.bootstrap, seed=args.seed)
    write_summary_json(os.path.join(out, "summary.json"), summary)
    _print_ci(summary)
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser():
    p = argparse.ArgumentParser(prog="tdlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<command> or runs/<command>)")
        sp.add_argument("--format", choices=["csv", "json"], default="csv")
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    t = sub.add_parser("theory", help="check the splitting inequalities on random MDPs")
    common(t)
    t.add_argument("--n-states", type=_int_range, default=(3, 20), help="N or LO-HI (default 3-20)")
    t.add_argument("--instances", type=int, default=100)
    t.add_argument("--gamma", type=_float_list, default=[0.5, 0.9, 0.99], help="comma-separated, cycled")
    t.add_argument("--variant", action="append", help="td0, nstep:N or lambda:L (repeatable)")
    t.add_argument("--symmetric", action="store_true", help="symmetric MDPs; adds the condition-number check")
    t.set_defaults(func=cmd_theory)

    s = sub.add_parser("solve", help="run preconditioned value iteration")
    common(s, seed=False)
    src = s.add_mutually_exclusive_group()
    src.add_argument("--mdp", help="MDP JSON file")
    src.add_argument("--generator", default="two_state",
                     help="two_state, two_state_sym, random:SEED:N[:B], symmetric:SEED:N, chain:N:PL:PR")
    s.add_argument("--gamma", type=float, default=0.9)
    s.add_argument("--variant", default="td0")
    s.add_argument("--splitting", choices=["plain", "jacobi"], default="jacobi")
    s.add_argument("--alpha", default="1.0", help="step size or 'optimal'")
    s.add_argument("--iters", type=int, default=500)
    s.add_argument("--tol", type=float, default=0.0)
    s.set_defaults(func=cmd_solve)

    lr = sub.add_parser("learn", help="train n-step Expected SARSA")
    common(lr)
    lr.add_argument("--env", default="gridworld")
    lr.add_argument("--q", choices=["tabular", "linear", "mlp"], default="tabular")
    lr.add_argument("--hidden", type=int, default=16)
    lr.add_argument("--optimizer", default="sgd")
    lr.add_argument("--lr", type=float, default=0.1)
    lr.add_argument("--beta1", type=float, default=0.0)
    lr.add_argument("--beta2", type=float, default=0.99)
    lr.add_argument("--eps", type=float, default=1e-3, help="optimizer damping epsilon")
    lr.add_argument("--bias-correction", action="store_true")
    lr.add_argument("--clip", default="0.5", help="global-norm clip or 'none'")
    lr.add_argument("--epsilon-greedy", type=float, default=0.01)
    lr.add_argument("--discount", type=float, default=0.99)
    lr.add_argument("--n", type=int, default=5)
    lr.add_argument("--actors", type=int, default=16)
    lr.add_argument("--steps", type=int, default=200_000)
    lr.add_argument("--log-every", type=int, default=1000)
    lr.add_argument("--reward-clip", action="store_true")
    lr.add_argument("--offset0-only", action="store_true", help="use only the full-length error per window")
    lr.set_defaults(func=cmd_learn)

    sw = sub.add_parser("sweep", help="random hyperparameter sweep from a JSON spec")
    sw.add_argument("spec")
    sw.add_argument("--out")
    sw.add_argument("--workers", type=int)
    sw.set_defaults(func=cmd_sweep)

    st = sub.add_parser("stats", help="analyse a records.csv")
    st.add_argument("records")
    st.add_argument("--out")
    st.add_argument("--top-percentile", type=float, default=0.25)
    st.add_argument("--pairs", help="e.g. tdprop:sgd,adam:sgd (default: all pairs)")
    st.add_argument("--bootstrap", type=int, default=10_000)
    st.add_argument("--seed", type=int, default=0)
    st.set_defaults(func=cmd_stats)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, InvalidArg, NotSymmetric, FileNotFoundError) as exc:
        print(f"tdlab {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
