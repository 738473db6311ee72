"""Random hyperparameter search over optimizer kinds and the analysis of its records."""

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from ..agent import SarsaConfig, make_env, make_q, train, write_curve_csv
from ..errors import DegenerateSample, InsufficientData, InvalidArg, SingularDesign
from ..optim import KINDS, Hyperparams
from ..solver import config_hash
from . import stats

log = logging.getLogger(__name__)

# Ranges exactly as printed; "literal" evaluates 10e-8 as 1e-7, "intended" as 1e-8.
RANGE_TABLES = {
    "literal": {
        "tdprop": {"lr": (10e-8, 10e-3), "beta2": (0.0, 1.0), "epsilon": (10e-8, 10e-1)},
        "adam": {"lr": (10e-8, 10e-3), "beta2": (0.0, 1.0), "epsilon": (10e-8, 10e-1)},
        "sgd": {"lr": (10e-4, 10e-0)},
    },
    "intended": {
        "tdprop": {"lr": (1e-8, 1e-3), "beta2": (0.0, 1.0), "epsilon": (1e-8, 1e-1)},
        "adam": {"lr": (1e-8, 1e-3), "beta2": (0.0, 1.0), "epsilon": (1e-8, 1e-1)},
        "sgd": {"lr": (1e-4, 1.0)},
    },
}
HYPER_KEYS = ("lr", "beta2", "epsilon")
RECORD_COLUMNS = ["kind", "config_id", "lr", "beta2", "epsilon", "seed",
                  "avg_return", "asymptotic_return", "diverged"]
METRICS = ("avg_return", "asymptotic_return")
TEMPLATE_KEYS = {"n", "gamma", "epsilon_greedy", "actors", "total_steps",
                 "reward_clip", "all_offsets", "log_every", "eval_window"}


@dataclass
class SweepSpec:
    kinds: tuple = KINDS
    ranges: dict = None
    range_reading: str = "literal"
    samples_per_kind: int = 50
    seeds: tuple = (0,)
    sample_seed: int = 0
    env: str = "gridworld"
    qfunction: str = "tabular"
    hidden_dim: int = 16
    template: dict = field(default_factory=dict)
    fixed: dict = field(default_factory=dict)
    beta1: float = 0.0
    grad_clip_norm: float | None = 0.5
    top_percentile: float = 0.25
    bootstrap_resamples: int = 10_000
    analysis_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        self.kinds = tuple(self.kinds)
        self.seeds = tuple(int(s) for s in self.seeds)
        problems = validate_spec_fields(self)
        if problems:
            raise InvalidArg("invalid sweep spec: " + "; ".join(problems))
        base = RANGE_TABLES[self.range_reading]
        resolved = {}
        for kind in self.kinds:
            r = dict(base[kind])
            for key, bounds in ((self.ranges or {}).get(kind) or {}).items():
                r[key] = tuple(float(b) for b in bounds)
            resolved[kind] = r
        self.ranges = resolved

    def sarsa_template(self):
        return SarsaConfig(**self.template)

    def to_dict(self):
        d = asdict(self)
        d["kinds"] = list(self.kinds)
        d["seeds"] = list(self.seeds)
        d["ranges"] = {k: {h: list(b) for h, b in r.items()} for k, r in self.ranges.items()}
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise InvalidArg("invalid sweep spec: unknown field(s) " + ", ".join(unknown))
        return cls(**d)


def validate_spec_fields(spec):
    """Every problem with the spec, as a list of human-readable strings."""
    problems = []
    if not spec.kinds or any(k not in KINDS for k in spec.kinds):
        problems.append(f"kinds: must be a nonempty subset of {list(KINDS)}")
    if spec.range_reading not in RANGE_TABLES:
        problems.append("range_reading: must be 'literal' or 'intended'")
    if not isinstance(spec.samples_per_kind, int) or spec.samples_per_kind < 1:
        problems.append("samples_per_kind: must be a positive integer")
    if not spec.seeds:
        problems.append("seeds: need at least one seed")
    if not 0.0 < spec.top_percentile <= 1.0:
        problems.append("top_percentile: must lie in (0, 1]")
    if spec.bootstrap_resamples < 1:
        problems.append("bootstrap_resamples: must be >= 1")
    if spec.workers < 1:
        problems.append("workers: must be >= 1")
    for kind, r in (spec.ranges or {}).items():
        if kind not in KINDS:
            problems.append(f"ranges.{kind}: unknown optimizer kind")
            continue
        for key, bounds in (r or {}).items():
            if key not in HYPER_KEYS:
                problems.append(f"ranges.{kind}.{key}: unknown hyperparameter")
                continue
            try:
                lo, hi = (float(b) for b in bounds)
            except (TypeError, ValueError):
                problems.append(f"ranges.{kind}.{key}: expected [lo, hi]")
                continue
            if not lo < hi:
                problems.append(f"ranges.{kind}.{key}: need lo < hi, got [{lo}, {hi}]")
            elif key == "beta2" and (lo < 0 or hi > 1):
                problems.append(f"ranges.{kind}.beta2: must lie within [0, 1]")
            elif lo < 0:
                problems.append(f"ranges.{kind}.{key}: must be nonnegative")
    for kind, fixed in (spec.fixed or {}).items():
        if kind not in KINDS:
            problems.append(f"fixed.{kind}: unknown optimizer kind")
        elif any(k not in HYPER_KEYS for k in fixed):
            problems.append(f"fixed.{kind}: keys must be among {list(HYPER_KEYS)}")
    bad = sorted(set(spec.template) - TEMPLATE_KEYS)
    if bad:
        problems.append("template: unsupported key(s) " + ", ".join(bad))
    else:
        try:
            SarsaConfig(**spec.template)
        except (InvalidArg, TypeError) as exc:
            problems.append(f"template: {exc}")
    try:
        make_env(spec.env)
    except InvalidArg as exc:
        problems.append(f"env: {exc}")
    if spec.qfunction not in ("tabular", "linear", "mlp"):
        problems.append("qfunction: must be tabular, linear or mlp")
    return problems


@dataclass(frozen=True)
class SampledConfig:
    kind: str
    index: int
    lr: float
    beta2: float | None = None
    epsilon: float | None = None

    @property
    def config_id(self):
        return config_hash({"kind": self.kind, "index": self.index, "lr": self.lr,
                            "beta2": self.beta2, "epsilon": self.epsilon})

    def hyperparams(self, spec):
        extra = {}
        if self.beta2 is not None:
            extra["beta2"] = self.beta2
        if self.epsilon is not None:
            extra["epsilon"] = self.epsilon
        return Hyperparams(alpha=self.lr, beta1=spec.beta1, grad_clip_norm=spec.grad_clip_norm, **extra)


def sample_configs(spec, seed=None):
    """Uniform draws on each kind's ranges; fixed values replace draws but keep the stream aligned."""
    rng = np.random.default_rng(spec.sample_seed if seed is None else seed)
    out = []
    for kind in spec.kinds:
        ranges = spec.ranges[kind]
        fixed = (spec.fixed or {}).get(kind, {})
        for i in range(spec.samples_per_kind):
            draw = {}
            for key in HYPER_KEYS:
                if key in ranges:
                    lo, hi = ranges[key]
                    draw[key] = float(rng.uniform(lo, hi))
            for key, value in fixed.items():
                draw[key] = float(value)
            out.append(SampledConfig(kind, i, draw["lr"], draw.get("beta2"), draw.get("epsilon")))
    return out


@dataclass
class SweepRecord:
    kind: str
    config_id: str
    lr: float
    beta2: float | None
    epsilon: float | None
    seed: int
    avg_return: float
    asymptotic_return: float
    diverged: bool

    def sort_key(self):
        return (self.kind, self.seed, self.config_id)


def _run_one(args):
    spec, cfg, seed, curve_dir = args
    env = make_env(spec.env)
    q = make_q(spec.qfunction, env, seed=seed, hidden_dim=spec.hidden_dim)
    sarsa = replace(spec.sarsa_template(), optimizer=cfg.kind, hp=cfg.hyperparams(spec), seed=seed)
    result = train(env, q, sarsa)
    if curve_dir is not None:
        write_curve_csv(os.path.join(curve_dir, f"{cfg.kind}_{cfg.config_id}_seed{seed}.csv"), result.curve)
    return SweepRecord(cfg.kind, cfg.config_id, cfg.lr, cfg.beta2, cfg.epsilon, seed,
                       result.avg_return, result.asymptotic_return(sarsa.eval_window), result.diverged)


def run_sweep(spec, out_dir=None, progress=None):
    """Train every sampled config for every seed, then analyse.

    Returns ``(records, summary)``. With ``out_dir`` it also writes
    records.csv, summary.json and one curve CSV per run under curves/.
    """
    configs = sample_configs(spec)
    curve_dir = None
    if out_dir is not None:
        curve_dir = os.path.join(out_dir, "curves")
        os.makedirs(curve_dir, exist_ok=True)
    jobs = [(spec, cfg, seed, curve_dir) for cfg in configs for seed in spec.seeds]
    records = []
    if spec.workers > 1:
        with ProcessPoolExecutor(spec.workers) as pool:
            for rec in pool.map(_run_one, jobs):
                records.append(rec)
                if progress:
                    progress(len(records), len(jobs), rec)
    else:
        for job in jobs:
            records.append(_run_one(job))
            if progress:
                progress(len(records), len(jobs), records[-1])
    records.sort(key=SweepRecord.sort_key)
    summary = analyze_records(records, top_q=spec.top_percentile,
                              n_resamples=spec.bootstrap_resamples, seed=spec.analysis_seed)
    summary["env"] = spec.env
    if out_dir is not None:
        write_records_csv(os.path.join(out_dir, "records.csv"), records)
        write_summary_json(os.path.join(out_dir, "summary.json"), summary)
    return records, summary


def _fmt(v):
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_records_csv(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_COLUMNS)
        for rec in sorted(records, key=SweepRecord.sort_key):
            w.writerow([_fmt(getattr(rec, c)) for c in RECORD_COLUMNS])


def read_records_csv(path):
    """Parse records.csv; raises InvalidArg naming any missing columns."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in RECORD_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise InvalidArg(f"{path}: missing column(s) " + ", ".join(missing))

        def num(s):
            return None if s == "" else float(s)

        out = []
        for row in reader:
            out.append(SweepRecord(
                row["kind"], row["config_id"], num(row["lr"]), num(row["beta2"]), num(row["epsilon"]),
                int(row["seed"]), float(row["avg_return"] or "nan"),
                float(row["asymptotic_return"] or "nan"), row["diverged"].strip().lower() == "true"))
    out.sort(key=SweepRecord.sort_key)
    return out


def _clean(obj):
    # JSON has no NaN/inf; emit null instead
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.floating):
        return _clean(float(obj))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_summary_json(path, summary):
    with open(path, "w") as fh:
        json.dump(_clean(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")


def normalize_returns(records, metrics=METRICS):
    """Divide each metric by its maximum over every record (all kinds together).

    Returns ``(normalized_records, warnings)``; a metric whose maximum is not
    positive is left unnormalized and named in ``warnings``.
    """
    out = [replace(r) for r in records]
    warnings = []
    for m in metrics:
        values = np.array([getattr(r, m) for r in records], dtype=np.float64)
        finite = values[np.isfinite(values)]
        if finite.size == 0:
            warnings.append(f"{m}: no finite values")
            continue
        scaled, ok = stats.normalize_by_max(values)
        if not ok:
            warnings.append(f"{m}: maximum {finite.max():.6g} is not positive; left unnormalized")
            continue
        for r, v in zip(out, scaled):
            setattr(r, m, float(v))
    return out, warnings


def _ci_entry(values, n_resamples, seed):
    entry = {"n": int(values.size), "mean": float(values.mean()) if values.size else None}
    if values.size >= 2:
        ci = stats.bootstrap_ci(values, n_resamples=n_resamples, seed=seed)
        entry.update(lo=ci.lo, hi=ci.hi)
    else:
        entry.update(lo=entry["mean"], hi=entry["mean"])
    return entry


def _welch_entry(a, b, va, vb):
    try:
        w = stats.welch_t_test(va, vb)
    except DegenerateSample as exc:
        return {"a": a, "b": b, "error": str(exc)}
    return {"a": a, "b": b, "t": w.t, "dof": w.dof, "p": w.p, "annotation": w.annotation}


def _regression(recs, kind):
    covs = ["lr"] if kind == "sgd" else ["lr", "epsilon", "beta2"]
    data = {c: np.array([getattr(r, c) for r in recs], dtype=np.float64) for c in covs}
    out = {}
    for m in METRICS:
        data[m] = np.array([getattr(r, m) for r in recs], dtype=np.float64)
        try:
            res = stats.ols_regression(data, m, covs, standardize=True, interactions=True)
            out[m] = res.table()
        except (InsufficientData, SingularDesign) as exc:
            out[m] = {"error": str(exc)}
    return out


def analyze_records(records, top_q=0.25, pairs=None, n_resamples=10_000, seed=0):
    """Normalized CI tables (all and top-q), pairwise Welch tests and per-kind OLS.

    Runs with a non-finite metric (e.g. diverged before any episode ended)
    are counted but excluded from the statistics.
    """
    usable = [r for r in records if all(np.isfinite(getattr(r, m)) for m in METRICS)]
    normed, warnings = normalize_returns(usable)
    kinds = sorted({r.kind for r in records})
    by_kind = {k: [r for r in normed if r.kind == k] for k in kinds}
    subsets = {"all": by_kind, "top": {}}
    for k, recs in by_kind.items():
        if recs:
            idx = stats.top_percentile([r.avg_return for r in recs], top_q)
            subsets["top"][k] = [recs[i] for i in idx]
        else:
            subsets["top"][k] = []
    if pairs is None:
        pairs = [(a, b) for i, a in enumerate(kinds) for b in kinds[i + 1:]]
    summary = {
        "top_percentile": top_q,
        "bootstrap_resamples": n_resamples,
        "counts": {k: {"records": sum(r.kind == k for r in records),
                       "diverged": sum(r.kind == k and r.diverged for r in records),
                       "analysed": len(by_kind[k])} for k in kinds},
        "normalization_warnings": warnings,
        "ci": {},
        "pairwise": {},
        "regressions": {k: _regression(by_kind[k], k) for k in kinds},
    }
    for name, groups in subsets.items():
        summary["ci"][name] = {
            m: {k: _ci_entry(np.array([getattr(r, m) for r in recs]), n_resamples, seed)
                for k, recs in groups.items()}
            for m in METRICS
        }
        summary["pairwise"][name] = {
            m: [_welch_entry(a, b, [getattr(r, m) for r in groups.get(a, [])],
                             [getattr(r, m) for r in groups.get(b, [])]) for a, b in pairs]
            for m in METRICS
        }
    summary["dominated"] = dominated_kinds(summary)
    return summary


def dominated_kinds(summary, subset="top", metric="avg_return"):
    """Kinds whose CI lies strictly below the CI of every other kind."""
    table = summary["ci"][subset][metric]
    out = []
    for k, e in table.items():
        others = [o for o in table if o != k]
        if others and e["hi"] is not None and all(
                table[o]["lo"] is not None and e["hi"] < table[o]["lo"] for o in others):
            out.append(k)
    return out
