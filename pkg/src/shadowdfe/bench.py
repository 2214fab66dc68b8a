"""Matched-budget MSE comparison of the tailored, baseline and vanilla estimators.

For every fidelity on a grid and every trial a random state with that
fidelity is generated; the baseline runs first and its shot count is then
given to the tailored and vanilla estimators. Streams are keyed by
``(master seed, grid index, trial index, method)``.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, fields
from pathlib import Path

from .baseline import baseline_config, baseline_estimate, vanilla_shadow_estimate
from .measurement import MeasuredState
from .rng import derive_seed, make_rng
from .shadow import ErrorBudget, estimate, plan
from .states import Basis, TargetState, fidelity, random_state_with_fidelity, target_k

METHODS = ("shadow", "baseline", "vanilla")
_METHOD_STREAM = {"state": 0, "baseline": 1, "shadow": 2, "vanilla": 3}
CSV_COLUMNS = ("target", "n", "k", "true_fidelity", "method", "measurements", "estimate", "sq_error", "seed")
Z95 = 1.959963984540054


class BenchError(RuntimeError):
    pass


@dataclass(frozen=True)
class BenchConfig:
    target: TargetState
    budget: ErrorBudget
    grid: tuple = (0.0, 1.0, 0.01)
    trials: int = 1
    seed: int = 0
    methods: tuple = METHODS
    counts: str = "equation"
    threads: int = 1

    def __post_init__(self):
        start, stop, step = self.grid
        if not (0.0 <= start <= stop <= 1.0) or step <= 0:
            raise ValueError(f"fidelity grid {self.grid} must lie in [0, 1] with a positive step")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise ValueError(f"methods must be a non-empty subset of {METHODS}")

    def fidelities(self) -> list[float]:
        start, stop, step = self.grid
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 12) for i in range(count)]


@dataclass(frozen=True)
class BenchRecord:
    target: str
    n: int
    k: int | None
    true_fidelity: float
    method: str
    measurements: int
    estimate: float
    sq_error: float
    seed: int


def target_descriptor(t: TargetState) -> str:
    if isinstance(t, Basis):
        return "basis:" + "".join(map(str, t.b))
    return t.label


def _run_item(cfg: BenchConfig, g: int, f: float, trial: int) -> list[BenchRecord]:
    target = cfg.target
    name, n, k = target_descriptor(target), target.n, target_k(target)
    rho = random_state_with_fidelity(target, f, derive_seed(cfg.seed, g, trial, _METHOD_STREAM["state"]))
    true_f = fidelity(rho, target)
    state = MeasuredState(rho)
    out = []

    def record(method, measurements, value, seed):
        out.append(BenchRecord(name, n, k, true_f, method, int(measurements), float(value), (value - true_f) ** 2, seed))

    budget_shots = None
    if "baseline" in cfg.methods:
        seed = derive_seed(cfg.seed, g, trial, _METHOD_STREAM["baseline"])
        res = baseline_estimate(state, target, baseline_config(target, cfg.budget), make_rng(seed))
        budget_shots = res.measurements_used
        record("baseline", res.measurements_used, res.estimate, seed)
    protocol = plan(target, cfg.budget, cfg.counts)
    shots = max(1, protocol.N if budget_shots is None else budget_shots)
    if "shadow" in cfg.methods:
        seed = derive_seed(cfg.seed, g, trial, _METHOD_STREAM["shadow"])
        res = estimate(state, protocol, seed, n_samples=shots)
        record("shadow", shots, res.estimate, seed)
    if "vanilla" in cfg.methods:
        seed = derive_seed(cfg.seed, g, trial, _METHOD_STREAM["vanilla"])
        value = vanilla_shadow_estimate(state, target, shots, make_rng(seed))
        record("vanilla", shots, value, seed)
    return out


def run_bench(cfg: BenchConfig, progress=None) -> list[BenchRecord]:
    """All records for one target, ordered by (fidelity, trial, method).

    ``progress`` is called as ``progress(done, total)`` after each work item.
    """
    items = [(g, f, t) for g, f in enumerate(cfg.fidelities()) for t in range(cfg.trials)]

    def work(item):
        g, f, t = item
        try:
            return _run_item(cfg, g, f, t)
        except Exception as exc:
            raise BenchError(f"fidelity {f} (grid index {g}), trial {t}: {exc}") from exc

    results = []
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            for i, recs in enumerate(pool.map(work, items)):
                results.append(recs)
                if progress:
                    progress(i + 1, len(items))
    else:
        for i, item in enumerate(items):
            results.append(work(item))
            if progress:
                progress(i + 1, len(items))
    order = {m: i for i, m in enumerate(METHODS)}
    flat = [r for recs in results for r in recs]
    keyed = [(g, t, order[r.method]) for (g, _, t), recs in zip(items, results) for r in recs]
    return [r for _, r in sorted(zip(keyed, flat), key=lambda p: p[0])]


# ---------------------------------------------------------------- aggregation


@dataclass(frozen=True)
class GroupSummary:
    target: str
    n: int
    k: int | None
    method: str
    mse: float
    half_width: float
    count: int

    @property
    def ci95(self) -> tuple[float, float]:
        return (self.mse - self.half_width, self.mse + self.half_width)

    def to_json(self) -> dict:
        return {
            "target": self.target,
            "n": self.n,
            "k": self.k,
            "method": self.method,
            "mse": self.mse,
            "ci95": list(self.ci95),
            "half_width": self.half_width,
            "count": self.count,
        }


def mean_ci(values) -> tuple[float, float]:
    """Sample mean and normal-approximation 95% half-width.

    Sums use ``math.fsum`` so the result does not depend on value order.
    """
    vals = [float(v) for v in values]
    t = len(vals)
    if t == 0:
        raise ValueError("empty group")
    mean = math.fsum(vals) / t
    if t == 1:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in vals) / (t - 1)
    return mean, Z95 * math.sqrt(var / t)


def _group(records, key):
    groups: dict = {}
    for r in records:
        groups.setdefault(key(r), []).append(r.sq_error)
    if not groups:
        raise ValueError("no records to aggregate")
    return groups


def _sort_key(key):
    target, n, k, *rest = key
    return (target, n, -1 if k is None else k, *rest)


def aggregate(records) -> list[GroupSummary]:
    """MSE and 95% CI per (target, n, k, method), pooled over the fidelity grid."""
    groups = _group(records, lambda r: (r.target, r.n, r.k, r.method))
    out = []
    for key in sorted(groups, key=_sort_key):
        mse, half = mean_ci(groups[key])
        out.append(GroupSummary(*key, mse=mse, half_width=half, count=len(groups[key])))
    return out


def aggregate_by_fidelity(records) -> list[dict]:
    groups = _group(records, lambda r: (r.target, r.n, r.k, r.method, round(r.true_fidelity, 6)))
    rows = []
    for key in sorted(groups, key=_sort_key):
        mse, half = mean_ci(groups[key])
        target, n, k, method, f = key
        rows.append({"target": target, "n": n, "k": k, "method": method, "fidelity": f, "mse": mse, "half_width": half, "count": len(groups[key])})
    return rows


# ---------------------------------------------------------------- files


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def write_records(records, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([_fmt(v) for v in astuple(r)])


def read_records(path) -> list[BenchRecord]:
    casts = {"n": int, "k": lambda s: int(s) if s else None, "measurements": int, "seed": int,
             "true_fidelity": float, "estimate": float, "sq_error": float}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {reader.fieldnames}")
        return [BenchRecord(**{f.name: casts.get(f.name, str)(row[f.name]) for f in fields(BenchRecord)}) for row in reader]


def write_summary(groups, path) -> None:
    Path(path).write_text(json.dumps({"groups": [g.to_json() for g in groups]}, indent=2) + "\n", encoding="utf-8")


def write_fidelity_breakdown(rows, path) -> None:
    cols = ("target", "n", "k", "method", "fidelity", "mse", "half_width", "count")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in cols])
