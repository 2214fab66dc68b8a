"""Tailored local-Pauli fidelity estimators for basis, GHZ, W and Dicke targets.

Every target splits its fidelity into a diagonal part, read off all-Z
measurements, and off-diagonal parts, each read off a target-specific family
of X/Y settings. One estimator sample picks an arm with fixed probabilities,
draws a setting from that arm, measures once and returns a bounded value
whose mean plus a constant offset is exactly ``tr(rho sigma)``.

Setting codes used throughout: 0 = I (Z basis), 1 = H (X basis),
2 = H S^dag (Y basis).
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .linalg import LOCAL_TRACES, LocalUnitary
from .measurement import as_measured, bits_to_index, outcome_bits
from .rng import make_rng
from .states import GHZ, Basis, Dicke, TargetState, W, _bits

DIAGONAL = -1
CHUNK_SIZE = 1 << 14

COUNT_MODES = ("equation", "pseudocode")


@dataclass(frozen=True)
class ErrorBudget:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class DickeCoefficients:
    """Pair counts ``c[l]`` by support overlap and the normaliser ``S``."""

    n: int
    k: int
    c: dict
    S: float

    @property
    def overlaps(self) -> range:
        return range(max(0, 2 * self.k - self.n), self.k)


def dicke_coefficients(n: int, k: int) -> DickeCoefficients:
    if not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n, got n={n}, k={k}")
    c = {}
    for l in range(max(0, 2 * k - n), k):
        c[l] = comb(n, 2 * k - l) * comb(2 * k - l, l) * comb(2 * k - 2 * l - 1, k - l - 1)
    return DickeCoefficients(n=n, k=k, c=c, S=0.5 + sum(c.values()))


@dataclass(frozen=True)
class Arm:
    """``overlap`` is None for the diagonal arm; GHZ and W use overlap 0."""

    kind: str
    overlap: int | None = None

    @property
    def code(self) -> int:
        return DIAGONAL if self.overlap is None else self.overlap


_DIAG_ARM = Arm("diagonal")


@dataclass(frozen=True)
class ProtocolPlan:
    target: TargetState
    budget: ErrorBudget
    N: int
    arms: tuple
    offset: float
    bound: float
    counts: str = "equation"


@dataclass(frozen=True)
class EstimatorSample:
    value: float
    arm: Arm
    setting: tuple
    outcome: tuple
    pair: tuple | None = None


@dataclass(frozen=True)
class EstimateResult:
    estimate: float
    clamped: float
    samples_used: int


@dataclass
class SampleBatch:
    """Vectorised draws: ``arm`` holds -1 (diagonal) or the overlap index."""

    values: np.ndarray
    arm: np.ndarray
    codes: np.ndarray
    outcomes: np.ndarray
    sup_i: np.ndarray | None = None
    sup_j: np.ndarray | None = None

    def __len__(self) -> int:
        return self.values.size


# ---------------------------------------------------------------- snapshots


def snapshot_matrix_element(b1, b2, s, o) -> complex:
    """``<b1|rho_hat|b2>`` for the product snapshot of setting ``s``, outcome ``o``."""
    b1, b2, o = _bits(b1), _bits(b2), _bits(o)
    s = tuple(int(u) for u in s)
    if not len(b1) == len(b2) == len(o) == len(s):
        raise ValueError("bitstrings, outcome and setting must share a length")
    out = complex(1.0)
    for u, x, ob, y in zip(s, b1, o, b2):
        out *= 3 * LOCAL_TRACES[u, x, ob, y] - (1.0 if x == y else 0.0)
    return out


def basis_dfe_estimator(b, o) -> float:
    b, o = _bits(b), _bits(o)
    if len(b) != len(o):
        raise ValueError("length mismatch")
    return 1.0 if b == o else 0.0


def compatible_settings(b1, b2) -> frozenset:
    """Settings that see ``<b1|rho|b2> + <b2|rho|b1>``: Z where the strings
    agree, X or Y where they differ, with an even number of Y."""
    b1, b2 = _bits(b1), _bits(b2)
    if len(b1) != len(b2):
        raise ValueError("length mismatch")
    neq = [i for i in range(len(b1)) if b1[i] != b2[i]]
    out = set()
    for choice in itertools.product((LocalUnitary.HADAMARD, LocalUnitary.HADAMARD_SDG), repeat=len(neq)):
        if sum(u == LocalUnitary.HADAMARD_SDG for u in choice) % 2:
            continue
        s = [LocalUnitary.IDENTITY] * len(b1)
        for i, u in zip(neq, choice):
            s[i] = u
        out.add(tuple(s))
    return frozenset(out)


# ---------------------------------------------------------------- combinatorics


@lru_cache(maxsize=None)
def _combos(n: int, r: int) -> np.ndarray:
    rows = list(itertools.combinations(range(n), r))
    arr = np.array(rows, dtype=np.int64).reshape(len(rows), r)
    arr.setflags(write=False)
    return arr


def _decode_dicke_pairs(ranks: np.ndarray, n: int, k: int, l: int):
    """Unrank pair indices in ``[0, c_l)`` to support masks ``(sup_i, sup_j)``.

    Mixed radix: union of size 2k-l, then the l-subset shared by both, then
    the split of the remaining 2k-2l positions where the smallest goes to i.
    Returns the masks and the sorted symmetric-difference positions.
    """
    m = ranks.size
    a_count = comb(2 * k - l, l)
    b_count = comb(2 * k - 2 * l - 1, k - l - 1)
    union_idx, rem = np.divmod(ranks, a_count * b_count)
    inter_idx, split_idx = np.divmod(rem, b_count)

    union = _combos(n, 2 * k - l)[union_idx]
    inter_flag = np.zeros(union.shape, dtype=bool)
    np.put_along_axis(inter_flag, _combos(2 * k - l, l)[inter_idx], True, axis=1)
    inter = union[inter_flag].reshape(m, l)
    rest = union[~inter_flag].reshape(m, 2 * k - 2 * l)

    i_flag = np.zeros(rest.shape, dtype=bool)
    i_flag[:, 0] = True
    np.put_along_axis(i_flag, _combos(2 * k - 2 * l - 1, k - l - 1)[split_idx] + 1, True, axis=1)
    i_only = rest[i_flag].reshape(m, k - l)
    j_only = rest[~i_flag].reshape(m, k - l)

    rows = np.arange(m)[:, None]
    sup_i = np.zeros((m, n), dtype=bool)
    sup_j = np.zeros((m, n), dtype=bool)
    sup_i[rows, inter] = True
    sup_j[rows, inter] = True
    sup_i[rows, i_only] = True
    sup_j[rows, j_only] = True
    return sup_i, sup_j, rest


# ---------------------------------------------------------------- arm tables


def _arm_table(target: TargetState):
    """``[(probability, arm_code), ...]`` with the diagonal arm first."""
    n = target.n
    if isinstance(target, Basis):
        return [(1.0, DIAGONAL)]
    if isinstance(target, GHZ):
        return [(1.0 / 3.0, DIAGONAL), (2.0 / 3.0, 0)]
    if isinstance(target, W):
        total = n * n - n + 1
        return [(1.0 / total, DIAGONAL), (n * (n - 1) / total, 0)]
    if isinstance(target, Dicke):
        co = dicke_coefficients(n, target.k)
        return [(1.0 / (2 * co.S), DIAGONAL)] + [(c / co.S, l) for l, c in co.c.items()]
    raise TypeError(f"unknown target {target!r}")


def sample_bound(target: TargetState) -> float:
    """Largest possible ``|F_hat|`` for a single sample."""
    n = target.n
    if isinstance(target, Basis):
        return 1.0
    if isinstance(target, GHZ):
        return 0.75
    if isinstance(target, W):
        return (n * n - n + 1) / (2 * n)
    co = dicke_coefficients(n, target.k)
    return co.S / comb(n, target.k)


def offset(target: TargetState) -> float:
    if isinstance(target, Basis):
        return 0.0
    if isinstance(target, GHZ):
        return 0.25
    if isinstance(target, W):
        return 1.0 / (2 * target.n)
    return 1.0 / (2 * comb(target.n, target.k))


def _check_target(target: TargetState) -> None:
    if isinstance(target, (GHZ, W)) and target.n < 2:
        raise ValueError(f"{type(target).__name__} protocol needs n >= 2; use a Basis target for one qubit")


# ---------------------------------------------------------------- values


def _popcount(bits: np.ndarray, mask=None) -> np.ndarray:
    if mask is not None:
        bits = bits & mask
    return bits.sum(axis=-1, dtype=np.int64)


def _values(target: TargetState, arm, codes, outcomes, sup_i=None, sup_j=None) -> np.ndarray:
    """Estimator values for given arms, settings and outcome indices."""
    n = target.n
    d = 1 << n
    arm = np.asarray(arm)
    codes = np.asarray(codes, dtype=np.int64)
    outcomes = np.asarray(outcomes, dtype=np.int64)
    bits = outcome_bits(outcomes, n)
    diag = arm == DIAGONAL
    values = np.zeros(outcomes.shape, dtype=float)

    if isinstance(target, Basis):
        return (outcomes == target.index).astype(float)

    if isinstance(target, GHZ):
        hit = (outcomes == 0) | (outcomes == d - 1)
        values[diag] = 1.5 * hit[diag] - 0.75
        off = ~diag
        y = (codes[off] == 2).sum(axis=1)
        x = y // 2 + _popcount(bits[off])
        values[off] = np.where(x % 2, -0.75, 0.75)
        return values

    if isinstance(target, W):
        scale = (n * n - n + 1) / (2 * n)
        weight = _popcount(bits)
        values[diag] = np.where(weight[diag] == 1, scale, -scale)
        off = ~diag
        pair = codes[off] != 0
        on_pair = bits[off] * pair
        rest_zero = _popcount(bits[off]) == _popcount(on_pair)
        equal = _popcount(on_pair) != 1
        values[off] = np.where(rest_zero, np.where(equal, scale, -scale), 0.0)
        return values

    if isinstance(target, Dicke):
        k = target.k
        co = dicke_coefficients(n, k)
        scale = co.S / comb(n, k)
        weight = _popcount(bits)
        values[diag] = np.where(weight[diag] == k, scale, -scale)
        off = ~diag
        if np.any(off):
            si = np.asarray(sup_i, dtype=bool)[off]
            sj = np.asarray(sup_j, dtype=bool)[off]
            b = bits[off].astype(bool)
            c = codes[off]
            inter = si & sj
            outside = ~(si | sj)
            ones_ok = ~np.any(inter & ~b, axis=1)
            zeros_ok = ~np.any(outside & b, axis=1)
            y = (c == 2).sum(axis=1)
            i_only = si & ~sj
            j_only = sj & ~si
            flip_i = i_only & (((c == 1) & b) | ((c == 2) & ~b))
            x = y // 2 + flip_i.sum(axis=1) + (j_only & b).sum(axis=1)
            values[off] = np.where(ones_ok & zeros_ok, np.where(x % 2, -scale, scale), 0.0)
        return values

    raise TypeError(f"unknown target {target!r}")


def estimator_value(target: TargetState, s, outcome, pair=None) -> float:
    """Value of one sample given its setting and outcome.

    The arm is the diagonal one exactly when ``s`` is all-Z. Dicke
    off-diagonal samples also need ``pair = (i, j)``, two weight-k bitstrings.
    """
    n = target.n
    codes = np.array([[int(u) for u in s]], dtype=np.int64)
    if codes.shape[1] != n:
        raise ValueError("setting length does not match target")
    o = bits_to_index(_bits(outcome)) if not isinstance(outcome, (int, np.integer)) else int(outcome)
    is_diag = not np.any(codes)
    arm = np.array([DIAGONAL if is_diag else 0])
    sup_i = sup_j = None
    if isinstance(target, Dicke) and not is_diag:
        if pair is None:
            raise ValueError("Dicke off-diagonal values need the sampled pair")
        i, j = (np.array(_bits(p), dtype=bool) for p in pair)
        sup_i, sup_j = i[None, :], j[None, :]
    return float(_values(target, arm, codes, np.array([o]), sup_i, sup_j)[0])


# ---------------------------------------------------------------- sampling


def draw_samples(state, target: TargetState, count: int, rng: np.random.Generator) -> SampleBatch:
    """Draw ``count`` estimator samples for ``target`` from ``state``.

    Randomness is consumed in a fixed order: one uniform per sample for the
    arm, then per off-diagonal arm (ascending overlap) the pair ranks and
    free X/Y choices, then one uniform per sample for the outcome.
    """
    _check_target(target)
    state = as_measured(state)
    n = target.n
    if state.n != n:
        raise ValueError(f"state has {state.n} qubits, target has {n}")
    table = _arm_table(target)
    thresholds = np.cumsum([p for p, _ in table])
    arm_codes = np.array([a for _, a in table])
    pick = np.minimum(np.searchsorted(thresholds, rng.random(count), side="right"), len(table) - 1)
    arm = arm_codes[pick]

    codes = np.zeros((count, n), dtype=np.int64)
    sup_i = sup_j = None
    if isinstance(target, Dicke):
        sup_i = np.zeros((count, n), dtype=bool)
        sup_j = np.zeros((count, n), dtype=bool)

    for code in arm_codes[1:]:
        rows = np.flatnonzero(arm == code)
        m = rows.size
        if isinstance(target, GHZ):
            free = rng.integers(0, 2, size=(m, n - 1))
            codes[rows, : n - 1] = 1 + free
            codes[rows, n - 1] = 1 + free.sum(axis=1) % 2
        elif isinstance(target, W):
            pairs = _combos(n, 2)[rng.integers(0, comb(n, 2), size=m)]
            u = rng.integers(0, 2, size=(m, 1))
            codes[rows[:, None], pairs] = 1 + u
        else:
            k, l = target.k, int(code)
            co = dicke_coefficients(n, k)
            si, sj, sym = _decode_dicke_pairs(rng.integers(0, co.c[l], size=m), n, k, l)
            free = rng.integers(0, 2, size=(m, 2 * k - 2 * l - 1))
            codes[rows[:, None], sym[:, :-1]] = 1 + free
            codes[rows, sym[:, -1]] = 1 + free.sum(axis=1) % 2
            sup_i[rows] = si
            sup_j[rows] = sj

    outcomes = state.measure_many(codes, rng.random(count))
    values = _values(target, arm, codes, outcomes, sup_i, sup_j)
    bound = sample_bound(target)
    if np.any(np.abs(values) > bound * (1 + 1e-12)):
        raise AssertionError(f"estimator sample exceeds its bound {bound}")
    return SampleBatch(values=values, arm=arm, codes=codes, outcomes=outcomes, sup_i=sup_i, sup_j=sup_j)


def _to_sample(batch: SampleBatch, target: TargetState, i: int = 0) -> EstimatorSample:
    n = target.n
    code = int(batch.arm[i])
    arm = _DIAG_ARM if code == DIAGONAL else Arm("off-diagonal", code)
    s = tuple(LocalUnitary(int(c)) for c in batch.codes[i])
    outcome = tuple(int(b) for b in outcome_bits(batch.outcomes[i], n))
    pair = None
    if code != DIAGONAL:
        if batch.sup_i is not None:
            pair = (tuple(int(b) for b in batch.sup_i[i]), tuple(int(b) for b in batch.sup_j[i]))
        elif isinstance(target, W):
            p, q = np.flatnonzero(batch.codes[i])
            pair = tuple(tuple(int(x == m) for x in range(n)) for m in (p, q))
    return EstimatorSample(float(batch.values[i]), arm, s, outcome, pair)


def ghz_sample(state, rng: np.random.Generator, n: int | None = None) -> EstimatorSample:
    target = GHZ(as_measured(state).n if n is None else n)
    return _to_sample(draw_samples(state, target, 1, rng), target)


def w_sample(state, rng: np.random.Generator) -> EstimatorSample:
    target = W(as_measured(state).n)
    return _to_sample(draw_samples(state, target, 1, rng), target)


def dicke_sample(state, coeffs: DickeCoefficients, rng: np.random.Generator) -> EstimatorSample:
    target = Dicke(coeffs.n, coeffs.k)
    return _to_sample(draw_samples(state, target, 1, rng), target)


def basis_sample(state, b, rng: np.random.Generator) -> EstimatorSample:
    target = Basis(b)
    return _to_sample(draw_samples(state, target, 1, rng), target)


# ---------------------------------------------------------------- planning


def sample_count(target: TargetState, budget: ErrorBudget, counts: str = "equation") -> int:
    """Number of samples for an (epsilon, delta) Hoeffding guarantee.

    ``counts="pseudocode"`` selects the looser GHZ and W counts printed in
    the algorithm listings instead of the tightened closed forms.
    """
    if counts not in COUNT_MODES:
        raise ValueError(f"counts must be one of {COUNT_MODES}")
    eps2 = budget.epsilon**2
    log_term = math.log(2 / budget.delta)
    n = target.n
    if isinstance(target, Basis):
        return math.ceil(log_term / (2 * eps2))
    if isinstance(target, GHZ):
        if counts == "pseudocode":
            return math.ceil(2 * log_term / eps2)
        return math.ceil(9 * log_term / (8 * eps2))
    if isinstance(target, W):
        if counts == "pseudocode":
            return math.ceil(2 * log_term * (n - 1) ** 2 / eps2)
        return math.ceil(log_term * (n * n - n + 1) ** 2 / (2 * eps2 * n * n))
    if isinstance(target, Dicke):
        co = dicke_coefficients(n, target.k)
        return math.ceil(2 * log_term * co.S**2 / (eps2 * comb(n, target.k) ** 2))
    raise TypeError(f"unknown target {target!r}")


def plan(target: TargetState, budget: ErrorBudget, counts: str = "equation") -> ProtocolPlan:
    _check_target(target)
    arms = []
    for p, code in _arm_table(target):
        arms.append((p, _DIAG_ARM if code == DIAGONAL else Arm("off-diagonal", code)))
    return ProtocolPlan(
        target=target,
        budget=budget,
        N=sample_count(target, budget, counts),
        arms=tuple(arms),
        offset=offset(target),
        bound=sample_bound(target),
        counts=counts,
    )


def _chunk_values(state, target, seed, chunk, size):
    return draw_samples(state, target, size, make_rng(seed, chunk)).values


def estimate(state, protocol: ProtocolPlan, seed: int, n_samples: int | None = None, threads: int = 1) -> EstimateResult:
    """Run the protocol: mean of N samples plus the plan offset.

    Samples are drawn in fixed-size chunks, chunk ``c`` from the stream
    ``(seed, c)``, and summed with ``math.fsum``; the result is identical
    for any ``threads``.
    """
    state = as_measured(state)
    target = protocol.target
    if state.n != target.n:
        raise ValueError(f"state has {state.n} qubits, plan targets {target.n}")
    total = protocol.N if n_samples is None else int(n_samples)
    if total < 1:
        raise ValueError("need at least one sample")
    sizes = [min(CHUNK_SIZE, total - start) for start in range(0, total, CHUNK_SIZE)]
    jobs = [(state, target, seed, c, size) for c, size in enumerate(sizes)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda a: _chunk_values(*a), jobs))
    else:
        parts = [_chunk_values(*a) for a in jobs]
    raw = math.fsum(np.concatenate(parts).tolist()) / total + protocol.offset
    return EstimateResult(estimate=raw, clamped=min(1.0, max(0.0, raw)), samples_used=total)
