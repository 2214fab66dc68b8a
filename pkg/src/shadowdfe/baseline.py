"""Comparison estimators.

* Two-stage importance-sampling DFE: draw Pauli labels ``k`` with
  probability ``chi_sigma(k)^2``, estimate each sampled ``chi_rho(k)`` from
  repeated single-shot eigenvalue measurements and average the ratios.
* Vanilla classical shadows: uniform X/Y/Z settings, ``tr(rho_hat sigma)``
  per snapshot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

from .linalg import LOCAL_TRACES, LocalUnitary
from .measurement import as_measured, outcome_bits
from .shadow import ErrorBudget, dicke_coefficients
from .states import GHZ, Basis, Dicke, TargetState, W, target_density

CHI_THRESHOLD = 1e-12
DEFAULT_MAX_REPETITIONS = 10**7


class RepetitionOverflowError(RuntimeError):
    """A sampled label would need more shots than the configured ceiling."""


def pauli_label(x: int, z: int, n: int) -> str:
    letters = []
    for q in range(n):
        bit = n - 1 - q
        letters.append("IZXY"[((x >> bit) & 1) * 2 + ((z >> bit) & 1)])
    return "".join(letters)


def pauli_masks(label: str) -> tuple[int, int]:
    """``(x, z)`` bit masks of a Pauli string, qubit 1 in the high bit."""
    x = z = 0
    for letter in label.upper():
        if letter not in "IXYZ":
            raise ValueError(f"bad Pauli letter {letter!r}")
        x = (x << 1) | (letter in "XY")
        z = (z << 1) | (letter in "ZY")
    return x, z


def pauli_matrix(label: str) -> np.ndarray:
    single = {
        "I": np.eye(2),
        "X": np.array([[0, 1], [1, 0]]),
        "Y": np.array([[0, -1j], [1j, 0]]),
        "Z": np.diag([1, -1]),
    }
    out = np.ones((1, 1), dtype=complex)
    for letter in label.upper():
        out = np.kron(out, single[letter])
    return out


def _walsh_hadamard(v: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform along the last axis."""
    d = v.shape[-1]
    n = d.bit_length() - 1
    out = v.reshape(v.shape[:-1] + (2,) * n)
    for ax in range(v.ndim - 1, v.ndim - 1 + n):
        a = np.take(out, 0, axis=ax)
        b = np.take(out, 1, axis=ax)
        out = np.stack((a + b, a - b), axis=ax)
    return out.reshape(v.shape)


_I_POWERS = np.array([1, 1j, -1, -1j])


def pauli_expectations(mat: np.ndarray) -> np.ndarray:
    """``tr(M P_{x,z})`` for every Pauli string, as a ``d x d`` array indexed ``[x, z]``.

    ``P_{x,z}|a> = i^{|x&z|} (-1)^{z.a} |a^x>``, so for fixed ``x`` the traces
    are a Walsh-Hadamard transform of the off-diagonal ``M[a, a^x]``.
    """
    d = mat.shape[0]
    a = np.arange(d)
    out = np.empty((d, d), dtype=complex)
    z = np.arange(d)
    for x in range(d):
        wht = _walsh_hadamard(mat[a, a ^ x])
        out[x] = wht * _I_POWERS[np.bitwise_count(x & z) % 4]
    return out


@dataclass(frozen=True)
class CharacteristicTable:
    """Nonzero ``chi_sigma(k) = tr(sigma W_k) / sqrt(d)`` of a pure target."""

    n: int
    labels: tuple
    x: np.ndarray
    z: np.ndarray
    trace: np.ndarray

    @property
    def chi(self) -> np.ndarray:
        return self.trace / math.sqrt(1 << self.n)

    def as_dict(self) -> dict:
        return dict(zip(self.labels, self.chi.tolist()))

    def __len__(self) -> int:
        return len(self.labels)


@lru_cache(maxsize=64)
def characteristic_table(target: TargetState) -> CharacteristicTable:
    sigma = target_density(target).data
    n = target.n
    traces = pauli_expectations(sigma)
    if np.max(np.abs(traces.imag)) > 1e-9:
        raise AssertionError("target traces against Paulis should be real")
    traces = traces.real
    chi_cut = CHI_THRESHOLD * math.sqrt(1 << n)
    xs, zs = np.nonzero(np.abs(traces) > chi_cut)
    if xs.size == 0:
        raise ValueError(f"target {target!r} has no characteristic support")
    tr = traces[xs, zs]
    for arr in (xs, zs, tr):
        arr.setflags(write=False)
    labels = tuple(pauli_label(int(x), int(z), n) for x, z in zip(xs, zs))
    return CharacteristicTable(n=n, labels=labels, x=xs, z=zs, trace=tr)


@dataclass(frozen=True)
class BaselineConfig:
    l: int
    alpha: float
    epsilon: float
    delta: float
    max_repetitions: int = DEFAULT_MAX_REPETITIONS

    def __post_init__(self):
        if self.l < 1:
            raise ValueError("l must be >= 1")
        ErrorBudget(self.epsilon, self.delta)

    @property
    def measurement_bound(self) -> float:
        """Worst-case total shots ``l + 1 + 2 log(2/delta) alpha / eps^2``."""
        return self.l + 1 + 2 * math.log(2 / self.delta) * self.alpha / self.epsilon**2


def baseline_config(target: TargetState, budget: ErrorBudget, max_repetitions: int = DEFAULT_MAX_REPETITIONS) -> BaselineConfig:
    """Label count and conditioning constant per target family.

    Stabilizer-like targets (GHZ, basis) use the Hoeffding label count with
    ``alpha = 1``; W and Dicke use ``1 / (eps^2 delta)`` labels with
    ``alpha`` equal to the inverse square of the smallest nonzero Pauli trace.
    """
    eps, delta = budget.epsilon, budget.delta
    if isinstance(target, (GHZ, Basis)):
        l, alpha = math.ceil(2 * math.log(2 / delta) / eps**2), 1.0
    elif isinstance(target, W):
        l, alpha = math.ceil(1 / (eps**2 * delta)), float(target.n**2)
    elif isinstance(target, Dicke):
        l, alpha = math.ceil(1 / (eps**2 * delta)), float(comb(target.n, target.k) ** 2)
    else:
        raise TypeError(f"unknown target {target!r}")
    return BaselineConfig(l=l, alpha=alpha, epsilon=eps, delta=delta, max_repetitions=max_repetitions)


def approximate_measurement_count(target: TargetState, budget: ErrorBudget) -> float:
    """Closed-form shot count at halved (epsilon, delta)."""
    eps, delta = budget.epsilon, budget.delta
    log4 = math.log(4 / delta)
    if isinstance(target, GHZ):
        return 16 * log4 / eps**2
    if isinstance(target, W):
        return 8 * log4 * target.n**2 / eps**2
    if isinstance(target, Dicke):
        return 8 * log4 * comb(target.n, target.k) ** 2 / eps**2
    raise TypeError(f"no closed-form baseline count for {target!r}")


def tailored_measurement_count(target: TargetState, budget: ErrorBudget) -> float:
    """Unrounded tailored-protocol sample count, for bound comparisons."""
    eps, delta = budget.epsilon, budget.delta
    log2 = math.log(2 / delta)
    n = target.n
    if isinstance(target, GHZ):
        return 9 * log2 / (8 * eps**2)
    if isinstance(target, W):
        return log2 * (n * n - n + 1) ** 2 / (2 * eps**2 * n * n)
    if isinstance(target, Dicke):
        s = dicke_coefficients(n, target.k).S
        return 2 * log2 * s**2 / (eps**2 * comb(n, target.k) ** 2)
    raise TypeError(f"no tailored count for {target!r}")


@dataclass(frozen=True)
class BaselineResult:
    estimate: float
    measurements_used: int
    labels: tuple = ()
    repetitions: tuple = ()


def repetitions(trace: np.ndarray, cfg: BaselineConfig) -> np.ndarray:
    """Shots per sampled label: ``ceil(2 log(2/delta) / (d chi^2 l eps^2))``."""
    # d chi^2 == tr(sigma W)^2
    m = np.ceil(2 * math.log(2 / cfg.delta) / (np.asarray(trace) ** 2 * cfg.l * cfg.epsilon**2))
    if np.any(m > cfg.max_repetitions):
        raise RepetitionOverflowError(f"label needs {int(m.max())} shots, ceiling is {cfg.max_repetitions}")
    return m.astype(np.int64)


def _label_setting(x: int, z: int, n: int) -> tuple:
    s = []
    for q in range(n):
        bit = n - 1 - q
        xb, zb = (x >> bit) & 1, (z >> bit) & 1
        if not xb:
            s.append(LocalUnitary.IDENTITY)
        else:
            s.append(LocalUnitary.HADAMARD_SDG if zb else LocalUnitary.HADAMARD)
    return tuple(s)


def _parity_signs(d: int, support: int) -> np.ndarray:
    ones = np.bitwise_count(np.arange(d) & support)
    return 1.0 - 2.0 * (ones % 2)


def pauli_expectation(state, x: int, z: int) -> float:
    """``tr(rho W)`` as the mean eigenvalue of one X/Y/Z setting."""
    state = as_measured(state)
    n = state.n
    probs = state.distribution(_label_setting(x, z, n)).probs
    return float(probs @ _parity_signs(1 << n, x | z))


def baseline_estimate(state, target: TargetState, cfg: BaselineConfig, rng: np.random.Generator) -> BaselineResult:
    """Importance-sampling fidelity estimate.

    Each of the ``m_i`` shots on label ``k_i`` measures every non-identity
    qubit in its letter's basis and multiplies the +-1 eigenvalues; the shot
    sum is drawn as a binomial count of +1 results with the exact
    single-shot probability. The all-identity label is answered without
    consuming copies.
    """
    state = as_measured(state)
    n = target.n
    if state.n != n:
        raise ValueError(f"state has {state.n} qubits, target has {n}")
    table = characteristic_table(target)
    p = table.trace**2
    p = p / p.sum()
    picks = rng.choice(len(table), size=cfg.l, p=p)
    tr_sigma = table.trace[picks]
    m = repetitions(tr_sigma, cfg)
    identity = (table.x[picks] == 0) & (table.z[picks] == 0)

    uniq = np.unique(picks[~identity])
    expect = {int(u): pauli_expectation(state, int(table.x[u]), int(table.z[u])) for u in uniq}
    p_plus = np.array([(1 + expect.get(int(k), 1.0)) / 2 for k in picks])
    p_plus = np.clip(p_plus, 0.0, 1.0)
    plus = rng.binomial(m, p_plus)
    mean_eig = np.where(identity, 1.0, (2 * plus - m) / m)
    ratios = mean_eig / tr_sigma
    used = int(m[~identity].sum())
    return BaselineResult(
        estimate=math.fsum(ratios.tolist()) / cfg.l,
        measurements_used=used,
        labels=tuple(table.labels[i] for i in picks),
        repetitions=tuple(int(v) for v in m),
    )


def _target_support(target: TargetState):
    sigma = target_density(target).data
    rows, cols = np.nonzero(np.abs(sigma) > 1e-15)
    return rows, cols, sigma[rows, cols]


def snapshot_overlaps(target: TargetState, codes: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
    """``tr(rho_hat sigma)`` for each (setting, outcome) row."""
    n = target.n
    rows, cols, weights = _target_support(target)
    b1 = outcome_bits(cols, n)  # tr(rho_hat sigma) = sum sigma[r, c] <c|rho_hat|r>
    b2 = outcome_bits(rows, n)
    delta = (b1 == b2).astype(float)
    ob = outcome_bits(outcomes, n)
    codes = np.asarray(codes, dtype=np.int64)
    out = np.empty(len(codes), dtype=float)
    step = max(1, (1 << 20) // max(1, len(weights) * n))
    for start in range(0, len(codes), step):
        c = codes[start:start + step, None, :]
        o = ob[start:start + step, None, :]
        factors = 3 * LOCAL_TRACES[c, b1[None], o, b2[None]] - delta[None]
        out[start:start + step] = np.real(np.prod(factors, axis=-1) @ weights)
    return out


def vanilla_shadow_estimate(state, target: TargetState, N: int, rng: np.random.Generator) -> float:
    """Mean of ``tr(rho_hat sigma)`` over ``N`` uniformly random X/Y/Z snapshots."""
    if N < 1:
        raise ValueError("N must be >= 1")
    state = as_measured(state)
    n = target.n
    if state.n != n:
        raise ValueError(f"state has {state.n} qubits, target has {n}")
    codes = rng.integers(0, 3, size=(N, n))
    outcomes = state.measure_many(codes, rng.random(N))
    return math.fsum(snapshot_overlaps(target, codes, outcomes).tolist()) / N
