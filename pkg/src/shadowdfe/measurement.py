"""Local-Pauli measurement simulation with per-setting caching."""

from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from .linalg import DensityMatrix, LocalUnitary

MeasurementSetting = tuple[LocalUnitary, ...]

NEGATIVE_TOL = 1e-12
SUM_TOL = 1e-9
DEFAULT_CACHE_SIZE = 4096


def setting(value) -> MeasurementSetting:
    """Build a setting from a basis string like ``"XYZ"`` or a sequence of codes."""
    if isinstance(value, str):
        return tuple(LocalUnitary.from_basis(c) for c in value)
    return tuple(LocalUnitary(int(u)) for u in value)


def setting_label(s) -> str:
    return "".join(LocalUnitary(int(u)).basis for u in s)


def all_z(n: int) -> MeasurementSetting:
    return (LocalUnitary.IDENTITY,) * n


@dataclass(frozen=True, eq=False)
class OutcomeDistribution:
    """Probabilities over the ``2^n`` computational-basis outcomes."""

    probs: np.ndarray
    cdf: np.ndarray

    @property
    def n(self) -> int:
        return self.probs.size.bit_length() - 1

    @classmethod
    def from_probs(cls, p) -> "OutcomeDistribution":
        p = np.array(p, dtype=float)
        if p.ndim != 1 or p.size < 2 or p.size & (p.size - 1):
            raise ValueError("outcome distribution length must be a power of two")
        if np.any(p < -SUM_TOL):
            raise ValueError(f"probability {p.min():.3e} is negative beyond tolerance")
        p[p < 0] = 0.0
        total = p.sum()
        if abs(total - 1.0) > SUM_TOL:
            raise ValueError(f"probabilities sum to {total!r}; state is not normalized")
        p /= total
        cdf = np.cumsum(p)
        cdf /= cdf[-1]
        p.setflags(write=False)
        cdf.setflags(write=False)
        return cls(probs=p, cdf=cdf)

    def sample(self, u) -> np.ndarray:
        """Map uniforms in [0, 1) to outcome indices."""
        return np.searchsorted(self.cdf, u, side="right")


def outcome_distribution(rho: DensityMatrix, s) -> OutcomeDistribution:
    """Diagonal of ``U rho U^dag`` for ``U = kron(U_1, ..., U_n)``.

    Each qubit is rotated by a one-qubit conjugation and then immediately
    reduced to its diagonal, so the working tensor shrinks by 4 per qubit.
    """
    n = rho.n
    if len(s) != n:
        raise ValueError(f"setting has {len(s)} qubits, state has {n}")
    t = np.asarray(rho.data).reshape((2,) * (2 * n))
    for i, u in enumerate(s):
        m = n - i  # remaining rotated qubits; axis 0 is this row, axis m this column
        if u != LocalUnitary.IDENTITY:
            mat = LocalUnitary(int(u)).matrix()
            t = np.tensordot(mat, t, axes=(1, 0))
            t = np.tensordot(t, mat.conj(), axes=(m, 1))
            t = np.moveaxis(t, -1, m)
        t = np.diagonal(t, axis1=0, axis2=m)
    return OutcomeDistribution.from_probs(np.real(t).reshape(-1))


def sample_outcome(dist: OutcomeDistribution, rng: np.random.Generator) -> int:
    return int(dist.sample(rng.random()))


def outcome_bits(indices, n: int) -> np.ndarray:
    """Integer outcomes to an ``(..., n)`` bit array, qubit 1 first."""
    idx = np.asarray(indices, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[..., None] >> shifts) & 1).astype(np.int8)


def bits_to_index(bits) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | int(b)
    return out


class SettingCache:
    """Thread-safe LRU map from measurement setting to outcome distribution."""

    def __init__(self, rho: DensityMatrix, capacity: int = DEFAULT_CACHE_SIZE):
        if capacity < 1:
            raise ValueError("cache capacity must be >= 1")
        self.rho = rho
        self.capacity = capacity
        self._entries: OrderedDict[tuple, OutcomeDistribution] = OrderedDict()
        self._lock = threading.Lock()
        self.computations = 0
        self.hits = 0

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, s) -> bool:
        return tuple(int(u) for u in s) in self._entries

    def get(self, s) -> OutcomeDistribution:
        key = tuple(int(u) for u in s)
        with self._lock:
            dist = self._entries.get(key)
            if dist is not None:
                self._entries.move_to_end(key)
                self.hits += 1
                return dist
        dist = outcome_distribution(self.rho, key)
        with self._lock:
            # another thread may have won the race; keep the first object
            existing = self._entries.get(key)
            if existing is not None:
                self._entries.move_to_end(key)
                return existing
            self.computations += 1
            self._entries[key] = dist
            if len(self._entries) > self.capacity:
                self._entries.popitem(last=False)
            return dist


class MeasuredState:
    """Handle bundling a density matrix with its setting cache."""

    def __init__(self, rho: DensityMatrix, cache_size: int = DEFAULT_CACHE_SIZE):
        self.rho = rho
        self.cache = SettingCache(rho, cache_size)

    @property
    def n(self) -> int:
        return self.rho.n

    def distribution(self, s) -> OutcomeDistribution:
        return self.cache.get(s)

    def measure(self, s, rng: np.random.Generator) -> int:
        return sample_outcome(self.distribution(s), rng)

    def measure_many(self, codes: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
        """Outcome indices for rows of setting codes, one uniform per row.

        Rows are grouped by setting and groups visited in sorted key order,
        so the result depends only on the inputs.
        """
        codes = np.asarray(codes, dtype=np.int64)
        m, n = codes.shape
        out = np.empty(m, dtype=np.int64)
        if m == 0:
            return out
        keys = codes @ (3 ** np.arange(n - 1, -1, -1, dtype=np.int64))
        uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(uniq.size + 1))
        for g in range(uniq.size):
            rows = order[bounds[g]:bounds[g + 1]]
            dist = self.distribution(codes[first[g]])
            out[rows] = dist.sample(uniforms[rows])
        return out


def as_measured(rho) -> MeasuredState:
    if isinstance(rho, MeasuredState):
        return rho
    if isinstance(rho, DensityMatrix):
        return MeasuredState(rho)
    raise TypeError(f"expected DensityMatrix or MeasuredState, got {type(rho).__name__}")
