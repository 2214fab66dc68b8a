"""Target states and random states with a prescribed fidelity."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np

from .linalg import DensityMatrix, check_qubits, validate_density
from .rng import make_rng


def _bits(b) -> tuple[int, ...]:
    if isinstance(b, str):
        if not b or set(b) - {"0", "1"}:
            raise ValueError(f"not a bitstring: {b!r}")
        return tuple(int(c) for c in b)
    out = tuple(int(x) for x in b)
    if not out or any(x not in (0, 1) for x in out):
        raise ValueError(f"not a bitstring: {b!r}")
    return out


@dataclass(frozen=True)
class GHZ:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("GHZ needs n >= 1")

    @property
    def label(self) -> str:
        return "ghz"


@dataclass(frozen=True)
class W:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("W needs n >= 1")

    @property
    def label(self) -> str:
        return "w"

    @property
    def k(self) -> int:
        return 1


@dataclass(frozen=True)
class Dicke:
    n: int
    k: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("Dicke needs n >= 1")
        if not 0 <= self.k <= self.n:
            raise ValueError(f"Dicke needs 0 <= k <= n, got k={self.k}, n={self.n}")

    @property
    def label(self) -> str:
        return "dicke"


@dataclass(frozen=True)
class Basis:
    """Computational-basis target ``|b>``; ``b[0]`` is qubit 1."""

    b: tuple[int, ...]

    def __init__(self, b):
        object.__setattr__(self, "b", _bits(b))

    @property
    def n(self) -> int:
        return len(self.b)

    @property
    def index(self) -> int:
        return int("".join(map(str, self.b)), 2)

    @property
    def label(self) -> str:
        return "basis"


TargetState = GHZ | W | Dicke | Basis


def target_k(t: TargetState) -> int | None:
    if isinstance(t, W):
        return 1
    if isinstance(t, Dicke):
        return t.k
    return None


def describe(t: TargetState) -> str:
    if isinstance(t, Dicke):
        return f"Dicke(n={t.n}, k={t.k})"
    if isinstance(t, Basis):
        return f"Basis({''.join(map(str, t.b))})"
    return f"{type(t).__name__}(n={t.n})"


@lru_cache(maxsize=None)
def weight_indices(n: int, k: int) -> np.ndarray:
    """Basis indices of Hamming weight ``k``, ordered by support combination."""
    out = []
    for support in combinations(range(n), k):
        out.append(sum(1 << (n - 1 - q) for q in support))
    arr = np.array(out, dtype=np.int64)
    arr.setflags(write=False)
    return arr


def target_vector(t: TargetState) -> np.ndarray:
    """State vector ``|psi>`` of a target."""
    check_qubits(t.n)
    d = 1 << t.n
    psi = np.zeros(d, dtype=complex)
    if isinstance(t, GHZ):
        psi[0] = psi[d - 1] = 1 / np.sqrt(2)
    elif isinstance(t, (W, Dicke)):
        k = 1 if isinstance(t, W) else t.k
        idx = weight_indices(t.n, k)
        psi[idx] = 1 / np.sqrt(comb(t.n, k))
    elif isinstance(t, Basis):
        psi[t.index] = 1.0
    else:
        raise TypeError(f"unknown target {t!r}")
    return psi


def target_density(t: TargetState) -> DensityMatrix:
    """Exact pure-state density ``|psi><psi|`` for a target."""
    psi = target_vector(t)
    return validate_density(np.outer(psi, psi.conj()))


def fidelity(rho: DensityMatrix, t: TargetState) -> float:
    """``tr(rho sigma) = <psi|rho|psi>`` clamped into [0, 1]."""
    if rho.n != t.n:
        raise ValueError(f"state has {rho.n} qubits, target has {t.n}")
    psi = target_vector(t)
    value = float(np.real(psi.conj() @ rho.data @ psi))
    return min(1.0, max(0.0, value))


def ginibre_density(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random full-rank density matrix ``G G^dag / tr`` with Gaussian ``G``."""
    d = 1 << n
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    m = g @ g.conj().T
    return m / np.trace(m).real


def random_state_with_fidelity(target: TargetState, fidelity_value: float, seed: int) -> DensityMatrix:
    """Random mixed state whose fidelity with ``target`` equals ``fidelity_value``.

    A Ginibre state is projected onto the orthogonal complement of the
    target, rescaled to weight ``1 - f`` and mixed with ``f`` times the target.
    ``f = 1`` returns the target exactly.
    """
    f = float(fidelity_value)
    if not 0.0 <= f <= 1.0:
        raise ValueError(f"fidelity must lie in [0, 1], got {f}")
    check_qubits(target.n)
    psi = target_vector(target)
    sigma = np.outer(psi, psi.conj())
    if f == 1.0:
        return validate_density(sigma)

    rng = make_rng(seed)
    rho = ginibre_density(target.n, rng)
    # P rho P with P = I - |psi><psi|, without forming P
    v = rho @ psi
    c = psi.conj() @ v
    proj = rho - np.outer(v, psi.conj()) - np.outer(psi, v.conj()) + c * sigma
    proj = (proj + proj.conj().T) / 2
    evals, evecs = np.linalg.eigh(proj)
    if evals[0] < 0:
        proj = (evecs * np.clip(evals, 0.0, None)) @ evecs.conj().T
        proj = (proj + proj.conj().T) / 2
    proj *= (1.0 - f) / np.trace(proj).real
    return validate_density(proj + f * sigma)
