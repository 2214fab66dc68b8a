"""Dense complex linear algebra for small qubit registers.

Basis-index convention: qubit ``i`` (1-based) is bit ``n - i`` of the integer
index, so qubit 1 is the most significant bit. ``kron(a, b)`` therefore puts
``a`` on the leading qubits.
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_FLOOR = -1e-9
DEFAULT_MAX_QUBITS = 12


def max_qubits() -> int:
    """Global qubit cap, overridable through ``DFE_MAX_QUBITS``."""
    raw = os.environ.get("DFE_MAX_QUBITS")
    if raw is None:
        return DEFAULT_MAX_QUBITS
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"DFE_MAX_QUBITS must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValueError("DFE_MAX_QUBITS must be >= 1")
    return value


class DensityError(ValueError):
    """A matrix failed density-matrix validation.

    ``invariant`` names the violated condition.
    """

    invariant = "density"


class BadDimensionError(DensityError):
    invariant = "dimension"


class NotHermitianError(DensityError):
    invariant = "hermitian"


class TraceNotOneError(DensityError):
    invariant = "trace"


class NotPSDError(DensityError):
    invariant = "psd"


class DimensionOverflowError(ValueError):
    """Requested register exceeds the configured qubit cap."""


def check_qubits(n: int) -> None:
    cap = max_qubits()
    if n > cap:
        raise DimensionOverflowError(f"{n} qubits exceeds the configured maximum of {cap}")


class LocalUnitary(enum.IntEnum):
    """Single-qubit rotation applied before a computational-basis readout.

    ``IDENTITY`` measures Z, ``HADAMARD`` measures X and ``HADAMARD_SDG``
    (H S^dagger) measures Y.
    """

    IDENTITY = 0
    HADAMARD = 1
    HADAMARD_SDG = 2

    @property
    def basis(self) -> str:
        return "ZXY"[self]

    @classmethod
    def from_basis(cls, letter: str) -> "LocalUnitary":
        try:
            return cls("ZXY".index(letter.upper()))
        except ValueError:
            raise ValueError(f"unknown measurement basis {letter!r}") from None

    def matrix(self) -> np.ndarray:
        return _UNITARY_MATRICES[self]


_SQRT_HALF = 1.0 / np.sqrt(2.0)
_H = _SQRT_HALF * np.array([[1, 1], [1, -1]], dtype=complex)
_SDG = np.diag([1, -1j])
_UNITARY_MATRICES = {
    LocalUnitary.IDENTITY: np.eye(2, dtype=complex),
    LocalUnitary.HADAMARD: _H,
    LocalUnitary.HADAMARD_SDG: _H @ _SDG,
}
for _m in _UNITARY_MATRICES.values():
    _m.setflags(write=False)


def _exact_local_trace(u: int, bra: int, outcome: int, ket: int) -> complex:
    # <bra|U^dag|o><o|U|ket> with U[o, a] = (-1)^(o a) / sqrt2 for H and an
    # extra (-i)^a column phase for H S^dag; products are exact multiples of 1/2.
    if u == LocalUnitary.IDENTITY:
        return complex(float(bra == outcome and outcome == ket), 0.0)
    sign = -1.0 if (outcome * (bra + ket)) % 2 else 1.0
    value = complex(0.5 * sign, 0.0)
    if u == LocalUnitary.HADAMARD_SDG:
        # conj((-i)^bra) * (-i)^ket = i^bra * (-i)^ket
        value *= (1j) ** bra * (-1j) ** ket
        value = complex(round(value.real * 2) / 2, round(value.imag * 2) / 2)
    return value


# LOCAL_TRACES[u, bra, outcome, ket]
LOCAL_TRACES = np.empty((3, 2, 2, 2), dtype=complex)
for _u in range(3):
    for _a in range(2):
        for _o in range(2):
            for _b in range(2):
                LOCAL_TRACES[_u, _a, _o, _b] = _exact_local_trace(_u, _a, _o, _b)
LOCAL_TRACES.setflags(write=False)


def local_trace_element(u: LocalUnitary, bra: int, outcome: int, ket: int) -> complex:
    """Return ``<bra|U^dag|outcome><outcome|U|ket>`` exactly."""
    for bit in (bra, outcome, ket):
        if bit not in (0, 1):
            raise ValueError(f"expected a bit, got {bit!r}")
    return complex(LOCAL_TRACES[int(u), bra, outcome, ket])


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, refusing results wider than the qubit cap."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("kron expects two matrices")
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    limit = 2 ** max_qubits()
    if rows > limit or cols > limit:
        raise DimensionOverflowError(f"kron result {rows}x{cols} exceeds 2^{max_qubits()}")
    return np.kron(a, b)


def kron_all(mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = kron(out, m)
    return out


def qubit_count(dim: int) -> int:
    """Number of qubits for a Hilbert-space dimension, or raise."""
    if dim < 2 or dim & (dim - 1):
        raise BadDimensionError(f"dimension {dim} is not a power of two >= 2")
    return dim.bit_length() - 1


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated ``2^n x 2^n`` density matrix. The array is read-only."""

    n: int
    data: np.ndarray

    @property
    def dim(self) -> int:
        return 1 << self.n

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.data, dtype=dtype)

    def to_json(self) -> dict:
        flat = self.data.reshape(-1)
        return {"n": self.n, "entries": [[float(z.real), float(z.imag)] for z in flat]}


def validate_density(m, *, check_psd: bool = True) -> DensityMatrix:
    """Validate ``m`` as a density matrix.

    Raises a :class:`DensityError` subclass naming the first violated
    invariant (dimension, hermiticity, unit trace, positivity).
    """
    arr = np.array(m, dtype=complex)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise BadDimensionError(f"expected a square matrix, got shape {arr.shape}")
    n = qubit_count(arr.shape[0])
    check_qubits(n)
    if not np.all(np.isfinite(arr)):
        raise DensityError("matrix has non-finite entries")
    herm_dev = np.max(np.abs(arr - arr.conj().T))
    if herm_dev > HERMITIAN_TOL:
        raise NotHermitianError(f"hermiticity deviation {herm_dev:.3e}")
    tr = np.trace(arr)
    if abs(tr - 1.0) > TRACE_TOL:
        raise TraceNotOneError(f"trace {tr.real:.12g}{tr.imag:+.3g}j is not 1")
    if check_psd:
        lo = np.linalg.eigvalsh((arr + arr.conj().T) / 2)[0]
        if lo < PSD_FLOOR:
            raise NotPSDError(f"minimum eigenvalue {lo:.3e}")
    arr.setflags(write=False)
    return DensityMatrix(n=n, data=arr)


def density_from_json(obj: dict) -> DensityMatrix:
    try:
        n = int(obj["n"])
        entries = np.asarray(obj["entries"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise DensityError(f"malformed state object: {exc}") from None
    check_qubits(n)
    d = 1 << n
    if entries.shape != (d * d, 2):
        raise BadDimensionError(f"expected {d * d} [re, im] pairs for n={n}, got shape {entries.shape}")
    mat = (entries[:, 0] + 1j * entries[:, 1]).reshape(d, d)
    return validate_density(mat)


def save_state(rho: DensityMatrix, path) -> None:
    Path(path).write_text(json.dumps(rho.to_json()), encoding="utf-8")


def load_state(path) -> DensityMatrix:
    with open(path, encoding="utf-8") as fh:
        return density_from_json(json.load(fh))
