"""Dense complex linear algebra for polarization qubits.

Everything in this package works on density operators over 1-4
polarization qubits. The single-qubit basis is {H, V} and composite
systems are ordered lexicographically, e.g. {HH, HV, VH, VV} for two
qubits, with the leftmost letter belonging to qubit 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

# Tolerances for physicality checks at dim <= 16 in double precision.
HERMITICITY_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
RANK_TOL = 1e-10

MAX_DIM = 16


class BellKind(Enum):
    """The four maximally entangled two-qubit states."""

    PHI_PLUS = "phi_plus"
    PHI_MINUS = "phi_minus"
    PSI_PLUS = "psi_plus"
    PSI_MINUS = "psi_minus"


_SQRT_HALF = 1.0 / np.sqrt(2.0)

# State vectors in the {HH, HV, VH, VV} basis.
BELL_VECTORS = {
    BellKind.PHI_PLUS: np.array([_SQRT_HALF, 0.0, 0.0, _SQRT_HALF], dtype=complex),
    BellKind.PHI_MINUS: np.array([_SQRT_HALF, 0.0, 0.0, -_SQRT_HALF], dtype=complex),
    BellKind.PSI_PLUS: np.array([0.0, _SQRT_HALF, _SQRT_HALF, 0.0], dtype=complex),
    BellKind.PSI_MINUS: np.array([0.0, _SQRT_HALF, -_SQRT_HALF, 0.0], dtype=complex),
}

PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)


def _as_square_complex(matrix: np.ndarray | Sequence) -> np.ndarray:
    m = np.array(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


@dataclass(frozen=True)
class DensityOperator:
    """Complex square matrix on 1-4 polarization qubits.

    Instances are validated on construction: Hermitian within
    HERMITICITY_TOL, positive semidefinite within PSD_TOL, and unit
    trace within TRACE_TOL unless ``normalized=False`` marks an
    explicitly unnormalized intermediate (e.g. a heralded state before
    dividing by the outcome probability).
    """

    matrix: np.ndarray
    normalized: bool = True

    def __post_init__(self) -> None:
        m = _as_square_complex(self.matrix)
        dim = m.shape[0]
        if dim not in (2, 4, 8, 16):
            raise ValueError(f"dimension must be 2^n with n in 1..4, got {dim}")
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL:
            raise ValueError("matrix is not Hermitian within tolerance")
        if self.normalized and abs(np.trace(m).real - 1.0) > TRACE_TOL:
            raise ValueError(f"trace {np.trace(m).real!r} is not 1 within tolerance")
        if np.linalg.eigvalsh(m).min() < -PSD_TOL:
            raise ValueError("matrix has a negative eigenvalue beyond tolerance")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def normalize(self) -> "DensityOperator":
        """Return the trace-1 state proportional to this operator."""
        tr = np.trace(self.matrix).real
        if tr <= 0.0:
            raise ValueError("cannot normalize an operator with non-positive trace")
        return DensityOperator(self.matrix / tr)

    def to_json_dict(self) -> dict:
        """Serialize as {dim, entries} with row-major [re, im] pairs."""
        flat = self.matrix.reshape(-1)
        return {
            "dim": self.dim,
            "entries": [[float(z.real), float(z.imag)] for z in flat],
        }

    @classmethod
    def from_json_dict(cls, data: dict, normalized: bool = True) -> "DensityOperator":
        dim = int(data["dim"])
        entries = data["entries"]
        if len(entries) != dim * dim:
            raise ValueError(f"expected {dim * dim} entries, got {len(entries)}")
        flat = np.array([complex(re, im) for re, im in entries])
        return cls(flat.reshape(dim, dim), normalized=normalized)


@dataclass(frozen=True)
class Projector:
    """Hermitian measurement operator acting on a subset of qubits.

    ``qubits`` are positions within a larger register (0 = leftmost).
    The operator need not be idempotent; POVM elements with eigenvalues
    in [0, 1] are accepted.
    """

    qubits: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        m = _as_square_complex(self.matrix)
        if m.shape[0] != 2 ** len(self.qubits):
            raise ValueError(
                f"operator dimension {m.shape[0]} does not match "
                f"{len(self.qubits)} qubit(s)"
            )
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError("duplicate qubit indices")
        if np.max(np.abs(m - m.conj().T)) > HERMITICITY_TOL:
            raise ValueError("projector is not Hermitian within tolerance")
        m.setflags(write=False)
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "matrix", m)


def bell_state(kind: BellKind) -> DensityOperator:
    """Rank-1 density operator of the requested Bell state."""
    v = BELL_VECTORS[kind]
    return DensityOperator(np.outer(v, v.conj()))


def maximally_mixed(n_qubits: int) -> DensityOperator:
    dim = 2**n_qubits
    return DensityOperator(np.eye(dim, dtype=complex) / dim)


def werner_state(p: float) -> DensityOperator:
    """p * |Psi-><Psi-| + (1-p) * I/4, the standard noise-mixed Bell state."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    mix = np.eye(4, dtype=complex) / 4.0
    return DensityOperator(p * bell_state(BellKind.PSI_MINUS).matrix + (1.0 - p) * mix)


def fidelity(state: DensityOperator, target: DensityOperator) -> float:
    """Overlap <psi|rho|psi> with a pure target |psi><psi|.

    Restricted to rank-1 targets; raises ValueError for mixed targets
    or mismatched dimensions.
    """
    if state.dim != target.dim:
        raise ValueError(f"dimension mismatch: {state.dim} vs {target.dim}")
    evals, evecs = np.linalg.eigh(target.matrix)
    if evals[:-1].max(initial=0.0) > RANK_TOL:
        raise ValueError("target state is not pure (rank > 1 within tolerance)")
    psi = evecs[:, -1]
    value = np.vdot(psi, state.matrix @ psi)
    return float(value.real)


def concurrence(state: DensityOperator) -> float:
    """Wootters concurrence of a two-qubit state.

    Computed from the descending square roots l1 >= ... >= l4 of the
    eigenvalues of rho (sy x sy) rho* (sy x sy) as max(0, l1-l2-l3-l4).
    """
    if state.dim != 4:
        raise ValueError("concurrence is defined for two-qubit states only")
    rho = state.matrix
    if np.linalg.eigvalsh(rho).min() < -PSD_TOL:
        raise ValueError("state has a negative eigenvalue beyond tolerance")
    yy = np.kron(PAULI_Y, PAULI_Y)
    r = rho @ yy @ rho.conj() @ yy
    evals = np.linalg.eigvals(r).real
    lams = np.sqrt(np.clip(evals, 0.0, None))
    lams.sort()
    return float(max(0.0, lams[3] - lams[2] - lams[1] - lams[0]))


def tensor(a: DensityOperator, b: DensityOperator) -> DensityOperator:
    """Kronecker composition; the left factor owns the leading qubits."""
    if a.dim * b.dim > MAX_DIM:
        raise ValueError(f"composite dimension {a.dim * b.dim} exceeds {MAX_DIM}")
    return DensityOperator(
        np.kron(a.matrix, b.matrix),
        normalized=a.normalized and b.normalized,
    )


def _embed(op: np.ndarray, qubits: tuple[int, ...], n_qubits: int) -> np.ndarray:
    """Expand an operator on ``qubits`` to the full 2^n register."""
    k = len(qubits)
    rest = [q for q in range(n_qubits) if q not in qubits]
    full = np.kron(op, np.eye(2 ** len(rest), dtype=complex))
    # full currently acts on (qubits..., rest...); permute into register order.
    order = list(qubits) + rest
    inverse = np.argsort(order)
    t = full.reshape([2] * (2 * n_qubits))
    perm = list(inverse) + [n_qubits + p for p in inverse]
    return t.transpose(perm).reshape(2**n_qubits, 2**n_qubits)


def partial_trace(matrix: np.ndarray, keep: Sequence[int], n_qubits: int) -> np.ndarray:
    """Trace out all qubits not listed in ``keep`` (order preserved)."""
    keep = list(keep)
    traced = [q for q in range(n_qubits) if q not in keep]
    t = matrix.reshape([2] * (2 * n_qubits))
    for offset, q in enumerate(sorted(traced)):
        ax = q - offset
        t = np.trace(t, axis1=ax, axis2=ax + t.ndim // 2)
    d = 2 ** len(keep)
    return t.reshape(d, d)


def permute_qubits(matrix: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    """Reorder register qubits so that new position i holds old qubit perm[i]."""
    n = len(perm)
    if matrix.shape != (2**n, 2**n):
        raise ValueError("permutation length does not match matrix dimension")
    t = matrix.reshape([2] * (2 * n))
    axes = list(perm) + [n + p for p in perm]
    return t.transpose(axes).reshape(2**n, 2**n)


def _operator_sqrt(matrix: np.ndarray) -> np.ndarray:
    evals, evecs = np.linalg.eigh(matrix)
    return (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.conj().T


def project(
    state: DensityOperator, op: Projector
) -> tuple[DensityOperator, float]:
    """Apply a measurement operator and trace out the measured qubits.

    Kraus form: the unnormalized conditioned state is
    Tr_sub[(sqrt(op) x I) rho (sqrt(op) x I)] over the measured qubits
    (kept on the full register when the operator covers everything),
    with outcome probability Tr[(op x I) rho]. For a PSD Hermitian op
    the result is PSD by construction.
    """
    n = state.n_qubits
    if any(q < 0 or q >= n for q in op.qubits):
        raise ValueError(f"qubit indices {op.qubits} invalid for {n} qubit(s)")
    root = _embed(_operator_sqrt(op.matrix), op.qubits, n)
    weighted = root @ state.matrix @ root
    probability = float(np.trace(weighted).real)
    keep = [q for q in range(n) if q not in op.qubits]
    if keep:
        reduced = partial_trace(weighted, keep, n)
    else:
        reduced = weighted
    # Symmetrize away float-level anti-Hermitian noise.
    reduced = 0.5 * (reduced + reduced.conj().T)
    return DensityOperator(reduced, normalized=False), probability


def is_physical(state: DensityOperator | np.ndarray, tol: float = PSD_TOL) -> bool:
    """True iff Hermitian, unit trace and PSD within ``tol``."""
    if tol <= 0.0:
        raise ValueError("tolerance must be positive")
    m = state.matrix if isinstance(state, DensityOperator) else np.asarray(state, dtype=complex)
    if np.max(np.abs(m - m.conj().T)) > tol:
        return False
    if abs(np.trace(m).real - 1.0) > tol:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min() >= -tol)
