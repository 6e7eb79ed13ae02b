"""Finite-dimensional state and operator algebra.

States live on a tensor-product configuration basis described by a list of
subsystem dimensions; indexing is zero-based and row-major over those
dimensions.  Everything here is a pure function over immutable values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .constants import ATOL_ACCUMULATED, ATOL_ALGEBRAIC, NORM_FLOOR, NULL_OUTCOME_FLOOR
from .errors import (
    CompletenessError,
    DimensionError,
    NormalizationError,
    NullOutcomeError,
)


def _as_dims(dims: Sequence[int]) -> tuple[int, ...]:
    out = tuple(int(d) for d in dims)
    if not out or any(d <= 0 for d in out):
        raise DimensionError(f"subsystem dimensions must be positive, got {out!r}")
    return out


def _frozen_complex(values, size: int, what: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.complex128).copy()
    if arr.ndim != 1 or arr.size != size:
        raise DimensionError(f"{what} must be a vector of length {size}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr.view(np.float64))):
        raise DimensionError(f"{what} contains non-finite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitude vector over the joint basis of `dims`."""

    dims: tuple[int, ...]
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = _as_dims(self.dims)
        size = int(np.prod(dims))
        object.__setattr__(self, "dims", dims)
        object.__setattr__(
            self, "amplitudes", _frozen_complex(self.amplitudes, size, "amplitudes")
        )

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per subsystem (read-only view)."""
        return self.amplitudes.reshape(self.dims)


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """Dense operator on the joint space of `dims`, optionally claimed hermitian."""

    dims: tuple[int, ...]
    matrix: np.ndarray = field(repr=False)
    hermitian: bool = False

    def __post_init__(self):
        dims = _as_dims(self.dims)
        size = int(np.prod(dims))
        mat = np.asarray(self.matrix, dtype=np.complex128).copy()
        if mat.shape != (size, size):
            raise DimensionError(
                f"operator matrix must be {size}x{size} for dims {dims}, got {mat.shape}"
            )
        if not np.all(np.isfinite(mat.view(np.float64))):
            raise DimensionError("operator matrix contains non-finite entries")
        if self.hermitian and _max_abs(mat - mat.conj().T) > ATOL_ALGEBRAIC:
            raise DimensionError("operator claimed hermitian but M != M^dagger")
        mat.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


class Projector(LinearOperator):
    """Hermitian idempotent operator (P @ P == P within tolerance)."""

    def __init__(self, dims: Sequence[int], matrix):
        super().__init__(_as_dims(dims), matrix, hermitian=True)
        mat = self.matrix
        if _max_abs(mat @ mat - mat) > ATOL_ALGEBRAIC:
            raise DimensionError("projector is not idempotent")

    def complement(self) -> "Projector":
        return Projector(self.dims, np.eye(self.dim) - self.matrix)


def _max_abs(m: np.ndarray) -> float:
    return float(np.max(np.abs(m))) if m.size else 0.0


def _check_same_dims(a_dims: tuple[int, ...], b_dims: tuple[int, ...], what: str):
    if a_dims != b_dims:
        raise DimensionError(f"{what}: dims {a_dims} vs {b_dims}")


# ---------------------------------------------------------------------------
# Construction helpers


def basis_state(dims: Sequence[int], index: int) -> StateVector:
    """Joint basis vector |index> in row-major order over dims."""
    dims = _as_dims(dims)
    size = int(np.prod(dims))
    amps = np.zeros(size, dtype=np.complex128)
    amps[index] = 1.0
    return StateVector(dims, amps)


def projector_onto(state: StateVector) -> Projector:
    """Rank-one projector |s><s| / <s|s>."""
    amps = state.amplitudes
    n2 = float(np.vdot(amps, amps).real)
    if n2 <= NORM_FLOOR:
        raise NormalizationError("cannot project onto the zero vector")
    return Projector(state.dims, np.outer(amps, amps.conj()) / n2)


def identity_projector(dims: Sequence[int]) -> Projector:
    dims = _as_dims(dims)
    return Projector(dims, np.eye(int(np.prod(dims))))


def embed_operator(op: LinearOperator, subsystem: int, dims: Sequence[int]) -> LinearOperator:
    """Lift a single-subsystem operator to the joint space (identity elsewhere)."""
    dims = _as_dims(dims)
    if not 0 <= subsystem < len(dims):
        raise DimensionError(f"subsystem {subsystem} out of range for dims {dims}")
    if op.dim != dims[subsystem]:
        raise DimensionError(
            f"operator of dim {op.dim} cannot sit on subsystem {subsystem} (dim {dims[subsystem]})"
        )
    mat = np.eye(1, dtype=np.complex128)
    for site, d in enumerate(dims):
        mat = np.kron(mat, op.matrix if site == subsystem else np.eye(d))
    out = LinearOperator(dims, mat, hermitian=op.hermitian)
    return out


def embed_projector(p: Projector, subsystem: int, dims: Sequence[int]) -> Projector:
    return Projector(_as_dims(dims), embed_operator(p, subsystem, dims).matrix)


# ---------------------------------------------------------------------------
# Core operations


def tensor_product(a: StateVector, b: StateVector) -> StateVector:
    """Joint state with dims = a.dims + b.dims; amplitude(i,j) = a[i]*b[j]."""
    return StateVector(a.dims + b.dims, np.kron(a.amplitudes, b.amplitudes))


def normalize(s: StateVector) -> StateVector:
    """Rescale to unit norm; direction is preserved."""
    n2 = float(np.vdot(s.amplitudes, s.amplitudes).real)
    if n2 <= NORM_FLOOR:
        raise NormalizationError("cannot normalize a (numerically) zero vector")
    return StateVector(s.dims, s.amplitudes / np.sqrt(n2))


def _require_normalized(s: StateVector, what: str):
    if abs(s.norm() - 1.0) > 1e-6:
        raise NormalizationError(f"{what} requires a normalized state (norm={s.norm():.6g})")


def born_weight(s: StateVector, p: Projector) -> float:
    """<s|P|s>, clamped into [0, 1] when within tolerance of the boundary."""
    _check_same_dims(s.dims, p.dims, "born_weight")
    _require_normalized(s, "born_weight")
    val = complex(np.vdot(s.amplitudes, p.matrix @ s.amplitudes))
    if abs(val.imag) > ATOL_ALGEBRAIC:
        raise DimensionError(f"projector expectation has imaginary part {val.imag:.3e}")
    w = val.real
    if -ATOL_ALGEBRAIC <= w < 0.0:
        w = 0.0
    elif 1.0 < w <= 1.0 + ATOL_ALGEBRAIC:
        w = 1.0
    return w


def project_and_renormalize(s: StateVector, p: Projector) -> StateVector:
    """P|s> / ||P|s>||; raises NullOutcomeError when the branch weight vanishes."""
    _check_same_dims(s.dims, p.dims, "project_and_renormalize")
    projected = p.matrix @ s.amplitudes
    w = float(np.vdot(projected, projected).real)
    if w <= NULL_OUTCOME_FLOOR:
        raise NullOutcomeError(f"branch weight {w:.3e} is below the projection floor")
    return StateVector(s.dims, projected / np.sqrt(w))


def marginal_distribution(
    s: StateVector, subsystem: int, basis: Sequence[Projector]
) -> np.ndarray:
    """Outcome probabilities of a complete projector family on one subsystem.

    Computed by contracting the amplitude tensor directly, which keeps this
    route independent of `born_weight` on embedded projectors.
    """
    _require_normalized(s, "marginal_distribution")
    if not 0 <= subsystem < len(s.dims):
        raise DimensionError(f"subsystem {subsystem} out of range for dims {s.dims}")
    d_sub = s.dims[subsystem]
    total = np.zeros((d_sub, d_sub), dtype=np.complex128)
    for p in basis:
        if p.dim != d_sub:
            raise DimensionError(
                f"basis projector of dim {p.dim} does not fit subsystem of dim {d_sub}"
            )
        total += p.matrix
    if _max_abs(total - np.eye(d_sub)) > ATOL_ALGEBRAIC:
        raise CompletenessError("projector family does not sum to the identity")

    # Move the measured axis first: psi -> (d_sub, rest)
    mat = np.moveaxis(s.tensor(), subsystem, 0).reshape(d_sub, -1)
    probs = np.empty(len(basis))
    for i, p in enumerate(basis):
        probs[i] = float(np.sum(np.conj(mat) * (p.matrix @ mat)).real)
    np.clip(probs, 0.0, None, out=probs)
    if abs(probs.sum() - 1.0) > ATOL_ACCUMULATED:
        raise CompletenessError(f"marginal probabilities sum to {probs.sum():.12g}, not 1")
    return probs


class CommutatorResult(NamedTuple):
    max_abs: float
    same_site: bool


def local_commutator_norm(
    op_a: LinearOperator,
    op_b: LinearOperator,
    site_a: int,
    site_b: int,
    dims: Sequence[int],
) -> CommutatorResult:
    """Max-entry magnitude of [A, B] with A, B embedded at their sites.

    Operators on disjoint subsystems must commute to rounding; a same-site
    assignment is legal but flagged so callers can tell the cases apart.
    """
    a = embed_operator(op_a, site_a, dims)
    b = embed_operator(op_b, site_b, dims)
    comm = a.matrix @ b.matrix - b.matrix @ a.matrix
    return CommutatorResult(_max_abs(comm), site_a == site_b)


# ---------------------------------------------------------------------------
# Qubit utilities shared by the experiment harness

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128)


def analyzer_kets(theta: float) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvectors of spin along the direction at angle theta in the x-z plane."""
    plus = np.array([np.cos(theta / 2.0), np.sin(theta / 2.0)], dtype=np.complex128)
    minus = np.array([-np.sin(theta / 2.0), np.cos(theta / 2.0)], dtype=np.complex128)
    return plus, minus


def analyzer_projectors(theta: float) -> tuple[Projector, Projector]:
    """Complete (+, -) projector family for an analyzer at angle theta."""
    plus, minus = analyzer_kets(theta)
    return (
        Projector((2,), np.outer(plus, plus.conj())),
        Projector((2,), np.outer(minus, minus.conj())),
    )
