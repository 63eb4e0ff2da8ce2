"""Exact state algebra for small labeled composite Hilbert spaces.

Basis conventions used throughout the package:

* polarization subsystems are ordered (H, V);
* spatial subsystems are ordered (slit_0, ..., slit_{D-1});
* composite amplitudes are row-major over the declared subsystem order.

All state types are immutable values; operations return new objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

#: Norm / Hermiticity / trace tolerance shared across the package.
NORM_ATOL = 1e-10
#: Most negative eigenvalue a physical density operator may carry.
PSD_FLOOR = -1e-9
#: Tolerance for reconstruction-style identities (Schmidt resynthesis etc).
RECON_ATOL = 1e-8
#: Probability below which a projection is reported as a null result.
NULL_PROB = 1e-14

PHOTONS = ("signal", "idler")
DOFS = ("polarization", "spatial")


class NullProjectionError(ValueError):
    """Raised when a pipeline hits a zero-probability projection."""


@dataclass(frozen=True)
class SubsystemLabel:
    """Addresses one tensor factor: which photon, which degree of freedom."""

    photon: str
    dof: str
    dimension: int

    def __post_init__(self):
        if self.photon not in PHOTONS:
            raise ValueError(f"unknown photon {self.photon!r}, expected one of {PHOTONS}")
        if self.dof not in DOFS:
            raise ValueError(f"unknown dof {self.dof!r}, expected one of {DOFS}")
        if not isinstance(self.dimension, int) or self.dimension < 2:
            raise ValueError(f"dimension must be an integer >= 2, got {self.dimension!r}")
        if self.dof == "polarization" and self.dimension != 2:
            raise ValueError("polarization subsystems are two-dimensional")

    @property
    def key(self) -> tuple:
        return (self.photon, self.dof)

    def __str__(self) -> str:
        return f"{self.photon}.{self.dof}[{self.dimension}]"


class CompositeSpace:
    """Ordered list of subsystem labels defining a tensor-product space."""

    def __init__(self, labels: Sequence[SubsystemLabel]):
        labels = tuple(labels)
        keys = [lab.key for lab in labels]
        if len(set(keys)) != len(keys):
            raise ValueError(f"duplicate subsystem labels in {[str(l) for l in labels]}")
        self.labels = labels
        self.dims = tuple(lab.dimension for lab in labels)
        self.total_dimension = int(np.prod(self.dims)) if labels else 1

    def axis(self, label: SubsystemLabel) -> int:
        """Position of ``label`` in the declared order."""
        for i, lab in enumerate(self.labels):
            if lab.key == label.key:
                return i
        raise KeyError(f"label {label} not in space {self}")

    def __contains__(self, label: SubsystemLabel) -> bool:
        return any(lab.key == label.key for lab in self.labels)

    def without(self, labels: Sequence[SubsystemLabel]) -> "CompositeSpace":
        drop = {lab.key for lab in labels}
        return CompositeSpace([lab for lab in self.labels if lab.key not in drop])

    def __eq__(self, other) -> bool:
        return isinstance(other, CompositeSpace) and self.labels == other.labels

    def __hash__(self) -> int:
        return hash(self.labels)

    def __repr__(self) -> str:
        return "CompositeSpace(" + ", ".join(str(lab) for lab in self.labels) + ")"


def _as_complex_vector(amplitudes, size: int) -> np.ndarray:
    amps = np.array(amplitudes, dtype=complex).reshape(-1)
    if amps.size != size:
        raise ValueError(f"expected {size} amplitudes, got {amps.size}")
    amps.flags.writeable = False
    return amps


@dataclass(frozen=True)
class Ket:
    """Pure state: complex amplitude vector over a labeled composite space."""

    space: CompositeSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "amplitudes", _as_complex_vector(self.amplitudes, self.space.total_dimension)
        )

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "Ket":
        n = self.norm
        if n < math.sqrt(NULL_PROB):
            raise ValueError("cannot normalize a (near-)zero vector")
        return Ket(self.space, self.amplitudes / n)

    def overlap(self, other: "Ket") -> complex:
        """Inner product <self|other>; spaces must carry the same labels."""
        if self.space != other.space:
            raise ValueError("overlap requires identical spaces")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def to_density(self) -> "DensityOperator":
        amps = self.normalized().amplitudes
        return DensityOperator(self.space, np.outer(amps, amps.conj()))

    def canonicalized(self) -> "Ket":
        """Global phase fixed so the first non-negligible amplitude is real positive."""
        amps = self.normalized().amplitudes
        idx = np.flatnonzero(np.abs(amps) > 1e-12)
        if idx.size == 0:
            return Ket(self.space, amps)
        phase = amps[idx[0]] / abs(amps[idx[0]])
        return Ket(self.space, amps / phase)

    def reshaped(self) -> np.ndarray:
        return self.amplitudes.reshape(self.space.dims)


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, unit-trace, positive-semidefinite operator."""

    space: CompositeSpace
    matrix: np.ndarray

    def __post_init__(self):
        d = self.space.total_dimension
        mat = np.array(self.matrix, dtype=complex)
        if mat.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} matrix, got shape {mat.shape}")
        if not np.allclose(mat, mat.conj().T, atol=NORM_ATOL):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(mat).real - 1.0) > 1e-8 or abs(np.trace(mat).imag) > NORM_ATOL:
            raise ValueError(f"density matrix trace is {np.trace(mat)}, expected 1")
        if np.linalg.eigvalsh(mat).min() < PSD_FLOOR:
            raise ValueError("density matrix has a significantly negative eigenvalue")
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)

    @property
    def purity(self) -> float:
        return float(np.trace(self.matrix @ self.matrix).real)

    def eigen_mixture(self):
        """Eigen-decomposition as a list of (weight, Ket), tiny weights dropped."""
        vals, vecs = np.linalg.eigh(self.matrix)
        out = []
        for w, v in zip(vals[::-1], vecs.T[::-1]):
            if w > 1e-12:
                out.append((float(w), Ket(self.space, v)))
        return out


@dataclass(frozen=True)
class Projector:
    """Idempotent Hermitian operator, optionally tied to a composite space."""

    matrix: np.ndarray
    space: CompositeSpace | None = None
    name: str | None = None

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError("projector matrix must be square")
        if not np.allclose(mat, mat.conj().T, atol=NORM_ATOL):
            raise ValueError("projector is not Hermitian")
        if not np.allclose(mat @ mat, mat, atol=NORM_ATOL):
            raise ValueError("projector is not idempotent")
        if self.space is not None and mat.shape[0] != self.space.total_dimension:
            raise ValueError("projector dimension does not match its space")
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def from_vector(cls, vec, space: CompositeSpace | None = None, name: str | None = None):
        v = np.array(vec, dtype=complex).reshape(-1)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()), space=space, name=name)

    @classmethod
    def from_ket(cls, ket: Ket, name: str | None = None):
        return cls.from_vector(ket.amplitudes, space=ket.space, name=name)

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.matrix).real))

    def principal_vector(self) -> np.ndarray:
        """Unit vector spanning a rank-1 projector."""
        if self.rank != 1:
            raise ValueError("principal_vector requires a rank-1 projector")
        vals, vecs = np.linalg.eigh(self.matrix)
        return vecs[:, -1]


# ---------------------------------------------------------------------------
# operations


def tensor(factors: Sequence[Ket]) -> Ket:
    """Kronecker product of kets over disjointly labeled spaces."""
    if not factors:
        raise ValueError("tensor needs at least one factor")
    labels = []
    amps = np.array([1.0 + 0j])
    for f in factors:
        labels.extend(f.space.labels)
        amps = np.kron(amps, f.amplitudes)
    return Ket(CompositeSpace(labels), amps)


def embed_operator(space: CompositeSpace, op: np.ndarray, targets: Sequence[SubsystemLabel]) -> np.ndarray:
    """Lift an operator on ``targets`` (in the given order) to the full space."""
    op = np.asarray(op, dtype=complex)
    t_axes = [space.axis(lab) for lab in targets]
    if len(set(t_axes)) != len(t_axes):
        raise ValueError("duplicate target labels")
    dims = space.dims
    dt = int(np.prod([dims[i] for i in t_axes]))
    if op.shape != (dt, dt):
        raise ValueError(f"operator shape {op.shape} does not match target dimension {dt}")
    rest = [i for i in range(len(dims)) if i not in t_axes]
    dr = int(np.prod([dims[i] for i in rest])) if rest else 1
    full = np.kron(op, np.eye(dr))
    order = t_axes + rest
    perm = list(np.argsort(order))
    n = len(dims)
    tens = full.reshape([dims[o] for o in order] * 2)
    tens = tens.transpose(perm + [p + n for p in perm])
    return np.ascontiguousarray(tens.reshape(space.total_dimension, space.total_dimension))


def _check_unitary(U: np.ndarray, atol: float = NORM_ATOL):
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError("unitary must be a square matrix")
    if not np.allclose(U.conj().T @ U, np.eye(U.shape[0]), atol=max(atol, 1e-10)):
        raise ValueError("matrix is not unitary")
    return U


def apply_unitary(state, U, targets: Sequence[SubsystemLabel]):
    """Apply a unitary to the listed subsystems of a Ket or DensityOperator."""
    U = _check_unitary(U)
    full = embed_operator(state.space, U, targets)
    if isinstance(state, Ket):
        return Ket(state.space, full @ state.amplitudes)
    if isinstance(state, DensityOperator):
        return DensityOperator(state.space, full @ state.matrix @ full.conj().T)
    raise TypeError(f"unsupported state type {type(state)!r}")


def partial_trace(state, keep: Sequence[SubsystemLabel]) -> DensityOperator:
    """Trace out every subsystem not listed in ``keep`` (original order kept)."""
    if isinstance(state, Ket):
        state = state.to_density()
    space = state.space
    keep_axes = sorted(space.axis(lab) for lab in keep)
    if len(set(keep_axes)) != len(keep):
        raise ValueError("duplicate labels in keep list")
    dims = space.dims
    n = len(dims)
    tens = state.matrix.reshape(dims * 2)
    traced = 0
    for ax in range(n):
        if ax in keep_axes:
            continue
        cur = ax - traced
        m = n - traced
        tens = np.trace(tens, axis1=cur, axis2=cur + m)
        traced += 1
    new_space = CompositeSpace([space.labels[i] for i in keep_axes])
    d = new_space.total_dimension
    return DensityOperator(new_space, tens.reshape(d, d))


def project(state: Ket, P: Projector, targets: Sequence[SubsystemLabel] | None = None):
    """Born-rule projection of a pure state.

    Returns ``(ket, probability)``; a zero-probability outcome is flagged as
    ``(None, 0.0)`` rather than a NaN vector.
    """
    full = P.matrix if targets is None else embed_operator(state.space, P.matrix, targets)
    if full.shape[0] != state.space.total_dimension:
        raise ValueError("projector dimension does not match the state")
    projected = full @ state.amplitudes
    prob = float(np.vdot(state.amplitudes, projected).real)
    if prob <= NULL_PROB:
        return None, 0.0
    return Ket(state.space, projected / math.sqrt(prob)), prob


def project_subsystem(state, local_vector, label: SubsystemLabel):
    """Project one subsystem onto a local pure state and drop that factor.

    Works on kets and density operators; returns ``(reduced_state, probability)``
    with the reduced state renormalized, or ``(None, 0.0)``.
    """
    space = state.space
    ax = space.axis(label)
    loc = np.array(local_vector, dtype=complex).reshape(-1)
    if loc.size != space.dims[ax]:
        raise ValueError("local vector dimension mismatch")
    loc = loc / np.linalg.norm(loc)
    new_space = space.without([label])
    if isinstance(state, Ket):
        tens = state.reshaped()
        red = np.tensordot(loc.conj(), tens, axes=([0], [ax]))
        prob = float(np.sum(np.abs(red) ** 2))
        if prob <= NULL_PROB:
            return None, 0.0
        return Ket(new_space, red.reshape(-1) / math.sqrt(prob)), prob
    if isinstance(state, DensityOperator):
        n = len(space.dims)
        tens = state.matrix.reshape(space.dims * 2)
        red = np.tensordot(loc.conj(), tens, axes=([0], [ax]))
        # row axis removed; column axis shifted down by one
        red = np.tensordot(red, loc, axes=([ax + n - 1], [0]))
        d = new_space.total_dimension
        red = red.reshape(d, d)
        prob = float(np.trace(red).real)
        if prob <= NULL_PROB:
            return None, 0.0
        return DensityOperator(new_space, red / prob), prob
    raise TypeError(f"unsupported state type {type(state)!r}")


def schmidt_decompose(state: Ket, left: Sequence[SubsystemLabel]):
    """Schmidt decomposition across the (left | rest) bipartition.

    Returns ``(coefficients, pairs)`` with coefficients descending and pairs of
    (left, right) kets; terms below 1e-12 are dropped.
    """
    space = state.space
    left_axes = sorted(space.axis(lab) for lab in left)
    if not left_axes or len(left_axes) == len(space.dims):
        raise ValueError("bipartition must split the labels into two non-empty parts")
    right_axes = [i for i in range(len(space.dims)) if i not in left_axes]
    tens = state.normalized().reshaped().transpose(left_axes + right_axes)
    dl = int(np.prod([space.dims[i] for i in left_axes]))
    dr = int(np.prod([space.dims[i] for i in right_axes]))
    u, s, vh = np.linalg.svd(tens.reshape(dl, dr), full_matrices=False)
    left_space = CompositeSpace([space.labels[i] for i in left_axes])
    right_space = CompositeSpace([space.labels[i] for i in right_axes])
    coeffs, pairs = [], []
    for k in range(s.size):
        if s[k] > 1e-12:
            coeffs.append(float(s[k]))
            pairs.append((Ket(left_space, u[:, k]), Ket(right_space, vh[k, :])))
    return np.array(coeffs), pairs
