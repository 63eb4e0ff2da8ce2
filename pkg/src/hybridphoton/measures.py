"""Entanglement and quality metrics: fidelity, concurrence, negativity,
purity, interference visibility, and count-based concurrence estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DensityOperator, Ket, SubsystemLabel

_SIGMA_Y = np.array([[0, -1j], [1j, 0]])


def _as_density(state) -> DensityOperator:
    return state.to_density() if isinstance(state, Ket) else state


def fidelity(rho, target: Ket) -> float:
    """Overlap <target| rho |target> of a (possibly mixed) state with a pure
    target state."""
    rho = _as_density(rho)
    if rho.space.total_dimension != target.space.total_dimension:
        raise ValueError("state and target dimensions differ")
    psi = target.normalized().amplitudes
    value = complex(psi.conj() @ rho.matrix @ psi)
    if abs(value.imag) > 1e-10:
        raise ValueError("fidelity came out complex; inputs are inconsistent")
    return float(value.real)


def purity(rho) -> float:
    return _as_density(rho).purity


def concurrence(state) -> float:
    """Wootters concurrence of a two-qubit state.

    The Wootters lambdas are computed as the singular values of
    ``sqrt(rho) (sy x sy) sqrt(rho)^*``, which is algebraically equivalent to
    the usual square-rooted eigenvalues of ``rho rho~`` but avoids taking
    square roots of round-off-sized eigenvalues, keeping near-pure states
    accurate to machine precision.
    """
    rho = _as_density(state)
    if rho.space.total_dimension != 4:
        raise ValueError("concurrence is defined for 4-dimensional (two-qubit) states")
    vals, vecs = np.linalg.eigh(rho.matrix)
    if vals.min() < -1e-6:
        raise ValueError("density matrix is not physical")
    root = (vecs * np.sqrt(np.maximum(vals, 0.0))) @ vecs.conj().T
    yy = np.kron(_SIGMA_Y, _SIGMA_Y)
    lams = np.linalg.svd(root @ yy @ root.conj(), compute_uv=False)
    return float(max(0.0, lams[0] - lams[1] - lams[2] - lams[3]))


def negativity(state, keep: list[SubsystemLabel]) -> float:
    """Entanglement negativity (||rho^{T_A}||_1 - 1)/2 across the bipartition
    defined by transposing the ``keep`` subsystems."""
    rho = _as_density(state)
    space = rho.space
    axes = sorted(space.axis(lab) for lab in keep)
    if not axes or len(axes) == len(space.dims):
        raise ValueError("bipartition must be proper")
    n = len(space.dims)
    tens = rho.matrix.reshape(space.dims * 2)
    perm = list(range(2 * n))
    for ax in axes:
        perm[ax], perm[ax + n] = perm[ax + n], perm[ax]
    d = space.total_dimension
    pt = tens.transpose(perm).reshape(d, d)
    trace_norm = float(np.sum(np.abs(np.linalg.eigvalsh(pt))))
    return max(0.0, (trace_norm - 1.0) / 2.0)


@dataclass(frozen=True)
class PatternSummary:
    """Extrema of an interference pattern."""

    i_max: float
    i_min: float
    x_max: float = 0.0
    x_min: float = 0.0

    def __post_init__(self):
        if not (self.i_max >= self.i_min >= 0.0):
            raise ValueError("pattern extrema must satisfy I_max >= I_min >= 0")


def summarize_pattern(positions, values, fringe_period: float) -> PatternSummary:
    """Extract the central-fringe extrema from a sampled curve.

    The maximum is global; the minimum is searched within one fringe period
    of the maximum so the diffraction envelope does not masquerade as fringe
    contrast.
    """
    positions = np.asarray(positions, dtype=float)
    values = np.asarray(values, dtype=float)
    k_max = int(np.argmax(values))
    window = np.abs(positions - positions[k_max]) <= fringe_period
    k_min = int(np.flatnonzero(window)[np.argmin(values[window])])
    return PatternSummary(
        i_max=float(values[k_max]), i_min=float(max(values[k_min], 0.0)),
        x_max=float(positions[k_max]), x_min=float(positions[k_min]),
    )


def visibility(summary: PatternSummary) -> float:
    """Fringe visibility (I_max - I_min)/(I_max + I_min)."""
    if summary.i_max <= 0.0:
        raise ValueError("visibility is undefined for an all-zero pattern")
    return (summary.i_max - summary.i_min) / (summary.i_max + summary.i_min)


@dataclass(frozen=True)
class ConditionalCounts:
    """Integrated coincidences conditioned on the idler F and A projections."""

    counts_f: int
    counts_a: int

    def __post_init__(self):
        if self.counts_f < 0 or self.counts_a < 0:
            raise ValueError("counts must be nonnegative")


def concurrence_from_conditional_counts(data: ConditionalCounts) -> float:
    """Schmidt-weight concurrence estimate 2*sqrt(Nf*Na)/(Nf+Na).

    Valid for spatial states of the c|FF> + d|AA> form, where the conditional
    pattern totals estimate |c|^2 and |d|^2.
    """
    total = data.counts_f + data.counts_a
    if total == 0:
        raise ValueError("no counts in either conditional pattern")
    return 2.0 * math.sqrt(data.counts_f * data.counts_a) / total
