"""Stochastic measurement layer: Born probabilities, Poisson coincidence
counts, detector scans, and phenomenological imperfection models.

Determinism contract: identical inputs and seeds give bit-identical outputs;
every sampled row derives its own child seed from the master seed and the row
identifier, so results do not depend on evaluation order.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import (
    DensityOperator,
    Ket,
    Projector,
    embed_operator,
    partial_trace,
    project_subsystem,
)
from .elements import OpticsGeometry, WaveplateSpec, intensity_curve, mode_family, waveplate_unitary
from .protocol import (
    POL_SIGNAL,
    EraserSpec,
    SourceParams,
    hyper_source,
    run_irreversible,
    spatial_idler,
    spatial_signal,
    werner_mix,
)

COUNTS_CSV_COLUMNS = ("projector_id", "p_expected", "counts", "duration_s", "seed")


@dataclass(frozen=True)
class AcquisitionSpec:
    """Counting-run parameters: how long, how bright, which seed."""

    duration: float = 300.0
    pair_rate: float = 4.2
    background_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.duration < 0 or self.pair_rate < 0 or self.background_rate < 0:
            raise ValueError("duration and rates must be nonnegative")


@dataclass(frozen=True)
class NoiseSpec:
    """Phenomenological imperfections of the slit-array gate and the state."""

    qwp_offset_degrees: tuple = (0.0, 0.0)
    qwp_retardance_error: float = 0.0
    werner_p: float = 1.0

    def __post_init__(self):
        if len(self.qwp_offset_degrees) != 2:
            raise ValueError("qwp_offset_degrees must be a pair")
        if not 0.0 <= self.werner_p <= 1.0:
            raise ValueError("werner_p must lie in [0, 1]")


def child_seed(master: int, key: str) -> int:
    """Stable 64-bit per-row seed derived from the master seed and a row id."""
    digest = hashlib.sha256(f"{master}|{key}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def born_probability(state, projector: Projector, targets=None) -> float:
    """Expectation value of a projector on a Ket or DensityOperator."""
    full = projector.matrix if targets is None else embed_operator(
        state.space, projector.matrix, targets
    )
    if full.shape[0] != state.space.total_dimension:
        raise ValueError("projector dimension does not match the state")
    if isinstance(state, Ket):
        psi = state.normalized().amplitudes
        value = float(np.vdot(psi, full @ psi).real)
    else:
        value = float(np.trace(full @ state.matrix).real)
    return min(max(value, 0.0), 1.0)


def sample_counts(p: float, acq: AcquisitionSpec, key: str | None = None) -> int:
    """Poisson coincidence draw with mean p*rate*duration + background*duration."""
    if not 0.0 <= p <= 1.0 + 1e-12:
        raise ValueError("probability outside [0, 1]")
    mean = p * acq.pair_rate * acq.duration + acq.background_rate * acq.duration
    seed = acq.seed if key is None else child_seed(acq.seed, key)
    rng = np.random.default_rng(seed)
    return int(rng.poisson(mean))


@dataclass(frozen=True)
class CountRow:
    projector_id: str
    p_expected: float
    counts: int
    duration: float


@dataclass(frozen=True)
class CountsTable:
    """Per-projector simulated coincidence counts with acquisition metadata."""

    rows: tuple
    seed: int
    state_hash: str

    def __post_init__(self):
        for row in self.rows:
            if row.counts < 0 or not 0.0 <= row.p_expected <= 1.0:
                raise ValueError("invalid counts row")

    @property
    def counts(self) -> np.ndarray:
        return np.array([r.counts for r in self.rows], dtype=float)

    @property
    def expected(self) -> np.ndarray:
        return np.array([r.p_expected for r in self.rows], dtype=float)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(COUNTS_CSV_COLUMNS)
            for row in self.rows:
                writer.writerow([row.projector_id, repr(float(row.p_expected)),
                                 row.counts, repr(float(row.duration)), self.seed])

    @classmethod
    def read_csv(cls, path) -> "CountsTable":
        rows, seed = [], 0
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames) != COUNTS_CSV_COLUMNS:
                raise ValueError(f"unexpected counts CSV header {reader.fieldnames}")
            for rec in reader:
                seed = int(rec["seed"])
                rows.append(CountRow(rec["projector_id"], float(rec["p_expected"]),
                                     int(rec["counts"]), float(rec["duration_s"])))
        return cls(tuple(rows), seed, state_hash="")


def state_hash(state) -> str:
    data = state.amplitudes if isinstance(state, Ket) else state.matrix
    return hashlib.sha256(np.ascontiguousarray(data).tobytes()).hexdigest()[:16]


def tomography_counts(state, projector_set, acq: AcquisitionSpec,
                      noise: NoiseSpec | None = None) -> CountsTable:
    """Simulate a sequential tomography session over the projector set.

    ``acq.duration`` is the whole session; the projectors are measured one
    after another, so each row gets an equal share of it. Expected
    probabilities are evaluated on the noise-perturbed state (white mixing
    via ``werner_p``); counts are Poisson sampled independently per row with
    per-row derived seeds.
    """
    if noise is not None and noise.werner_p < 1.0:
        state = werner_mix(state, noise.werner_p)
    row_acq = replace(acq, duration=acq.duration / len(projector_set))
    rows = []
    for pid, projector in projector_set.items():
        p = born_probability(state, projector)
        n = sample_counts(p, row_acq, key=pid)
        rows.append(CountRow(pid, p, n, row_acq.duration))
    return CountsTable(tuple(rows), acq.seed, state_hash(state))


def noisy_slit_gate(noise: NoiseSpec, dimension: int = 2) -> np.ndarray:
    """Slit-array gate built from per-slit quarter-wave plates.

    Nominal fast axes are 0 deg on the first half of the slits and 90 deg on
    the second half; the second half carries a fixed -i path compensation so
    the noiseless gate is exactly the ideal one. Offsets (degrees) and a
    retardance error (radians) perturb the plates.
    """
    fam = mode_family(dimension)
    n = fam.pair_shift
    delta = math.pi / 2 + noise.qwp_retardance_error
    off0, off1 = (math.radians(v) for v in noise.qwp_offset_degrees)
    gate = np.zeros((2 * dimension, 2 * dimension), dtype=complex)
    for slit in range(dimension):
        if slit < n:
            jones = waveplate_unitary(WaveplateSpec(delta, off0))
        else:
            jones = -1j * waveplate_unitary(WaveplateSpec(delta, math.pi / 2 + off1))
        proj = np.zeros((dimension, dimension))
        proj[slit, slit] = 1.0
        gate += np.kron(jones, proj)
    return gate


def perturbed_pipeline(params: SourceParams, spec: EraserSpec,
                       noise: NoiseSpec, dimension: int = 2):
    """Run the irreversible pipeline with imperfect per-slit waveplates.

    Returns ``(rho, result)``: the final density operator (after white-noise
    mixing) and the underlying pipeline bookkeeping.
    """
    source = hyper_source(params, dimension)
    result = run_irreversible(source, spec, cnot=noisy_slit_gate(noise, dimension))
    if result.null_projection:
        return None, result
    rho = werner_mix(result.final_state, noise.werner_p)
    return rho, result


# ---------------------------------------------------------------------------
# detector scans


def _spatial_mixture(state, signal_label):
    """Decompose a (possibly mixed) spatial state into [(weight, amplitudes)]."""
    if isinstance(state, Ket):
        return [(1.0, state.normalized().amplitudes)]
    return [(w, k.amplitudes) for w, k in state.eigen_mixture()]


def detector_convolved_intensity(mixture, geometry: OpticsGeometry, positions) -> np.ndarray:
    """Far-field intensity density averaged over the detector slit width."""
    positions = np.asarray(positions, dtype=float)
    nodes, weights = np.polynomial.legendre.leggauss(7)
    half = geometry.detector_slit_width / 2.0
    out = np.zeros_like(positions)
    for w_state, amps in mixture:
        for node, w_quad in zip(nodes, weights):
            out += w_state * (w_quad / 2.0) * intensity_curve(
                amps, geometry, positions + node * half
            )
    return out


@dataclass(frozen=True)
class ScanCurve:
    """Sampled detector scan: expected intensity density and Poisson counts."""

    positions: np.ndarray
    intensity: np.ndarray
    expected_counts: np.ndarray
    counts: np.ndarray
    conditioning_probability: float
    seed: int

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["position_mm", "intensity_expected", "counts"])
            for x, i, n in zip(self.positions, self.intensity, self.counts):
                writer.writerow([repr(float(x) * 1e3), repr(float(i)), int(n)])


def scan_run(state, geometry: OpticsGeometry, positions, acq: AcquisitionSpec,
             conditioning=None) -> ScanCurve:
    """Scan the signal detector across the far field.

    ``state`` is a two-photon spatial state (signal, idler slit modes) or a
    signal-only spatial state. ``conditioning`` projects the idler onto the
    given mode amplitudes first; with no conditioning the idler is traced out
    and the marginal (generally mixed) signal state is scanned.
    """
    positions = np.asarray(positions, dtype=float)
    if np.any(np.diff(positions) <= 0):
        raise ValueError("positions must be strictly increasing")
    dim = geometry.slit_count
    prob = 1.0
    signal_label = spatial_signal(dim)
    if spatial_idler(dim) in state.space:
        if conditioning is not None:
            reduced, prob = project_subsystem(state, np.asarray(conditioning, dtype=complex),
                                              spatial_idler(dim))
            if reduced is None:
                raise ValueError("conditioning projection has zero probability")
        else:
            reduced = partial_trace(state, [signal_label])
    else:
        reduced = state
    mixture = _spatial_mixture(reduced, signal_label)
    intensity = detector_convolved_intensity(mixture, geometry, positions)
    mean = (prob * acq.pair_rate * acq.duration * intensity * geometry.detector_slit_width
            + acq.background_rate * acq.duration)
    counts = np.array([
        np.random.default_rng(child_seed(acq.seed, f"x{k:05d}")).poisson(m)
        for k, m in enumerate(mean)
    ])
    return ScanCurve(positions, intensity, mean, counts, prob, acq.seed)
