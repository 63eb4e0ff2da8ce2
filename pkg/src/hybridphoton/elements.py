"""Optical element models: waveplates, slit-mode families, the slit-array
polarization-controlled spatial gate, MUB catalogs, and far-field patterns.

Phase conventions (fixed once, used everywhere):

* a waveplate with retardance ``delta`` leaves its fast axis untouched and
  advances the slow axis by ``exp(i*delta)``;
* circular polarization is ``L = (H + i V)/sqrt(2)``, ``R = (H - i V)/sqrt(2)``;
  with the convention above a quarter-wave plate at 45 deg maps L onto H.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import hadamard

from .core import Ket

#: Tolerance for constructed element matrices (unitarity, orthonormality).
ELEMENT_ATOL = 1e-12

#: Qudit dimensions with a verified real 0/pi slit-phase mode family.
SUPPORTED_QUDIT_DIMENSIONS = (2, 4, 8)


@dataclass(frozen=True)
class WaveplateSpec:
    """Retarder described by retardance and fast-axis angle, both in radians."""

    retardance: float
    fast_axis_angle: float = 0.0


def _rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def waveplate_unitary(spec: WaveplateSpec) -> np.ndarray:
    """Jones matrix of a waveplate in the (H, V) basis."""
    r = _rotation(spec.fast_axis_angle)
    return r @ np.diag([1.0, np.exp(1j * spec.retardance)]) @ r.T


def quarter_waveplate(fast_axis_angle: float = 0.0) -> np.ndarray:
    return waveplate_unitary(WaveplateSpec(math.pi / 2, fast_axis_angle))


def half_waveplate(fast_axis_angle: float = 0.0) -> np.ndarray:
    return waveplate_unitary(WaveplateSpec(math.pi, fast_axis_angle))


def linear_polarizer_vector(angle: float) -> np.ndarray:
    """Transmission axis ket of a linear polarizer at ``angle`` radians from H."""
    return np.array([math.cos(angle), math.sin(angle)], dtype=complex)


# circular basis under the documented convention
KET_H = np.array([1.0, 0.0], dtype=complex)
KET_V = np.array([0.0, 1.0], dtype=complex)
KET_L = (KET_H + 1j * KET_V) / math.sqrt(2)
KET_R = (KET_H - 1j * KET_V) / math.sqrt(2)


@dataclass(frozen=True)
class OpticsGeometry:
    """Slit-aperture and detection geometry; lengths in meters.

    Defaults correspond to an 80 um slit width, 250 um center-to-center
    separation, 702 nm photons, a 300 mm Fourier lens and a 50 um detector
    slit.
    """

    slit_width: float = 80e-6
    slit_separation: float = 250e-6
    wavelength: float = 702e-9
    focal_length: float = 0.300
    slit_count: int = 2
    detector_slit_width: float = 50e-6
    scan_half_width: float = 5e-3

    def __post_init__(self):
        for field in ("slit_width", "slit_separation", "wavelength", "focal_length",
                      "detector_slit_width", "scan_half_width"):
            if getattr(self, field) <= 0:
                raise ValueError(f"{field} must be strictly positive")
        if self.slit_separation <= self.slit_width:
            raise ValueError("slit_separation must exceed slit_width")
        if self.slit_count < 2:
            raise ValueError("slit_count must be at least 2")

    @property
    def fringe_period(self) -> float:
        """Interference fringe period lambda*f/d at the Fourier plane."""
        return self.wavelength * self.focal_length / self.slit_separation

    @property
    def envelope_first_zero(self) -> float:
        """First zero lambda*f/w of the single-slit diffraction envelope."""
        return self.wavelength * self.focal_length / self.slit_width


class ModeFamily:
    """The D orthonormal balanced slit-superposition modes F_j.

    Mode j has slit amplitudes ``exp(i*phi[j, l]) / sqrt(D)`` with phases
    restricted to {0, pi}; negating the phases on slits n..D-1 (n = D/2) maps
    F_j onto F_{(j + n) mod D}.
    """

    def __init__(self, dimension: int, phases: np.ndarray):
        self.dimension = dimension
        self.phases = np.array(phases, dtype=float)
        if self.phases.shape != (dimension, dimension):
            raise ValueError("phase matrix must be D x D")
        if not np.all(np.isin(self.phases, (0.0, math.pi))):
            raise ValueError("slit phases must be 0 or pi")
        vecs = np.exp(1j * self.phases) / math.sqrt(dimension)
        gram = vecs @ vecs.conj().T
        if not np.allclose(gram, np.eye(dimension), atol=ELEMENT_ATOL):
            raise ValueError("mode vectors are not orthonormal")
        n = dimension // 2
        signs = np.concatenate([np.ones(n), -np.ones(dimension - n)])
        for j in range(dimension):
            if not np.allclose(vecs[j] * signs, vecs[(j + n) % dimension], atol=ELEMENT_ATOL):
                raise ValueError("mode family lacks the half-aperture pairing property")
        vecs.flags.writeable = False
        self.vectors = vecs
        self.pair_shift = n

    def mode(self, j: int) -> np.ndarray:
        """Slit-basis amplitudes of F_j."""
        return self.vectors[j % self.dimension]


@lru_cache(maxsize=None)
def mode_family(dimension: int) -> ModeFamily:
    """Build the mode family for an even qudit dimension.

    Only D in {2, 4, 8} is supported: a 0/pi phase family of D orthonormal
    modes is a real Hadamard matrix, which does not exist for D = 6 (or any
    D = 2 mod 4 above 2); odd D cannot pair modes at all.
    """
    if dimension % 2 != 0:
        raise ValueError(f"qudit dimension must be even, got {dimension}")
    if dimension not in SUPPORTED_QUDIT_DIMENSIONS:
        raise ValueError(
            f"no verified 0/pi mode construction for D={dimension}; "
            f"supported dimensions are {SUPPORTED_QUDIT_DIMENSIONS}"
        )
    h = hadamard(dimension)
    phases = np.where(h > 0, 0.0, math.pi)
    return ModeFamily(dimension, phases)


def sptq_cnot(dimension: int = 2) -> np.ndarray:
    """Single-photon polarization-controlled spatial gate on 2*D dimensions.

    Ordering is polarization (x) spatial, spatial part in the slit basis.
    The H block is the identity; the V block is i times the sign flip on the
    second half of the slits, which permutes F_j -> F_{(j + D/2) mod D}.
    """
    fam = mode_family(dimension)
    n = fam.pair_shift
    signs = np.concatenate([np.ones(n), -np.ones(dimension - n)])
    h_block = np.eye(dimension, dtype=complex)
    v_block = 1j * np.diag(signs).astype(complex)
    out = np.zeros((2 * dimension, 2 * dimension), dtype=complex)
    out[:dimension, :dimension] = h_block
    out[dimension:, dimension:] = v_block
    return out


def sptq_cnot_reversed() -> np.ndarray:
    """Qubit gate with spatial control and polarization target.

    Control is the F/A mode pair of a double slit (expressed in the slit
    basis); the polarization is flipped on the A branch, with no extra phase.
    Ordering is polarization (x) spatial.
    """
    fam = mode_family(2)
    f, a = fam.mode(0), fam.mode(1)
    pf = np.outer(f, f.conj())
    pa = np.outer(a, a.conj())
    x = np.array([[0, 1], [1, 0]], dtype=complex)
    return np.kron(np.eye(2, dtype=complex), pf) + np.kron(x, pa)


# ---------------------------------------------------------------------------
# mutually unbiased bases


@dataclass(frozen=True)
class Basis:
    """Named orthonormal basis of a qubit subsystem."""

    name: str
    element_names: tuple
    vectors: tuple  # of ndarray

    def __iter__(self):
        return iter(zip(self.element_names, self.vectors))


def polarization_mubs() -> list:
    """The three polarization MUBs: {H,V}, {(H+-V)/sqrt2}, {(H+-iV)/sqrt2}."""
    s = 1 / math.sqrt(2)
    return [
        Basis("pol_logical", ("H", "V"), (KET_H, KET_V)),
        Basis("pol_diagonal", ("Dp", "Dm"),
              (s * (KET_H + KET_V), s * (KET_H - KET_V))),
        Basis("pol_circular", ("L", "R"), (KET_L, KET_R)),
    ]


def spatial_qubit_mubs() -> list:
    """The three double-slit qubit MUBs: slit basis, {F,A}, {(F+-iA)/sqrt2}."""
    fam = mode_family(2)
    f, a = fam.mode(0), fam.mode(1)
    s = 1 / math.sqrt(2)
    return [
        Basis("slit", ("s0", "s1"),
              (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex))),
        Basis("mode", ("F", "A"), (f, a)),
        Basis("mode_circular", ("Fl", "Fr"), (s * (f + 1j * a), s * (f - 1j * a))),
    ]


# ---------------------------------------------------------------------------
# far-field diffraction


def _raw_farfield(amplitudes: np.ndarray, geometry: OpticsGeometry, x: np.ndarray) -> np.ndarray:
    """Unnormalized Fraunhofer amplitude of a slit-basis state at position x."""
    lam_f = geometry.wavelength * geometry.focal_length
    envelope = np.sinc(geometry.slit_width * x / lam_f)
    phases = np.exp(
        2j * math.pi * np.outer(x, np.arange(amplitudes.size)) * geometry.slit_separation / lam_f
    )
    return envelope * (phases @ amplitudes)


def _window_grid(geometry: OpticsGeometry, points: int = 4097) -> np.ndarray:
    return np.linspace(-geometry.scan_half_width, geometry.scan_half_width, points)


def _normalization(amplitudes: np.ndarray, geometry: OpticsGeometry) -> float:
    grid = _window_grid(geometry)
    intensity = np.abs(_raw_farfield(amplitudes, geometry, grid)) ** 2
    return float(np.trapezoid(intensity, grid))


def _spatial_amplitudes(spatial_state) -> np.ndarray:
    if isinstance(spatial_state, Ket):
        return spatial_state.normalized().amplitudes
    amps = np.array(spatial_state, dtype=complex).reshape(-1)
    return amps / np.linalg.norm(amps)


def farfield_amplitude(spatial_state, geometry: OpticsGeometry, x):
    """Far-field amplitude at detector position ``x`` (meters).

    Normalized so the intensity integrates to one over the scan window
    [-scan_half_width, scan_half_width].
    """
    amps = _spatial_amplitudes(spatial_state)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    value = _raw_farfield(amps, geometry, np.atleast_1d(x)) / math.sqrt(
        _normalization(amps, geometry)
    )
    return complex(value[0]) if scalar else value


def intensity_curve(spatial_state, geometry: OpticsGeometry, positions) -> np.ndarray:
    """Pointwise far-field intensity |A(x)|^2 of a pure slit-basis state."""
    positions = np.asarray(positions, dtype=float)
    return np.abs(farfield_amplitude(spatial_state, geometry, positions)) ** 2
