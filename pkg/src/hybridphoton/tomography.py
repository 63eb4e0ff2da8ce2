"""State reconstruction from counts: projector sets, linear inversion,
maximum-likelihood estimation, and parametric bootstrap error bars.

The estimator maximizes the per-row Poisson log-likelihood
``sum_k [n_k ln(lambda_k) - lambda_k]`` with ``lambda_k = s * Tr(P_k rho)``
over the positivity-preserving parametrization ``rho = T^dag T / Tr(T^dag T)``
(T lower-triangular complex). The overall exposure ``s`` is either supplied
or profiled out analytically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

from .core import CompositeSpace, DensityOperator, Projector
from .elements import polarization_mubs, spatial_qubit_mubs
from .measures import concurrence, fidelity
from .protocol import POL_IDLER, POL_SIGNAL, spatial_signal
from .simulate import CountsTable, child_seed

PROJECTOR_SET_KINDS = ("minimal16", "overcomplete36")
DOF_PAIRS = ("polarization-polarization", "polarization-spatial")

# index pattern (basis, element) per side for the 16-projector set; the
# resulting measurement matrix is verified nonsingular by construction tests
_MINIMAL16_PATTERN = [
    ((0, 0), (0, 0)), ((0, 0), (0, 1)), ((0, 1), (0, 1)), ((0, 1), (0, 0)),
    ((2, 0), (0, 0)), ((2, 0), (0, 1)), ((1, 0), (0, 1)), ((1, 0), (0, 0)),
    ((1, 0), (2, 0)), ((1, 0), (1, 0)), ((2, 0), (1, 0)), ((0, 0), (1, 0)),
    ((0, 1), (1, 0)), ((0, 1), (2, 1)), ((0, 0), (2, 1)), ((2, 0), (2, 1)),
]


@dataclass(frozen=True)
class ProjectorSet:
    """Named joint projectors spanning the two-qubit operator space."""

    kind: str
    dof_pair: str
    space: CompositeSpace
    ids: tuple
    matrices: tuple
    contexts: tuple  # index groups summing to the identity; empty if none

    def items(self):
        for pid, mat in zip(self.ids, self.matrices):
            yield pid, Projector(mat, space=self.space, name=pid)

    def __len__(self):
        return len(self.ids)

    def design_matrix(self) -> np.ndarray:
        d = self.space.total_dimension
        return np.array([m.T.reshape(d * d) for m in self.matrices])


def _sides(dof_pair: str):
    if dof_pair == "polarization-polarization":
        return polarization_mubs(), polarization_mubs(), CompositeSpace([POL_SIGNAL, POL_IDLER])
    if dof_pair == "polarization-spatial":
        # matches the hybrid-state ordering: idler polarization (x) signal slits
        return polarization_mubs(), spatial_qubit_mubs(), CompositeSpace(
            [POL_IDLER, spatial_signal(2)]
        )
    raise ValueError(f"unsupported dof pair {dof_pair!r}; expected one of {DOF_PAIRS}")


def build_projector_set(kind: str, dof_pair: str = "polarization-polarization") -> ProjectorSet:
    """Construct the 36-projector (all MUB pairs) or 16-projector set."""
    mubs_a, mubs_b, space = _sides(dof_pair)
    ids, matrices, contexts = [], [], []
    if kind == "overcomplete36":
        for basis_a in mubs_a:
            for basis_b in mubs_b:
                group = []
                for name_a, vec_a in basis_a:
                    for name_b, vec_b in basis_b:
                        joint = np.kron(vec_a, vec_b)
                        group.append(len(ids))
                        ids.append(f"{name_a}&{name_b}")
                        matrices.append(np.outer(joint, joint.conj()))
                contexts.append(tuple(group))
    elif kind == "minimal16":
        for (ba, ea), (bb, eb) in _MINIMAL16_PATTERN:
            name_a, vec_a = list(mubs_a[ba])[ea]
            name_b, vec_b = list(mubs_b[bb])[eb]
            joint = np.kron(vec_a, vec_b)
            ids.append(f"{name_a}&{name_b}")
            matrices.append(np.outer(joint, joint.conj()))
    else:
        raise ValueError(f"unknown projector set kind {kind!r}; expected {PROJECTOR_SET_KINDS}")
    pset = ProjectorSet(kind, dof_pair, space, tuple(ids), tuple(matrices), tuple(contexts))
    if np.linalg.matrix_rank(pset.design_matrix()) < space.total_dimension ** 2:
        raise ValueError("projector set does not span the operator space")
    return pset


def _values_from(counts) -> np.ndarray:
    if isinstance(counts, CountsTable):
        return counts.counts
    return np.asarray(counts, dtype=float)


def linear_inversion(counts, pset: ProjectorSet) -> np.ndarray:
    """Least-squares inversion of Tr(P_k rho) against counts or frequencies.

    Returns a Hermitian unit-trace matrix that may carry negative eigenvalues;
    callers decide whether to project it onto the physical cone.
    """
    values = _values_from(counts)
    if values.size != len(pset):
        raise ValueError("counts do not match the projector set")
    a = pset.design_matrix()
    if np.linalg.matrix_rank(a) < pset.space.total_dimension ** 2:
        raise ValueError("singular design matrix")
    sol, *_ = np.linalg.lstsq(a, values.astype(complex), rcond=None)
    d = pset.space.total_dimension
    sigma = sol.reshape(d, d)
    sigma = (sigma + sigma.conj().T) / 2.0
    trace = np.trace(sigma).real
    if abs(trace) < 1e-12:
        raise ValueError("inverted matrix has (near-)zero trace")
    return sigma / trace


def project_to_physical(matrix: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """Clip eigenvalues to a small positive floor and renormalize the trace."""
    vals, vecs = np.linalg.eigh((matrix + matrix.conj().T) / 2.0)
    vals = np.maximum(vals, floor)
    rho = (vecs * vals) @ vecs.conj().T
    return rho / np.trace(rho).real


# --- lower-triangular parametrization -------------------------------------


def _tri_indices(d: int):
    rows, cols = np.tril_indices(d, k=-1)
    return list(zip(rows.tolist(), cols.tolist()))


def _pack(t_matrix: np.ndarray) -> np.ndarray:
    d = t_matrix.shape[0]
    params = [t_matrix[i, i].real for i in range(d)]
    for r, c in _tri_indices(d):
        params.extend([t_matrix[r, c].real, t_matrix[r, c].imag])
    return np.array(params)


def _unpack(params: np.ndarray, d: int) -> np.ndarray:
    t = np.zeros((d, d), dtype=complex)
    t[np.diag_indices(d)] = params[:d]
    for k, (r, c) in enumerate(_tri_indices(d)):
        t[r, c] = params[d + 2 * k] + 1j * params[d + 2 * k + 1]
    return t


def _lower_factor(rho: np.ndarray) -> np.ndarray:
    """Lower-triangular T with T^dag T = rho (flip-reversed Cholesky)."""
    d = rho.shape[0]
    flip = np.eye(d)[::-1]
    upper = scipy.linalg.cholesky(flip @ rho @ flip + 1e-12 * np.eye(d), lower=False)
    return flip @ upper @ flip


@dataclass(frozen=True)
class ReconstructionResult:
    """MLE output: physical density estimate plus optimizer diagnostics."""

    rho_hat: DensityOperator
    log_likelihood: float
    ll_trace: tuple
    iterations: int
    converged: bool
    scale: float
    bootstrap: dict | None = None

    def to_json_dict(self, config_echo=None, seed=None) -> dict:
        mat = self.rho_hat.matrix
        doc = {
            "rho_real": [[float(v) for v in row] for row in mat.real],
            "rho_imag": [[float(v) for v in row] for row in mat.imag],
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "scale": self.scale,
            "bootstrap": self.bootstrap,
            "config": config_echo,
            "seed": seed,
        }
        return doc

    def write_json(self, path, config_echo=None, seed=None):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(config_echo, seed), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _poisson_nll_and_grad(params, stack, counts, d, exposure):
    t = _unpack(params, d)
    m = t.conj().T @ t
    tau = np.trace(m).real
    p = np.einsum("kij,ji->k", stack, m).real / tau
    p = np.maximum(p, 1e-14)
    s = exposure if exposure is not None else counts.sum() / p.sum()
    ll = float(np.sum(counts * np.log(s * p) - s * p))
    g = counts / p - s
    gp = np.einsum("k,kij->ij", g, stack)
    big_g = (gp - np.dot(g, p) * np.eye(d)) / tau
    w = 2.0 * (t @ big_g)
    grad = np.empty_like(params)
    grad[:d] = np.real(np.diag(w))
    for k, (r, c) in enumerate(_tri_indices(d)):
        grad[d + 2 * k] = w[r, c].real
        grad[d + 2 * k + 1] = w[r, c].imag
    return -ll, -grad, s


def mle_reconstruct(counts, pset: ProjectorSet, tol: float = 1e-12,
                    max_iter: int = 5000, exposure: float | None = None,
                    initial: np.ndarray | None = None) -> ReconstructionResult:
    """Maximum-likelihood reconstruction from a counts table.

    The optimizer is quasi-Newton on the triangular parameters with analytic
    gradients; accepted iterates are monotone in likelihood and the trace is
    recorded. Convergence means the relative likelihood change dropped below
    ``tol`` within ``max_iter`` iterations.
    """
    values = _values_from(counts)
    if values.size != len(pset):
        raise ValueError("counts do not match the projector set")
    d = pset.space.total_dimension
    stack = np.array(pset.matrices)
    if initial is None:
        initial = project_to_physical(linear_inversion(values, pset))
    x0 = _pack(_lower_factor(initial))

    trace: list = []

    def objective(x):
        nll, grad, _ = _poisson_nll_and_grad(x, stack, values, d, exposure)
        return nll, grad

    def callback(xk):
        nll, _, _ = _poisson_nll_and_grad(xk, stack, values, d, exposure)
        trace.append(-nll)

    nll0, _, _ = _poisson_nll_and_grad(x0, stack, values, d, exposure)
    trace.append(-nll0)
    res = minimize(objective, x0, jac=True, method="L-BFGS-B", callback=callback,
                   options={"ftol": tol, "gtol": 1e-12, "maxiter": max_iter, "maxcor": 20})
    nll_final, _, scale = _poisson_nll_and_grad(res.x, stack, values, d, exposure)
    t = _unpack(res.x, d)
    m = t.conj().T @ t
    rho = m / np.trace(m).real
    return ReconstructionResult(
        rho_hat=DensityOperator(pset.space, rho),
        log_likelihood=-nll_final,
        ll_trace=tuple(trace),
        iterations=int(res.nit),
        converged=bool(res.success) and res.nit < max_iter,
        scale=float(scale),
    )


def bootstrap_errors(result: ReconstructionResult, counts, pset: ProjectorSet,
                     n_resamples: int = 100, seed: int = 0,
                     target=None) -> ReconstructionResult:
    """Parametric bootstrap: redraw Poisson counts at the fitted means,
    re-estimate, and report standard errors of the metrics and of the
    density-matrix entries."""
    if n_resamples < 10:
        raise ValueError("need at least 10 bootstrap resamples")
    stack_p = np.array([
        float(np.trace(m @ result.rho_hat.matrix).real) for m in pset.matrices
    ])
    lam = result.scale * np.maximum(stack_p, 0.0)
    fids, concs, rhos = [], [], []
    for b in range(n_resamples):
        rng = np.random.default_rng(child_seed(seed, f"bootstrap{b:04d}"))
        redrawn = rng.poisson(lam).astype(float)
        boot = mle_reconstruct(redrawn, pset, exposure=None,
                               initial=result.rho_hat.matrix)
        rhos.append(boot.rho_hat.matrix)
        if target is not None:
            fids.append(fidelity(boot.rho_hat, target))
        if pset.space.total_dimension == 4:
            concs.append(concurrence(boot.rho_hat))
    rhos = np.array(rhos)
    info = {
        "n_resamples": n_resamples,
        "rho_real_std": rhos.real.std(axis=0).tolist(),
        "rho_imag_std": rhos.imag.std(axis=0).tolist(),
        "fidelity_std": float(np.std(fids)) if fids else None,
        "concurrence_std": float(np.std(concs)) if concs else None,
    }
    return replace(result, bootstrap=info)
