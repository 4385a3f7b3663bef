"""Driven Jaynes-Cummings Hamiltonian, Lindblad generator, steady states and
time evolution.

Density matrices are vectorized column by column (Fortran order), so
``vec(A X B) = (B^T (x) A) vec(X)``.  The generator is kept as a sparse CSC
matrix because it has only a few nonzeros per row even for large cutoffs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse.linalg import expm_multiply, splu

from .errors import (
    CutoffOverflowError,
    DegenerateSteadyStateError,
    InvalidCutoffError,
    PropagationError,
    SolverError,
)
from .hilbert import CompositeSpace, OperatorMatrix, composite_operators
from .params import SystemParams

STATE_ATOL = 1e-10
PROPAGATED_ATOL = 1e-8
POSITIVITY_ATOL = 1e-8
STEADY_RESIDUAL_RTOL = 1e-10
RK_RTOL = 1e-10
PIVOT_RTOL = 1e-12
RK_ATOL = 1e-13


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Validated density matrix on a :class:`CompositeSpace`.

    Parameters
    ----------
    entries : array_like
        ``d x d`` complex matrix.
    space : CompositeSpace
    atol : float
        Tolerance for Hermiticity and unit trace.  Eigenvalues must exceed
        ``-1e-8`` regardless.
    """

    entries: np.ndarray
    space: CompositeSpace
    atol: float = STATE_ATOL

    def __post_init__(self):
        m = np.array(self.entries, dtype=complex)
        d = self.space.dim
        if m.shape != (d, d):
            raise ValueError(f"density matrix must be {d}x{d}, got {m.shape}")
        herm_dev = np.max(np.abs(m - m.conj().T))
        if herm_dev > self.atol:
            raise ValueError(f"density matrix not Hermitian (deviation {herm_dev:.3e})")
        tr = np.trace(m)
        if abs(tr - 1) > self.atol:
            raise ValueError(f"density matrix trace {tr:.12g} differs from 1")
        lowest = np.linalg.eigvalsh((m + m.conj().T) / 2)[0]
        if lowest < -POSITIVITY_ATOL:
            raise ValueError(f"density matrix has negative eigenvalue {lowest:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @classmethod
    def pure(cls, space: CompositeSpace, excited: bool, n: int) -> "DensityMatrix":
        return cls(space.basis_projector(excited, n), space)

    def expect(self, op) -> complex:
        return complex(np.trace(np.asarray(op) @ self.entries))

    def vec(self) -> np.ndarray:
        return vec(self.entries)

    def trace_distance(self, other: "DensityMatrix") -> float:
        diff = self.entries - other.entries
        return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2))))

    def fock_populations(self) -> np.ndarray:
        """Photon-number distribution with the emitter traced out."""
        diag = np.real(np.diag(self.entries)).reshape(2, self.space.fock_dim)
        return diag.sum(axis=0)


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """Sparse generator acting on column-vectorized density matrices."""

    generator: sp.csc_matrix
    params: SystemParams
    space: CompositeSpace

    @property
    def dim(self) -> int:
        return self.space.dim

    def apply(self, rho) -> np.ndarray:
        """Return ``L rho`` as a ``d x d`` matrix."""
        return unvec(self.generator @ vec(np.asarray(rho)), self.dim)

    def dense(self) -> np.ndarray:
        return self.generator.toarray()

    def norm(self) -> float:
        return float(sp.linalg.norm(self.generator))


def hamiltonian(p: SystemParams, space: CompositeSpace) -> OperatorMatrix:
    """Rotating-frame Hamiltonian of the coherently driven emitter-cavity system."""
    ops = composite_operators(space)
    a, sm, sp_ = ops.a.entries, ops.sigma_minus.entries, ops.sigma_plus.entries
    ad = a.conj().T
    h = (
        p.delta_c * ad @ a
        + p.delta_qd * sp_ @ sm
        + 1j * p.g * (sp_ @ a - ad @ sm)
        + 1j * np.sqrt(p.kappa1) * p.a_in * (a - ad)
    )
    # remove rounding asymmetry so the Hermitian flag check is exact
    h = (h + h.conj().T) / 2
    return OperatorMatrix(h, "composite", space.n_max, hermitian=True)


def _dissipator(x: sp.spmatrix, ident: sp.spmatrix) -> sp.spmatrix:
    xdx = x.conj().T @ x
    return sp.kron(x.conj(), x) - 0.5 * sp.kron(ident, xdx) - 0.5 * sp.kron(xdx.T, ident)


def liouvillian(p: SystemParams, space: CompositeSpace) -> Liouvillian:
    """Lindblad generator with cavity decay, emitter decay and pure dephasing.

    The dephasing term is ``(gamma_star/2)(sigma_z rho sigma_z - rho)``.
    """
    ops = composite_operators(space)
    d = space.dim
    ident = sp.identity(d, dtype=complex, format="csr")
    h = sp.csr_matrix(hamiltonian(p, space).entries)
    a = sp.csr_matrix(ops.a.entries)
    sm = sp.csr_matrix(ops.sigma_minus.entries)
    sz = sp.csr_matrix(ops.sigma_z.entries)

    gen = -1j * (sp.kron(ident, h) - sp.kron(h.T, ident))
    gen = gen + p.kappa * _dissipator(a, ident)
    gen = gen + p.gamma_par * _dissipator(sm, ident)
    gen = gen + (p.gamma_star / 2) * (sp.kron(sz.conj(), sz) - sp.identity(d * d))
    gen = sp.csc_matrix(gen, dtype=complex)
    gen.eliminate_zeros()
    return Liouvillian(gen, p, space)


def steady_state(L: Liouvillian) -> DensityMatrix:
    """Unique stationary state from a sparse LU solve.

    The first row of the generator is replaced by the trace functional so the
    linear system is nonsingular exactly when the kernel is one-dimensional.
    A vanishing LU pivot (relative size below 1e-12) flags a larger kernel.

    Raises
    ------
    DegenerateSteadyStateError
        If the replaced system is singular, i.e. the kernel has dimension > 1.
    SolverError
        If the residual exceeds ``1e-10 * ||L||_F``.
    """
    d = L.dim
    m = L.generator.tolil(copy=True)
    m[0, :] = vec(np.eye(d)).reshape(1, -1)
    rhs = np.zeros(d * d, dtype=complex)
    rhs[0] = 1.0
    try:
        lu = splu(sp.csc_matrix(m))
    except RuntimeError as exc:
        raise DegenerateSteadyStateError(
            f"steady-state kernel is not one-dimensional ({exc})"
        ) from None
    pivots = np.abs(lu.U.diagonal())
    if pivots.min() <= PIVOT_RTOL * pivots.max():
        raise DegenerateSteadyStateError(
            f"steady-state kernel is not one-dimensional "
            f"(pivot ratio {pivots.min() / pivots.max():.2e})"
        )
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise DegenerateSteadyStateError("steady-state solve produced non-finite values")
    rho = unvec(x, d)
    rho = (rho + rho.conj().T) / 2
    rho = rho / np.trace(rho).real
    residual = float(np.linalg.norm(L.generator @ vec(rho)))
    scale = L.norm()
    if residual > STEADY_RESIDUAL_RTOL * max(scale, 1.0):
        raise SolverError(
            f"steady-state residual {residual:.3e} exceeds {STEADY_RESIDUAL_RTOL:g} * ||L||",
            residual=residual,
        )
    try:
        return DensityMatrix(rho, L.space)
    except ValueError as exc:
        raise SolverError(f"steady state failed validation: {exc}", residual=residual) from None


def _uniform(times: np.ndarray) -> bool:
    if len(times) < 3:
        return True
    steps = np.diff(times)
    return bool(np.allclose(steps, steps[0], rtol=1e-9, atol=0))


def propagate_vector(generator, x0: np.ndarray, times, method: str = "rk") -> np.ndarray:
    """Evolve a vectorized operator under ``exp(L t)``.

    Returns an array of shape ``(len(times), d*d)``.  ``method`` is ``"rk"``
    (adaptive DOP853, relative tolerance 1e-10) or ``"expm"`` (Krylov-free
    truncated Taylor action of the matrix exponential).
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or len(times) == 0:
        raise ValueError("times must be a non-empty 1-D grid")
    if times[0] < 0 or np.any(np.diff(times) < 0):
        raise ValueError("times must be ascending and start at t >= 0")
    x0 = np.asarray(x0, dtype=complex)
    if method == "expm":
        return _propagate_expm(generator, x0, times)
    if method == "rk":
        return _propagate_rk(generator, x0, times)
    raise ValueError(f"unknown propagation method {method!r}")


def _propagate_expm(generator, x0, times):
    start = expm_multiply(generator * times[0], x0) if times[0] > 0 else x0
    if len(times) == 1:
        return start[None, :]
    if _uniform(times):
        return expm_multiply(
            generator, start, start=0.0, stop=times[-1] - times[0], num=len(times), endpoint=True
        )
    out = np.empty((len(times), len(x0)), dtype=complex)
    out[0] = start
    for i in range(1, len(times)):
        dt = times[i] - times[i - 1]
        out[i] = expm_multiply(generator * dt, out[i - 1]) if dt > 0 else out[i - 1]
    return out


def _propagate_rk(generator, x0, times):
    if times[-1] == 0:
        return np.tile(x0, (len(times), 1))
    sol = solve_ivp(
        lambda _t, y: generator @ y,
        (0.0, float(times[-1])),
        x0,
        method="DOP853",
        t_eval=times,
        rtol=RK_RTOL,
        atol=RK_ATOL,
    )
    if sol.status != 0:
        t_reached = float(sol.t[-1]) if len(sol.t) else 0.0
        raise PropagationError(f"integrator stopped: {sol.message}", t_reached=t_reached)
    return sol.y.T


def propagate(L: Liouvillian, rho0: DensityMatrix, times, method: str = "rk") -> list[DensityMatrix]:
    """Density matrices ``exp(L t) rho0`` on an ascending time grid.

    Trace is not renormalized; a drift beyond 1e-8 raises
    :class:`PropagationError` instead of being hidden.
    """
    times = np.asarray(times, dtype=float)
    traj = propagate_vector(L.generator, rho0.vec(), times, method=method)
    out = []
    for t, x in zip(times, traj):
        try:
            out.append(DensityMatrix(unvec(x, L.dim), L.space, atol=PROPAGATED_ATOL))
        except ValueError as exc:
            raise PropagationError(f"state invalid at t={t:g} ns: {exc}", t_reached=float(t)) from None
    return out


def solve(p: SystemParams, n_max: int) -> tuple[Liouvillian, DensityMatrix]:
    """Convenience wrapper returning the generator and its steady state."""
    L = liouvillian(p, CompositeSpace(n_max))
    return L, steady_state(L)


def _intracavity_g2(rho: DensityMatrix) -> float:
    pops = rho.fock_populations()
    n = np.arange(len(pops))
    mean_n = float(np.sum(n * pops))
    return float(np.sum(n * (n - 1) * pops)) / mean_n**2


def choose_cutoff(p: SystemParams, tail_tol: float = 1e-10, cap: int = 48) -> int:
    """Smallest Fock cutoff with a converged steady state.

    The criteria are a population below ``tail_tol`` in the top two Fock
    levels, and a change below 0.1% in the zero-delay cavity-mode ``g2`` when
    the cutoff grows by 2.  The transmitted field is proportional to the
    cavity mode, so its ``g2(0)`` is the same number.

    Raises
    ------
    CutoffOverflowError
        If no cutoff up to ``cap`` satisfies both criteria.
    """
    if not tail_tol > 0:
        raise InvalidCutoffError("tail_tol must be positive")
    if p.a_in == 0:
        return 1
    cache: dict[int, DensityMatrix] = {}

    def state(n):
        if n not in cache:
            cache[n] = solve(p, n)[1]
        return cache[n]

    n = 2
    while n <= cap:
        pops = state(n).fock_populations()
        if pops[-2:].sum() < tail_tol:
            if n + 2 > cap:
                break
            g_lo = _intracavity_g2(state(n))
            g_hi = _intracavity_g2(state(n + 2))
            if abs(g_hi - g_lo) <= 1e-3 * abs(g_hi):
                return n
        n += 1
    raise CutoffOverflowError(
        f"no Fock cutoff <= {cap} converges (drive too strong for this engine)"
    )
