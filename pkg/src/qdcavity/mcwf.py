"""Monte-Carlo wave-function oracle for steady-state moments.

Each trajectory evolves an unnormalized state under the effective
Hamiltonian ``H_eff = H - (i/2) sum_k C_k^dag C_k`` with jump operators
``sqrt(kappa) a``, ``sqrt(gamma_par) sigma_-`` and
``sqrt(gamma_star/2) sigma_z``.  A jump fires when the squared norm drops
below a uniform random threshold.  The jump time is refined by bisection
to ``1e-6`` ns, and the channel is drawn with probabilities
``||C_k psi||^2``.

Trajectories run in vectorized batches.  Batch ``b`` draws from
``Philox(seed).jumped(b)``, so results do not depend on the number of
worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np
import scipy.linalg as sla

from .correlations import DetectionField
from .errors import TrajectoryError, UndefinedNormalizationError
from .hilbert import CompositeSpace, composite_operators
from .lindblad import hamiltonian
from .params import SystemParams

JUMP_TIME_TOL = 1e-6
NORM_FLOOR = 1e-280
EIG_COND_MAX = 1e8
BATCH_SIZE = 500

MOMENT_NAMES = ("a", "n", "a2", "ada2", "ad2a2", "pe", "sz")


@dataclass(frozen=True)
class TrajectoryConfig:
    """Run settings.

    Attributes
    ----------
    n_traj : int
        Number of trajectories.
    t_end : float
        Horizon in ns.
    dt_max : float
        Propagation step and sampling interval in ns.  The no-jump
        propagator is exact, so this only sets how densely the time
        average is sampled.
    seed : int
        64-bit seed of the counter-based generator.
    burn_in : float
        Fraction of the horizon discarded before averaging.
    """

    n_traj: int
    t_end: float
    dt_max: float = 0.01
    seed: int = 0
    burn_in: float = 0.1

    def __post_init__(self):
        if int(self.n_traj) != self.n_traj or self.n_traj < 1:
            raise ValueError("n_traj must be a positive integer")
        if not self.t_end > 0 or not self.dt_max > 0:
            raise ValueError("t_end and dt_max must be positive")
        if not 0 <= self.burn_in < 1:
            raise ValueError("burn_in must lie in [0, 1)")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True, eq=False)
class MomentEstimate:
    """Trajectory estimates of stationary moments.

    ``samples`` holds one time-averaged value per trajectory and moment, in
    the order of :data:`MOMENT_NAMES`: ``<a>``, ``<a^dag a>``, ``<a^2>``,
    ``<a^dag a^2>``, ``<a^dag2 a^2>``, ``<sigma_+ sigma_->`` and
    ``<sigma_z>``.  ``jump_rates`` holds per-trajectory jump rates (1/ns)
    for the cavity, emitter-decay and dephasing channels.
    """

    samples: np.ndarray
    jump_rates: np.ndarray
    config: TrajectoryConfig
    params: SystemParams
    meta: dict = dc_field(default_factory=dict)

    def mean(self, name: str) -> complex:
        return complex(np.mean(self.samples[:, MOMENT_NAMES.index(name)]))

    def stderr(self, name: str) -> complex:
        col = self.samples[:, MOMENT_NAMES.index(name)]
        n = len(col)
        if n < 2:
            return complex(np.nan, np.nan)
        return complex(np.std(col.real, ddof=1), np.std(col.imag, ddof=1)) / np.sqrt(n)

    def jump_rate(self, channel: int) -> tuple[float, float]:
        col = self.jump_rates[:, channel]
        err = np.std(col, ddof=1) / np.sqrt(len(col)) if len(col) > 1 else np.nan
        return float(np.mean(col)), float(err)

    def summary(self) -> dict:
        return {name: (self.mean(name), self.stderr(name)) for name in MOMENT_NAMES}


class _NoJumpPropagator:
    """``exp(-i H_eff s)`` for many states and per-state durations."""

    def __init__(self, heff: np.ndarray):
        self.heff = heff
        evals, vecs = np.linalg.eig(heff)
        self.use_eig = np.linalg.cond(vecs) < EIG_COND_MAX
        if self.use_eig:
            self.evals = evals
            self.vecs = vecs
            self.inv = np.linalg.inv(vecs)
        self._cache: dict[float, np.ndarray] = {}

    def matrix(self, s: float) -> np.ndarray:
        if s not in self._cache:
            if self.use_eig:
                self._cache[s] = (self.vecs * np.exp(-1j * self.evals * s)) @ self.inv
            else:
                self._cache[s] = sla.expm(-1j * self.heff * s)
        return self._cache[s]

    def coefficients(self, psi: np.ndarray) -> np.ndarray:
        return self.inv @ psi if self.use_eig else psi

    def apply(self, coeffs: np.ndarray, s: np.ndarray) -> np.ndarray:
        """Evolve each column by its own duration ``s[j]``."""
        if self.use_eig:
            return self.vecs @ (np.exp(-1j * self.evals[:, None] * s[None, :]) * coeffs)
        return np.stack([sla.expm(-1j * self.heff * sj) @ coeffs[:, j]
                         for j, sj in enumerate(s)], axis=1)


def _norm2(psi: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->j", psi.conj(), psi).real


def moment_operators(space: CompositeSpace) -> list[np.ndarray]:
    """Matrices of the moments in :data:`MOMENT_NAMES`, in that order."""
    ops = composite_operators(space)
    a = ops.a.entries
    ad = a.conj().T
    return [a, ad @ a, a @ a, ad @ a @ a, ad @ ad @ a @ a,
            ops.sigma_plus.entries @ ops.sigma_minus.entries, ops.sigma_z.entries]


class _Engine:
    def __init__(self, p: SystemParams, space: CompositeSpace):
        ops = composite_operators(space)
        a = ops.a.entries
        sm = ops.sigma_minus.entries
        sz = ops.sigma_z.entries
        self.space = space
        self.jumps = [np.sqrt(p.kappa) * a, np.sqrt(p.gamma_par) * sm,
                      np.sqrt(p.gamma_star / 2) * sz]
        decay = sum(c.conj().T @ c for c in self.jumps)
        self.prop = _NoJumpPropagator(hamiltonian(p, space).entries - 0.5j * decay)
        self.moment_ops = moment_operators(space)

    def moments(self, psi: np.ndarray) -> np.ndarray:
        norm = _norm2(psi)
        out = np.empty((len(self.moment_ops), psi.shape[1]), dtype=complex)
        for k, op in enumerate(self.moment_ops):
            out[k] = np.einsum("ij,ij->j", psi.conj(), op @ psi) / norm
        return out

    def _jump(self, psi: np.ndarray, rng: np.random.Generator):
        weights = np.array([_norm2(c @ psi) for c in self.jumps])
        cum = np.cumsum(weights, axis=0)
        draw = rng.random(psi.shape[1]) * cum[-1]
        channel = np.minimum((draw[None, :] >= cum).sum(axis=0), len(self.jumps) - 1)
        out = np.empty_like(psi)
        for k, c in enumerate(self.jumps):
            sel = channel == k
            if np.any(sel):
                out[:, sel] = c @ psi[:, sel]
        norms = _norm2(out)
        if np.any(norms <= NORM_FLOOR) or not np.all(np.isfinite(norms)):
            raise TrajectoryError("jump produced a null state")
        return out / np.sqrt(norms), channel

    def _find_jump_time(self, psi0, rem, thresh):
        """Bisect for ``||U(s) psi0||^2 = thresh`` on ``s in (0, rem]``."""
        coeffs = self.prop.coefficients(psi0)
        lo = np.zeros_like(rem)
        hi = rem.copy()
        while np.max(hi - lo) > JUMP_TIME_TOL:
            mid = 0.5 * (lo + hi)
            below = _norm2(self.prop.apply(coeffs, mid)) < thresh
            hi = np.where(below, mid, hi)
            lo = np.where(below, lo, mid)
        s = 0.5 * (lo + hi)
        return s, self.prop.apply(coeffs, s)

    def step(self, psi, thresh, h, rng, t0, count_after, counts):
        """Advance all columns by ``h`` ns, firing any number of jumps."""
        out = self.prop.matrix(h) @ psi
        norms = _norm2(out)
        if not np.all(np.isfinite(norms)) or np.any(norms <= NORM_FLOOR):
            raise TrajectoryError("state norm underflowed between jumps")
        idx = np.flatnonzero(norms < thresh)
        start = psi[:, idx]
        rem = np.full(len(idx), h)
        elapsed = np.zeros(len(idx))
        while len(idx):
            s, at_jump = self._find_jump_time(start, rem, thresh[idx])
            jumped, channel = self._jump(at_jump, rng)
            elapsed = elapsed + s
            mask = t0 + elapsed >= count_after
            np.add.at(counts, (idx[mask], channel[mask]), 1)
            thresh[idx] = rng.random(len(idx))
            rem = rem - s
            coeffs = self.prop.coefficients(jumped)
            moved = self.prop.apply(coeffs, rem)
            out[:, idx] = moved
            again = _norm2(moved) < thresh[idx]
            idx, start, rem, elapsed = idx[again], jumped[:, again], rem[again], elapsed[again]
        return out


def _ground_states(space: CompositeSpace, n: int) -> np.ndarray:
    psi = np.zeros((space.dim, n), dtype=complex)
    psi[space.index(False, 0)] = 1.0
    return psi


def _run_batch(engine: _Engine, cfg: TrajectoryConfig, n: int, batch: int):
    rng = np.random.Generator(np.random.Philox(int(cfg.seed)).jumped(batch))
    psi = _ground_states(engine.space, n)
    thresh = rng.random(n)
    n_steps = int(np.ceil(cfg.t_end / cfg.dt_max - 1e-9))
    h = cfg.t_end / n_steps
    first = int(np.ceil(cfg.burn_in * n_steps - 1e-9))
    t_burn = first * h
    counts = np.zeros((n, len(engine.jumps)))
    acc = np.zeros((len(engine.moment_ops), n), dtype=complex)
    n_samples = 0
    if first == 0:
        acc += engine.moments(psi)
        n_samples += 1
    for k in range(n_steps):
        psi = engine.step(psi, thresh, h, rng, k * h, t_burn, counts)
        if k + 1 >= first:
            acc += engine.moments(psi)
            n_samples += 1
    return (acc / n_samples).T, counts / (cfg.t_end - t_burn)


def _batches(n_traj: int) -> list[int]:
    sizes = [BATCH_SIZE] * (n_traj // BATCH_SIZE)
    if n_traj % BATCH_SIZE:
        sizes.append(n_traj % BATCH_SIZE)
    return sizes


def run_trajectories(p: SystemParams, space: CompositeSpace, cfg: TrajectoryConfig,
                     workers: int | None = None) -> MomentEstimate:
    """Time-averaged stationary moments from ``cfg.n_traj`` trajectories.

    Every trajectory starts in ``|g, 0>``.  Standard errors come from the
    spread of the per-trajectory averages.
    """
    engine = _Engine(p, space)
    sizes = _batches(int(cfg.n_traj))
    jobs = list(enumerate(sizes))

    def work(job):
        b, n = job
        return _run_batch(engine, cfg, n, b)

    if workers and workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    samples = np.concatenate([r[0] for r in results])
    rates = np.concatenate([r[1] for r in results])
    return MomentEstimate(samples, rates, cfg, p,
                          {"n_max": space.n_max, "eigen_propagator": engine.prop.use_eig})


def ensemble_density(p: SystemParams, space: CompositeSpace, cfg: TrajectoryConfig, times
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Trajectory-averaged density matrices at ``times`` with elementwise errors.

    Returns ``(mean, stderr)`` arrays of shape ``(len(times), d, d)``;
    ``stderr`` is complex with separate real and imaginary errors.
    ``cfg.t_end``, ``cfg.dt_max`` and ``cfg.burn_in`` are ignored.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times[0] < 0 or np.any(np.diff(times) < 0):
        raise ValueError("times must be ascending and non-negative")
    engine = _Engine(p, space)
    d = space.dim
    sums = np.zeros((len(times), d, d), dtype=complex)
    sq_re = np.zeros((len(times), d, d))
    sq_im = np.zeros((len(times), d, d))
    for b, n in enumerate(_batches(int(cfg.n_traj))):
        rng = np.random.Generator(np.random.Philox(int(cfg.seed)).jumped(b))
        psi = _ground_states(space, n)
        thresh = rng.random(n)
        counts = np.zeros((n, len(engine.jumps)))
        t = 0.0
        for i, target in enumerate(times):
            while target - t > 1e-12:
                h = min(cfg.dt_max, target - t)
                psi = engine.step(psi, thresh, h, rng, t, np.inf, counts)
                t += h
            unit = psi / np.sqrt(_norm2(psi))
            rho = np.einsum("ik,jk->kij", unit, unit.conj())
            sums[i] += rho.sum(axis=0)
            sq_re[i] += (rho.real**2).sum(axis=0)
            sq_im[i] += (rho.imag**2).sum(axis=0)
    n = cfg.n_traj
    mean = sums / n
    var_re = (sq_re - n * mean.real**2) / max(n - 1, 1)
    var_im = (sq_im - n * mean.imag**2) / max(n - 1, 1)
    err = (np.sqrt(np.clip(var_re, 0, None)) + 1j * np.sqrt(np.clip(var_im, 0, None))) / np.sqrt(n)
    return mean, err


def _field_samples(m: MomentEstimate, field: DetectionField):
    c, s = field.offset, field.cavity_weight
    x = {name: m.samples[:, i] for i, name in enumerate(MOMENT_NAMES)}
    cs = np.conj(c) * s
    flux = abs(c) ** 2 + 2 * np.real(cs * x["a"]) + abs(s) ** 2 * x["n"].real
    num = (abs(c) ** 4 + 4 * abs(c) ** 2 * np.real(cs * x["a"])
           + 2 * np.real(cs**2 * x["a2"]) + 4 * abs(c * s) ** 2 * x["n"].real
           + 4 * abs(s) ** 2 * np.real(cs * x["ada2"]) + abs(s) ** 4 * x["ad2a2"].real)
    return flux, num


def g2_zero_from_moments(m: MomentEstimate, field: DetectionField) -> tuple[float, float]:
    """``g2(0)`` of ``O = c + s a`` and its delta-method standard error."""
    if field.cavity_weight == 0 and field.offset != 0:
        # a pure coherent offset carries no sampling noise
        return 1.0, 0.0
    flux, num = _field_samples(m, field)
    n = len(flux)
    d_bar = float(np.mean(flux))
    n_bar = float(np.mean(num))
    d_err = float(np.std(flux, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    if not d_bar > 3 * d_err or d_bar <= 0:
        raise UndefinedNormalizationError(
            f"flux {d_bar:.3e} is not resolved above its error {d_err:.3e}"
        )
    value = n_bar / d_bar**2
    if n < 2:
        return value, float("nan")
    influence = num / d_bar**2 - 2 * n_bar * flux / d_bar**3
    return value, float(np.std(influence, ddof=1) / np.sqrt(n))
