"""Reduced and exact time evolution.

Reduced dynamics use classical fixed-step RK4 on ``-i[H_S, rho] + D``. For a
time-independent generator the right-hand side is a fixed linear map L and
one RK4 step is exactly the polynomial ``1 + hL + (hL)^2/2 + (hL)^3/6 +
(hL)^4/24``, which is precomputed once.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import CapacityError, IntegratorError, NumericError, ShapeError, ValidationError
from .generators import Generator, GeneratorKind
from .linalg import eig_hermitian, partial_trace_env_batch, superoperator, tensor, unitary_evolve
from .model import EnvSpec, ObservableSpec, SystemSpec, check_density_matrix, total_hamiltonian

log = logging.getLogger(__name__)

MAX_EXACT_DIM = 64
TRACE_DRIFT_LIMIT = 1e-6
POSITIVITY_WARN = -1e-8


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_final: float
    store_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError("must be positive", "integrator.dt")
        if not self.t_final > 0:
            raise ValidationError("must be positive", "integrator.t_final")
        if self.dt > self.t_final:
            raise ValidationError("dt exceeds t_final", "integrator.dt")
        if int(self.store_every) != self.store_every or self.store_every < 1:
            raise ValidationError("must be an integer >= 1", "integrator.store_every")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.t_final / self.dt + 1e-9))

    @property
    def n_stored(self) -> int:
        return int(math.floor(self.t_final / (self.dt * self.store_every) + 1e-9)) + 1


def default_step(system: SystemSpec, generator: Generator) -> float:
    """min(0.01 / max Bohr frequency, 0.01 / max rate)."""
    w = eig_hermitian(system.hamiltonian(0.0)).raw_eigenvalues
    spread = float(w[-1] - w[0])
    rate = generator.max_rate()
    steps = [0.01 / x for x in (spread, rate) if x > 0]
    return min(steps) if steps else 0.01


@dataclass
class Trajectory:
    """Stored states of one propagation.

    ``states`` are reduced states for ``kind == "reduced"`` and full composite
    states for ``kind == "exact"``; ``reduced`` always holds the system part.
    ``hamiltonian`` returns H_S(t) (reduced) or the total H(t) (exact).
    """

    times: np.ndarray
    states: np.ndarray
    kind: str
    dim_s: int
    hamiltonian: Callable[[float], np.ndarray]
    static: bool
    dim_e: int = 1
    generator: Optional[Generator] = None
    system_hamiltonian: Optional[Callable[[float], np.ndarray]] = None
    reduced: Optional[np.ndarray] = None
    min_eigenvalues: Optional[np.ndarray] = None
    expectations: dict = field(default_factory=dict)
    currents: dict = field(default_factory=dict)
    diss_rhs: dict = field(default_factory=dict)
    diss_lhs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.reduced is None:
            self.reduced = self.states
        if self.system_hamiltonian is None and self.kind == "reduced":
            self.system_hamiltonian = self.hamiltonian

    def __len__(self):
        return len(self.times)

    def dissipators(self) -> np.ndarray:
        """D(rho(t), t) at every stored time (reduced trajectories only)."""
        if self.kind != "reduced":
            raise ValidationError("dissipators are defined for reduced trajectories")
        n, d = len(self.times), self.dim_s
        if self.generator.autonomous:
            sup = self.generator.dissipator_superoperator()
            return (self.states.reshape(n, d * d) @ sup.T).reshape(n, d, d)
        return np.array([self.generator(r, t) for r, t in zip(self.states, self.times)])


def _rehermitize(rho):
    return 0.5 * (rho + rho.conj().T)


def _check_trace(rho, t):
    drift = abs(np.trace(rho) - 1.0)
    if not drift <= TRACE_DRIFT_LIMIT:  # also catches nan
        raise IntegratorError(f"trace drifted by {drift:.3e} at t={t:.6g}; reduce the time step")


def _as_generator(system, generator):
    if isinstance(generator, Generator):
        return generator
    if isinstance(generator, GeneratorKind):
        return Generator(system, generator)
    raise TypeError(f"expected Generator or GeneratorKind, got {type(generator).__name__}")


def rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_propagator(lmat: np.ndarray, h: float) -> np.ndarray:
    """Exact one-step matrix of RK4 for the linear ODE y' = L y."""
    hl = h * lmat
    eye = np.eye(len(lmat), dtype=np.complex128)
    return eye + hl @ (eye + hl @ (eye / 2 + hl @ (eye / 6 + hl / 24)))


def reduced_rhs(system: SystemSpec, generator: Generator):
    def f(t, rho):
        h = system.hamiltonian(t)
        return -1j * (h @ rho - rho @ h) + generator(rho, t)

    return f


def propagate_reduced(
    system: SystemSpec,
    generator,
    rho0,
    cfg: IntegratorConfig,
    fused: bool = True,
) -> Trajectory:
    """Integrate d rho/dt = -i[H_S(t), rho] + D(rho, t) with fixed-step RK4.

    ``fused=False`` forces the stage-by-stage RK4 even for time-independent
    generators (identical up to rounding, much slower).
    """
    gen = _as_generator(system, generator)
    rho = np.array(check_density_matrix(rho0, "initial_state.rho_S0"), dtype=np.complex128)
    if rho.shape != (system.dim, system.dim):
        raise ShapeError(f"initial state shape {rho.shape} does not match dimS={system.dim}")
    d = system.dim
    h = cfg.dt
    n_steps = cfg.n_steps
    times, states = [0.0], [rho.copy()]

    if gen.autonomous and fused:
        h_s = system.hamiltonian(0.0)
        lmat = superoperator(lambda r: -1j * (h_s @ r - r @ h_s), d) + gen.dissipator_superoperator()
        prop = rk4_propagator(lmat, h)
        v = rho.reshape(-1)
        for k in range(1, n_steps + 1):
            v = prop @ v
            r = v.reshape(d, d)
            r = _rehermitize(r)
            v = r.reshape(-1)
            if k % cfg.store_every == 0:
                _check_trace(r, k * h)
                times.append(k * h)
                states.append(r.copy())
    else:
        f = reduced_rhs(system, gen)
        for k in range(1, n_steps + 1):
            rho = _rehermitize(rk4_step(f, (k - 1) * h, rho, h))
            if k % cfg.store_every == 0:
                _check_trace(rho, k * h)
                times.append(k * h)
                states.append(rho.copy())

    states = np.array(states)
    min_eigs = np.linalg.eigvalsh(states)[:, 0]
    if np.min(min_eigs) < POSITIVITY_WARN:
        log.warning(
            "%s propagation left the positive cone: min eigenvalue %.3e",
            gen.kind.variant,
            float(np.min(min_eigs)),
        )
    return Trajectory(
        times=np.array(times),
        states=states,
        kind="reduced",
        dim_s=d,
        hamiltonian=system.hamiltonian,
        static=system.drive.is_static,
        generator=gen,
        min_eigenvalues=min_eigs,
    )


def propagate_exact(system: SystemSpec, env: EnvSpec, rho0, cfg: IntegratorConfig) -> Trajectory:
    """Unitary evolution of the full system + environment state."""
    dim = system.dim * env.dim
    if dim > MAX_EXACT_DIM:
        raise CapacityError(f"composite dimension {dim} exceeds {MAX_EXACT_DIM}")
    rho = np.array(check_density_matrix(rho0, "initial_state.rho_full0"), dtype=np.complex128)
    if rho.shape != (dim, dim):
        raise ShapeError(f"composite state shape {rho.shape} does not match {dim}x{dim}")

    def ham(t):
        return total_hamiltonian(system, env, t)

    h = cfg.dt
    times, states = [0.0], [rho.copy()]
    static = system.drive.is_static
    if static:
        u = unitary_evolve(ham(0.0), h)
        ud = u.conj().T
        for k in range(1, cfg.n_steps + 1):
            rho = u @ rho @ ud
            if k % cfg.store_every == 0:
                times.append(k * h)
                states.append(rho.copy())
    else:

        def f(t, r):
            hh = ham(t)
            return -1j * (hh @ r - r @ hh)

        for k in range(1, cfg.n_steps + 1):
            rho = _rehermitize(rk4_step(f, (k - 1) * h, rho, h))
            if k % cfg.store_every == 0:
                _check_trace(rho, k * h)
                times.append(k * h)
                states.append(rho.copy())
    states = np.array(states)
    return Trajectory(
        times=np.array(times),
        states=states,
        kind="exact",
        dim_s=system.dim,
        dim_e=env.dim,
        hamiltonian=ham,
        static=static,
        system_hamiltonian=system.hamiltonian,
        reduced=partial_trace_env_batch(states, system.dim, env.dim),
    )


def _trace_batch(states, op):
    return np.einsum("nij,ji->n", states, op)


def _hamiltonians(traj):
    if traj.static:
        return None, traj.hamiltonian(0.0)
    return [traj.hamiltonian(t) for t in traj.times], None


def expectation_series(traj: Trajectory, obs: ObservableSpec) -> np.ndarray:
    if obs.dgdt is None:
        return _trace_batch(traj.reduced, obs.g).real
    return np.array([np.trace(r @ obs.at(t)).real for r, t in zip(traj.reduced, traj.times)])


def unitary_current_series(traj: Trajectory, obs: ObservableSpec) -> np.ndarray:
    """-i Tr_S{rho_S [G, H_S]} + Tr_S{rho_S dG/dt} along a trajectory."""
    hs = traj.system_hamiltonian
    out = np.empty(len(traj))
    for k, (r, t) in enumerate(zip(traj.reduced, traj.times)):
        g, hsys = obs.at(t), hs(t)
        c = -1j * (g @ hsys - hsys @ g)
        val = np.trace(r @ c).real
        if obs.dgdt is not None:
            val += np.trace(r @ obs.dgdt).real
        out[k] = val
    return out


def observable_series(traj: Trajectory, obs: ObservableSpec):
    """(<G>(t), d<G>/dt) with the derivative from the commutator form.

    Exact trajectories use -i Tr{rho [G (x) I, H]}; reduced ones add the
    generator's dissipative current to the system commutator term.
    """
    if obs.g.shape != (traj.dim_s, traj.dim_s):
        raise ShapeError(f"observable {obs.name} has shape {obs.g.shape}, system is {traj.dim_s}-dimensional")
    exp = expectation_series(traj, obs)
    hs_list, h_static = _hamiltonians(traj)
    if traj.kind == "exact":
        ie = np.eye(traj.dim_e)
        if h_static is not None and obs.dgdt is None:
            gl = tensor(obs.g, ie)
            c = -1j * (gl @ h_static - h_static @ gl)
            deriv = _trace_batch(traj.states, c).real
        else:
            deriv = np.empty(len(traj))
            for k, (r, t) in enumerate(zip(traj.states, traj.times)):
                gl = tensor(obs.at(t), ie)
                hh = h_static if h_static is not None else hs_list[k]
                deriv[k] = (-1j * np.trace(r @ (gl @ hh - hh @ gl))).real
        if obs.dgdt is not None:
            deriv = deriv + _trace_batch(traj.reduced, obs.dgdt).real
        return exp, deriv
    deriv = unitary_current_series(traj, obs) + rhs_current_series(traj, obs)
    return exp, deriv


def rhs_current_series(traj: Trajectory, obs: ObservableSpec) -> np.ndarray:
    """Tr_S{D G} along a reduced trajectory."""
    ds = traj.dissipators()
    if obs.dgdt is None:
        vals = _trace_batch(ds, obs.g)
    else:
        vals = np.array([np.trace(d @ obs.at(t)) for d, t in zip(ds, traj.times)])
    scale = max(1.0, float(np.max(np.abs(ds))) * float(np.max(np.abs(obs.g))))
    if np.max(np.abs(vals.imag), initial=0.0) > 1e-11 * scale:
        raise NumericError(f"dissipative current has imaginary residue {np.max(np.abs(vals.imag)):.3e}")
    return vals.real
