"""Conservation audit of the operator current.

The interaction-side dissipative current ``-i Tr{rho [G, H_I]}`` is evaluated
on exact composite states; the generator side is ``Tr_S{D G}``. When
``[G, H_I] = 0`` the interaction side vanishes identically, so a nonzero
generator side is a violation even without an exact oracle.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import NumericError, ShapeError, ValidationError
from .generators import Generator
from .linalg import partial_trace_env, partial_trace_env_batch, tensor
from .model import ObservableSpec, commutes_with_interaction
from .propagate import (
    IntegratorConfig,
    expectation_series,
    propagate_exact,
    propagate_reduced,
    rhs_current_series,
    unitary_current_series,
)


@dataclass(frozen=True)
class AuditThresholds:
    """``rhs=None`` means 1e-8 * max(1, max_t |<G>(t)|)."""

    rhs: Optional[float] = None
    integral: float = 1e-4

    def rhs_for(self, expectations: np.ndarray) -> float:
        if self.rhs is not None:
            return self.rhs
        return 1e-8 * max(1.0, float(np.max(np.abs(expectations))))


@dataclass
class AuditReport:
    observable: str
    times: np.ndarray
    rhs_series: np.ndarray
    lhs_series: Optional[np.ndarray]
    integrated_current: float
    observable_change: float
    commuting_flag: bool
    rhs_threshold: float
    integral_threshold: float
    verdict: str = "conserved"

    @property
    def residual_series(self) -> Optional[np.ndarray]:
        if self.lhs_series is None:
            return None
        return self.lhs_series - self.rhs_series

    @property
    def max_abs_rhs(self) -> float:
        return float(np.max(np.abs(self.rhs_series)))

    @property
    def max_abs_residual(self) -> Optional[float]:
        r = self.residual_series
        return None if r is None else float(np.max(np.abs(r)))

    @property
    def integral_gap(self) -> float:
        return abs(self.integrated_current - self.observable_change)

    @property
    def conserved(self) -> bool:
        return self.verdict == "conserved"

    def to_dict(self, series: bool = False) -> dict:
        out = {
            "observable": self.observable,
            "commuting": self.commuting_flag,
            "verdict": self.verdict,
            "max_abs_rhs": self.max_abs_rhs,
            "integrated_current": self.integrated_current,
            "observable_change": self.observable_change,
            "integral_gap": self.integral_gap,
            "thresholds": {"rhs": self.rhs_threshold, "integral": self.integral_threshold},
        }
        if self.lhs_series is not None:
            out["max_abs_residual"] = self.max_abs_residual
        if series:
            out["series"] = {
                "t": self.times.tolist(),
                "rhs": self.rhs_series.tolist(),
            }
            if self.lhs_series is not None:
                out["series"]["lhs"] = self.lhs_series.tolist()
                out["series"]["residual"] = self.residual_series.tolist()
        return out


def lhs_dissipative_current(rho_full, couplings, bath_ops, g, dim_s: int, dim_e: int) -> float:
    """-i Tr_S{sum_a [A_a, Tr_E{B_a rho}] G}, the interaction-side current."""
    if len(couplings) != len(bath_ops):
        raise ShapeError(f"{len(couplings)} couplings vs {len(bath_ops)} bath operators")
    g = g.at(0.0) if isinstance(g, ObservableSpec) else np.asarray(g)
    rho_full = np.asarray(rho_full, dtype=np.complex128)
    is_ = np.eye(dim_s)
    total = 0j
    for a, b in zip(couplings, bath_ops):
        m = partial_trace_env(tensor(is_, b) @ rho_full, dim_s, dim_e)
        total += np.trace((a @ m - m @ a) @ g)
    val = -1j * total
    if abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise NumericError(f"interaction current has imaginary residue {val.imag:.3e}")
    return float(val.real)


def lhs_current_series(traj, couplings, bath_ops, obs: ObservableSpec) -> np.ndarray:
    """Interaction-side current at every state of an exact trajectory."""
    ds, de = traj.dim_s, traj.dim_e
    is_ = np.eye(ds)
    n = len(traj)
    comm = np.zeros((n, ds, ds), dtype=np.complex128)
    for a, b in zip(couplings, bath_ops):
        lifted = tensor(is_, b)
        m = partial_trace_env_batch(np.einsum("ij,njk->nik", lifted, traj.states), ds, de)
        comm += np.einsum("ij,njk->nik", a, m) - np.einsum("nij,jk->nik", m, a)
    if obs.dgdt is None:
        vals = -1j * np.einsum("nij,ji->n", comm, obs.g)
    else:
        vals = np.array([-1j * np.trace(c @ obs.at(t)) for c, t in zip(comm, traj.times)])
    if np.max(np.abs(vals.imag)) > 1e-10 * max(1.0, float(np.max(np.abs(vals.real)))):
        raise NumericError("interaction current has a non-negligible imaginary part")
    return vals.real


def _commuting(scenario, obs, t_final):
    # G(t) is affine in t, so commuting at both ends implies commuting throughout
    return all(
        commutes_with_interaction(scenario.system, scenario.env, obs.at(t)) for t in (0.0, t_final)
    )


def audit_trajectories(scenario, obs: ObservableSpec, red, ex=None, thresholds: Optional[AuditThresholds] = None) -> AuditReport:
    """Audit one observable on already propagated reduced (and exact) trajectories."""
    thresholds = thresholds or scenario.thresholds
    rhs = rhs_current_series(red, obs)
    exp_red = expectation_series(red, obs)
    commuting = _commuting(scenario, obs, float(red.times[-1]))
    lhs = None
    if ex is not None:
        lhs = lhs_current_series(ex, scenario.system.couplings, scenario.env.bath_ops, obs)
        exp = expectation_series(ex, obs)
        current = unitary_current_series(ex, obs) + lhs
    else:
        exp = exp_red
        current = first_definition_current(red, obs, rhs, commuting)
    report = AuditReport(
        observable=obs.name,
        times=red.times,
        rhs_series=rhs,
        lhs_series=lhs,
        integrated_current=float(np.trapezoid(current, red.times)),
        observable_change=float(exp[-1] - exp[0]),
        commuting_flag=commuting,
        rhs_threshold=thresholds.rhs_for(exp_red),
        integral_threshold=thresholds.integral,
    )
    if (commuting and report.max_abs_rhs > report.rhs_threshold) or report.integral_gap > report.integral_threshold:
        report.verdict = "violated"
    return report


def first_definition_current(red, obs: ObservableSpec, rhs: np.ndarray, commuting: bool) -> np.ndarray:
    """<I_G> on a reduced trajectory from the Hamiltonian commutator form.

    The interaction term -i Tr{rho [G, H_I]} is identically zero when G
    commutes with H_I; otherwise the generator's current stands in for it.
    """
    current = unitary_current_series(red, obs)
    return current if commuting else current + rhs


def audit_conservation(
    scenario,
    obs: ObservableSpec,
    cfg: Optional[IntegratorConfig] = None,
    generator: Optional[Generator] = None,
    thresholds: Optional[AuditThresholds] = None,
) -> AuditReport:
    """Propagate the scenario and test both forms of current conservation."""
    return audit_all(scenario, [obs], cfg, generator, thresholds)[0]


def audit_all(scenario, observables=None, cfg=None, generator=None, thresholds=None) -> list:
    gen = generator or Generator(scenario.system, scenario.generator)
    cfg = cfg or scenario.integrator_config(gen)
    red = propagate_reduced(scenario.system, gen, scenario.initial_reduced(), cfg)
    ex = None
    if scenario.env is not None:
        ex = propagate_exact(scenario.system, scenario.env, scenario.initial_full(), cfg)
    observables = scenario.observables if observables is None else observables
    return [audit_trajectories(scenario, o, red, ex, thresholds) for o in observables]


def _threads(workers):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("OCCUR_THREADS")
    if env:
        return max(1, int(env))
    return min(4, os.cpu_count() or 1)


def sweep_point(scenario, obs: ObservableSpec, g: float, cfg: Optional[IntegratorConfig] = None) -> float:
    """max_t |lhs(t) - rhs(t)| with the interaction scaled by ``g``."""
    sc = scenario.scaled(g)
    gen = Generator(sc.system, sc.generator)
    cfg = cfg or scenario.integrator_config(Generator(scenario.system, scenario.generator))
    red = propagate_reduced(sc.system, gen, sc.initial_reduced(), cfg)
    rhs = rhs_current_series(red, obs)
    ex = propagate_exact(sc.system, sc.env, sc.initial_full(), cfg)
    lhs = lhs_current_series(ex, sc.system.couplings, sc.env.bath_ops, obs)
    return float(np.max(np.abs(lhs - rhs)))


def born_residual_sweep(
    scenario,
    obs: ObservableSpec,
    values: Sequence[float],
    cfg: Optional[IntegratorConfig] = None,
    workers: Optional[int] = None,
):
    """Residual between the two dissipative currents for each coupling scale.

    Scaling every coupling operator by g scales the interaction by g and the
    generator's rates by g^2. Returns ``[(g, max residual), ...]`` in input order.
    """
    if scenario.env is None:
        raise ValidationError("the sweep needs an environment section for the exact oracle", "environment")
    values = [float(g) for g in values]
    if not values:
        raise ValidationError("no coupling values given", "values")
    if any(not np.isfinite(g) or g < 0 for g in values):
        raise ValidationError("coupling values must be finite and >= 0", "values")
    # the reference step is fixed by the unscaled scenario so every point shares a grid
    cfg = cfg or scenario.integrator_config(Generator(scenario.system, scenario.generator))
    n = _threads(workers)
    if n == 1 or len(values) == 1:
        res = [sweep_point(scenario, obs, g, cfg) for g in values]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            res = list(pool.map(lambda g: sweep_point(scenario, obs, g, cfg), values))
    return list(zip(values, res))
