"""Scenario data model: Hamiltonians, bath spectra, drives and eigenoperators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegeneracyError, RangeError, ShapeError, ValidationError
from .linalg import (
    HERMITIAN_TOL,
    as_matrix,
    commutator,
    eig_hermitian,
    hermiticity_defect,
    spectral_norm,
    tensor,
)

EIGENOPERATOR_DROP = 1e-13


def _frozen(a, name, hermitian=True, path=None):
    m = as_matrix(a, name)
    if hermitian:
        defect = hermiticity_defect(m)
        if defect >= HERMITIAN_TOL:
            raise ValidationError(f"not Hermitian (defect {defect:.3e})", path or name)
    m = m.copy()
    m.setflags(write=False)
    return m


def check_density_matrix(rho, name="rho", tol=1e-10):
    rho = as_matrix(rho, name)
    if hermiticity_defect(rho) >= HERMITIAN_TOL:
        raise ValidationError("density matrix is not Hermitian", name)
    tr = np.trace(rho)
    if abs(tr - 1.0) > 1e-12 * max(1, rho.shape[0]) + 1e-12:
        raise ValidationError(f"density matrix trace is {tr:.6g}, expected 1", name)
    lam = eig_hermitian(rho).raw_eigenvalues[0]
    if lam < -tol:
        raise ValidationError(f"density matrix has negative eigenvalue {lam:.3e}", name)
    rho = rho.copy()
    rho.setflags(write=False)
    return rho


# ---------------------------------------------------------------- drive


@dataclass(frozen=True)
class DriveSchedule:
    """Time dependence of the system Hamiltonian on ``[0, t_final]``.

    ``none`` keeps ``h_start`` fixed, ``linear_sweep`` interpolates from
    ``h_start`` to ``h_end`` over ``t_final``, and ``user_samples``
    interpolates linearly between ``(sample_times, samples)``.
    """

    protocol: str = "none"
    h_start: Optional[np.ndarray] = None
    h_end: Optional[np.ndarray] = None
    t_final: float = np.inf
    sample_times: Optional[np.ndarray] = None
    samples: Optional[tuple] = None
    dt_drive: float = 0.01

    def __post_init__(self):
        if self.protocol not in ("none", "linear_sweep", "user_samples"):
            raise ValidationError(f"unknown drive protocol {self.protocol!r}", "drive.protocol")
        if self.dt_drive <= 0:
            raise ValidationError("must be positive", "drive.dt_drive")
        if self.protocol == "linear_sweep":
            if self.h_start is None or self.h_end is None:
                raise ValidationError("linear_sweep needs H_start and H_end", "drive.parameters")
            if not np.isfinite(self.t_final) or self.t_final <= 0:
                raise ValidationError("linear_sweep needs a positive finite duration", "drive.parameters.t_sweep")
            object.__setattr__(self, "h_start", _frozen(self.h_start, "H_start", path="drive.parameters.H_start"))
            object.__setattr__(self, "h_end", _frozen(self.h_end, "H_end", path="drive.parameters.H_end"))
        elif self.protocol == "user_samples":
            ts = np.asarray(self.sample_times, dtype=float)
            if ts.ndim != 1 or len(ts) < 2 or np.any(np.diff(ts) <= 0):
                raise ValidationError("sample times must be strictly ascending (>= 2)", "drive.t_samples")
            mats = tuple(
                _frozen(h, "H_S sample", path=f"drive.parameters.samples[{k}]") for k, h in enumerate(self.samples)
            )
            if len(mats) != len(ts):
                raise ValidationError("one Hamiltonian per sample time required", "drive.parameters.samples")
            object.__setattr__(self, "sample_times", ts)
            object.__setattr__(self, "samples", mats)
            object.__setattr__(self, "t_final", float(ts[-1]))
        elif self.h_start is not None:
            object.__setattr__(self, "h_start", _frozen(self.h_start, "H_S", path="system.H_S"))

    @property
    def is_static(self) -> bool:
        return self.protocol == "none"

    def hamiltonian(self, t: float) -> np.ndarray:
        if self.protocol == "none":
            return self.h_start
        if t < -1e-12 or t > self.t_final * (1 + 1e-12) + 1e-12:
            raise RangeError(f"drive undefined at t={t} (defined on [0, {self.t_final}])")
        if self.protocol == "linear_sweep":
            s = min(max(t / self.t_final, 0.0), 1.0)
            return (1 - s) * self.h_start + s * self.h_end
        ts = self.sample_times
        k = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2))
        s = (t - ts[k]) / (ts[k + 1] - ts[k])
        s = min(max(s, 0.0), 1.0)
        return (1 - s) * self.samples[k] + s * self.samples[k + 1]


# ---------------------------------------------------------------- specs


@dataclass(frozen=True)
class SystemSpec:
    dim: int
    h_s: np.ndarray
    couplings: tuple
    drive: DriveSchedule = None

    def __post_init__(self):
        h = _frozen(self.h_s, "H_S", path="system.H_S")
        if h.shape[0] != self.dim:
            raise ShapeError(f"system.H_S has dimension {h.shape[0]}, expected dimS={self.dim}")
        object.__setattr__(self, "h_s", h)
        cs = tuple(_frozen(a, "coupling", path=f"system.couplings[{k}]") for k, a in enumerate(self.couplings))
        for k, a in enumerate(cs):
            if a.shape != h.shape:
                raise ShapeError(f"system.couplings[{k}] has shape {a.shape}, expected {h.shape}")
        object.__setattr__(self, "couplings", cs)
        if self.drive is None:
            object.__setattr__(self, "drive", DriveSchedule("none", h_start=h))
        elif self.drive.protocol == "none" and self.drive.h_start is None:
            object.__setattr__(self, "drive", DriveSchedule("none", h_start=h, dt_drive=self.drive.dt_drive))

    def hamiltonian(self, t: float = 0.0) -> np.ndarray:
        return self.drive.hamiltonian(t)

    def scaled(self, g: float) -> "SystemSpec":
        """Copy with every coupling operator multiplied by ``g``."""
        return SystemSpec(self.dim, self.h_s, tuple(g * a for a in self.couplings), self.drive)


@dataclass(frozen=True)
class EnvSpec:
    dim: int
    h_e: np.ndarray
    bath_ops: tuple
    rho_e0: np.ndarray

    def __post_init__(self):
        h = _frozen(self.h_e, "H_E", path="environment.H_E")
        if h.shape[0] != self.dim:
            raise ShapeError(f"environment.H_E has dimension {h.shape[0]}, expected dimE={self.dim}")
        object.__setattr__(self, "h_e", h)
        bs = tuple(_frozen(b, "bath op", path=f"environment.bath_ops[{k}]") for k, b in enumerate(self.bath_ops))
        for k, b in enumerate(bs):
            if b.shape != h.shape:
                raise ShapeError(f"environment.bath_ops[{k}] has shape {b.shape}, expected {h.shape}")
        object.__setattr__(self, "bath_ops", bs)
        object.__setattr__(self, "rho_e0", check_density_matrix(self.rho_e0, "environment.rho_E0", tol=1e-12))


@dataclass(frozen=True)
class ObservableSpec:
    """System observable ``G(t) = G + t * dGdt``; ``dgdt`` is None when static."""

    name: str
    g: np.ndarray
    dgdt: Optional[np.ndarray] = None

    def __post_init__(self):
        path = f"observables[{self.name}]"
        object.__setattr__(self, "g", _frozen(self.g, self.name, path=path + ".G"))
        if self.dgdt is not None:
            d = _frozen(self.dgdt, self.name, path=path + ".explicit_dGdt")
            if d.shape != self.g.shape:
                raise ShapeError(f"{path}.explicit_dGdt shape {d.shape} != {self.g.shape}")
            object.__setattr__(self, "dgdt", d)

    def at(self, t: float = 0.0) -> np.ndarray:
        return self.g if self.dgdt is None else self.g + t * self.dgdt

    def derivative(self, t: float = 0.0) -> Optional[np.ndarray]:
        return self.dgdt


def interaction_hamiltonian(system: SystemSpec, env: EnvSpec) -> np.ndarray:
    if len(system.couplings) != len(env.bath_ops):
        raise ShapeError(
            f"{len(system.couplings)} system couplings but {len(env.bath_ops)} bath operators"
        )
    h = np.zeros((system.dim * env.dim,) * 2, dtype=np.complex128)
    for a, b in zip(system.couplings, env.bath_ops):
        h += tensor(a, b)
    return h


def total_hamiltonian(system: SystemSpec, env: EnvSpec, t: float = 0.0) -> np.ndarray:
    ie, is_ = np.eye(env.dim), np.eye(system.dim)
    return tensor(system.hamiltonian(t), ie) + tensor(is_, env.h_e) + interaction_hamiltonian(system, env)


def commutes_with_interaction(system: SystemSpec, env: Optional[EnvSpec], g: np.ndarray, tol: float = 1e-10) -> bool:
    """Whether [G, H_I] = 0.

    Without an explicit environment the bath operators are taken as
    linearly independent, so the test reduces to [G, A_alpha] = 0 for all alpha.
    """
    if env is not None:
        gl = tensor(g, np.eye(env.dim))
        return float(np.max(np.abs(commutator(gl, interaction_hamiltonian(system, env))))) < tol
    return all(float(np.max(np.abs(commutator(g, a)))) < tol for a in system.couplings)


# ---------------------------------------------------------------- bath


@dataclass(frozen=True)
class BathSpectrum:
    """Ohmic bath with exponential cutoff at temperature ``temperature``."""

    temperature: float = 0.0
    eta: float = 0.01
    omega_c: float = 10.0
    lamb_shift_mode: str = "zero"
    s_table: Optional[tuple] = None

    def __post_init__(self):
        if not self.temperature >= 0:
            raise ValidationError("temperature must be >= 0", "bath.temperature")
        if not self.eta > 0:
            raise ValidationError("eta must be > 0", "bath.eta")
        if not self.omega_c > 0:
            raise ValidationError("omega_c must be > 0", "bath.omega_c")
        if self.lamb_shift_mode not in ("zero", "table", "pv_quadrature"):
            raise ValidationError(f"unknown mode {self.lamb_shift_mode!r}", "bath.lamb_shift_mode")
        if self.lamb_shift_mode == "table":
            if not self.s_table or len(self.s_table) < 2:
                raise ValidationError("table mode needs >= 2 (omega, S) pairs", "bath.S_table")
            tab = tuple(sorted((float(w), float(s)) for w, s in self.s_table))
            if any(tab[k][0] == tab[k + 1][0] for k in range(len(tab) - 1)):
                raise ValidationError("duplicate frequencies", "bath.S_table")
            object.__setattr__(self, "s_table", tab)


def _occupation(x):
    # x = omega / T > 0; expm1 overflow to inf gives n = 0
    with np.errstate(over="ignore"):
        return 1.0 / np.expm1(x)


def gamma(spectrum: BathSpectrum, omega):
    """Emission/absorption rate gamma(omega); vectorised over ``omega``."""
    w = np.asarray(omega, dtype=float)
    eta, wc, temp = spectrum.eta, spectrum.omega_c, spectrum.temperature
    aw = np.abs(w)
    out = np.zeros_like(w)
    nz = aw > 0
    base = 2 * np.pi * eta * aw[nz] * np.exp(-aw[nz] / wc)
    if temp > 0:
        x = aw[nz] / temp
        n = _occupation(x)
        # n + 1 = 1 / (1 - e^{-x}), kept separate for accuracy
        with np.errstate(over="ignore"):
            n_plus = -1.0 / np.expm1(-x)
        out[nz] = np.where(w[nz] > 0, base * n_plus, base * n)
        out[~nz] = 2 * np.pi * eta * temp
    else:
        out[nz] = np.where(w[nz] > 0, base, 0.0)
    return out if out.ndim else float(out)


def principal_value(f: Callable, omega: float, half_width: float, gap: float, step: float) -> float:
    """(1/2pi) PV int f(w') / (omega - w') dw' over [omega - W, omega + W].

    Points at distance u and -u from the pole are paired, so the singular part
    cancels analytically; the window |w' - omega| < gap is excluded.
    """
    n = int(np.ceil((half_width - gap) / step)) + 1
    u = np.linspace(gap, half_width, n)
    integrand = (np.asarray(f(omega - u), float) - np.asarray(f(omega + u), float)) / u
    return float(np.trapezoid(integrand, u) / (2 * np.pi))


def lamb_shift_s(spectrum: BathSpectrum, omega: float) -> float:
    mode = spectrum.lamb_shift_mode
    if mode == "zero":
        return 0.0
    if mode == "table":
        ws = [p[0] for p in spectrum.s_table]
        if omega < ws[0] or omega > ws[-1]:
            raise RangeError(f"omega={omega} outside Lamb-shift table range [{ws[0]}, {ws[-1]}]")
        return float(np.interp(omega, ws, [p[1] for p in spectrum.s_table]))
    wc = spectrum.omega_c
    return principal_value(lambda w: gamma(spectrum, w), omega, 20 * wc, 1e-4 * wc, 1e-3 * wc)


def big_gamma(spectrum: BathSpectrum, omega: float) -> complex:
    return complex(0.5 * gamma(spectrum, omega), lamb_shift_s(spectrum, omega))


# ---------------------------------------------------------------- eigenoperators


@dataclass(frozen=True)
class EigenoperatorSet:
    frequencies: np.ndarray
    operators: dict
    source: np.ndarray

    def __iter__(self):
        for w in self.frequencies:
            yield float(w), self.operators[float(w)]

    def __len__(self):
        return len(self.frequencies)

    def get(self, omega: float, tol: float = 1e-9) -> np.ndarray:
        """Operator at the frequency nearest ``omega``; zero if none is within ``tol``."""
        if len(self.frequencies):
            k = int(np.argmin(np.abs(self.frequencies - omega)))
            if abs(self.frequencies[k] - omega) <= tol:
                return self.operators[float(self.frequencies[k])]
        return np.zeros_like(self.source)


def _cluster(values: np.ndarray, tol: float):
    """Chain-cluster sorted nonnegative values; returns representative per input."""
    order = np.argsort(values)
    reps = np.empty_like(values)
    start = 0
    for k in range(1, len(order) + 1):
        if k == len(order) or values[order[k]] - values[order[k - 1]] > tol:
            idx = order[start:k]
            reps[idx] = values[idx].mean()
            start = k
    return reps


def build_eigenoperators(h_s, a, tol_freq: Optional[float] = None) -> EigenoperatorSet:
    """Split ``a`` into Bohr-frequency components A(w) = sum Pi(e) a Pi(e') over e' - e = w."""
    h_s = as_matrix(h_s, "H_S")
    a = as_matrix(a, "A")
    if h_s.shape != a.shape:
        raise ShapeError(f"H_S shape {h_s.shape} != coupling shape {a.shape}")
    if hermiticity_defect(a) >= HERMITIAN_TOL:
        raise ValidationError("coupling operator is not Hermitian")
    if tol_freq is None:
        tol_freq = 1e-9 * max(spectral_norm(h_s), 1.0)
    if tol_freq <= 0:
        raise ValidationError("tol_freq must be positive")
    spec = eig_hermitian(h_s)
    eps, proj = spec.eigenvalues, spec.projectors
    m = len(eps)
    i, j = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    diffs = (eps[j] - eps[i]).ravel()
    mags = _cluster(np.abs(diffs), tol_freq)
    mags[mags <= tol_freq] = 0.0
    signed = np.where(diffs < 0, -mags, mags)

    ops: dict = {}
    for w, ii, jj in zip(signed, i.ravel(), j.ravel()):
        term = proj[ii] @ a @ proj[jj]
        key = float(w)
        ops[key] = ops[key] + term if key in ops else term
    kept = {w: op for w, op in ops.items() if np.max(np.abs(op)) >= EIGENOPERATOR_DROP}
    freqs = np.array(sorted(kept))
    for op in kept.values():
        op.setflags(write=False)
    return EigenoperatorSet(freqs, {float(w): kept[w] for w in freqs}, a)


def instantaneous_modes(h: np.ndarray, tol_freq: float):
    """Eigenvalues/eigenvectors of ``h``; degenerate spectra are rejected."""
    spec = eig_hermitian(h)
    w = spec.raw_eigenvalues
    if len(w) > 1 and np.min(np.diff(w)) <= tol_freq:
        raise DegeneracyError(f"instantaneous spectrum is degenerate within {tol_freq:.3e}: {w}")
    return w, spec.vectors
