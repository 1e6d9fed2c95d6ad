"""Master-equation dissipators and their dissipative currents.

Every dissipator is "generalised": interaction-induced unitary parts
(Lamb shifts) are folded into the returned matrix, so the full reduced
equation of motion is always ``-i[H_S(t), rho] + D(rho, t)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NumericError, ShapeError, ValidationError
from .linalg import HERMITIAN_TOL, as_matrix, eig_hermitian, hermiticity_defect, superoperator
from .model import (
    BathSpectrum,
    EigenoperatorSet,
    ObservableSpec,
    SystemSpec,
    big_gamma,
    build_eigenoperators,
    gamma,
    instantaneous_modes,
    lamb_shift_s,
)

log = logging.getLogger(__name__)

VARIANTS = ("singular_coupling", "secular_weak", "redfield_nonsecular", "driven_secular", "driven_nonsecular")


@dataclass(frozen=True)
class GeneratorKind:
    """Which dissipator to use and its parameters.

    ``gamma_matrix``/``s_matrix`` are the rate and Lamb-shift matrices of the
    singular-coupling form; every other variant draws its rates from ``bath``.
    """

    variant: str
    gamma_matrix: Optional[np.ndarray] = None
    s_matrix: Optional[np.ndarray] = None
    bath: Optional[BathSpectrum] = None
    allow_multilevel: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValidationError(f"unknown generator {self.variant!r}", "generator.variant")
        if self.variant == "singular_coupling":
            if self.gamma_matrix is None:
                raise ValidationError("singular_coupling needs a rate matrix", "generator.rates.gamma")
            g = np.atleast_2d(np.asarray(self.gamma_matrix, dtype=np.complex128))
            s = np.zeros_like(g) if self.s_matrix is None else np.atleast_2d(np.asarray(self.s_matrix, dtype=np.complex128))
            if g.shape[0] != g.shape[1] or s.shape != g.shape:
                raise ShapeError(f"rate matrices must be square and equal-sized, got {g.shape} and {s.shape}")
            if hermiticity_defect(g) >= HERMITIAN_TOL:
                raise ValidationError("rate matrix is not Hermitian", "generator.rates.gamma")
            if hermiticity_defect(s) >= HERMITIAN_TOL:
                raise ValidationError("Lamb-shift matrix is not Hermitian", "generator.rates.S")
            lam = eig_hermitian(g).raw_eigenvalues[0]
            if lam < -1e-10:
                raise ValidationError(f"rate matrix not positive semidefinite (eigenvalue {lam:.3e})", "generator.rates.gamma")
            g.setflags(write=False)
            s.setflags(write=False)
            object.__setattr__(self, "gamma_matrix", g)
            object.__setattr__(self, "s_matrix", s)
        elif self.bath is None:
            raise ValidationError(f"{self.variant} needs a bath spectrum", "bath")

    @property
    def driven(self) -> bool:
        return self.variant.startswith("driven")


@dataclass(frozen=True)
class DissipatorOutput:
    d: np.ndarray
    t: float = 0.0


def _lindblad(rho, jumps, h_ls=None):
    """-i[h_ls, rho] + sum_k rate_k/2 ([L, rho L^dag] + [L rho, L^dag])."""
    out = np.zeros_like(rho)
    if h_ls is not None:
        out += -1j * (h_ls @ rho - rho @ h_ls)
    for rate, op in jumps:
        if rate == 0.0:
            continue
        opd = op.conj().T
        ldl = opd @ op
        out += rate * (op @ rho @ opd - 0.5 * (ldl @ rho + rho @ ldl))
    return out


def _redfield(rho, k, a):
    """K rho A - A K rho + h.c., written so it stays linear for non-Hermitian rho."""
    kd = k.conj().T
    return k @ rho @ a - a @ k @ rho + a @ rho @ kd - rho @ kd @ a


def _check_state(system, rho):
    rho = np.asarray(rho, dtype=np.complex128)
    if rho.shape != (system.dim, system.dim):
        raise ShapeError(f"state shape {rho.shape} does not match dimS={system.dim}")
    return rho


# ---------------------------------------------------------------- singular coupling


def singular_lamb_shift(couplings, s_matrix) -> np.ndarray:
    h = np.zeros_like(couplings[0])
    for a, aa in enumerate(couplings):
        for b, ab in enumerate(couplings):
            if s_matrix[a, b] != 0:
                h = h + s_matrix[a, b] * (aa @ ab)
    return h


def _singular(rho, couplings, gmat, h_ls):
    out = -1j * (h_ls @ rho - rho @ h_ls)
    for a, aa in enumerate(couplings):
        for b, ab in enumerate(couplings):
            gab = gmat[a, b]
            if gab == 0:
                continue
            out += 0.5 * gab * (2 * ab @ rho @ aa - rho @ aa @ ab - aa @ ab @ rho)
    return out


def dissipator_singular(system: SystemSpec, gamma_matrix, s_matrix, rho, t: float = 0.0) -> DissipatorOutput:
    """First standard form with a Hermitian rate matrix over all couplings."""
    rho = _check_state(system, rho)
    n = len(system.couplings)
    gmat = np.atleast_2d(np.asarray(gamma_matrix, dtype=np.complex128))
    smat = np.zeros_like(gmat) if s_matrix is None else np.atleast_2d(np.asarray(s_matrix, dtype=np.complex128))
    if gmat.shape != (n, n) or smat.shape != (n, n):
        raise ShapeError(f"rate matrices must be {n}x{n} for {n} couplings, got {gmat.shape}, {smat.shape}")
    h_ls = singular_lamb_shift(system.couplings, smat)
    return DissipatorOutput(_singular(rho, system.couplings, gmat, h_ls), t)


# ---------------------------------------------------------------- weak coupling


def _single_coupling(system):
    if len(system.couplings) != 1:
        raise ValidationError(
            f"this generator takes a single coupling term, got {len(system.couplings)}", "system.couplings"
        )
    return system.couplings[0]


def _check_eig(system, eig):
    if eig.source.shape != (system.dim, system.dim):
        raise ShapeError(f"eigenoperators of dimension {eig.source.shape[0]} do not match dimS={system.dim}")


def secular_terms(eig: EigenoperatorSet, bath: BathSpectrum):
    jumps = [(gamma(bath, w), op) for w, op in eig]
    h_ls = None
    if bath.lamb_shift_mode != "zero":
        h_ls = sum(lamb_shift_s(bath, w) * (op.conj().T @ op) for w, op in eig)
    return jumps, h_ls


def dissipator_secular_weak(system: SystemSpec, eig: EigenoperatorSet, bath: BathSpectrum, rho, t: float = 0.0) -> DissipatorOutput:
    """Secular (Davies) Lindblad dissipator built from eigenoperators A(w)."""
    rho = _check_state(system, rho)
    _check_eig(system, eig)
    jumps, h_ls = secular_terms(eig, bath)
    return DissipatorOutput(_lindblad(rho, jumps, h_ls), t)


def redfield_operator(eig: EigenoperatorSet, bath: BathSpectrum) -> np.ndarray:
    """K = sum_w Gamma(w) A(w)."""
    k = np.zeros_like(eig.source)
    for w, op in eig:
        k = k + big_gamma(bath, w) * op
    return k


def dissipator_redfield(system: SystemSpec, eig: EigenoperatorSet, bath: BathSpectrum, rho, t: float = 0.0) -> DissipatorOutput:
    """Time-independent Redfield dissipator in the Schroedinger picture.

    D = sum_w Gamma(w) (A(w) rho A - A A(w) rho) + h.c. with A = sum_w A(w).
    """
    rho = _check_state(system, rho)
    _check_eig(system, eig)
    a = sum(op for _, op in eig) if len(eig) else np.zeros_like(eig.source)
    return DissipatorOutput(_redfield(rho, redfield_operator(eig, bath), a), t)


def redfield_interaction_picture(eig: EigenoperatorSet, bath: BathSpectrum, rho_i, t: float) -> np.ndarray:
    """Interaction-picture Redfield dissipator with explicit Bohr phases.

    sum_{w,w'} Gamma(w) e^{i(w'-w)t} (A(w) rho_I A^dag(w') - A^dag(w') A(w) rho_I) + h.c.
    """
    out = np.zeros_like(rho_i)
    for w, aw in eig:
        gw = big_gamma(bath, w)
        for wp, awp in eig:
            adp = awp.conj().T
            out += gw * np.exp(1j * (wp - w) * t) * (aw @ rho_i @ adp - adp @ aw @ rho_i)
    return out + out.conj().T


# ---------------------------------------------------------------- driven


class DrivenFrame:
    """Instantaneous-eigenstate modes of a driven H_S(t) and their phases.

    Mode energies are integrated with the trapezoid rule on the drive's
    sample grid ``k * dt_drive``; the last partial interval uses the value
    at ``t`` itself.
    """

    def __init__(self, system: SystemSpec, tol_freq: Optional[float] = None):
        self.system = system
        self.drive = system.drive
        self.step = self.drive.dt_drive
        h0 = system.hamiltonian(0.0)
        self.tol_freq = 1e-9 * max(np.max(np.abs(h0)), 1.0) if tol_freq is None else tol_freq
        self._modes: dict = {}
        self._grid_eps = [self.modes(0.0)[0]]
        self._cum = [np.zeros(system.dim)]
        self.vectors0 = self.modes(0.0)[1]

    def modes(self, t: float):
        key = float(t)
        hit = self._modes.get(key)
        if hit is None:
            hit = instantaneous_modes(self.system.hamiltonian(t), self.tol_freq)
            if len(self._modes) > 4096:
                self._modes.clear()
            self._modes[key] = hit
        return hit

    def phases(self, t: float) -> np.ndarray:
        """theta_x(t) = int_0^t eps_x(t') dt' for each mode x."""
        k = int(math.floor(t / self.step + 1e-9))
        while len(self._cum) <= k:
            j = len(self._cum)
            eps = self.modes(j * self.step)[0]
            self._cum.append(self._cum[-1] + 0.5 * self.step * (self._grid_eps[-1] + eps))
            self._grid_eps.append(eps)
        rest = t - k * self.step
        if rest <= 0:
            return self._cum[k].copy()
        return self._cum[k] + 0.5 * rest * (self._grid_eps[k] + self.modes(t)[0])

    def frame(self, t: float) -> np.ndarray:
        """V(t) = sum_x e^{-i theta_x} |phi_x(t)><phi_x(0)|."""
        vt = self.modes(t)[1]
        return (vt * np.exp(-1j * self.phases(t))) @ self.vectors0.conj().T


def _check_driven_dim(system, allow_multilevel):
    if system.dim != 2 and not allow_multilevel:
        raise ValidationError(
            f"driven generators are validated for two-level systems (dimS={system.dim}); "
            "set generator.allow_multilevel to override",
            "generator.allow_multilevel",
        )


def _driven_secular(rho, a, bath, eps, vecs):
    m = len(eps)
    at = vecs.conj().T @ a @ vecs  # A in the instantaneous mode basis
    jumps = []
    h_ls = np.zeros_like(rho) if bath.lamb_shift_mode != "zero" else None
    for al in range(m):
        for be in range(m):
            if al == be or at[al, be] == 0:
                continue
            w = eps[be] - eps[al]
            op = at[al, be] * np.outer(vecs[:, al], vecs[:, be].conj())
            jumps.append((gamma(bath, w), op))
            if h_ls is not None:
                h_ls += lamb_shift_s(bath, w) * (op.conj().T @ op)
    l0 = (vecs * np.diag(at)) @ vecs.conj().T
    jumps.append((gamma(bath, 0.0), l0))
    if h_ls is not None:
        h_ls += lamb_shift_s(bath, 0.0) * (l0.conj().T @ l0)
    return _lindblad(rho, jumps, h_ls)


def _gamma_matrix(bath, eps):
    """Gamma(w_ab) with w_ab = eps_b - eps_a."""
    m = len(eps)
    return np.array([[big_gamma(bath, eps[b] - eps[a]) for b in range(m)] for a in range(m)])


def driven_interaction_terms(frame: DrivenFrame, a: np.ndarray, bath: BathSpectrum, t: float):
    """Interaction-picture ingredients of the nonsecular driven dissipator.

    Returns (V, K_I, A_I) with K_I = sum Gamma(w_aa') e^{-i Phi_aa'} U^dag(a) A U(a')
    and A_I = V^dag A V, where U(x) = |phi_x(t)><phi_x(0)| and Phi the
    accumulated frequency phase.
    """
    eps, vt = frame.modes(t)
    v0 = frame.vectors0
    theta = frame.phases(t)
    acc = theta[None, :] - theta[:, None]  # Phi_ab = int (eps_b - eps_a)
    at = vt.conj().T @ a @ vt
    coeff = _gamma_matrix(bath, eps) * np.exp(-1j * acc)
    k_i = v0 @ (coeff * at) @ v0.conj().T
    v = frame.frame(t)
    a_i = v.conj().T @ a @ v
    return v, k_i, a_i


def dissipator_driven(
    system: SystemSpec,
    bath: BathSpectrum,
    rho,
    t: float,
    secular: bool,
    frame: Optional[DrivenFrame] = None,
    allow_multilevel: bool = False,
) -> DissipatorOutput:
    """Dissipator of an adiabatically driven system in the instantaneous-mode basis.

    secular=True gives the Lindblad form with L_0 = sum Pi(a) A Pi(a) and
    L_ab = Pi(a) A Pi(b) at rates gamma(eps_b - eps_a). secular=False builds
    the Redfield form in the interaction picture, with mode propagators and
    accumulated phases, and rotates it back with the adiabatic frame V(t).
    """
    rho = _check_state(system, rho)
    a = _single_coupling(system)
    _check_driven_dim(system, allow_multilevel)
    frame = frame or DrivenFrame(system)
    if secular:
        eps, vecs = frame.modes(t)
        return DissipatorOutput(_driven_secular(rho, a, bath, eps, vecs), t)
    v, k_i, a_i = driven_interaction_terms(frame, a, bath, t)
    rho_i = v.conj().T @ rho @ v
    d_i = _redfield(rho_i, k_i, a_i)
    return DissipatorOutput(v @ d_i @ v.conj().T, t)


def driven_interaction_current(
    system: SystemSpec, bath: BathSpectrum, rho, g, t: float, frame: Optional[DrivenFrame] = None
) -> float:
    """Tr_S{D_I G_I} for the nonsecular driven dissipator, G_I = V^dag G V."""
    rho = _check_state(system, rho)
    a = _single_coupling(system)
    frame = frame or DrivenFrame(system)
    v, k_i, a_i = driven_interaction_terms(frame, a, bath, t)
    rho_i = v.conj().T @ rho @ v
    g_i = v.conj().T @ np.asarray(g) @ v
    d_i = _redfield(rho_i, k_i, a_i)
    return _real_trace(d_i @ g_i, scale=_scale(d_i, g_i))


# ---------------------------------------------------------------- currents


def _scale(d, g):
    return max(1.0, float(np.max(np.abs(d))) * float(np.max(np.abs(g))))


def _real_trace(m, scale=1.0, tol=1e-11):
    tr = np.trace(m)
    if abs(tr.imag) > tol * scale:
        raise NumericError(f"trace has imaginary residue {tr.imag:.3e}")
    return float(tr.real)


def dissipative_current_rhs(d: DissipatorOutput, g: ObservableSpec) -> float:
    """Generator-side dissipative current Tr_S{D G}."""
    gm = g.at(d.t) if isinstance(g, ObservableSpec) else as_matrix(g)
    if gm.shape != d.d.shape:
        raise ShapeError(f"observable shape {gm.shape} does not match dissipator {d.d.shape}")
    return _real_trace(d.d @ gm, scale=_scale(d.d, gm))


# ---------------------------------------------------------------- bound generator


class Generator:
    """A dissipator bound to a system, with per-scenario quantities precomputed.

    Calling it returns D(rho, t) as a bare array. Time-independent variants
    also expose the superoperator of the full right-hand side.
    """

    def __init__(self, system: SystemSpec, kind: GeneratorKind):
        self.system = system
        self.kind = kind
        v = kind.variant
        if not kind.driven and not system.drive.is_static:
            raise ValidationError(f"{v} requires a static system Hamiltonian; use a driven_* generator", "generator.variant")
        self.eig = None
        self.frame = None
        if v == "singular_coupling":
            n = len(system.couplings)
            if kind.gamma_matrix.shape != (n, n):
                raise ShapeError(
                    f"generator.rates: {kind.gamma_matrix.shape} rate matrix for {n} couplings"
                )
            self._h_ls = singular_lamb_shift(system.couplings, kind.s_matrix)
        elif v == "secular_weak":
            self.eig = build_eigenoperators(system.h_s, _single_coupling(system))
            self._eigs = [self.eig]
            self._jumps, self._h_ls = secular_terms(self.eig, kind.bath)
        elif v == "redfield_nonsecular":
            # one independent bath channel per coupling term
            self._eigs = [build_eigenoperators(system.h_s, c) for c in system.couplings]
            self.eig = self._eigs[0] if len(self._eigs) == 1 else None
            self._red = [
                (redfield_operator(e, kind.bath), sum(op for _, op in e) if len(e) else np.zeros_like(e.source))
                for e in self._eigs
            ]
        else:
            _single_coupling(system)
            _check_driven_dim(system, kind.allow_multilevel)
            self.frame = DrivenFrame(system)
        self._super = None

    @property
    def autonomous(self) -> bool:
        return not self.kind.driven or self.system.drive.is_static

    def __call__(self, rho: np.ndarray, t: float = 0.0) -> np.ndarray:
        v = self.kind.variant
        if v == "singular_coupling":
            return _singular(rho, self.system.couplings, self.kind.gamma_matrix, self._h_ls)
        if v == "secular_weak":
            return _lindblad(rho, self._jumps, self._h_ls)
        if v == "redfield_nonsecular":
            out = np.zeros_like(rho)
            for k, a in self._red:
                out += _redfield(rho, k, a)
            return out
        a = self.system.couplings[0]
        if v == "driven_secular":
            eps, vecs = self.frame.modes(t)
            return _driven_secular(rho, a, self.kind.bath, eps, vecs)
        vv, k_i, a_i = driven_interaction_terms(self.frame, a, self.kind.bath, t)
        rho_i = vv.conj().T @ rho @ vv
        return vv @ _redfield(rho_i, k_i, a_i) @ vv.conj().T

    def output(self, rho, t: float = 0.0) -> DissipatorOutput:
        return DissipatorOutput(self(np.asarray(rho, dtype=np.complex128), t), t)

    def dissipator_superoperator(self) -> np.ndarray:
        if not self.autonomous:
            raise ValidationError("time-dependent generator has no fixed superoperator")
        if self._super is None:
            self._super = superoperator(lambda r: self(r, 0.0), self.system.dim)
        return self._super

    def max_rate(self) -> float:
        """Largest relaxation rate, used for the default time step."""
        v = self.kind.variant
        if v == "singular_coupling":
            g = self.kind.gamma_matrix
            return float(np.max(np.abs(eig_hermitian(g).raw_eigenvalues))) * max(
                float(np.max(np.abs(a))) ** 2 for a in self.system.couplings
            )
        if self.frame is not None:
            eps = self.frame.modes(0.0)[0]
            ws = [eps[j] - eps[i] for i in range(len(eps)) for j in range(len(eps))]
            return float(max(gamma(self.kind.bath, w) for w in ws)) * float(np.max(np.abs(self.system.couplings[0]))) ** 2
        return max(
            (float(gamma(self.kind.bath, w)) * float(np.max(np.abs(op))) ** 2 for e in self._eigs for w, op in e),
            default=0.0,
        )
