"""Dense complex linear algebra for small Hilbert spaces.

Matrices are plain ``numpy`` complex128 arrays. Tensor products put the
system factor first, so a composite index is ``s * dimE + e``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, ShapeError, ValidationError

HERMITIAN_TOL = 1e-10
DEGENERACY_TOL = 1e-9
MAX_SWEEPS = 100


def as_matrix(a, name="matrix") -> np.ndarray:
    """Coerce to a finite square complex128 array."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ShapeError(f"{name} must be a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError(f"{name} has non-finite entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def hermiticity_defect(a: np.ndarray) -> float:
    return float(np.max(np.abs(a - a.conj().T)))


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return hermiticity_defect(a) < tol


def _check_same_shape(a, b):
    if a.shape != b.shape:
        raise ShapeError(f"dimension mismatch: {a.shape} vs {b.shape}")


def commutator(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    _check_same_shape(a, b)
    return a @ b - b @ a


def anticommutator(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    _check_same_shape(a, b)
    return a @ b + b @ a


def trace(a) -> complex:
    return complex(np.trace(np.asarray(a)))


def tensor(a, b) -> np.ndarray:
    return np.kron(np.asarray(a, dtype=np.complex128), np.asarray(b, dtype=np.complex128))


def partial_trace_env(m, dim_s: int, dim_e: int) -> np.ndarray:
    """Trace out the (second) environment factor of a ``dim_s*dim_e`` operator."""
    m = np.asarray(m, dtype=np.complex128)
    if m.shape != (dim_s * dim_e, dim_s * dim_e):
        raise ShapeError(f"cannot factor shape {m.shape} as ({dim_s}x{dim_e})^2")
    return np.einsum("iaja->ij", m.reshape(dim_s, dim_e, dim_s, dim_e))


def partial_trace_env_batch(ms: np.ndarray, dim_s: int, dim_e: int) -> np.ndarray:
    n = ms.shape[0]
    return np.einsum("niaja->nij", ms.reshape(n, dim_s, dim_e, dim_s, dim_e))


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues (ascending, degenerate ones merged) and eigenprojectors.

    ``vectors`` holds one orthonormal eigenvector per column, ordered like
    ``raw_eigenvalues``; ``groups[k]`` lists the columns spanning projector k.
    """

    eigenvalues: np.ndarray
    projectors: list
    raw_eigenvalues: np.ndarray
    vectors: np.ndarray
    groups: list = field(default_factory=list)
    sweeps: int = 0

    def reconstruct(self) -> np.ndarray:
        return sum(e * p for e, p in zip(self.eigenvalues, self.projectors))


def _jacobi(a: np.ndarray, max_sweeps: int):
    """Cyclic Jacobi diagonalisation of a Hermitian matrix.

    Each rotation first absorbs the phase of the pivot ``a[p, q]`` and then
    applies a real Givens rotation, so the 2x2 update stays unitary.
    """
    a = a.copy()
    n = a.shape[0]
    v = np.eye(n, dtype=np.complex128)
    target = 1e-14 * np.linalg.norm(a)
    mask = ~np.eye(n, dtype=bool)
    for sweep in range(max_sweeps + 1):
        off = math.sqrt(float(np.sum(np.abs(a[mask]) ** 2)))
        if off <= target:
            return a.diagonal().real.copy(), v, sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag == 0.0:
                    continue
                ph = apq / mag
                theta = 0.5 * math.atan2(2.0 * mag, a[q, q].real - a[p, p].real)
                c, s = math.cos(theta), math.sin(theta)
                sp, sm = s * ph, s * ph.conjugate()
                # columns: A <- A W, W = [[c, s e^{i phi}], [-s e^{-i phi}, c]]
                col_p = a[:, p].copy()
                a[:, p] = c * col_p - sm * a[:, q]
                a[:, q] = sp * col_p + c * a[:, q]
                # rows: A <- W^dagger A
                row_p = a[p, :].copy()
                a[p, :] = c * row_p - sp * a[q, :]
                a[q, :] = sm * row_p + c * a[q, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                vp = v[:, p].copy()
                v[:, p] = c * vp - sm * v[:, q]
                v[:, q] = sp * vp + c * v[:, q]
    raise ConvergenceError(
        f"Jacobi eigensolver did not converge after {max_sweeps} sweeps "
        f"(off-diagonal norm {off:.3e} > {target:.3e})",
        sweeps=max_sweeps,
    )


def eig_hermitian(a, tol_degeneracy: float = DEGENERACY_TOL, max_sweeps: int = MAX_SWEEPS) -> SpectralDecomposition:
    """Spectral decomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Eigenvalues closer than ``tol_degeneracy * ||a||_2`` are merged into a
    single eigenspace whose eigenvalue is the group mean.
    """
    a = as_matrix(a)
    if tol_degeneracy <= 0:
        raise ValidationError("tol_degeneracy must be positive")
    defect = hermiticity_defect(a)
    if defect >= HERMITIAN_TOL:
        raise ValidationError(f"matrix is not Hermitian (defect {defect:.3e})")
    a = 0.5 * (a + a.conj().T)
    w, v, sweeps = _jacobi(a, max_sweeps)
    order = np.argsort(w, kind="stable")
    w, v = w[order], v[:, order]

    scale = float(np.max(np.abs(w))) if w.size else 0.0
    gap = tol_degeneracy * scale
    groups = [[0]]
    for k in range(1, len(w)):
        if w[k] - w[groups[-1][-1]] <= gap:
            groups[-1].append(k)
        else:
            groups.append([k])
    eigenvalues = np.array([w[g].mean() for g in groups])
    projectors = []
    for g in groups:
        vg = v[:, g]
        projectors.append(vg @ vg.conj().T)
    return SpectralDecomposition(eigenvalues, projectors, w, v, groups, sweeps)


def unitary_evolve(h, t: float) -> np.ndarray:
    """exp(-i h t) via the Hermitian eigendecomposition of ``h``."""
    spec = eig_hermitian(h)
    v = spec.vectors
    return (v * np.exp(-1j * spec.raw_eigenvalues * t)) @ v.conj().T


def spectral_norm(a: np.ndarray) -> float:
    """Largest singular value (for Hermitian input, the largest |eigenvalue|)."""
    return float(np.linalg.norm(a, 2))


def min_eigenvalue(rho: np.ndarray) -> float:
    return float(eig_hermitian(0.5 * (rho + rho.conj().T)).raw_eigenvalues[0])


def vec(a: np.ndarray) -> np.ndarray:
    """Row-major vectorisation, matching ``superoperator`` below."""
    return np.ascontiguousarray(a).reshape(-1)


def superoperator(f, dim: int) -> np.ndarray:
    """Matrix of a linear map ``f`` on dim x dim operators in the ``vec`` basis."""
    out = np.empty((dim * dim, dim * dim), dtype=np.complex128)
    basis = np.zeros((dim, dim), dtype=np.complex128)
    for k in range(dim * dim):
        basis.flat[k] = 1.0
        out[:, k] = vec(f(basis))
        basis.flat[k] = 0.0
    return out


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return scale * 0.5 * (x + x.conj().T)


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = dim if rank is None else rank
    x = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


PAULI_I = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
