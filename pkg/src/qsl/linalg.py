"""Dense complex linear algebra kernel.

Hermitian eigendecomposition with eigenvalue clustering, spectral (operator)
norms, unitary exponentials of Hermitian generators, and commutators.  All
functions are pure and work on dense matrices at desk scale (dim <= 64),
where full decompositions are cheaper and more predictable than iterative
methods.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HermiticityError, InputError

# Relative tolerance for accepting a matrix as Hermitian.
HERMITICITY_RTOL = 1e-12

# Default eigenvalue cluster tolerance, relative to the spectral scale.
# Degeneracy detection is an explicit knob: quantities built on eigenprojector
# clusters are discontinuous in the input matrix, so callers may override it.
CLUSTER_TOL_FACTOR = 1e-8


def pauli() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return the Pauli matrices (sigma_x, sigma_y, sigma_z)."""
    sx = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    sy = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
    sz = np.array([[1, 0], [0, -1]], dtype=np.complex128)
    return sx, sy, sz


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def as_complex_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return `a` as a square, finite complex matrix."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise InputError(f"{name} must be a square matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise InputError(f"{name} contains non-finite entries")
    return m


def check_hermitian(a, name: str = "matrix", rtol: float = HERMITICITY_RTOL) -> np.ndarray:
    """Validate Hermiticity of `a` within `rtol` (relative to the entry scale)."""
    m = as_complex_matrix(a, name)
    scale = max(1.0, float(np.abs(m).max()))
    dev = float(np.abs(m - m.conj().T).max())
    if dev > rtol * scale:
        raise HermiticityError(
            f"{name} is not Hermitian: max |A - A^dag| = {dev:.3e} "
            f"exceeds {rtol:.1e} * {scale:.3e}"
        )
    return m


def commutator(a, b) -> np.ndarray:
    """AB - BA."""
    ma = as_complex_matrix(a, "A")
    mb = as_complex_matrix(b, "B")
    if ma.shape != mb.shape:
        raise InputError(f"commutator needs equal dims, got {ma.shape} vs {mb.shape}")
    return ma @ mb - mb @ ma


def spectral_norm(a) -> float:
    """Operator norm (largest singular value) via the eigenvalues of A^dag A."""
    m = as_complex_matrix(a, "matrix")
    w = np.linalg.eigvalsh(m.conj().T @ m)
    return float(np.sqrt(max(float(w[-1]), 0.0)))


def frobenius_norm(a) -> float:
    return float(np.linalg.norm(np.asarray(a)))


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigensystem of a Hermitian matrix with degeneracy clustering.

    `eigenvalues` are ascending, `eigenvectors` are orthonormal columns in the
    same order, and `clusters` partitions the index range into groups whose
    eigenvalues are transitively closer than `cluster_tol`.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    clusters: tuple[tuple[int, ...], ...]
    cluster_tol: float

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def cluster_value(self, cluster: tuple[int, ...]) -> float:
        """Representative (mean) eigenvalue of one cluster."""
        return float(np.mean(self.eigenvalues[list(cluster)]))

    def cluster_projector(self, cluster: tuple[int, ...]) -> np.ndarray:
        v = self.eigenvectors[:, list(cluster)]
        return v @ v.conj().T

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.conj().T


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    """Rotate each column so its largest-magnitude entry is real positive.

    Pins the eigenvector gauge so repeated runs produce identical output.
    """
    out = vecs.copy()
    rows = np.argmax(np.abs(out), axis=0)
    for col, row in enumerate(rows):
        z = out[row, col]
        if abs(z) > 0.0:
            out[:, col] *= z.conjugate() / abs(z)
    return out


def hermitian_eig(a, cluster_tol: float | None = None) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian matrix with eigenvalue clustering.

    Eigenvalues are ascending; neighbours closer than `cluster_tol` are merged
    transitively into one cluster (default tolerance: CLUSTER_TOL_FACTOR times
    the spectral scale).
    """
    m = check_hermitian(a, "matrix")
    w, v = np.linalg.eigh(m)
    if cluster_tol is None:
        cluster_tol = CLUSTER_TOL_FACTOR * float(np.abs(w).max())
    elif cluster_tol < 0.0:
        raise InputError("cluster_tol must be nonnegative")
    groups: list[list[int]] = [[0]]
    for i in range(1, w.shape[0]):
        if w[i] - w[i - 1] <= cluster_tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    return SpectralDecomposition(
        eigenvalues=w,
        eigenvectors=_fix_phases(v),
        clusters=tuple(tuple(g) for g in groups),
        cluster_tol=float(cluster_tol),
    )


def expm_unitary(h, dt: float) -> np.ndarray:
    """exp(-i * H * dt) for Hermitian H, via eigendecomposition.

    Unitary by construction up to the orthonormality error of eigh.
    """
    m = check_hermitian(h, "generator")
    if not np.isfinite(dt):
        raise InputError("dt must be finite")
    w, v = np.linalg.eigh(m)
    phases = np.exp(-1j * w * float(dt))
    return (v * phases) @ v.conj().T
