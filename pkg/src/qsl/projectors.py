"""Time-dependent projector and state paths.

Three ways to build a projector path Pi(t) = Pi(t)^2 = Pi(t)^dag:

* static: a fixed projector,
* unitary-generated: Pi(t) = W(t) Pi(0) W(t)^dag for a unitary path W,
* eigen-tracked: the projector onto a selected eigenvalue cluster of a
  Hermitian path H(t), followed smoothly along a grid.

The sampled projector of an eigen-tracked path is gauge-free; gauge fixing
only enters where eigenvector *frames* are exposed (state paths), because a
frame is defined only up to a unitary inside the cluster.  Frames are aligned
node-to-node by the orthogonal Procrustes rotation, which for rank 1 reduces
to making the overlap with the previous node real positive.

Also here: the fictitious Hermitian generator i[dPi, Pi] whose Schrödinger
flow reproduces the path with the smallest possible generator norm, and the
interaction-picture conjugation U^dag Pi U.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from . import linalg
from .dynamics import (
    FD_STEP_FACTOR,
    OperatorPath,
    TimeGrid,
    _check_domain,
    check_projector_sample,
    fd_matrix,
    propagate_unitary,
)
from .errors import DegeneracyError, DomainError, InputError, ProjectorError

# Tolerance target for constructed projector paths (idempotency, Hermiticity).
PROJECTOR_TOL = 1e-10

# tr(Pi_k Pi_{k+1}) may fall short of the rank by at most this much before we
# declare that cluster membership changed between two grid nodes.
MEMBERSHIP_TOL = 0.5


@dataclass(frozen=True, eq=False)
class StatePath:
    """A time-parametrized normalized vector t -> phi(t)."""

    dim: int
    sampler: Callable[[float], np.ndarray]
    domain: tuple[float, float]
    derivative: Callable[[float], np.ndarray] | None = None

    def __call__(self, t: float) -> np.ndarray:
        _check_domain(t, self.domain)
        return np.asarray(self.sampler(t), dtype=complex).reshape(-1)

    @property
    def span(self) -> float:
        return self.domain[1] - self.domain[0]

    def derivative_at(self, t: float, h: float | None = None) -> np.ndarray:
        _check_domain(t, self.domain)
        if self.derivative is not None:
            return np.asarray(self.derivative(t), dtype=complex).reshape(-1)
        if h is None:
            h = FD_STEP_FACTOR * self.span
        return fd_matrix(self.sampler, t, h, self.domain)

    def with_phase(self, theta: Callable[[float], float]) -> "StatePath":
        """The gauge-transformed path e^{i theta(t)} phi(t) (sampler only)."""
        return StatePath(
            dim=self.dim,
            sampler=lambda t: np.exp(1j * theta(t)) * np.asarray(self.sampler(t)),
            domain=self.domain,
        )


@dataclass(frozen=True, eq=False)
class ProjectorPath:
    """A time-parametrized orthogonal projector of constant rank.

    kind is one of "static", "unitary", "eigen", "interaction"; the
    corresponding generating objects (W path, H path + levels) travel along
    so bound evaluators can reach them.
    """

    dim: int
    rank: int
    sampler: Callable[[float], np.ndarray]
    domain: tuple[float, float]
    derivative: Callable[[float], np.ndarray] | None = None
    kind: str = "static"
    w_path: OperatorPath | None = None
    h_path: OperatorPath | None = None
    levels: tuple[int, ...] | None = None

    def __call__(self, t: float) -> np.ndarray:
        _check_domain(t, self.domain)
        return self.sampler(t)

    @property
    def span(self) -> float:
        return self.domain[1] - self.domain[0]

    def derivative_at(self, t: float, h: float | None = None) -> np.ndarray:
        """Analytic derivative when available, else finite differences.

        Unlike projector_derivative, this clamps to one-sided stencils at
        domain endpoints so integrands can be sampled on a full grid.
        """
        _check_domain(t, self.domain)
        if self.derivative is not None:
            return np.asarray(self.derivative(t))
        if h is None:
            h = FD_STEP_FACTOR * self.span
        return fd_matrix(self.sampler, t, h, self.domain)


def static_projector(p, domain: tuple[float, float]) -> ProjectorPath:
    """Constant projector path."""
    m = linalg.as_complex_matrix(p, "projector")
    if float(np.abs(m - m.conj().T).max()) > PROJECTOR_TOL:
        raise ProjectorError("static projector is not Hermitian")
    if float(np.abs(m @ m - m).max()) > PROJECTOR_TOL:
        raise ProjectorError("static projector is not idempotent")
    rank = int(round(float(np.trace(m).real)))
    zero = np.zeros_like(m)
    return ProjectorPath(
        dim=m.shape[0], rank=rank, sampler=lambda t: m, domain=domain,
        derivative=lambda t: zero, kind="static",
    )


def unitary_generated(w_path: OperatorPath, p0) -> ProjectorPath:
    """Projector path Pi(t) = W(t) Pi(0) W(t)^dag generated by a unitary path."""
    m0 = linalg.as_complex_matrix(p0, "initial projector")
    if float(np.abs(m0 @ m0 - m0).max()) > PROJECTOR_TOL:
        raise ProjectorError("initial projector is not idempotent")
    w0 = w_path(w_path.domain[0])
    eye = np.eye(w_path.dim)
    if float(np.abs(w0.conj().T @ w0 - eye).max()) > 1e-8:
        raise InputError("generating path is not unitary at the domain start")
    rank = int(round(float(np.trace(m0).real)))

    def sample(t: float) -> np.ndarray:
        w = w_path.sampler(t)
        return w @ m0 @ w.conj().T

    deriv = None
    if w_path.derivative is not None:
        def deriv(t: float) -> np.ndarray:
            w = w_path.sampler(t)
            wd = w_path.derivative(t)
            m = wd @ m0 @ w.conj().T
            return m + m.conj().T

    return ProjectorPath(
        dim=w_path.dim, rank=rank, sampler=sample, domain=w_path.domain,
        derivative=deriv, kind="unitary", w_path=w_path,
    )


@dataclass(frozen=True, eq=False)
class EigenTrack:
    """Gauge-aligned eigenframes of a Hermitian path along a grid."""

    grid: TimeGrid
    levels: tuple[int, ...]
    frames: np.ndarray       # (nodes, dim, rank)
    gaps: np.ndarray         # (nodes,) distance of the cluster to the rest
    eigenvalues: np.ndarray  # (nodes, rank)

    @property
    def min_gap(self) -> float:
        return float(self.gaps.min())


def _check_levels(levels, dim: int) -> tuple[int, ...]:
    lv = tuple(sorted(set(int(i) for i in levels)))
    if not lv:
        raise InputError("at least one level index is required")
    if lv[0] < 0 or lv[-1] >= dim:
        raise InputError(f"level indices {lv} out of range for dim {dim}")
    return lv


def _cluster_gap(w: np.ndarray, levels: tuple[int, ...]) -> float:
    sel = np.zeros(w.shape[0], dtype=bool)
    sel[list(levels)] = True
    if sel.all():
        return np.inf
    return float(np.abs(w[sel][:, None] - w[~sel][None, :]).min())


def track_eigenframes(
    h_path: OperatorPath,
    levels,
    grid: TimeGrid,
    cluster_tol: float | None = None,
) -> EigenTrack:
    """Follow the eigenvectors of the selected levels smoothly along the grid.

    Raises DegeneracyError, naming the offending time window, if the selected
    cluster touches the rest of the spectrum at a node or if its membership
    changes between adjacent nodes (an unresolved crossing).  Either way the
    path would not be a smooth projector family, so we abort rather than
    interpolate through it.
    """
    lv = _check_levels(levels, h_path.dim)
    rank = len(lv)
    nodes = grid.nodes
    frames = np.empty((nodes.shape[0], h_path.dim, rank), dtype=complex)
    gaps = np.empty(nodes.shape[0])
    eigenvalues = np.empty((nodes.shape[0], rank))
    sel = set(lv)
    prev: np.ndarray | None = None
    for k, t in enumerate(nodes):
        dec = linalg.hermitian_eig(h_path(t), cluster_tol)
        for cluster in dec.clusters:
            hit = sel.intersection(cluster)
            if hit and len(hit) != len(cluster):
                raise DegeneracyError(
                    f"selected levels {lv} are not separated from the rest of the "
                    f"spectrum at t={t:.6g} (cluster tolerance {dec.cluster_tol:.3e})"
                )
        raw = dec.eigenvectors[:, list(lv)]
        if prev is not None:
            # tr(Pi_prev Pi_k) == rank for an unchanged subspace.
            overlap = float(np.linalg.norm(raw.conj().T @ prev) ** 2)
            if rank - overlap > MEMBERSHIP_TOL:
                raise DegeneracyError(
                    f"eigenvalue cluster membership changed between t={nodes[k-1]:.6g} "
                    f"and t={t:.6g} (subspace overlap {overlap:.3f} of {rank})"
                )
            # Orthogonal Procrustes alignment against the previous frame; for
            # rank 1 this is the real-positive-overlap phase convention.
            u, _, vh = np.linalg.svd(raw.conj().T @ prev)
            frames[k] = raw @ (u @ vh)
        else:
            frames[k] = raw
        gaps[k] = _cluster_gap(dec.eigenvalues, lv)
        eigenvalues[k] = dec.eigenvalues[list(lv)]
        prev = frames[k]
    return EigenTrack(grid=grid, levels=lv, frames=frames, gaps=gaps,
                      eigenvalues=eigenvalues)


def eigenprojector_path(
    h_path: OperatorPath,
    levels,
    grid: TimeGrid,
    cluster_tol: float | None = None,
) -> ProjectorPath:
    """Projector onto the selected instantaneous eigenvalue cluster of H(t).

    The path is validated (gap and membership) on the given grid; the sampler
    itself works anywhere on the Hamiltonian's domain and is gauge-free.
    An analytic derivative is attached when H(t) has one.
    """
    track = track_eigenframes(h_path, levels, grid, cluster_tol)
    lv = list(track.levels)

    # One eigh per distinct time, shared between the sampler and the
    # derivative (grids revisit the same nodes across fidelity/bound loops).
    @lru_cache(maxsize=4096)
    def eig_at(t: float) -> tuple[np.ndarray, np.ndarray]:
        return np.linalg.eigh(h_path(t))

    def sample(t: float) -> np.ndarray:
        _, v = eig_at(t)
        vs = v[:, lv]
        return vs @ vs.conj().T

    deriv = None
    if h_path.derivative is not None:
        # First-order perturbation theory:
        #   dPi = sum_{i in S, j not in S} |v_j><v_j|dH|v_i><v_i| / (l_i - l_j) + h.c.
        # Within-cluster terms drop out, so the expression is gauge-free.
        others = None

        def deriv(t: float) -> np.ndarray:
            w, v = eig_at(t)
            nonlocal others
            if others is None:
                others = [j for j in range(w.shape[0]) if j not in track.levels]
            if not others:
                return np.zeros((w.shape[0], w.shape[0]), dtype=complex)
            hd = h_path.derivative(t)
            vs = v[:, lv]
            vo = v[:, others]
            g = vo.conj().T @ hd @ vs
            denom = w[lv][None, :] - w[others][:, None]
            m = vo @ (g / denom) @ vs.conj().T
            return m + m.conj().T

    return ProjectorPath(
        dim=h_path.dim, rank=len(lv), sampler=sample, domain=h_path.domain,
        derivative=deriv, kind="eigen", h_path=h_path, levels=track.levels,
    )


def eigenstate_path(
    h_path: OperatorPath,
    level: int,
    grid: TimeGrid,
    cluster_tol: float | None = None,
) -> StatePath:
    """Gauge-continuous instantaneous eigenvector of a nondegenerate level.

    Off-node samples are phase-locked to the nearest tracked node, which keeps
    the sampled path continuous on the working grid.  The analytic derivative
    (when H has one) uses the parallel-transport gauge <phi|dphi> = 0; every
    quantity built on it downstream is gauge-invariant.
    """
    track = track_eigenframes(h_path, (level,), grid, cluster_tol)
    nodes = grid.nodes
    refs = track.frames[:, :, 0]
    lvl = int(level)

    def nearest_ref(t: float) -> np.ndarray:
        k = int(np.searchsorted(nodes, t))
        if k <= 0:
            return refs[0]
        if k >= nodes.shape[0]:
            return refs[-1]
        return refs[k] if (nodes[k] - t) < (t - nodes[k - 1]) else refs[k - 1]

    def sample(t: float) -> np.ndarray:
        _, v = np.linalg.eigh(h_path(t))
        raw = v[:, lvl]
        z = np.vdot(nearest_ref(t), raw)
        if abs(z) < 1e-12:
            raise DegeneracyError(
                f"eigenvector at t={t:.6g} is orthogonal to the tracked reference"
            )
        return raw * (z.conjugate() / abs(z))

    deriv = None
    if h_path.derivative is not None:
        def deriv(t: float) -> np.ndarray:
            w, v = np.linalg.eigh(h_path(t))
            phi = sample(t)
            hd = h_path.derivative(t)
            others = [j for j in range(w.shape[0]) if j != lvl]
            coeff = (v[:, others].conj().T @ (hd @ phi)) / (w[lvl] - w[others])
            return v[:, others] @ coeff

    return StatePath(dim=h_path.dim, sampler=sample, domain=h_path.domain,
                     derivative=deriv)


def projector_derivative(path: ProjectorPath, t: float, h: float | None = None) -> np.ndarray:
    """dPi/dt at an interior time: analytic if the path carries one, else a
    central finite difference with one Richardson refinement."""
    _check_domain(t, path.domain)
    if path.derivative is not None:
        return np.asarray(path.derivative(t))
    if h is None:
        h = FD_STEP_FACTOR * path.span
    if h <= 0.0:
        raise InputError("finite-difference step must be positive")
    lo, hi = path.domain
    if t - h < lo or t + h > hi:
        raise DomainError(
            f"central stencil +-{h:.3e} does not fit at t={t:.6g} in [{lo:.6g}, {hi:.6g}]"
        )
    d1 = (np.asarray(path.sampler(t + h)) - np.asarray(path.sampler(t - h))) / (2.0 * h)
    d2 = (np.asarray(path.sampler(t + h / 2)) - np.asarray(path.sampler(t - h / 2))) / h
    return (4.0 * d2 - d1) / 3.0


def rank1_derivative_norm(phi: StatePath, t: float, h: float | None = None) -> float:
    """Speed of the rank-1 projector |phi><phi|:

        ||dP|| = sqrt(<dphi|dphi> - |<dphi|phi>|^2),

    the gauge-invariant (transverse) part of the state velocity.
    """
    v = phi(t)
    if abs(np.linalg.norm(v) - 1.0) > 1e-8:
        raise InputError(f"state is not normalized at t={t:.6g}")
    dv = phi.derivative_at(t, h)
    rad = float(np.vdot(dv, dv).real) - abs(np.vdot(dv, v)) ** 2
    return float(np.sqrt(max(rad, 0.0)))


def fictitious_generator(path: ProjectorPath, t: float, h: float | None = None) -> np.ndarray:
    """The Hermitian generator i[dPi, Pi], which drives i dPi = [G, Pi] and
    saturates ||dPi|| = ||G|| among all unitary generators of the path."""
    pd = projector_derivative(path, t, h)
    p = path(t)
    return 1j * (pd @ p - p @ pd)


def interaction_picture_path(
    proj: ProjectorPath, h_path: OperatorPath, grid: TimeGrid
) -> ProjectorPath:
    """Conjugated path Pi^U(t) = U(t)^dag Pi(t) U(t) with i dU = H U, U(0) = 1.

    Carries the analytic derivative U^dag (i[H, Pi] + dPi) U, whose spectral
    norm at each time equals ||i[H, Pi] + dPi|| by unitary invariance.
    """
    if proj.dim != h_path.dim:
        raise InputError("projector and Hamiltonian paths have different dims")
    traj = propagate_unitary(h_path, grid)
    nodes = grid.nodes
    us = traj.unitaries

    def u_at(t: float) -> np.ndarray:
        k = int(np.searchsorted(nodes, t, side="right")) - 1
        k = min(max(k, 0), nodes.shape[0] - 1)
        dt = t - nodes[k]
        if dt == 0.0:
            return us[k]
        h_mid = h_path.sampler(nodes[k] + 0.5 * dt)
        return linalg.expm_unitary(h_mid, dt) @ us[k]

    def sample(t: float) -> np.ndarray:
        u = u_at(t)
        return u.conj().T @ proj(t) @ u

    def deriv(t: float) -> np.ndarray:
        u = u_at(t)
        ht = h_path(t)
        p = proj(t)
        pd = proj.derivative_at(t)
        m = 1j * (ht @ p - p @ ht) + pd
        return u.conj().T @ m @ u

    return ProjectorPath(
        dim=proj.dim, rank=proj.rank, sampler=sample,
        domain=(grid.t_start, grid.t_end), derivative=deriv, kind="interaction",
    )


def check_projector_path(path: ProjectorPath, times, tol: float = PROJECTOR_TOL) -> None:
    """Spot-check idempotency, Hermiticity and constant trace at given times."""
    for t in times:
        p = check_projector_sample(path(t), t, tol=max(tol, 1e-10))
        if abs(float(np.trace(p).real) - path.rank) > 1e-8:
            raise ProjectorError(
                f"projector trace {np.trace(p).real:.6f} != rank {path.rank} at t={t:.6g}"
            )
