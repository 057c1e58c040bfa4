"""Schrödinger propagation on a time grid, and fidelity series.

The propagator is the exponential midpoint rule
``U_{k+1} = exp(-i H(t_k + dt/2) dt) U_k``: unitary by construction and
second-order accurate for smooth Hamiltonian paths.  Densities are evolved by
conjugation with the unitary, which inherits exact trace and positivity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from . import linalg
from .errors import DomainError, InputError, NumericalError, ProjectorError

if TYPE_CHECKING:  # pragma: no cover
    from .projectors import ProjectorPath

# Default number of integration steps per run.
DEFAULT_STEPS = 2000

# Fidelity values this far outside [0, 1] are clamped and counted as roundoff;
# larger excursions raise, since they signal a real bug rather than noise.
FIDELITY_SLACK = 1e-12

# Default finite-difference step, as a fraction of the domain length.
FD_STEP_FACTOR = 1e-5

_DOMAIN_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing time nodes t_0 < t_1 < ... (at least two)."""

    nodes: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.shape[0] < 2:
            raise InputError("a time grid needs at least two nodes")
        if not np.isfinite(nodes).all():
            raise InputError("time grid contains non-finite nodes")
        if not np.all(np.diff(nodes) > 0.0):
            raise InputError("time grid nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, t_start: float, t_end: float, steps: int) -> "TimeGrid":
        if steps < 1:
            raise InputError("steps must be >= 1")
        return cls(np.linspace(float(t_start), float(t_end), int(steps) + 1))

    @property
    def uniform_spacing(self) -> bool:
        d = np.diff(self.nodes)
        return bool(np.allclose(d, d[0], rtol=1e-12, atol=0.0))

    @property
    def t_start(self) -> float:
        return float(self.nodes[0])

    @property
    def t_end(self) -> float:
        return float(self.nodes[-1])

    @property
    def steps(self) -> int:
        return self.nodes.shape[0] - 1

    @property
    def span(self) -> float:
        return self.t_end - self.t_start

    def __len__(self) -> int:
        return self.nodes.shape[0]


def _check_domain(t: float, domain: tuple[float, float], what: str = "t") -> None:
    lo, hi = domain
    slack = _DOMAIN_SLACK * max(hi - lo, 1.0)
    if t < lo - slack or t > hi + slack:
        raise DomainError(f"{what}={t:.6g} outside the path domain [{lo:.6g}, {hi:.6g}]")


def fd_matrix(
    sampler: Callable[[float], np.ndarray],
    t: float,
    h: float,
    domain: tuple[float, float],
) -> np.ndarray:
    """Finite-difference derivative of a matrix/vector-valued sampler.

    Central second-order stencil with one Richardson refinement; falls back to
    the one-sided second-order stencil (also refined) near domain endpoints.
    """
    lo, hi = domain
    if h <= 0.0:
        raise InputError("finite-difference step must be positive")
    if hi - lo < 4.0 * h:
        raise DomainError(f"domain [{lo:.6g}, {hi:.6g}] too short for step h={h:.3e}")

    def central(step: float) -> np.ndarray:
        return (np.asarray(sampler(t + step)) - np.asarray(sampler(t - step))) / (2.0 * step)

    def one_sided(step: float, sign: float) -> np.ndarray:
        f0 = np.asarray(sampler(t))
        f1 = np.asarray(sampler(t + sign * step))
        f2 = np.asarray(sampler(t + 2.0 * sign * step))
        return sign * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * step)

    if t - h >= lo and t + h <= hi:
        d1, d2 = central(h), central(h / 2.0)
    elif t + 2.0 * h <= hi:
        d1, d2 = one_sided(h, +1.0), one_sided(h / 2.0, +1.0)
    elif t - 2.0 * h >= lo:
        d1, d2 = one_sided(h, -1.0), one_sided(h / 2.0, -1.0)
    else:
        raise DomainError(f"no finite-difference stencil fits at t={t:.6g}")
    return (4.0 * d2 - d1) / 3.0


@dataclass(frozen=True, eq=False)
class OperatorPath:
    """A time-parametrized operator t -> A(t) on a closed domain.

    `sampler` must return a dim x dim complex matrix everywhere on the domain;
    `derivative`, when given, is the analytic d/dt of the sampler.  Hosts both
    Hermitian paths (Hamiltonians) and general ones (unitary generators W_t).
    """

    dim: int
    sampler: Callable[[float], np.ndarray]
    domain: tuple[float, float]
    derivative: Callable[[float], np.ndarray] | None = None

    def __post_init__(self) -> None:
        lo, hi = self.domain
        if not (np.isfinite(lo) and np.isfinite(hi) and hi > lo):
            raise InputError(f"invalid path domain [{lo}, {hi}]")
        if self.dim < 1:
            raise InputError("path dimension must be >= 1")

    def __call__(self, t: float) -> np.ndarray:
        _check_domain(t, self.domain)
        return self.sampler(t)

    @property
    def span(self) -> float:
        return self.domain[1] - self.domain[0]

    def derivative_at(self, t: float, h: float | None = None) -> np.ndarray:
        """Analytic derivative when available, else finite differences."""
        _check_domain(t, self.domain)
        if self.derivative is not None:
            return np.asarray(self.derivative(t))
        if h is None:
            h = FD_STEP_FACTOR * self.span
        return fd_matrix(self.sampler, t, h, self.domain)

    @classmethod
    def constant(cls, a, domain: tuple[float, float]) -> "OperatorPath":
        m = linalg.as_complex_matrix(a, "constant operator")
        zero = np.zeros_like(m)
        return cls(dim=m.shape[0], sampler=lambda t: m, domain=domain,
                   derivative=lambda t: zero)

    @classmethod
    def zero(cls, dim: int, domain: tuple[float, float]) -> "OperatorPath":
        return cls.constant(np.zeros((dim, dim), dtype=complex), domain)

    @classmethod
    def from_fourier(
        cls,
        terms: list[tuple[float, np.ndarray, np.ndarray | None]],
        domain: tuple[float, float],
        hermitian: bool = True,
    ) -> "OperatorPath":
        """Path H(t) = sum_k A_k cos(w_k t) + B_k sin(w_k t).

        `terms` is a list of (omega, A, B); B may be None (pure cosine term,
        the natural encoding for a constant piece at omega = 0).
        """
        if not terms:
            raise InputError("at least one Fourier term is required")
        parsed: list[tuple[float, np.ndarray, np.ndarray]] = []
        dim = None
        for omega, a, b in terms:
            ma = linalg.as_complex_matrix(a, "cosine coefficient")
            mb = (np.zeros_like(ma) if b is None
                  else linalg.as_complex_matrix(b, "sine coefficient"))
            if hermitian:
                linalg.check_hermitian(ma, "cosine coefficient", rtol=1e-10)
                linalg.check_hermitian(mb, "sine coefficient", rtol=1e-10)
            if dim is None:
                dim = ma.shape[0]
            if ma.shape[0] != dim or mb.shape[0] != dim:
                raise InputError("Fourier coefficients have inconsistent dimensions")
            parsed.append((float(omega), ma, mb))

        omegas = np.array([p[0] for p in parsed])
        cos_flat = np.stack([p[1] for p in parsed]).reshape(len(parsed), -1)
        sin_flat = np.stack([p[2] for p in parsed]).reshape(len(parsed), -1)
        shape = (dim, dim)

        def sample(t: float) -> np.ndarray:
            phases = omegas * t
            flat = np.cos(phases) @ cos_flat + np.sin(phases) @ sin_flat
            return flat.reshape(shape)

        def deriv(t: float) -> np.ndarray:
            phases = omegas * t
            flat = (omegas * np.cos(phases)) @ sin_flat - (omegas * np.sin(phases)) @ cos_flat
            return flat.reshape(shape)

        return cls(dim=dim, sampler=sample, domain=domain, derivative=deriv)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Per-node samples of a propagated evolution."""

    grid: TimeGrid
    unitaries: np.ndarray
    states: np.ndarray | None = None
    densities: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.unitaries.shape[-1]

    def unitarity_drift(self) -> float:
        eye = np.eye(self.dim)
        return max(
            float(np.abs(u.conj().T @ u - eye).max()) for u in self.unitaries
        )

    def trace_drift(self) -> float:
        if self.densities is None:
            return 0.0
        return max(float(abs(np.trace(r) - 1.0)) for r in self.densities)

    def validate(self) -> None:
        """Check the per-node invariants; raises NumericalError on violation."""
        if self.unitarity_drift() > 1e-8:
            raise NumericalError(f"unitarity drift {self.unitarity_drift():.3e} > 1e-8")
        if self.densities is not None:
            for t, rho in zip(self.grid.nodes, self.densities):
                if float(np.abs(rho - rho.conj().T).max()) > 1e-10:
                    raise NumericalError(f"density not Hermitian at t={t:.6g}")
                w = np.linalg.eigvalsh(rho)
                if float(w[0]) < -1e-10:
                    raise NumericalError(f"density not PSD at t={t:.6g}: min eig {w[0]:.3e}")
                if abs(float(np.trace(rho).real) - 1.0) > 1e-10:
                    raise NumericalError(f"density trace drift at t={t:.6g}")
        if self.states is not None:
            norms = np.linalg.norm(self.states, axis=1)
            if float(np.abs(norms - 1.0).max()) > 1e-10:
                raise NumericalError("state normalization drift exceeds 1e-10")


@dataclass(frozen=True, eq=False)
class FidelitySeries:
    """Probability of finding the evolving state in the target subspace."""

    grid: TimeGrid
    values: np.ndarray
    clamped: int = 0


def _check_grid_in_domain(grid: TimeGrid, domain: tuple[float, float]) -> None:
    _check_domain(grid.t_start, domain, "grid start")
    _check_domain(grid.t_end, domain, "grid end")


def propagate_unitary(h_path: OperatorPath, grid: TimeGrid) -> Trajectory:
    """Solve i dU/dt = H(t) U with U(t_0) = identity on the grid nodes."""
    _check_grid_in_domain(grid, h_path.domain)
    dim = h_path.dim
    out = np.empty((len(grid), dim, dim), dtype=complex)
    u = np.eye(dim, dtype=complex)
    out[0] = u
    nodes = grid.nodes
    for k in range(len(nodes) - 1):
        dt = nodes[k + 1] - nodes[k]
        t_mid = nodes[k] + 0.5 * dt
        h_mid = linalg.check_hermitian(h_path.sampler(t_mid), f"H(t={t_mid:.6g})", rtol=1e-10)
        w, v = np.linalg.eigh(h_mid)
        u = (v * np.exp(-1j * w * dt)) @ v.conj().T @ u
        out[k + 1] = u
    return Trajectory(grid=grid, unitaries=out)


def check_density(rho, name: str = "rho0") -> np.ndarray:
    """Validate a density matrix (Hermitian, PSD and unit trace to 1e-10)."""
    m = linalg.check_hermitian(rho, name, rtol=1e-10)
    w = np.linalg.eigvalsh(m)
    if float(w[0]) < -1e-10:
        raise InputError(f"{name} is not positive semidefinite: min eig {w[0]:.3e}")
    if abs(float(np.trace(m).real) - 1.0) > 1e-10:
        raise InputError(f"{name} trace is {np.trace(m).real!r}, expected 1")
    return m


def propagate_density(h_path: OperatorPath, rho0, grid: TimeGrid) -> Trajectory:
    """Evolve a density matrix as rho_t = U_t rho_0 U_t^dag."""
    rho = check_density(rho0)
    traj = propagate_unitary(h_path, grid)
    densities = np.empty_like(traj.unitaries)
    for k, u in enumerate(traj.unitaries):
        r = u @ rho @ u.conj().T
        densities[k] = 0.5 * (r + r.conj().T)
    return Trajectory(grid=grid, unitaries=traj.unitaries, densities=densities)


def propagate_state(h_path: OperatorPath, psi0, grid: TimeGrid) -> Trajectory:
    """Evolve a pure state as psi_t = U_t psi_0."""
    v = np.asarray(psi0, dtype=complex).reshape(-1)
    if v.shape[0] != h_path.dim:
        raise InputError(f"state dim {v.shape[0]} does not match path dim {h_path.dim}")
    if abs(np.linalg.norm(v) - 1.0) > 1e-10:
        raise InputError("initial state is not normalized")
    traj = propagate_unitary(h_path, grid)
    states = np.einsum("kij,j->ki", traj.unitaries, v)
    return Trajectory(grid=grid, unitaries=traj.unitaries, states=states)


def check_projector_sample(p, t: float, tol: float = 1e-8) -> np.ndarray:
    m = np.asarray(p)
    if float(np.abs(m - m.conj().T).max()) > tol:
        raise ProjectorError(f"projector sample not Hermitian at t={t:.6g}")
    if float(np.abs(m @ m - m).max()) > tol:
        raise ProjectorError(f"projector sample not idempotent at t={t:.6g}")
    return m


def fidelity_series(traj: Trajectory, proj: "ProjectorPath") -> FidelitySeries:
    """F(t_k) = tr(rho_{t_k} P_{t_k}) along a trajectory.

    Accepts trajectories carrying densities or pure states (promoted to
    rank-1 densities implicitly).  Values within FIDELITY_SLACK outside
    [0, 1] are clamped and counted; larger excursions raise.
    """
    if traj.densities is None and traj.states is None:
        raise InputError("trajectory carries neither densities nor states")
    if proj.dim != traj.dim:
        raise InputError(f"projector dim {proj.dim} does not match trajectory dim {traj.dim}")
    values = np.empty(len(traj.grid))
    clamped = 0
    for k, t in enumerate(traj.grid.nodes):
        p = check_projector_sample(proj(t), t)
        if traj.densities is not None:
            f = float(np.einsum("ij,ji->", traj.densities[k], p).real)
        else:
            psi = traj.states[k]
            f = float(np.vdot(psi, p @ psi).real)
        if f < -FIDELITY_SLACK or f > 1.0 + FIDELITY_SLACK:
            raise NumericalError(
                f"fidelity {f!r} at t={t:.6g} is outside [0, 1] beyond roundoff slack"
            )
        if f < 0.0 or f > 1.0:
            clamped += 1
            f = min(max(f, 0.0), 1.0)
        values[k] = f
    return FidelitySeries(grid=traj.grid, values=values, clamped=clamped)
