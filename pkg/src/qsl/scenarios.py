"""Closed-form and randomized test models.

Each scenario packages a Hamiltonian path, a target (projector and/or state
path), an initial density and, where available, the exact fidelity, so the
same object can feed the exact dynamics, every bound family, and the Monte
Carlo verification suites.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from . import linalg
from .dynamics import (
    DEFAULT_STEPS,
    OperatorPath,
    TimeGrid,
    propagate_state,
)
from .errors import InputError
from .projectors import (
    ProjectorPath,
    StatePath,
    eigenprojector_path,
    eigenstate_path,
    static_projector,
    unitary_generated,
)


@dataclass(frozen=True, eq=False)
class Scenario:
    """A concrete model: Hamiltonian path, target, initial state, oracles."""

    name: str
    dim: int
    h_path: OperatorPath
    rho0: np.ndarray
    domain: tuple[float, float]
    projector: ProjectorPath | None = None
    state: StatePath | None = None
    levels: tuple[int, ...] | None = None
    exact_fidelity: Callable[[float], float] | None = None
    exact_state: Callable[[float], np.ndarray] | None = None
    params: dict = field(default_factory=dict)
    default_steps: int = DEFAULT_STEPS


@dataclass(frozen=True, eq=False)
class LoschmidtPair:
    """Two Hamiltonian paths sharing an initial state, plus the known branch."""

    name: str
    dim: int
    h1_path: OperatorPath
    h2_path: OperatorPath
    psi2: StatePath
    domain: tuple[float, float]
    params: dict = field(default_factory=dict)
    exact_echo: Callable[[float], float] | None = None
    default_steps: int = DEFAULT_STEPS


# ---------------------------------------------------------------------------
# Seeded random building blocks (shared by scenarios, verify suites and tests)
# ---------------------------------------------------------------------------

def random_hermitian(rng: np.random.Generator, dim: int, scale: float | None = None) -> np.ndarray:
    """Gaussian Hermitian matrix; default entry scale keeps ||A|| = O(1)."""
    if scale is None:
        scale = 0.5 / np.sqrt(dim)
    g = scale * (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim)))
    return 0.5 * (g + g.conj().T)


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_density(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = g @ g.conj().T
    rho /= np.trace(rho).real
    return 0.5 * (rho + rho.conj().T)


def random_projector(rng: np.random.Generator, dim: int, rank: int) -> np.ndarray:
    if not 1 <= rank <= dim:
        raise InputError(f"rank {rank} out of range for dim {dim}")
    q = random_unitary(rng, dim)
    v = q[:, :rank]
    return v @ v.conj().T


def random_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_fourier_hamiltonian(
    rng: np.random.Generator,
    dim: int,
    domain: tuple[float, float],
    n_harmonics: int = 3,
    scale: float | None = None,
) -> OperatorPath:
    """Smooth random Hermitian path: a truncated Fourier series with Gaussian
    Hermitian coefficients and O(1) spectral norm."""
    terms = []
    for _ in range(n_harmonics):
        omega = float(rng.uniform(0.3, 1.5))
        terms.append((omega, random_hermitian(rng, dim, scale),
                      random_hermitian(rng, dim, scale)))
    return OperatorPath.from_fourier(terms, domain)


def random_state_path(
    rng: np.random.Generator,
    dim: int,
    domain: tuple[float, float] = (0.0, 2.0),
    n_harmonics: int = 3,
) -> StatePath:
    """Smooth random normalized vector path with an analytic derivative.

    Built as phi = c / ||c|| for a Fourier vector series c(t) whose constant
    part dominates, so the norm stays away from zero on the whole domain.
    """
    c0 = 2.0 * random_state(rng, dim)
    terms = []
    for k in range(1, n_harmonics + 1):
        omega = float(rng.uniform(0.3, 1.5))
        amp = 0.4 / k
        terms.append((omega,
                      amp * random_state(rng, dim),
                      amp * random_state(rng, dim)))

    def raw(t: float) -> np.ndarray:
        out = c0.copy()
        for omega, a, b in terms:
            out += a * np.cos(omega * t) + b * np.sin(omega * t)
        return out

    def raw_dot(t: float) -> np.ndarray:
        out = np.zeros(dim, dtype=complex)
        for omega, a, b in terms:
            out += omega * (b * np.cos(omega * t) - a * np.sin(omega * t))
        return out

    def sample(t: float) -> np.ndarray:
        c = raw(t)
        return c / np.linalg.norm(c)

    def deriv(t: float) -> np.ndarray:
        c = raw(t)
        cd = raw_dot(t)
        n = np.linalg.norm(c)
        return cd / n - c * (np.vdot(c, cd).real / n**3)

    return StatePath(dim=dim, sampler=sample, domain=domain, derivative=deriv)


def rank1_path_from_state(phi: StatePath, keep_derivative: bool = True) -> ProjectorPath:
    """The rank-1 projector path |phi><phi| induced by a state path."""

    def sample(t: float) -> np.ndarray:
        v = phi(t)
        return np.outer(v, v.conj())

    deriv = None
    if keep_derivative and phi.derivative is not None:
        def deriv(t: float) -> np.ndarray:
            v = phi(t)
            dv = phi.derivative_at(t)
            m = np.outer(dv, v.conj())
            return m + m.conj().T

    return ProjectorPath(dim=phi.dim, rank=1, sampler=sample, domain=phi.domain,
                         derivative=deriv, kind="unitary")


def random_unitary_generated_path(
    rng: np.random.Generator,
    dim: int,
    rank: int,
    domain: tuple[float, float] = (0.0, 2.0),
) -> ProjectorPath:
    """Pi(t) = W(t) Pi(0) W(t)^dag with W(t) = exp(-i s(t) K) for a random
    Hermitian K and a smooth schedule s(t) = a t + b sin(w t)."""
    k = random_hermitian(rng, dim, scale=0.8 / np.sqrt(dim))
    a = float(rng.uniform(0.3, 1.0))
    b = float(rng.uniform(0.0, 0.5))
    omega = float(rng.uniform(0.3, 1.5))
    wk, vk = np.linalg.eigh(k)

    def schedule(t: float) -> float:
        return a * t + b * np.sin(omega * t)

    def schedule_dot(t: float) -> float:
        return a + b * omega * np.cos(omega * t)

    @lru_cache(maxsize=4096)
    def w_sample(t: float) -> np.ndarray:
        return (vk * np.exp(-1j * wk * schedule(t))) @ vk.conj().T

    def w_deriv(t: float) -> np.ndarray:
        return -1j * schedule_dot(t) * (k @ w_sample(t))

    w_path = OperatorPath(dim=dim, sampler=w_sample, domain=domain, derivative=w_deriv)
    p0 = random_projector(rng, dim, rank)
    return unitary_generated(w_path, p0)


def random_gapped_path(
    rng: np.random.Generator,
    dim: int,
    domain: tuple[float, float] = (0.0, 2.0),
    spacing: float = 2.5,
    n_harmonics: int = 3,
) -> OperatorPath:
    """Hermitian Fourier path whose spectrum never closes a gap.

    A dominant static diagonal with the given spacing is perturbed by a
    Fourier part rescaled so its sup-norm stays below spacing/2; eigenvalue
    ordering (and hence any level selection) is then gap-protected for all t.
    """
    diag = np.diag(spacing * np.arange(dim)).astype(complex)
    terms = [(0.0, diag, None)]
    fourier = []
    budget = 0.0
    for _ in range(n_harmonics):
        omega = float(rng.uniform(0.3, 1.5))
        a = random_hermitian(rng, dim, scale=0.15 / np.sqrt(dim))
        b = random_hermitian(rng, dim, scale=0.15 / np.sqrt(dim))
        budget += linalg.spectral_norm(a) + linalg.spectral_norm(b)
        fourier.append((omega, a, b))
    cap = 0.4 * spacing
    rescale = cap / budget if budget > cap else 1.0
    for omega, a, b in fourier:
        terms.append((omega, rescale * a, rescale * b))
    return OperatorPath.from_fourier(terms, domain)


def state_path_from_propagation(
    h_path: OperatorPath, psi0, grid: TimeGrid
) -> StatePath:
    """Numerically propagated state wrapped as a StatePath.

    Off-node samples take one midpoint exponential step from the nearest node
    below, so the path stays normalized and second-order accurate everywhere.
    """
    traj = propagate_state(h_path, psi0, grid)
    nodes = grid.nodes
    states = traj.states

    def sample(t: float) -> np.ndarray:
        k = int(np.searchsorted(nodes, t, side="right")) - 1
        k = min(max(k, 0), nodes.shape[0] - 1)
        dt = t - nodes[k]
        if dt == 0.0:
            return states[k]
        h_mid = h_path.sampler(nodes[k] + 0.5 * dt)
        return linalg.expm_unitary(h_mid, dt) @ states[k]

    return StatePath(dim=h_path.dim, sampler=sample,
                     domain=(grid.t_start, grid.t_end))


# ---------------------------------------------------------------------------
# Named scenarios
# ---------------------------------------------------------------------------

def make_constant_two_level(delta: float) -> Scenario:
    """Constant transverse field: H = (delta/2) sigma_x, target |0><0|.

    Saturates the general bound: F(t) = cos^2(delta t / 2) exactly, with the
    lower-bound window closing at t = pi / delta.
    """
    if not delta > 0.0:
        raise InputError("delta must be positive")
    sx, _, _ = linalg.pauli()
    domain = (0.0, 2.0 * np.pi / delta)
    h_path = OperatorPath.constant(0.5 * delta * sx, domain)
    p0 = np.diag([1.0, 0.0]).astype(complex)
    proj = static_projector(p0, domain)

    def exact_f(t: float) -> float:
        return float(np.cos(0.5 * delta * t) ** 2)

    def exact_psi(t: float) -> np.ndarray:
        half = 0.5 * delta * t
        return np.array([np.cos(half), -1j * np.sin(half)], dtype=complex)

    return Scenario(
        name="constant_two_level", dim=2, h_path=h_path, rho0=p0.copy(),
        domain=domain, projector=proj, exact_fidelity=exact_f,
        exact_state=exact_psi, params={"delta": float(delta)},
    )


def make_rotating_field(delta: float, v: float, steps: int = DEFAULT_STEPS) -> Scenario:
    """Uniformly rotating field H = (delta/2)(cos(vt) sz + sin(vt) sx).

    The tracked ground eigenvector moves at constant speed v/2 and the
    rotating-frame solution is closed-form:
    F(t) = 1 - (v^2/(delta^2+v^2)) sin^2(sqrt(delta^2+v^2) t / 2).
    """
    if not (delta > 0.0 and v > 0.0):
        raise InputError("delta and v must be positive")
    sx, sy, sz = linalg.pauli()
    domain = (0.0, 1.25 * np.pi / v)

    def h(t: float) -> np.ndarray:
        return 0.5 * delta * (np.cos(v * t) * sz + np.sin(v * t) * sx)

    def h_dot(t: float) -> np.ndarray:
        return 0.5 * delta * v * (np.cos(v * t) * sx - np.sin(v * t) * sz)

    h_path = OperatorPath(dim=2, sampler=h, domain=domain, derivative=h_dot)
    grid = TimeGrid.uniform(domain[0], domain[1], steps)
    proj = eigenprojector_path(h_path, (0,), grid)
    state = eigenstate_path(h_path, 0, grid)
    phi0 = state(0.0)
    rho0 = np.outer(phi0, phi0.conj())

    omega = float(np.hypot(delta, v))
    ratio2 = (v / omega) ** 2

    def exact_f(t: float) -> float:
        return float(1.0 - ratio2 * np.sin(0.5 * omega * t) ** 2)

    ns = (-v / omega) * sy + (delta / omega) * sz
    ket1 = np.array([0.0, 1.0], dtype=complex)

    def exact_psi(t: float) -> np.ndarray:
        chi = np.cos(0.5 * omega * t) * ket1 - 1j * np.sin(0.5 * omega * t) * (ns @ ket1)
        half = 0.5 * v * t
        frame = np.array([[np.cos(half), -np.sin(half)],
                          [np.sin(half), np.cos(half)]], dtype=complex)
        return frame @ chi

    return Scenario(
        name="rotating_field", dim=2, h_path=h_path, rho0=rho0, domain=domain,
        projector=proj, state=state, levels=(0,), exact_fidelity=exact_f,
        exact_state=exact_psi, params={"delta": float(delta), "v": float(v)},
        default_steps=max(steps, DEFAULT_STEPS),
    )


def make_block_rotors(n_blocks: int, v: float) -> Scenario:
    """N orthogonal two-level blocks, each carrying a rank-1 projector that
    rotates at speed v/2 inside its own block; H = 0.

    The block structure separates the two bound routes: the direct projector
    speed stays v/2 for any N while the Frobenius route grows like sqrt(N).
    """
    if n_blocks < 1:
        raise InputError("n_blocks must be >= 1")
    if not v > 0.0:
        raise InputError("v must be positive")
    n = int(n_blocks)
    dim = 2 * n
    domain = (0.0, 1.25 * np.pi / v)
    _, sy, _ = linalg.pauli()
    gen = np.kron(np.eye(n), sy).astype(complex)

    def w_sample(t: float) -> np.ndarray:
        half = 0.5 * v * t
        rot = np.array([[np.cos(half), -np.sin(half)],
                        [np.sin(half), np.cos(half)]], dtype=complex)
        return np.kron(np.eye(n), rot)

    def w_deriv(t: float) -> np.ndarray:
        return -1j * (0.5 * v) * (gen @ w_sample(t))

    w_path = OperatorPath(dim=dim, sampler=w_sample, domain=domain, derivative=w_deriv)
    p0 = np.zeros((dim, dim), dtype=complex)
    p0[::2, ::2] = np.eye(n)
    proj = unitary_generated(w_path, p0)
    rho0 = p0 / n

    def exact_f(t: float) -> float:
        return float(np.cos(0.5 * v * t) ** 2)

    return Scenario(
        name="block_rotors", dim=dim, h_path=OperatorPath.zero(dim, domain),
        rho0=rho0, domain=domain, projector=proj, exact_fidelity=exact_f,
        params={"n_blocks": float(n), "v": float(v)},
    )


def make_landau_zener(
    delta: float,
    sweep: float,
    t_start: float = -6.0,
    t_end: float = 6.0,
    steps: int = DEFAULT_STEPS,
) -> Scenario:
    """Linear sweep through an avoided crossing:
    H(t) = (sweep * t * sigma_z + delta * sigma_x) / 2.

    The gap is sqrt((sweep*t)^2 + delta^2), minimized at t = 0.  With
    delta = 0 the crossing is exact; the scenario is still constructed, but
    eigen-tracking through it must fail, which is the negative test for the
    degeneracy detector (target/levels are left unset in that case).
    """
    if not sweep > 0.0:
        raise InputError("sweep must be positive")
    if delta < 0.0:
        raise InputError("delta must be nonnegative")
    if not t_end > t_start:
        raise InputError("empty time span")
    sx, _, sz = linalg.pauli()
    domain = (float(t_start), float(t_end))

    def h(t: float) -> np.ndarray:
        return 0.5 * (sweep * t * sz + delta * sx)

    def h_dot(t: float) -> np.ndarray:
        return 0.5 * sweep * sz

    h_path = OperatorPath(dim=2, sampler=h, domain=domain, derivative=h_dot)
    dec = linalg.hermitian_eig(h(domain[0]))
    phi0 = dec.eigenvectors[:, 0]
    rho0 = np.outer(phi0, phi0.conj())

    proj = None
    state = None
    levels = None
    if delta > 0.0:
        grid = TimeGrid.uniform(domain[0], domain[1], steps)
        proj = eigenprojector_path(h_path, (0,), grid)
        state = eigenstate_path(h_path, 0, grid)
        levels = (0,)

    return Scenario(
        name="landau_zener", dim=2, h_path=h_path, rho0=rho0, domain=domain,
        projector=proj, state=state, levels=levels,
        params={"delta": float(delta), "sweep": float(sweep),
                "expect_degeneracy": 0.0 if delta > 0.0 else 1.0},
    )


def make_free(dim: int = 2, level: int = 0, t_end: float = 4.0 * np.pi) -> Scenario:
    """Frozen dynamics H = 0 with a static basis-state target.

    Mostly a base for echo pairs: its exact state is constant.
    """
    if not 0 <= level < dim:
        raise InputError(f"level {level} out of range for dim {dim}")
    domain = (0.0, float(t_end))
    psi0 = np.zeros(dim, dtype=complex)
    psi0[level] = 1.0
    p0 = np.outer(psi0, psi0.conj())

    return Scenario(
        name="free", dim=dim, h_path=OperatorPath.zero(dim, domain),
        rho0=p0.copy(), domain=domain, projector=static_projector(p0, domain),
        exact_fidelity=lambda t: 1.0, exact_state=lambda t: psi0.copy(),
        params={"dim": float(dim), "level": float(level), "zero_h": 1.0},
    )


def make_loschmidt_pair(
    epsilon: float,
    base: Scenario,
    perturbation: np.ndarray | None = None,
    steps: int = 2 * DEFAULT_STEPS,
) -> LoschmidtPair:
    """Perturbed/unperturbed pair H1 = H_base + eps * V around a base scenario
    with a known solution psi2 of the base dynamics.

    V defaults to sigma_x acting on the first two-level block.  psi2 comes
    from the base's exact state when it has one, otherwise from numerical
    propagation of the (pure) base initial state.
    """
    dim = base.dim
    if perturbation is None:
        v = np.zeros((dim, dim), dtype=complex)
        sx, _, _ = linalg.pauli()
        v[:2, :2] = sx
        default_v = True
    else:
        v = linalg.check_hermitian(perturbation, "perturbation")
        if v.shape[0] != dim:
            raise InputError("perturbation dim does not match the base scenario")
        default_v = False

    eps = float(epsilon)
    h2 = base.h_path

    def h1_sample(t: float) -> np.ndarray:
        return h2.sampler(t) + eps * v

    h1_deriv = None
    if h2.derivative is not None:
        h1_deriv = h2.derivative  # the perturbation is time-independent

    h1 = OperatorPath(dim=dim, sampler=h1_sample, domain=h2.domain, derivative=h1_deriv)

    if base.exact_state is not None:
        psi2 = StatePath(dim=dim, sampler=base.exact_state, domain=base.domain)
    else:
        w, vect = np.linalg.eigh(base.rho0)
        if w[-1] < 1.0 - 1e-10:
            raise InputError("base scenario has no exact state and rho0 is not pure")
        grid = TimeGrid.uniform(base.domain[0], base.domain[1], steps)
        psi2 = state_path_from_propagation(h2, vect[:, -1], grid)

    exact_echo = None
    if default_v and base.params.get("zero_h") == 1.0 and base.params.get("level", 0.0) == 0.0:
        # free base, sigma_x perturbation on the occupied block: pure Rabi echo
        exact_echo = lambda t: float(np.cos(eps * t) ** 2)

    return LoschmidtPair(
        name=f"{base.name}+eps*V", dim=dim, h1_path=h1, h2_path=h2, psi2=psi2,
        domain=base.domain, params={**base.params, "epsilon": eps},
        exact_echo=exact_echo, default_steps=base.default_steps,
    )


def make_random_smooth(dim: int, seed: int, n_harmonics: int = 3) -> Scenario:
    """Seeded random scenario: Fourier Hamiltonian, random initial density,
    and a random target path (static / unitary-generated / eigen-tracked).

    Fully reproducible from the seed.  Magnitudes are normalized so the bound
    thresholds fall inside the window and second-order discretization error
    stays far below the Monte Carlo tolerances at the default resolution.
    """
    if not 2 <= dim <= 16:
        raise InputError("dim must be in [2, 16]")
    rng = np.random.default_rng(seed)
    domain = (0.0, 2.5)
    h_path = random_fourier_hamiltonian(rng, dim, domain, n_harmonics,
                                        scale=0.3 / np.sqrt(dim))
    rho0 = random_density(rng, dim)
    kind = int(rng.integers(3))
    rank = int(rng.integers(1, max(dim // 2, 1) + 1))
    levels = None
    if kind == 0:
        proj = static_projector(random_projector(rng, dim, rank), domain)
    elif kind == 1:
        proj = random_unitary_generated_path(rng, dim, rank, domain)
    else:
        aux = random_gapped_path(rng, dim, domain)
        grid = TimeGrid.uniform(domain[0], domain[1], 512)
        proj = eigenprojector_path(aux, tuple(range(rank)), grid)

    return Scenario(
        name=f"random_smooth-d{dim}-s{seed}", dim=dim, h_path=h_path,
        rho0=rho0, domain=domain, projector=proj, levels=levels,
        params={"seed": float(seed), "dim": float(dim),
                "n_harmonics": float(n_harmonics),
                "target_kind": float(kind), "rank": float(rank)},
    )
