"""Speed-limit bounds on subspace fidelity.

Every bound family here shares one skeleton: a nonnegative integrand sampled
on a time grid, its running trapezoidal integral c(t), an initial angle
g0 = arccos sqrt(tr rho_0 Pi_0), and the series

    lower(t) = cos^2(g0 + c(t))   valid while g0 + c(t) <= pi/2  (until t_plus),
    upper(t) = cos^2(g0 - c(t))   valid while g0 - c(t) >= 0     (until t_minus).

Beyond its threshold a series is reported as absent (NaN), never extrapolated.

Integrand families:

* general:   ||i[H, Pi] + dPi||                (arbitrary target subspace)
* pure:      sqrt(||iH phi + dphi||^2 - |<iH phi + dphi|phi>|^2)  (rank 1)
* adiabatic: ||dPi|| of a tracked eigenprojector (g0 = 0)
* gap:       ||dH|| / gap  (dominates the adiabatic integrand)
* generator: ||H - i dW W^dag||  (dominates the general integrand)
* pfeifer:   sqrt(tr dPi^2) / sqrt(2)  (commuting case, rho_0 inside Pi_0)
* loschmidt: sqrt(||(H1-H2) psi||^2 - <psi|H1-H2|psi>^2)  (echo lower bound)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .dynamics import OperatorPath, TimeGrid, _check_grid_in_domain, check_density
from .errors import (
    DegeneracyError,
    InputError,
    NumericalError,
    ProjectorError,
    ReferenceSolutionError,
)
from .projectors import (
    ProjectorPath,
    StatePath,
    eigenstate_path,
    track_eigenframes,
)

BOUND_KINDS = ("general", "adiabatic", "gap", "generator", "pfeifer", "loschmidt")

# Absolute slack when deciding that the cumulative integral has crossed a
# threshold; absorbs trapezoid roundoff when the crossing lands exactly on the
# final grid node.
THRESHOLD_SLACK = 1e-9

# tr(rho0 Pi0) may stray this far outside [0, 1] before we refuse it.
OVERLAP_SLACK = 1e-12

# Default tolerance for the echo reference-solution residual check and for
# the commuting/support preconditions of the Pfeifer-Fröhlich route.
CHECK_TOL = 1e-3
COMMUTE_TOL = 1e-8
SUPPORT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class BoundReport:
    """Bound series for one family on one grid.

    `lower`/`upper` hold NaN outside their validity windows; `t_plus` and
    `t_minus` are the window ends (None when the threshold is never reached
    on the grid).
    """

    kind: str
    grid: TimeGrid
    integrand: np.ndarray
    cumulative: np.ndarray
    g0: float
    lower: np.ndarray
    upper: np.ndarray | None
    t_plus: float | None
    t_minus: float | None

    def lower_valid(self) -> np.ndarray:
        return ~np.isnan(self.lower)

    def upper_valid(self) -> np.ndarray:
        if self.upper is None:
            return np.zeros(len(self.grid), dtype=bool)
        return ~np.isnan(self.upper)


@dataclass(frozen=True, eq=False)
class UncertaintyInput:
    """Arguments of the generalized uncertainty function f(R, A)."""

    r: np.ndarray
    a: np.ndarray
    cluster_tol: float | None = None


def _snorm(m: np.ndarray) -> float:
    """Spectral norm without input revalidation (hot-loop form)."""
    w = np.linalg.eigvalsh(m.conj().T @ m)
    return float(np.sqrt(max(float(w[-1]), 0.0)))


def threshold_time(grid: TimeGrid, cumulative: np.ndarray, target: float) -> float | None:
    """First time the (nondecreasing) cumulative integral reaches `target`.

    Located by bracketing plus linear interpolation inside the bracketing
    step, consistent with the trapezoid rule that built the cumulative array.
    Returns None when the target is never reached on the grid.
    """
    if target < 0.0:
        raise InputError("threshold target must be nonnegative")
    c = np.asarray(cumulative, dtype=float)
    if c.shape[0] != len(grid):
        raise InputError("cumulative series does not match the grid")
    slack = THRESHOLD_SLACK * max(1.0, target)
    hits = np.nonzero(c >= target - slack)[0]
    if hits.shape[0] == 0:
        return None
    k = int(hits[0])
    if k == 0:
        return grid.t_start
    dc = c[k] - c[k - 1]
    frac = (target - c[k - 1]) / dc if dc > 0.0 else 1.0
    frac = min(max(frac, 0.0), 1.0)
    return float(grid.nodes[k - 1] + frac * (grid.nodes[k] - grid.nodes[k - 1]))


def g0_from_overlap(rho0, p0) -> float:
    """g0 = arccos sqrt(tr rho0 Pi0), with roundoff clamped at the edges."""
    f0 = float(np.trace(np.asarray(rho0) @ np.asarray(p0)).real)
    if f0 < -OVERLAP_SLACK or f0 > 1.0 + OVERLAP_SLACK:
        raise InputError(f"tr(rho0 Pi0) = {f0!r} is outside [0, 1] beyond tolerance")
    f0 = min(max(f0, 0.0), 1.0)
    return float(np.arccos(np.sqrt(f0)))


def _cumulative_trapezoid(grid: TimeGrid, integrand: np.ndarray) -> np.ndarray:
    f = np.asarray(integrand, dtype=float)
    if not np.isfinite(f).all():
        raise NumericalError("bound integrand contains non-finite samples")
    if f.min() < 0.0:
        raise NumericalError("bound integrand must be nonnegative")
    increments = 0.5 * (f[1:] + f[:-1]) * np.diff(grid.nodes)
    return np.concatenate(([0.0], np.cumsum(increments)))


def assemble_report(
    grid: TimeGrid,
    integrand: np.ndarray,
    g0: float,
    kind: str,
    with_upper: bool = True,
) -> BoundReport:
    """Build the cos^2(g0 +- integral) series and its validity windows."""
    if kind not in BOUND_KINDS:
        raise InputError(f"unknown bound kind {kind!r}")
    cumulative = _cumulative_trapezoid(grid, integrand)
    t_plus = threshold_time(grid, cumulative, np.pi / 2.0 - g0)
    lower = np.cos(g0 + cumulative) ** 2
    if t_plus is not None:
        tie = THRESHOLD_SLACK * max(1.0, grid.span)
        lower = np.where(grid.nodes <= t_plus + tie, lower, np.nan)
    upper = None
    t_minus = None
    if with_upper:
        t_minus = threshold_time(grid, cumulative, g0)
        upper = np.cos(g0 - cumulative) ** 2
        if t_minus is not None:
            tie = THRESHOLD_SLACK * max(1.0, grid.span)
            upper = np.where(grid.nodes <= t_minus + tie, upper, np.nan)
    return BoundReport(
        kind=kind, grid=grid, integrand=np.asarray(integrand, dtype=float),
        cumulative=cumulative, g0=float(g0), lower=lower, upper=upper,
        t_plus=t_plus, t_minus=t_minus,
    )


# ---------------------------------------------------------------------------
# Pointwise integrands
# ---------------------------------------------------------------------------

def integrand_general(h_t, pi_t, pidot_t) -> float:
    """||i[H, Pi] + dPi|| at one time.

    Reduces to ||dPi|| automatically whenever [H, Pi] = 0; no special-casing.
    """
    h = linalg.as_complex_matrix(h_t, "H")
    p = linalg.as_complex_matrix(pi_t, "Pi")
    pd = linalg.as_complex_matrix(pidot_t, "dPi")
    if h.shape != p.shape or p.shape != pd.shape:
        raise InputError("integrand_general needs equal dims")
    if float(np.abs(p @ p - p).max()) > 1e-8 or float(np.abs(p - p.conj().T).max()) > 1e-8:
        raise ProjectorError("Pi is not an orthogonal projector")
    return linalg.spectral_norm(1j * (h @ p - p @ h) + pd)


def integrand_pure(h_t, phi, phidot) -> float:
    """sqrt(||iH phi + dphi||^2 - |<iH phi + dphi|phi>|^2) at one time.

    For an instantaneous eigenvector H phi = E phi this loses all explicit
    dependence on E (and on any c(t) * identity shift of H).
    """
    h = linalg.as_complex_matrix(h_t, "H")
    v = np.asarray(phi, dtype=complex).reshape(-1)
    dv = np.asarray(phidot, dtype=complex).reshape(-1)
    if v.shape[0] != h.shape[0] or dv.shape[0] != h.shape[0]:
        raise InputError("integrand_pure needs consistent dims")
    if abs(np.linalg.norm(v) - 1.0) > 1e-8:
        raise InputError("phi is not normalized")
    u = 1j * (h @ v) + dv
    rad = float(np.vdot(u, u).real) - abs(np.vdot(u, v)) ** 2
    return float(np.sqrt(max(rad, 0.0)))


def integrand_gap(hdot_t, gap_t: float) -> float:
    """||dH|| / gap: the computable upper bound on the eigenpath speed."""
    if not np.isfinite(gap_t) or gap_t <= 0.0:
        raise DegeneracyError(f"spectral gap must be positive, got {gap_t!r}")
    return linalg.spectral_norm(hdot_t) / float(gap_t)


def integrand_generator(h_t, wdot_t, w_t) -> float:
    """||H - i dW W^dag||: the generator-route bound on the general integrand."""
    h = linalg.as_complex_matrix(h_t, "H")
    wd = linalg.as_complex_matrix(wdot_t, "dW")
    w = linalg.as_complex_matrix(w_t, "W")
    eye = np.eye(w.shape[0])
    if float(np.abs(w.conj().T @ w - eye).max()) > 1e-8:
        raise InputError("W is not unitary to 1e-8")
    return linalg.spectral_norm(h - 1j * (wd @ w.conj().T))


# ---------------------------------------------------------------------------
# Bound families on a grid
# ---------------------------------------------------------------------------

def bound_general(
    h_path: OperatorPath,
    proj: ProjectorPath,
    rho0,
    grid: TimeGrid,
) -> BoundReport:
    """Two-sided fidelity bound for an arbitrary smooth target subspace."""
    rho = check_density(rho0)
    if proj.dim != h_path.dim or rho.shape[0] != h_path.dim:
        raise InputError("bound_general needs consistent dims")
    _check_grid_in_domain(grid, h_path.domain)
    _check_grid_in_domain(grid, proj.domain)
    # Full validation once at the start; the path contracts cover the rest.
    integrand = np.empty(len(grid))
    integrand[0] = integrand_general(h_path(grid.t_start), proj(grid.t_start),
                                     proj.derivative_at(grid.t_start))
    for k in range(1, len(grid)):
        t = grid.nodes[k]
        h = h_path.sampler(t)
        p = proj.sampler(t)
        pd = proj.derivative_at(t)
        integrand[k] = _snorm(1j * (h @ p - p @ h) + pd)
    g0 = g0_from_overlap(rho, proj(grid.t_start))
    return assemble_report(grid, integrand, g0, "general", with_upper=True)


def bound_adiabatic(
    h_path: OperatorPath,
    levels,
    grid: TimeGrid,
    cluster_tol: float | None = None,
) -> BoundReport:
    """Adiabatic lower bound: start in the tracked eigenspace (g0 = 0) and
    integrate the eigenpath speed ||dPi||; for one level this is the
    transverse eigenvector velocity sqrt(||dphi||^2 - |<dphi|phi>|^2)."""
    lv = tuple(sorted(set(int(i) for i in levels)))
    track = track_eigenframes(h_path, lv, grid, cluster_tol)
    integrand = np.empty(len(grid))
    if len(lv) == 1 and h_path.derivative is not None:
        # Transverse perturbation-theory coefficients in one eigh per node.
        lvl = lv[0]
        for k, t in enumerate(grid.nodes):
            w, v = np.linalg.eigh(h_path.sampler(t))
            hd = h_path.derivative(t)
            others = [j for j in range(w.shape[0]) if j != lvl]
            coeff = (v[:, others].conj().T @ (hd @ v[:, lvl])) / (w[lvl] - w[others])
            integrand[k] = float(np.linalg.norm(coeff))
    else:
        from .projectors import eigenprojector_path

        path = eigenprojector_path(h_path, lv, grid, cluster_tol)
        for k, t in enumerate(grid.nodes):
            integrand[k] = _snorm(path.derivative_at(t))
    return assemble_report(grid, integrand, 0.0, "adiabatic", with_upper=False)


def bound_gap(
    h_path: OperatorPath,
    levels,
    grid: TimeGrid,
    cluster_tol: float | None = None,
) -> BoundReport:
    """Adiabatic bound with the eigenpath speed replaced by ||dH|| / gap.

    Weaker than bound_adiabatic (the integrand dominates pointwise) but needs
    only the gap, not the eigenvectors' motion.
    """
    track = track_eigenframes(h_path, levels, grid, cluster_tol)
    integrand = np.empty(len(grid))
    for k, t in enumerate(grid.nodes):
        integrand[k] = integrand_gap(h_path.derivative_at(t), track.gaps[k])
    return assemble_report(grid, integrand, 0.0, "gap", with_upper=False)


def bound_generator(
    h_path: OperatorPath,
    proj: ProjectorPath,
    rho0,
    grid: TimeGrid,
) -> BoundReport:
    """General bound with the integrand replaced by ||H - i dW W^dag||, where
    W generates the target path. Valid (both sides) and weaker pointwise."""
    if proj.w_path is None:
        raise InputError("bound_generator needs a unitary-generated target (w_path)")
    rho = check_density(rho0)
    w_path = proj.w_path
    integrand = np.empty(len(grid))
    integrand[0] = integrand_generator(
        h_path(grid.t_start), w_path.derivative_at(grid.t_start), w_path(grid.t_start)
    )
    for k in range(1, len(grid)):
        t = grid.nodes[k]
        w = w_path.sampler(t)
        wd = w_path.derivative_at(t)
        integrand[k] = _snorm(h_path.sampler(t) - 1j * (wd @ w.conj().T))
    g0 = g0_from_overlap(rho, proj(grid.t_start))
    return assemble_report(grid, integrand, g0, "generator", with_upper=True)


def bound_pfeifer(
    proj: ProjectorPath,
    rho0,
    grid: TimeGrid,
    h_path: OperatorPath | None = None,
    support_tol: float = SUPPORT_TOL,
) -> BoundReport:
    """Uncertainty-function route: F >= cos^2( (1/sqrt 2) int sqrt(tr dPi^2) ).

    Implemented for the commuting case with rho0 supported inside Pi_0
    (g0 = 0).  The commutation [H, Pi] = 0 is the caller's assertion; it is
    verified on the grid only when an H path is supplied.
    """
    rho = check_density(rho0)
    overlap = float(np.trace(rho @ proj(grid.t_start)).real)
    if overlap < 1.0 - support_tol:
        raise InputError(
            f"rho0 is not supported in the initial target subspace: "
            f"tr(rho0 Pi0) = {overlap:.12f}"
        )
    if h_path is not None:
        for t in grid.nodes:
            dev = linalg.spectral_norm(linalg.commutator(h_path(t), proj(t)))
            if dev > COMMUTE_TOL:
                raise InputError(
                    f"[H, Pi] does not vanish at t={t:.6g} (norm {dev:.3e}); "
                    "this route assumes a commuting target"
                )
    integrand = np.empty(len(grid))
    for k, t in enumerate(grid.nodes):
        pd = proj.derivative_at(t)
        tr2 = float(np.einsum("ij,ji->", pd, pd).real)
        integrand[k] = float(np.sqrt(max(tr2, 0.0) / 2.0))
    return assemble_report(grid, integrand, 0.0, "pfeifer", with_upper=False)


def check_schrodinger_residual(
    h_path: OperatorPath,
    psi: StatePath,
    grid: TimeGrid,
    tol: float = CHECK_TOL,
) -> float:
    """Verify that psi solves d psi/dt = -i H psi on the grid (midpoint form).

    Returns the worst per-step residual; raises ReferenceSolutionError beyond
    `tol`.  The residual of a true solution is O(dt^2), so `tol` separates
    wrong reference solutions (O(1)) from discretization noise.
    """
    nodes = grid.nodes
    worst = 0.0
    worst_t = nodes[0]
    prev = psi(nodes[0])
    for k in range(nodes.shape[0] - 1):
        dt = nodes[k + 1] - nodes[k]
        cur = psi(nodes[k + 1])
        mid = 0.5 * (prev + cur)
        h_mid = h_path.sampler(nodes[k] + 0.5 * dt)
        res = float(np.linalg.norm((cur - prev) / dt + 1j * (h_mid @ mid)))
        if res > worst:
            worst, worst_t = res, nodes[k]
        prev = cur
    if worst > tol:
        raise ReferenceSolutionError(
            f"reference state fails the Schrödinger residual check near "
            f"t={worst_t:.6g}: residual {worst:.3e} > {tol:.1e}"
        )
    return worst


def bound_loschmidt(
    h1_path: OperatorPath,
    h2_path: OperatorPath,
    psi2: StatePath,
    grid: TimeGrid,
    residual_tol: float = CHECK_TOL,
) -> BoundReport:
    """Echo lower bound for two evolutions started from the same state:

        F >= cos^2( int sqrt(||(H1-H2) psi2||^2 - <psi2|H1-H2|psi2>^2 ) ).

    psi2 must solve the Schrödinger equation under H2 (verified numerically).
    """
    if h1_path.dim != h2_path.dim or psi2.dim != h1_path.dim:
        raise InputError("bound_loschmidt needs consistent dims")
    check_schrodinger_residual(h2_path, psi2, grid, tol=residual_tol)
    integrand = np.empty(len(grid))
    for k, t in enumerate(grid.nodes):
        v = psi2(t)
        d = h1_path.sampler(t) - h2_path.sampler(t)
        u = d @ v
        mean = float(np.vdot(v, u).real)
        rad = float(np.vdot(u, u).real) - mean * mean
        integrand[k] = float(np.sqrt(max(rad, 0.0)))
    return assemble_report(grid, integrand, 0.0, "loschmidt", with_upper=False)


# ---------------------------------------------------------------------------
# Generalized uncertainty function
# ---------------------------------------------------------------------------

def uncertainty_f(inp: UncertaintyInput) -> float:
    """f(R, A) = sqrt( sum_n l_n tr(Pi_n A^2 - (Pi_n A)^2) ) over the distinct
    eigenvalue clusters of a PSD operator R.

    Discontinuous in R by construction (cluster ranks equal degeneracies), so
    the clustering tolerance is an explicit argument.
    """
    r = linalg.check_hermitian(inp.r, "R", rtol=1e-10)
    a = linalg.check_hermitian(inp.a, "A", rtol=1e-10)
    if r.shape != a.shape:
        raise InputError("R and A must have equal dims")
    dec = linalg.hermitian_eig(r, inp.cluster_tol)
    if float(dec.eigenvalues[0]) < -1e-10 * max(1.0, abs(float(dec.eigenvalues[-1]))):
        raise InputError(f"R is not PSD: min eigenvalue {dec.eigenvalues[0]:.3e}")
    a2 = a @ a
    total = 0.0
    scale = 0.0
    for cluster in dec.clusters:
        lam = max(dec.cluster_value(cluster), 0.0)
        if lam == 0.0:
            continue
        p = dec.cluster_projector(cluster)
        pa = p @ a
        term = float(np.trace(p @ a2).real - np.trace(pa @ pa).real)
        total += lam * term
        scale += lam * abs(term)
    if total < -1e-12 * max(1.0, scale):
        raise NumericalError(
            f"uncertainty radicand {total:.3e} is negative beyond roundoff; "
            "the eigenvalue clustering is inconsistent"
        )
    return float(np.sqrt(max(total, 0.0)))
