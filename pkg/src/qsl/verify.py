"""Seeded Monte Carlo verification suites.

Each suite replays one of the analytic statements the bounds rest on over an
ensemble of random models and reports worst-case margins.  Suites are pure in
the seed, so `qsl verify` may evaluate them concurrently (QSL_THREADS caps the
pool; 0 means auto).
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import linalg
from .bounds import (
    UncertaintyInput,
    bound_general,
    bound_loschmidt,
    integrand_general,
    integrand_generator,
    integrand_pure,
    uncertainty_f,
)
from .dynamics import TimeGrid, fidelity_series, propagate_density, propagate_state, propagate_unitary
from .errors import InputError
from .projectors import (
    eigenstate_path,
    fictitious_generator,
    projector_derivative,
    rank1_derivative_norm,
)
from .scenarios import (
    make_random_smooth,
    random_density,
    random_fourier_hamiltonian,
    random_gapped_path,
    random_hermitian,
    random_projector,
    random_state,
    random_state_path,
    random_unitary_generated_path,
    rank1_path_from_state,
    state_path_from_propagation,
)
from .dynamics import OperatorPath

SUITE_NAMES = (
    "theorem1",
    "corollary",
    "appendixA",
    "appendixB",
    "uncertainty",
    "hierarchy",
    "loschmidt",
)

# Pass thresholds per suite (worst-case margins must stay below these).
TOL_VALIDITY = 1e-6
TOL_COINCIDE = 1e-8
TOL_RANK1 = 1e-6
TOL_INEQUALITY = 1e-10
TOL_EQUALITY = 1e-6
TOL_REGENERATE = 1e-3


def thread_count() -> int:
    raw = os.environ.get("QSL_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    return n if n > 0 else (os.cpu_count() or 1)


def _probe_times(domain: tuple[float, float], n: int, margin: float = 0.05) -> np.ndarray:
    lo, hi = domain
    pad = margin * (hi - lo)
    return np.linspace(lo + pad, hi - pad, n)


def _seed_dim(seed: int, dim: int | None, lo: int = 2, hi: int = 8) -> int:
    if dim is not None:
        return int(dim)
    return lo + seed % (hi - lo + 1)


def _seed_theorem1(seed: int, dim: int | None, steps: int) -> dict:
    sc = make_random_smooth(dim or 4, seed)
    grid = TimeGrid.uniform(sc.domain[0], sc.domain[1], steps)
    traj = propagate_density(sc.h_path, sc.rho0, grid)
    fid = fidelity_series(traj, sc.projector)
    rep = bound_general(sc.h_path, sc.projector, sc.rho0, grid)
    lv = rep.lower_valid()
    uv = rep.upper_valid()
    lower_violation = float(np.max(rep.lower[lv] - fid.values[lv])) if lv.any() else 0.0
    upper_violation = float(np.max(fid.values[uv] - rep.upper[uv])) if uv.any() else 0.0
    return {
        "seed": seed,
        "passed": lower_violation <= TOL_VALIDITY and upper_violation <= TOL_VALIDITY,
        "lower_violation": lower_violation,
        "upper_violation": upper_violation,
    }


def _seed_corollary(seed: int, dim: int | None, steps: int) -> dict:
    rng = np.random.default_rng(1_000_000 + seed)
    d = _seed_dim(seed, dim)
    domain = (0.0, 2.0)
    phi = random_state_path(rng, d, domain)
    proj = rank1_path_from_state(phi)
    h_path = random_fourier_hamiltonian(rng, d, domain)
    worst = 0.0
    for t in _probe_times(domain, 40):
        a = integrand_general(h_path(t), proj(t), proj.derivative_at(t))
        b = integrand_pure(h_path(t), phi(t), phi.derivative_at(t))
        worst = max(worst, abs(a - b))
    return {"seed": seed, "passed": worst <= TOL_COINCIDE, "mismatch": worst}


def _seed_appendixA(seed: int, dim: int | None, steps: int) -> dict:
    rng = np.random.default_rng(2_000_000 + seed)
    d = _seed_dim(seed, dim)
    domain = (0.0, 2.0)
    phi = random_state_path(rng, d, domain)
    # Strip the analytic derivative to force the finite-difference route on
    # the projector side; the formula side keeps the analytic derivative.
    fd_proj = rank1_path_from_state(phi, keep_derivative=False)
    worst = 0.0
    for t in _probe_times(domain, 12):
        formula = rank1_derivative_norm(phi, t)
        fd = linalg.spectral_norm(projector_derivative(fd_proj, t))
        worst = max(worst, abs(formula - fd))
    return {"seed": seed, "passed": worst <= TOL_RANK1, "mismatch": worst}


def _seed_appendixB(seed: int, dim: int | None, steps: int) -> dict:
    rng = np.random.default_rng(3_000_000 + seed)
    d = _seed_dim(seed, dim)
    rank = int(rng.integers(1, d))
    domain = (0.0, 2.0)
    proj = random_unitary_generated_path(rng, d, rank, domain)
    w_path = proj.w_path
    probes = _probe_times(domain, 12)
    ineq = 0.0
    equality = 0.0
    for t in probes:
        pdot_norm = linalg.spectral_norm(proj.derivative_at(t))
        wdot_norm = linalg.spectral_norm(w_path.derivative_at(t))
        ineq = max(ineq, pdot_norm - wdot_norm)
        gen = fictitious_generator(proj, t)
        equality = max(equality, abs(pdot_norm - linalg.spectral_norm(gen)))
    # Regenerate the path by propagating under the minimal generator.
    gen_path = OperatorPath(
        dim=d, sampler=lambda t: fictitious_generator(proj, t), domain=domain
    )
    grid = TimeGrid.uniform(domain[0], domain[1], steps)
    traj = propagate_unitary(gen_path, grid)
    p0 = proj(domain[0])
    regen = 0.0
    for k in range(0, len(grid), max(len(grid) // 16, 1)):
        u = traj.unitaries[k]
        regen = max(regen, float(np.abs(u @ p0 @ u.conj().T - proj(grid.nodes[k])).max()))
    passed = (ineq <= TOL_INEQUALITY and equality <= TOL_EQUALITY
              and regen <= TOL_REGENERATE)
    return {
        "seed": seed,
        "passed": passed,
        "inequality_violation": ineq,
        "equality_mismatch": equality,
        "regeneration_error": regen,
    }


def _seed_uncertainty(seed: int, dim: int | None, steps: int) -> dict:
    rng = np.random.default_rng(4_000_000 + seed)
    d = _seed_dim(seed, dim)
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    r = g @ g.conj().T / d
    a = random_hermitian(rng, d, scale=1.0)
    b = random_hermitian(rng, d, scale=1.0)
    lhs = abs(complex(np.trace(r @ linalg.commutator(a, b))))
    rhs = 2.0 * uncertainty_f(UncertaintyInput(r, a)) * uncertainty_f(UncertaintyInput(r, b))
    relation_violation = float(lhs - rhs)

    rank = int(rng.integers(1, d + 1))
    pi = random_projector(rng, d, rank)
    rho = random_density(rng, d)
    f2 = uncertainty_f(UncertaintyInput(pi, rho)) ** 2
    overlap = float(np.trace(rho @ pi).real)
    cap = float(np.sqrt(max(overlap * (1.0 - overlap), 0.0)))
    projrho_violation = float(f2 - cap)
    passed = (relation_violation <= TOL_INEQUALITY
              and projrho_violation <= TOL_INEQUALITY)
    return {
        "seed": seed,
        "passed": passed,
        "relation_violation": relation_violation,
        "projector_rho_violation": projrho_violation,
    }


def _seed_hierarchy(seed: int, dim: int | None, steps: int) -> dict:
    rng = np.random.default_rng(5_000_000 + seed)
    d = _seed_dim(seed, dim)
    domain = (0.0, 2.0)
    # Gap route dominates the tracked eigenvector speed.
    h_gapped = random_gapped_path(rng, d, domain)
    level = int(rng.integers(0, d))
    grid = TimeGrid.uniform(domain[0], domain[1], 256)
    phi = eigenstate_path(h_gapped, level, grid)
    gap_margin = 0.0
    for t in _probe_times(domain, 12):
        w = np.linalg.eigvalsh(h_gapped(t))
        others = np.delete(w, level)
        gap = float(np.abs(others - w[level]).min())
        speed = rank1_derivative_norm(phi, t)
        dominator = linalg.spectral_norm(h_gapped.derivative_at(t)) / gap
        gap_margin = max(gap_margin, speed - dominator)
    # Generator route dominates the general integrand.
    rank = int(rng.integers(1, d))
    proj = random_unitary_generated_path(rng, d, rank, domain)
    h_path = random_fourier_hamiltonian(rng, d, domain)
    gen_margin = 0.0
    for t in _probe_times(domain, 12):
        w_path = proj.w_path
        a = integrand_general(h_path(t), proj(t), proj.derivative_at(t))
        b = integrand_generator(h_path(t), w_path.derivative_at(t), w_path(t))
        gen_margin = max(gen_margin, a - b)
    passed = gap_margin <= TOL_INEQUALITY and gen_margin <= TOL_INEQUALITY
    return {
        "seed": seed,
        "passed": passed,
        "gap_violation": gap_margin,
        "generator_violation": gen_margin,
    }


def _seed_loschmidt(seed: int, dim: int | None, steps: int) -> dict:
    rng = np.random.default_rng(6_000_000 + seed)
    d = _seed_dim(seed, dim)
    domain = (0.0, 2.0)
    h2 = random_fourier_hamiltonian(rng, d, domain)
    eps = float(rng.uniform(0.1, 0.6))
    v = random_hermitian(rng, d, scale=1.0)

    def h1_sample(t: float) -> np.ndarray:
        return h2.sampler(t) + eps * v

    h1 = OperatorPath(dim=d, sampler=h1_sample, domain=domain, derivative=h2.derivative)
    psi0 = random_state(rng, d)
    grid = TimeGrid.uniform(domain[0], domain[1], steps)
    psi2 = state_path_from_propagation(h2, psi0, grid)
    rep = bound_loschmidt(h1, h2, psi2, grid)
    t1 = propagate_state(h1, psi0, grid)
    t2 = propagate_state(h2, psi0, grid)
    echo = np.abs(np.einsum("ki,ki->k", t1.states.conj(), t2.states)) ** 2
    lv = rep.lower_valid()
    violation = float(np.max(rep.lower[lv] - echo[lv])) if lv.any() else 0.0
    return {"seed": seed, "passed": violation <= TOL_VALIDITY, "violation": violation}


_SUITES = {
    "theorem1": _seed_theorem1,
    "corollary": _seed_corollary,
    "appendixA": _seed_appendixA,
    "appendixB": _seed_appendixB,
    "uncertainty": _seed_uncertainty,
    "hierarchy": _seed_hierarchy,
    "loschmidt": _seed_loschmidt,
}


def run_suite(suite: str, seeds: int, dim: int | None = None, steps: int = 2000) -> dict:
    """Run one verification suite over `seeds` seeds and aggregate margins."""
    if suite not in _SUITES:
        raise InputError(f"unknown suite {suite!r}; choose from {', '.join(SUITE_NAMES)}")
    if seeds < 0:
        raise InputError("seed count must be nonnegative")
    fn = _SUITES[suite]
    t0 = time.perf_counter()
    if seeds == 0:
        records: list[dict] = []
    else:
        workers = min(thread_count(), seeds)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                records = list(pool.map(lambda s: fn(s, dim, steps), range(seeds)))
        else:
            records = [fn(s, dim, steps) for s in range(seeds)]
    records.sort(key=lambda r: r["seed"])
    runtime = time.perf_counter() - t0
    margin_keys = sorted(
        k for r in records for k in r if k not in ("seed", "passed")
    )
    worst = {k: max(r[k] for r in records if k in r) for k in margin_keys}
    return {
        "suite": suite,
        "seeds": seeds,
        "dim": dim,
        "steps": steps,
        "passed": all(r["passed"] for r in records),
        "failed_seeds": [r["seed"] for r in records if not r["passed"]],
        "worst": worst,
        "runtime_seconds": runtime,
        "results": records,
    }
