"""Command-line interface.

    qsl simulate --config cfg.json --out-prefix out/run
    qsl verify   --suite theorem1 --seeds 200 [--dim 4]
    qsl echo     --config pair.json --out-prefix out/echo

Configs are single JSON documents; matrices are encoded as {"re": [[...]],
"im": [[...]]} pairs.  Exit codes: 0 success, 2 configuration/usage error,
3 numerical failure (degeneracy, residual check, invariant violation), with a
diagnostic naming the offending time window on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__, bounds, figures, report, scenarios, verify
from .dynamics import (
    DEFAULT_STEPS,
    OperatorPath,
    TimeGrid,
    fidelity_series,
    propagate_density,
    propagate_state,
)
from .errors import ConfigError, QslError
from .projectors import eigenprojector_path, static_projector, unitary_generated
from .scenarios import LoschmidtPair, Scenario, state_path_from_propagation

_SCENARIOS = {
    "constant_two_level": scenarios.make_constant_two_level,
    "rotating_field": scenarios.make_rotating_field,
    "block_rotors": scenarios.make_block_rotors,
    "landau_zener": scenarios.make_landau_zener,
    "free": scenarios.make_free,
    "random_smooth": scenarios.make_random_smooth,
}

_BOUND_CHOICES = ("general", "adiabatic", "gap", "generator", "pfeifer")


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _parse_matrix(obj, name: str) -> np.ndarray:
    if not isinstance(obj, dict) or "re" not in obj:
        raise ConfigError(f"{name} must be an object with 're' (and optional 'im')")
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    if re.shape != im.shape:
        raise ConfigError(f"{name}: 're' and 'im' shapes differ")
    return re + 1j * im


def _parse_vector(obj, name: str) -> np.ndarray:
    v = _parse_matrix(obj, name) if isinstance(obj, dict) else None
    if v is None:
        raise ConfigError(f"{name} must be an object with 're'/'im' arrays")
    return v.reshape(-1)


def _parse_hamiltonian(spec, dim: int, domain: tuple[float, float]) -> OperatorPath:
    if not isinstance(spec, dict):
        raise ConfigError("hamiltonian spec must be a JSON object")
    if "constant" in spec:
        m = _parse_matrix(spec["constant"], "hamiltonian.constant")
        return OperatorPath.constant(m, domain)
    if "fourier" in spec:
        terms = []
        for k, term in enumerate(spec["fourier"]):
            if "cos" not in term:
                raise ConfigError(f"fourier term {k} needs a 'cos' coefficient")
            a = _parse_matrix(term["cos"], f"fourier[{k}].cos")
            b = (_parse_matrix(term["sin"], f"fourier[{k}].sin")
                 if "sin" in term else None)
            terms.append((float(term.get("omega", 0.0)), a, b))
        return OperatorPath.from_fourier(terms, domain)
    if "samples" in spec:
        times = np.asarray(spec["samples"]["times"], dtype=float)
        values = np.array([_parse_matrix(m, "samples.values")
                           for m in spec["samples"]["values"]])
        if times.ndim != 1 or times.shape[0] != values.shape[0] or times.shape[0] < 2:
            raise ConfigError("samples need matching 'times' and 'values' (>= 2)")
        if not np.all(np.diff(times) > 0):
            raise ConfigError("sample times must be strictly increasing")

        def sample(t: float) -> np.ndarray:
            k = int(np.clip(np.searchsorted(times, t, side="right") - 1,
                            0, times.shape[0] - 2))
            w = (t - times[k]) / (times[k + 1] - times[k])
            w = min(max(w, 0.0), 1.0)
            return (1.0 - w) * values[k] + w * values[k + 1]

        return OperatorPath(dim=values.shape[-1], sampler=sample,
                            domain=(float(times[0]), float(times[-1])))
    raise ConfigError("hamiltonian spec needs 'constant', 'fourier' or 'samples'")


def _build_problem(cfg: dict, seed: int | None) -> Scenario:
    """Resolve a config into a Scenario (named or inline)."""
    if "scenario" in cfg:
        spec = cfg["scenario"]
        name = spec.get("name")
        if name not in _SCENARIOS:
            raise ConfigError(
                f"unknown scenario {name!r}; available: {', '.join(sorted(_SCENARIOS))}"
            )
        params = dict(spec.get("params", {}))
        if name == "random_smooth" and "seed" not in params and seed is not None:
            params["seed"] = seed
        try:
            sc = _SCENARIOS[name](**params)
        except TypeError as exc:
            raise ConfigError(f"bad parameters for scenario {name!r}: {exc}") from exc
        return sc
    if "problem" not in cfg:
        raise ConfigError("config needs either a 'scenario' or a 'problem' section")
    prob = cfg["problem"]
    dim = int(prob.get("dim", 0))
    if dim < 1:
        raise ConfigError("problem.dim must be a positive integer")
    domain = tuple(float(x) for x in prob.get("domain", (0.0, 1.0)))
    if len(domain) != 2 or not domain[1] > domain[0]:
        raise ConfigError("problem.domain must be [t_start, t_end] with t_end > t_start")
    h_path = _parse_hamiltonian(prob.get("hamiltonian"), dim, domain)
    if h_path.dim != dim:
        raise ConfigError("hamiltonian dimension does not match problem.dim")

    tspec = prob.get("target")
    if not isinstance(tspec, dict) or "type" not in tspec:
        raise ConfigError("problem.target must be an object with a 'type'")
    levels = None
    if tspec["type"] == "static":
        proj = static_projector(_parse_matrix(tspec["matrix"], "target.matrix"), domain)
    elif tspec["type"] == "levels":
        levels = tuple(int(i) for i in tspec.get("levels", ()))
        if not levels:
            raise ConfigError("target.levels must be a nonempty index list")
        grid = TimeGrid.uniform(domain[0], domain[1], min(DEFAULT_STEPS, 1024))
        proj = eigenprojector_path(h_path, levels, grid)
    elif tspec["type"] == "unitary":
        k = _parse_matrix(tspec["generator"], "target.generator")
        rate = float(tspec.get("rate", 1.0))
        wobble = float(tspec.get("wobble", 0.0))
        freq = float(tspec.get("frequency", 1.0))
        wk, vk = np.linalg.eigh(k)

        def schedule(t: float) -> float:
            return rate * t + wobble * np.sin(freq * t)

        def w_sample(t: float) -> np.ndarray:
            return (vk * np.exp(-1j * wk * schedule(t))) @ vk.conj().T

        def w_deriv(t: float) -> np.ndarray:
            sdot = rate + wobble * freq * np.cos(freq * t)
            return -1j * sdot * (k @ w_sample(t))

        w_path = OperatorPath(dim=dim, sampler=w_sample, domain=domain,
                              derivative=w_deriv)
        proj = unitary_generated(w_path, _parse_matrix(tspec["initial"], "target.initial"))
    else:
        raise ConfigError(f"unknown target type {tspec['type']!r}")

    rspec = prob.get("rho0")
    if isinstance(rspec, dict) and "pure" in rspec:
        psi = _parse_vector(rspec["pure"], "rho0.pure")
        psi = psi / np.linalg.norm(psi)
        rho0 = np.outer(psi, psi.conj())
    elif isinstance(rspec, dict) and "matrix" in rspec:
        rho0 = _parse_matrix(rspec["matrix"], "rho0.matrix")
    elif rspec == "target_mixed":
        p0 = proj(domain[0])
        rho0 = p0 / np.trace(p0).real
    else:
        raise ConfigError("problem.rho0 needs 'pure', 'matrix' or \"target_mixed\"")

    return Scenario(name="inline", dim=dim, h_path=h_path, rho0=rho0,
                    domain=domain, projector=proj, levels=levels)


def _build_grid(cfg: dict, sc, steps_override: int | None) -> TimeGrid:
    gcfg = cfg.get("grid", {})
    if not isinstance(gcfg, dict):
        raise ConfigError("'grid' must be an object")
    t_start = float(gcfg.get("t_start", sc.domain[0]))
    t_end = float(gcfg.get("t_end", sc.domain[1]))
    steps = int(steps_override or gcfg.get("steps", sc.default_steps))
    if steps < 2:
        raise ConfigError("grid.steps must be >= 2")
    if not t_end > t_start:
        raise ConfigError("grid needs t_end > t_start")
    return TimeGrid.uniform(t_start, t_end, steps)


def _numeric_tol(cfg: dict, tol_override: float | None) -> float:
    tols = cfg.get("tolerances", {})
    tol = float(tols.get("numeric", bounds.CHECK_TOL))
    if tol_override is not None:
        tol = float(tol_override)
    if tol <= 0:
        raise ConfigError("tolerance must be positive")
    return tol


def _compute_bounds(sc: Scenario, selection: list[str], grid: TimeGrid,
                    numeric_tol: float, cluster_tol: float | None):
    reports = []
    for kind in selection:
        if kind == "general":
            if sc.projector is None:
                raise ConfigError("scenario has no target projector for the general bound")
            reports.append(bounds.bound_general(sc.h_path, sc.projector, sc.rho0, grid))
        elif kind == "adiabatic":
            levels = sc.levels if sc.levels is not None else (
                (0,) if sc.params.get("expect_degeneracy") == 1.0 else None)
            if levels is None:
                raise ConfigError("the adiabatic bound needs tracked levels")
            reports.append(bounds.bound_adiabatic(sc.h_path, levels, grid, cluster_tol))
        elif kind == "gap":
            levels = sc.levels if sc.levels is not None else (
                (0,) if sc.params.get("expect_degeneracy") == 1.0 else None)
            if levels is None:
                raise ConfigError("the gap bound needs tracked levels")
            reports.append(bounds.bound_gap(sc.h_path, levels, grid, cluster_tol))
        elif kind == "generator":
            if sc.projector is None or sc.projector.w_path is None:
                raise ConfigError("the generator bound needs a unitary-generated target")
            reports.append(bounds.bound_generator(sc.h_path, sc.projector, sc.rho0, grid))
        elif kind == "pfeifer":
            if sc.projector is None:
                raise ConfigError("the Pfeifer-Fröhlich bound needs a target projector")
            reports.append(bounds.bound_pfeifer(sc.projector, sc.rho0, grid,
                                                h_path=sc.h_path))
        else:
            raise ConfigError(
                f"unknown bound {kind!r}; available: {', '.join(_BOUND_CHOICES)}"
            )
    return reports


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.get("seed")
    try:
        sc = _build_problem(cfg, seed)
        grid = _build_grid(cfg, sc, args.steps)
        selection = cfg.get("bounds", ["general"])
        if not isinstance(selection, list) or not selection:
            raise ConfigError("'bounds' must be a nonempty list")
        tols = cfg.get("tolerances", {})
        cluster_tol = tols.get("cluster")
        numeric_tol = _numeric_tol(cfg, args.tol)
    except QslError as exc:
        raise ConfigError(str(exc)) from exc

    traj = propagate_density(sc.h_path, sc.rho0, grid)
    fid = fidelity_series(traj, sc.projector) if sc.projector is not None else None
    if fid is None:
        raise ConfigError("scenario has no target projector to evaluate fidelity against")
    reports = _compute_bounds(sc, selection, grid, numeric_tol, cluster_tol)

    csv_path = f"{args.out_prefix}.csv"
    json_path = f"{args.out_prefix}.report.json"
    report.simulate_csv(csv_path, grid, fid.values, reports)
    payload = report.simulate_report(cfg, seed, __version__, sc.name, grid, fid,
                                     traj, reports)
    report.write_json(json_path, payload)
    if not args.no_figures:
        figures.render_simulation(f"{args.out_prefix}.png", grid, fid.values,
                                  reports, title=sc.name)
    print(f"wrote {csv_path}, {json_path}" + ("" if args.no_figures else
                                              f", {args.out_prefix}.png"))
    return 0


def _build_pair(cfg: dict, seed: int | None) -> LoschmidtPair:
    spec = cfg.get("pair")
    if not isinstance(spec, dict):
        raise ConfigError("echo config needs a 'pair' section")
    if "base" in spec:
        base_cfg = {"scenario": spec["base"]}
        base = _build_problem(base_cfg, seed)
        eps = float(spec.get("epsilon", 0.0))
        pert = (_parse_matrix(spec["perturbation"], "pair.perturbation")
                if "perturbation" in spec else None)
        return scenarios.make_loschmidt_pair(eps, base, perturbation=pert)
    if "h1" in spec and "h2" in spec:
        domain = tuple(float(x) for x in spec.get("domain", (0.0, 1.0)))
        dim = int(spec.get("dim", 0))
        if dim < 1:
            raise ConfigError("pair.dim must be a positive integer")
        h1 = _parse_hamiltonian(spec["h1"], dim, domain)
        h2 = _parse_hamiltonian(spec["h2"], dim, domain)
        psi0 = _parse_vector(spec["psi0"], "pair.psi0")
        psi0 = psi0 / np.linalg.norm(psi0)
        steps = int(spec.get("reference_steps", 2 * DEFAULT_STEPS))
        ref_grid = TimeGrid.uniform(domain[0], domain[1], steps)
        psi2 = state_path_from_propagation(h2, psi0, ref_grid)
        return LoschmidtPair(name="inline", dim=dim, h1_path=h1, h2_path=h2,
                             psi2=psi2, domain=domain)
    raise ConfigError("pair needs either 'base'+'epsilon' or 'h1'+'h2'+'psi0'")


def cmd_echo(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.get("seed")
    try:
        pair = _build_pair(cfg, seed)
        grid = _build_grid(cfg, pair, args.steps)
        numeric_tol = _numeric_tol(cfg, args.tol)
    except QslError as exc:
        raise ConfigError(str(exc)) from exc

    rep = bounds.bound_loschmidt(pair.h1_path, pair.h2_path, pair.psi2, grid,
                                 residual_tol=numeric_tol)
    psi0 = pair.psi2(grid.t_start)
    t1 = propagate_state(pair.h1_path, psi0, grid)
    t2 = propagate_state(pair.h2_path, psi0, grid)
    echo = np.abs(np.einsum("ki,ki->k", t1.states.conj(), t2.states)) ** 2

    csv_path = f"{args.out_prefix}.csv"
    json_path = f"{args.out_prefix}.report.json"
    report.echo_csv(csv_path, grid, echo, rep)
    payload = report.echo_report(cfg, seed, __version__, pair.name, grid, echo,
                                 rep, t1)
    report.write_json(json_path, payload)
    if not args.no_figures:
        figures.render_echo(f"{args.out_prefix}.png", grid, echo, rep,
                            title=pair.name)
    print(f"wrote {csv_path}, {json_path}" + ("" if args.no_figures else
                                              f", {args.out_prefix}.png"))
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    summary = verify.run_suite(args.suite, args.seeds, dim=args.dim,
                               steps=args.steps or 2000)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0 if summary["passed"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qsl",
        description="Fidelity speed limits for time-dependent target subspaces, "
                    "checked against exact small-system dynamics.",
    )
    parser.add_argument("--version", action="version", version=f"qsl {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario/problem and emit CSV+JSON(+PNG)")
    sim.add_argument("--config", required=True, help="JSON run configuration")
    sim.add_argument("--out-prefix", required=True, help="output path prefix")
    sim.add_argument("--steps", type=int, default=None, help="override grid steps")
    sim.add_argument("--seed", type=int, default=None, help="override config seed")
    sim.add_argument("--tol", type=float, default=None,
                     help="override the numeric-check tolerance")
    sim.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    sim.set_defaults(func=cmd_simulate)

    ver = sub.add_parser("verify", help="run a seeded verification suite")
    ver.add_argument("--suite", required=True, choices=verify.SUITE_NAMES)
    ver.add_argument("--seeds", type=int, required=True, help="number of seeds")
    ver.add_argument("--dim", type=int, default=None, help="force the model dimension")
    ver.add_argument("--steps", type=int, default=None, help="override grid steps")
    ver.set_defaults(func=cmd_verify)

    echo = sub.add_parser("echo", help="echo bound for a Hamiltonian pair")
    echo.add_argument("--config", required=True, help="JSON pair configuration")
    echo.add_argument("--out-prefix", required=True, help="output path prefix")
    echo.add_argument("--steps", type=int, default=None, help="override grid steps")
    echo.add_argument("--seed", type=int, default=None, help="override config seed")
    echo.add_argument("--tol", type=float, default=None,
                      help="override the residual-check tolerance")
    echo.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    echo.set_defaults(func=cmd_echo)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"qsl: configuration error: {exc}", file=sys.stderr)
        return 2
    except QslError as exc:
        print(f"qsl: numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
