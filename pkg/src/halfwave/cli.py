"""Command-line entry point: every solver, scan and sweep behind one
dispatcher with config-file support and JSON/CSV/HWF1 output.

Exit codes: 0 success with all verdicts passing, 1 verdict failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import io as hwio
from .bubbles import (
    BubbleSpec,
    MPPathConfig,
    bubble,
    bubble_asymptotics,
    find_offset,
    find_t0,
    find_t1,
    mp_upper_bound,
    reduced_mass,
)
from .constants import ProblemParams, derive_constants, sobolev_constant_closed_form
from .experiments import (
    DEFAULT_MASS_FRACTIONS,
    DEFAULT_MU_LIST,
    check_m_structure,
    sweep_mass,
    sweep_mu,
)
from .functionals import triple_of
from .grid import make_grid
from .solvers import (
    FlowConfig,
    sobolev_constant_by_refinement,
    solve_excited_state,
    solve_ground_state,
    solve_limit_Q,
)

SUBCOMMANDS = (
    "constants",
    "q-profile",
    "sobolev",
    "ground",
    "excited",
    "bubble-scan",
    "mp-bound",
    "sweep-a",
    "sweep-mu",
    "m-structure",
)

# Box sized so beta * L stays fixed: the scaled soliton then occupies the
# same fraction of the box at every mass.
BETA_BOX = 60.0


class CliError(Exception):
    """Usage/configuration error; maps to exit code 2."""


@dataclasses.dataclass
class RunConfig:
    """Fully resolved run parameters, echoed into every output."""

    subcommand: str
    dim: int = 2
    q: float = 2.5
    mu: float = 1.0
    a: Optional[float] = None
    box_length: Optional[float] = None
    points: int = 256
    tol: float = 3e-7
    max_iter: int = 40000
    tau: Optional[float] = None
    epsilon: float = 0.5
    seed_file: Optional[str] = None
    out: Optional[str] = None
    a_list: Optional[list[float]] = None
    mu_list: Optional[list[float]] = None
    eps_list: Optional[list[float]] = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _parse_config_file(path: str) -> dict[str, str]:
    """Flat key=value file; blank lines and #-comments ignored."""
    out: dict[str, str] = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise CliError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="halfwave",
        description=(
            "Numerical laboratory for normalized standing waves of the "
            "energy-critical half-wave equation on the mass sphere."
        ),
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(sp: argparse.ArgumentParser, needs_mass: bool = True) -> None:
        sp.add_argument("--config", help="flat key=value config file; CLI flags override it")
        sp.add_argument("--N", type=int, default=None, help="spatial dimension (2 or 3)")
        sp.add_argument("--q", type=float, default=None, help="subcritical exponent, in (2, 2+2/N)")
        sp.add_argument("--mu", type=float, default=None, help="coupling of the subcritical term")
        if needs_mass:
            sp.add_argument("--a", type=float, default=None, help="target mass (L2 norm)")
        sp.add_argument("--L", type=float, default=None, help="periodic box side length")
        sp.add_argument("--n", type=int, default=None, help="grid points per dimension (even)")
        sp.add_argument("--tol", type=float, default=None, help="solver stationarity tolerance")
        sp.add_argument("--max-iter", type=int, default=None, help="iteration cap")
        sp.add_argument("--tau", type=float, default=None, help="initial step size")
        sp.add_argument("--seed-file", default=None, help="HWF1 field used as the initial iterate")
        sp.add_argument("--out", default=None, help="output path stem (JSON/CSV/HWF1)")

    sp = sub.add_parser("constants", help="emit every derived constant as flat JSON")
    common(sp)
    sp = sub.add_parser("q-profile", help="solve the subcritical soliton profile Q")
    common(sp, needs_mass=False)
    sp = sub.add_parser("sobolev", help="minimize the Rayleigh quotient for the Sobolev constant")
    common(sp, needs_mass=False)
    sp.add_argument("--epsilon", type=float, default=None, help="seed profile scale")
    sp = sub.add_parser("ground", help="trust-region ground state at mass a")
    common(sp)
    sp = sub.add_parser("excited", help="max-branch excited state at mass a")
    common(sp)
    sp.add_argument("--epsilon", type=float, default=None, help="seed bubble scale")
    sp = sub.add_parser("bubble-scan", help="truncated-bubble norm asymptotics over scales")
    common(sp, needs_mass=False)
    sp.add_argument("--eps-list", default=None, help="comma-separated scale list")
    sp = sub.add_parser("mp-bound", help="explicit-path bound below m(a) + S^N/(2N)")
    common(sp)
    sp.add_argument("--epsilon", type=float, default=None, help="bubble scale of the path")
    sp = sub.add_parser("sweep-a", help="small-mass asymptotics sweep")
    common(sp, needs_mass=False)
    sp.add_argument("--a-list", default=None, help="comma-separated mass list (default a_*-fractions)")
    sp = sub.add_parser("sweep-mu", help="vanishing-coupling sweep at fixed mass")
    common(sp)
    sp.add_argument("--mu-list", default=None, help="comma-separated coupling list")
    sp = sub.add_parser("m-structure", help="continuity/subadditivity of the ground energy")
    common(sp, needs_mass=False)
    sp.add_argument("--a-list", default=None, help="comma-separated mass grid")
    return parser


def _resolve(args: argparse.Namespace) -> RunConfig:
    """Merge precedence: CLI flags > config file > defaults."""
    cfg = RunConfig(subcommand=args.subcommand)
    file_vals: dict[str, str] = {}
    if getattr(args, "config", None):
        file_vals = _parse_config_file(args.config)

    def pick(flag: str, key: str, cast, default):
        cli_val = getattr(args, flag, None)
        if cli_val is not None:
            return cli_val
        if key in file_vals:
            try:
                return cast(file_vals[key])
            except ValueError as exc:
                raise CliError(f"config key {key}: {exc}") from exc
        return default

    cfg.dim = pick("N", "N", int, 2)
    cfg.q = pick("q", "q", float, 2.5)
    cfg.mu = pick("mu", "mu", float, 1.0)
    cfg.a = pick("a", "a", float, None)
    cfg.box_length = pick("L", "L", float, None)
    cfg.points = pick("n", "n", int, 256)
    cfg.tol = pick("tol", "tol", float, 3e-7)
    cfg.max_iter = pick("max_iter", "max_iter", int, 40000)
    cfg.tau = pick("tau", "tau", float, None)
    cfg.epsilon = pick("epsilon", "epsilon", float, 0.5)
    cfg.seed_file = pick("seed_file", "seed_file", str, None)
    cfg.out = pick("out", "out", str, None)

    def float_list(flag: str, key: str):
        raw = pick(flag, key, str, None)
        if raw is None:
            return None
        try:
            return [float(x) for x in str(raw).split(",") if x.strip()]
        except ValueError as exc:
            raise CliError(f"bad list for --{flag.replace('_', '-')}: {exc}") from exc

    cfg.a_list = float_list("a_list", "a_list")
    cfg.mu_list = float_list("mu_list", "mu_list")
    cfg.eps_list = float_list("eps_list", "eps_list")
    return cfg


def _problem(cfg: RunConfig, default_mass: float = 0.1) -> ProblemParams:
    try:
        return ProblemParams(
            dim=cfg.dim, q=cfg.q, mu=cfg.mu, a=cfg.a if cfg.a is not None else default_mass
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc


def _flow(cfg: RunConfig, tol: Optional[float] = None) -> FlowConfig:
    return FlowConfig(
        step_size=cfg.tau,
        max_iterations=cfg.max_iter,
        tolerance=tol if tol is not None else cfg.tol,
        seed_spec=cfg.seed_file or "module default",
    )


def _load_seed(cfg: RunConfig):
    if cfg.seed_file is None:
        return None
    return hwio.read_field(cfg.seed_file)


def _emit(cfg: RunConfig, payload: dict, csv_text: Optional[str] = None) -> None:
    payload = {"config": cfg.to_dict(), **payload}
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default)
    if cfg.out:
        Path(cfg.out + ".json").write_text(text + "\n")
        if csv_text is not None:
            Path(cfg.out + ".csv").write_text(csv_text)
    print(text)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _solver_pipeline(cfg: RunConfig):
    """Shared preparation: Q on a fine reference grid, Sobolev constant by
    refinement, derived constants at the requested mass."""
    p0 = _problem(cfg)
    fine = make_grid(p0.dim, 80.0, 512)
    q_res = solve_limit_Q(fine, p0, FlowConfig(max_iterations=3000, tolerance=1e-10))
    q_norm = q_res.triple.mass
    s_res = sobolev_constant_by_refinement(
        fine, p0, FlowConfig(max_iterations=6000, tolerance=1e-13)
    )
    closed = sobolev_constant_closed_form(p0.dim)
    if abs(s_res.sobolev - closed) > 0.01 * closed:
        raise CliError(
            f"numerical Sobolev constant {s_res.sobolev:.6f} deviates more than 1% "
            f"from the closed form {closed:.6f}; the grid realization is inconsistent"
        )
    return p0, q_res, q_norm, s_res.sobolev


def _ground_grid(cfg: RunConfig, consts) -> tuple[float, int]:
    length = cfg.box_length if cfg.box_length is not None else BETA_BOX / consts.beta
    return length, cfg.points


def _run_constants(cfg: RunConfig) -> int:
    p, _, q_norm, sob = _solver_pipeline(cfg)
    consts = derive_constants(p, q_norm, sob)
    _emit(cfg, {"constants": consts.to_dict()})
    return 0


def _run_q_profile(cfg: RunConfig) -> int:
    p = _problem(cfg)
    grid = make_grid(p.dim, cfg.box_length or 80.0, cfg.points)
    res = solve_limit_Q(grid, p, _flow(cfg, tol=min(cfg.tol, 1e-8)), seed=_load_seed(cfg))
    if cfg.out:
        hwio.write_field(cfg.out + ".hwf1", res.field)
    _emit(
        cfg,
        {
            "converged": res.converged,
            "iterations": res.iterations,
            "residual": res.residual_stationarity,
            "identity_residual": res.residual_pohozaev,
            "q_norm": res.triple.mass,
        },
    )
    return 0 if res.converged else 1


def _run_sobolev(cfg: RunConfig) -> int:
    p = _problem(cfg)
    grid = make_grid(p.dim, cfg.box_length or 80.0, cfg.points)
    res = sobolev_constant_by_refinement(
        grid, p, _flow(cfg, tol=min(cfg.tol, 1e-12)), seed_epsilon=cfg.epsilon
    )
    closed = sobolev_constant_closed_form(p.dim)
    rel = abs(res.sobolev - closed) / closed
    if cfg.out:
        hwio.write_field(cfg.out + ".hwf1", res.extremal)
    _emit(
        cfg,
        {
            "sobolev": res.sobolev,
            "closed_form": closed,
            "relative_deviation": rel,
            "per_level": res.diagnostics["per_level"],
            "fitted_order": res.diagnostics["fitted_order"],
            "converged": res.converged,
        },
    )
    return 0 if (res.converged and rel <= 0.01) else 1


def _run_ground(cfg: RunConfig) -> int:
    p, q_res, q_norm, sob = _solver_pipeline(cfg)
    consts = derive_constants(p, q_norm, sob)
    length, points = _ground_grid(cfg, consts)
    grid = make_grid(p.dim, length, points)
    res = solve_ground_state(
        grid, p, consts, _flow(cfg), q_profile=q_res.field, seed=_load_seed(cfg)
    )
    if cfg.out:
        hwio.write_field(cfg.out + ".hwf1", res.field)
    _emit(
        cfg,
        {
            "energy": res.energy,
            "lambda": res.lam,
            "pohozaev_residual": res.residual_pohozaev,
            "stationarity": res.residual_stationarity,
            "iterations": res.iterations,
            "converged": res.converged,
            "strict_upper_bound": -consts.k_nq * p.a ** (2 * p.q * (1 - p.gamma_q) / (2 - p.q_gamma_q)),
            "region": json.loads(res.region.to_json()) if res.region else None,
        },
    )
    ok = res.converged and res.energy < -consts.k_nq * p.a ** (
        2 * p.q * (1 - p.gamma_q) / (2 - p.q_gamma_q)
    )
    return 0 if ok else 1


def _run_excited(cfg: RunConfig) -> int:
    p, q_res, q_norm, sob = _solver_pipeline(cfg)
    consts = derive_constants(p, q_norm, sob)
    length, points = _ground_grid(cfg, consts)
    grid = make_grid(p.dim, length, points)
    gres = solve_ground_state(grid, p, consts, _flow(cfg), q_profile=q_res.field)
    eres = solve_excited_state(
        grid,
        p,
        consts,
        gres.energy,
        _flow(cfg, tol=max(cfg.tol, 1e-6)),
        ground=gres.field,
        bubble_epsilon=cfg.epsilon,
    )
    if cfg.out:
        hwio.write_field(cfg.out + ".hwf1", eres.field)
    level = gres.energy + sob**p.dim / (2 * p.dim)
    ok = eres.converged and 0.0 < eres.energy < level
    _emit(
        cfg,
        {
            "energy": eres.energy,
            "lambda": eres.lam,
            "ground_energy": gres.energy,
            "upper_level": level,
            "pohozaev_residual": eres.residual_pohozaev,
            "ddpsi_at_1": eres.diagnostics["ddpsi_at_1"],
            "iterations": eres.iterations,
            "converged": eres.converged,
            "region": json.loads(eres.region.to_json()) if eres.region else None,
        },
    )
    return 0 if ok else 1


def _run_bubble_scan(cfg: RunConfig) -> int:
    p = _problem(cfg)
    grid = make_grid(p.dim, cfg.box_length or 12.0, cfg.points)
    eps = cfg.eps_list or [0.4 * 2**-k for k in range(5)]
    sob = sobolev_constant_closed_form(p.dim)
    table = bubble_asymptotics(grid, p, eps, sob)
    rows = table.rows()
    header = ",".join(rows[0].keys())
    lines = [header] + [",".join(repr(r[k]) for k in rows[0]) for r in rows]
    csv_text = "\n".join(lines) + "\n"
    expected_b = p.dim - (p.dim - 1) * p.q / 2
    verdicts = {
        "slope_critical_deficit": table.slope_critical_deficit,
        "slope_critical_expected": float(p.dim),
        "slope_q_norm": table.slope_q_norm,
        "slope_q_norm_expected": expected_b,
        "slope_seminorm_deficit": table.slope_seminorm_deficit,
        "slope_seminorm_expected": float(p.dim - 1),
        "mass_log_fit_residual": table.mass_log_fit_residual,
        "mass_plain_fit_residual": table.mass_plain_fit_residual,
        "excluded_scales": table.excluded,
    }
    ok = (
        abs(table.slope_critical_deficit - p.dim) <= 0.3
        and abs(table.slope_q_norm - expected_b) <= 0.1
        and (p.dim != 2 or table.mass_log_fit_residual < table.mass_plain_fit_residual)
    )
    _emit(cfg, {"verdicts": verdicts, "all_pass": ok}, csv_text=csv_text)
    return 0 if ok else 1


def _run_mp_bound(cfg: RunConfig) -> int:
    p, q_res, q_norm, sob = _solver_pipeline(cfg)
    consts = derive_constants(p, q_norm, sob)
    report = run_mp_campaign(cfg, p, q_res, consts, sob)
    _emit(cfg, report)
    return 0 if report["margin"] > 0 and report["mass_admissible"] and report["endpoint_ok"] else 1


def run_mp_campaign(cfg: RunConfig, p, q_res, consts, sob, epsilon: Optional[float] = None):
    """Full explicit-path campaign: ground at a, threshold times, reduced
    mass, re-solved ground, offset, and the path maximum."""
    from .grid import refine

    eps = epsilon if epsilon is not None else cfg.epsilon
    length, points = _ground_grid(cfg, consts)
    grid = make_grid(p.dim, length, points)
    gres = solve_ground_state(grid, p, consts, _flow(cfg), q_profile=q_res.field)
    m_a = gres.energy

    # The bubble must resolve eps; refine the box until the spacing fits.
    fine_points = points
    while length / fine_points > eps / 4.0:
        fine_points *= 2
    bub_field = bubble(make_grid(p.dim, length, fine_points), BubbleSpec(epsilon=eps))
    bub_triple = triple_of(bub_field, p)

    t1 = find_t1(bub_triple, p, m_a)
    t0 = find_t0(bub_triple, p, sob)
    a_n = reduced_mass(p, t1, bub_triple)
    p_n = p.with_mass(a_n)
    consts_n = derive_constants(p_n, consts.q_norm_of_Q, sob)
    gres_n = solve_ground_state(grid, p_n, consts_n, _flow(cfg), q_profile=q_res.field)
    ground_fine = refine(gres_n.field, fine_points) if fine_points != points else gres_n.field
    offset = find_offset(ground_fine, bub_field, t1)
    path_cfg = MPPathConfig(
        t1=t1, t0=t0, epsilons=(eps,), offsets=(tuple(offset),), a_n=(a_n,)
    )
    res = mp_upper_bound(ground_fine, bub_field, p, consts, m_a, path_cfg, offset=offset)
    return {
        "margin": res.margin,
        "max_energy": res.max_energy,
        "argmax_t": res.argmax_t,
        "level": m_a + sob**p.dim / (2 * p.dim),
        "m_a": m_a,
        "m_a_n": gres_n.energy,
        "a_n": a_n,
        "t0": t0,
        "t1": t1,
        "offset": list(offset),
        "endpoint_energy": res.endpoint_energy,
        "endpoint_ok": bool(res.endpoint_energy <= 2 * m_a + 1e-12),
        "max_path_mass": res.max_path_mass,
        "mass_admissible": bool(res.max_path_mass <= p.a * (1 + 1e-10)),
        "early_segment_max": res.early_segment_max,
        "late_segment_max": res.late_segment_max,
    }


def _run_sweep_a(cfg: RunConfig) -> int:
    p, q_res, q_norm, sob = _solver_pipeline(cfg)
    consts0 = derive_constants(p, q_norm, sob)
    a_list = cfg.a_list or [f * consts0.a_star for f in DEFAULT_MASS_FRACTIONS]
    report = sweep_mass(p, a_list, q_norm, sob, points=cfg.points, cfg=_flow(cfg))
    _emit(cfg, {"verdicts": report.verdict_summary()}, csv_text=report.to_csv())
    return 0 if report.all_pass else 1


def _run_sweep_mu(cfg: RunConfig) -> int:
    p, q_res, q_norm, sob = _solver_pipeline(cfg)
    mu_list = cfg.mu_list or list(DEFAULT_MU_LIST)
    report = sweep_mu(p, mu_list, q_norm, sob, points=cfg.points, cfg=_flow(cfg))
    _emit(cfg, {"verdicts": report.verdict_summary()}, csv_text=report.to_csv())
    return 0 if report.all_pass else 1


def _run_m_structure(cfg: RunConfig) -> int:
    p, q_res, q_norm, sob = _solver_pipeline(cfg)
    consts0 = derive_constants(p, q_norm, sob)
    a_grid = cfg.a_list or [f * consts0.a_star for f in (0.35, 0.42, 0.5)]
    p_top = p.with_mass(max(a_grid))
    consts = derive_constants(p_top, q_norm, sob)
    report = check_m_structure(p_top, consts, a_grid, points=cfg.points, cfg=_flow(cfg))
    _emit(cfg, {"verdicts": report.verdict_summary()}, csv_text=report.to_csv())
    return 0 if report.all_pass else 1


_RUNNERS = {
    "constants": _run_constants,
    "q-profile": _run_q_profile,
    "sobolev": _run_sobolev,
    "ground": _run_ground,
    "excited": _run_excited,
    "bubble-scan": _run_bubble_scan,
    "mp-bound": _run_mp_bound,
    "sweep-a": _run_sweep_a,
    "sweep-mu": _run_sweep_mu,
    "m-structure": _run_m_structure,
}


def parse_and_dispatch(argv: Sequence[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        # argparse exits 2 on usage errors, 0 on --help.
        return int(exc.code or 0)
    try:
        cfg = _resolve(args)
        return _RUNNERS[cfg.subcommand](cfg)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(parse_and_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
