"""Command-line front end.

Commands::

    scalarfield solve      --nl log --dim 3 --eps 0.5,0.25,0.125,0
    scalarfield verify     gausson | log-sobolev | pohozaev
    scalarfield sweep      --nl cubic-quintic --dim 3 --p 4 --m 0.01:0.1875:20
    scalarfield constant   --nl log --dim 3
    scalarfield biradial   --nl log
    scalarfield diagnose   --dim 3

Settings come from ``--config FILE`` (JSON) and flags; flags win. Exit codes:
0 success, 2 invalid input, 3 solver or I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import diagnostics as _diag
from . import grid as _grid
from . import nonlin as _nl
from . import pohozaev as _pz
from . import solver as _solver
from .errors import DomainError, EmptyAdmissibleSet, ScalarFieldError

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_FAILURE = 0, 2, 3
JOBS_ENV = "SCALARFIELD_JOBS"
PROFILE_POINTS = 512
CSV_HEADER = ["param", "level", "dirichlet", "residual", "status"]
NL_KINDS = ("log", "cubic-quintic", "zero-mass")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = "solve"
    check: str | None = None
    nl: str = "log"
    dim: int = 3
    p: str | None = None
    m: str | None = None
    q: float | None = None
    rmax: float | None = None
    points: int = 8192
    grading: str | None = None
    eps: str = "0"
    tol: float = 1e-6
    max_iter: int = 50_000
    out: str | None = None
    format: str = "json"
    full_profile: bool = False
    jobs: int | None = None
    level: float | None = None
    radius: float = 2.0
    lams: str = "0.5,1,2"
    biradial_points: int = 256

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**data)


# ---------------------------------------------------------------------------
# parsing and validation
# ---------------------------------------------------------------------------


def parse_range(text: str) -> list[float]:
    """``a:b:k`` gives k evenly spaced values from a to b inclusive; plain lists use commas."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError(f"range must look like a:b:k, got {text!r}")
        a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
        if k < 0:
            raise UsageError("range count must be nonnegative")
        return [float(x) for x in np.linspace(a, b, k)] if k else []
    return [float(x) for x in text.split(",") if x.strip()]


def _scalar(text, name):
    if text is None:
        return None
    vals = parse_range(str(text))
    if len(vals) != 1:
        raise UsageError(f"--{name} takes a single value for this command")
    return vals[0]


def make_nonlinearity(cfg: RunConfig, p=None, m=None) -> _nl.Nonlinearity:
    p = _scalar(cfg.p, "p") if p is None else p
    m = _scalar(cfg.m, "m") if m is None else m
    if cfg.nl == "log":
        return _nl.logarithmic()
    if cfg.nl == "cubic-quintic":
        if p is None or m is None:
            raise UsageError("cubic-quintic needs --p and --m")
        return _nl.cubic_quintic(cfg.dim, p, m)
    if cfg.nl == "zero-mass":
        kw = {k: v for k, v in (("p", p), ("q", cfg.q)) if v is not None}
        return _nl.zero_mass_double_power(cfg.dim, **kw)
    raise UsageError(f"unknown nonlinearity {cfg.nl!r}; choose from {', '.join(NL_KINDS)}")


def make_grid(cfg: RunConfig, nl: _nl.Nonlinearity | None = None):
    zero_mass = nl is not None and nl.mass_class == "zero"
    r_max = cfg.rmax if cfg.rmax is not None else (60.0 if zero_mass else 12.0)
    grading = cfg.grading or ("geometric" if zero_mass else "uniform")
    return _grid.build_radial_grid(cfg.dim, r_max, cfg.points, grading)


def make_options(cfg: RunConfig) -> _solver.SolverOptions:
    if not cfg.tol > 0:
        raise UsageError("--tol must be positive")
    if cfg.max_iter < 1:
        raise UsageError("--max-iter must be at least 1")
    return _solver.SolverOptions(tol=cfg.tol, max_iter=cfg.max_iter)


def schedule(cfg: RunConfig) -> list[float]:
    return _solver.validate_schedule(parse_range(cfg.eps))


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def round_floats(obj, digits: int = 12):
    """Round every float in a nested structure to ``digits`` significant digits."""
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return float(f"{x:.{digits}g}") if math.isfinite(x) else None
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, digits) for v in obj]
    return obj


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def profile_pairs(u: _grid.Field, full: bool = False) -> list[list[float]]:
    r, v = u.grid.nodes, u.values
    idx = np.arange(r.size)
    if not full and r.size > PROFILE_POINTS:
        idx = np.unique(np.round(np.linspace(0, r.size - 1, PROFILE_POINTS)).astype(int))
    return [[float(r[i]), float(v[i])] for i in idx]


def solve_record(res: _solver.SolveResult, full_profile: bool = False) -> dict:
    rep, g = res.report, res.field.grid
    return {
        "level": res.level,
        "dirichlet": rep.dirichlet,
        "int_G_plus": rep.int_G_plus,
        "int_G_minus_eps": rep.int_G_minus_eps,
        "pohozaev_residual": rep.pohozaev_residual,
        "eps_final": res.eps_final,
        "iterations": res.iterations,
        "converged": res.converged,
        "stationary": res.stationary,
        "grid": {"N": g.N, "rmax": g.r_max, "points": g.n},
        "c_eps": [[e, lv] for e, lv in res.eps_levels],
        "profile": profile_pairs(res.field, full_profile),
    }


def emit(result, fmt: str = "json", path: str | None = None, full_profile: bool = False) -> None:
    """Write a SolveResult, a record dict or a list of sweep rows as JSON or CSV.

    ``path=None`` writes to standard output. Raises ``OSError`` on I/O failure.
    """
    if isinstance(result, _solver.SolveResult):
        if fmt == "csv":
            result = {"param": result.eps_final, "level": result.level, "dirichlet": result.report.dirichlet,
                      "residual": result.report.pohozaev_residual,
                      "status": "ok" if result.converged else "not-converged"}
        else:
            result = solve_record(result, full_profile)
    if fmt == "json":
        text = json.dumps(round_floats(result), indent=2) + "\n"
    elif fmt == "csv":
        rows = result if isinstance(result, list) else [result]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([_fmt(row.get(k)) for k in CSV_HEADER])
        text = buf.getvalue()
    else:
        raise UsageError(f"unknown format {fmt!r}")
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _prepare_solve(cfg: RunConfig):
    nl = make_nonlinearity(cfg)
    g = make_grid(cfg, nl)
    return nl, g, schedule(cfg), make_options(cfg)


def cmd_solve(cfg: RunConfig):
    nl, g, sched, opts = _prepare_solve(cfg)
    return _solver.continuation(g, nl, sched, opts)


def _G_positive_somewhere(nl: _nl.Nonlinearity) -> bool:
    s = np.geomspace(1e-6, 1e6, 200_001)
    G_plus, G_minus = nl.split(s)
    return bool(np.any(G_plus - G_minus > 1e-12 * (G_plus + G_minus)))


def _sweep_row(args) -> dict:
    cfg_dict, name, value = args
    cfg = RunConfig.from_dict(cfg_dict)
    row = {"param": value, "level": None, "dirichlet": None, "residual": None}
    try:
        nl = make_nonlinearity(cfg, **{name: value})
        g = make_grid(cfg, nl)
        res = _solver.continuation(g, nl, schedule(cfg), make_options(cfg))
    except EmptyAdmissibleSet:
        # G positive somewhere means admissible fields exist but none fit this domain
        row["status"] = "no-admissible-seed" if _G_positive_somewhere(nl) else "empty-admissible-set"
        return row
    except ScalarFieldError as exc:
        row["status"] = f"error:{type(exc).__name__}"
        return row
    row.update(level=res.level, dirichlet=res.report.dirichlet, residual=res.report.pohozaev_residual)
    if res.converged:
        row["status"] = "ok"
    elif res.stationary:
        row["status"] = "truncated"
    else:
        row["status"] = "not-converged"
    return row


def _sweep_plan(cfg: RunConfig):
    ranged = [name for name in ("m", "p") if getattr(cfg, name) is not None and ":" in str(getattr(cfg, name))]
    if len(ranged) != 1:
        raise UsageError("sweep needs exactly one range a:b:k in --m or --p")
    name = ranged[0]
    values = parse_range(str(getattr(cfg, name)))
    # validate every row before any solve starts
    schedule(cfg)
    make_options(cfg)
    for v in values:
        make_grid(cfg, make_nonlinearity(cfg, **{name: v}))
    return name, values


def _job_count(cfg: RunConfig) -> int:
    if cfg.jobs is not None:
        jobs = cfg.jobs
    else:
        env = os.environ.get(JOBS_ENV)
        try:
            jobs = int(env) if env else 1
        except ValueError:
            raise UsageError(f"{JOBS_ENV} must be an integer, got {env!r}")
    if jobs < 1:
        raise UsageError("job count must be at least 1")
    return jobs


def cmd_sweep(cfg: RunConfig):
    name, values = _sweep_plan(cfg)
    jobs = _job_count(cfg)
    tasks = [(asdict(cfg), name, v) for v in values]
    if jobs == 1 or len(tasks) <= 1:
        return [_sweep_row(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_row, tasks))


def cmd_constant(cfg: RunConfig):
    if cfg.level is not None:
        level, source = cfg.level, "given"
    elif cfg.nl == "log":
        level, source = _pz.gausson_level(cfg.dim), "closed-form"
    else:
        level, source = cmd_solve(cfg).level, "solver"
    return {"N": cfg.dim, "level": level, "constant": _pz.sharp_constant(cfg.dim, level), "source": source}


def _verify_gausson(cfg: RunConfig):
    nl = _nl.logarithmic()
    r_max = cfg.rmax if cfg.rmax is not None else 12.0
    coarse = _grid.build_radial_grid(cfg.dim, r_max, cfg.points)
    fine = _grid.build_radial_grid(cfg.dim, r_max, 2 * cfg.points - 1)
    res = [_solver.pde_residual(_grid.sample(g, _pz.gausson(cfg.dim)), nl) for g in (coarse, fine)]
    rep = _pz.energy(_grid.sample(coarse, _pz.gausson(cfg.dim)), nl)
    exact = _pz.gausson_level(cfg.dim)
    return {
        "N": cfg.dim, "points": cfg.points, "rmax": r_max,
        "pde_residual": res[0], "pde_residual_half_step": res[1], "reduction": res[0] / res[1],
        "level": rep.J_eps, "closed_form_level": exact, "relative_error": abs(rep.J_eps - exact) / exact,
        "pohozaev_residual": rep.pohozaev_residual, "dirichlet": rep.dirichlet,
    }


def _unit_mass(u: _grid.Field) -> _grid.Field:
    return u * (1.0 / math.sqrt(_grid.integrate(u, np.square)))


def _verify_log_sobolev(cfg: RunConfig):
    r_max = cfg.rmax if cfg.rmax is not None else 12.0
    g = _grid.build_radial_grid(cfg.dim, r_max, cfg.points)
    base = _pz.gausson(cfg.dim)
    gauss = []
    for lam in parse_range(cfg.lams):
        if not lam > 0:
            raise UsageError("dilation factors must be positive")
        u = _unit_mass(_grid.sample(g, lambda r, lam=lam: base(lam * np.asarray(r))))
        gauss.append({"lam": lam, "gap": _pz.log_sobolev_gap(u)})
    bump = _unit_mass(_grid.sample(g, lambda r: np.clip(1.0 - np.asarray(r) ** 2, 0.0, None) ** 2))
    return {"N": cfg.dim, "gaussian": gauss, "bump_gap": _pz.log_sobolev_gap(bump)}


def _verify_pohozaev(cfg: RunConfig):
    res = cmd_solve(cfg)
    rep = res.report
    return {
        "level": res.level, "J_eps": rep.J_eps, "dirichlet": rep.dirichlet,
        "pohozaev_residual": rep.pohozaev_residual,
        "relative_residual": abs(rep.pohozaev_residual) / rep.dirichlet,
        "on_manifold": rep.on_manifold(1e-3), "converged": res.converged,
    }


VERIFY = {"gausson": _verify_gausson, "log-sobolev": _verify_log_sobolev, "pohozaev": _verify_pohozaev}


def cmd_verify(cfg: RunConfig):
    if cfg.check not in VERIFY:
        raise UsageError(f"verify needs one of {', '.join(VERIFY)}")
    if cfg.check in ("gausson", "log-sobolev"):
        _grid.build_radial_grid(cfg.dim, cfg.rmax if cfg.rmax is not None else 12.0, cfg.points)
    else:
        _prepare_solve(cfg)
    return VERIFY[cfg.check](cfg)


def cmd_biradial(cfg: RunConfig):
    if cfg.dim != 4:
        raise UsageError("the biradial experiment runs in dimension 4")
    nl = make_nonlinearity(cfg)
    if not nl.odd:
        raise UsageError("the biradial experiment needs an odd nonlinearity")
    sched = schedule(cfg)
    r_max = cfg.rmax if cfg.rmax is not None else 40.0
    opts = _solver.GapOptions(radial_r_max=r_max, radial_points=cfg.points, biradial_r_max=r_max,
                              biradial_points=cfg.biradial_points, eps=sched[-1],
                              solver=_solver.SolverOptions(tol=cfg.tol, max_iter=cfg.max_iter))
    rec = _solver.verify_nonradial_gap(nl, opts)
    return {
        "radial_level": rec.radial_level, "biradial_level": rec.biradial_level, "ratio": rec.ratio,
        "gap_holds": rec.holds, "radial_converged": rec.radial.converged,
        "biradial_converged": rec.biradial.converged,
    }


def cmd_diagnose(cfg: RunConfig):
    """Vanishing trace of a spreading Gausson family and Brezis-Lieb defects of shrinking bumps."""
    N = cfg.dim
    r_max = cfg.rmax if cfg.rmax is not None else 60.0
    g = _grid.build_radial_grid(N, r_max, cfg.points)
    if not (0 < cfg.radius <= 0.5 * r_max):
        raise UsageError("--radius must lie in (0, rmax/2]")
    base = _pz.gausson(N)
    spread = []
    for n in (2**k for k in range(7)):
        u = _grid.sample(g, lambda r, n=n: n ** (-(N - 2) / 2) * base(np.asarray(r) / n))
        spread.append({"n": n, "local_mass_sup": _diag.local_mass_sup(u, cfg.radius)})
    limit = _grid.sample(g, lambda r: np.asarray(r) ** 2 * np.exp(-0.5 * np.asarray(r) ** 2))
    two_star = _nl.critical_exponent(N)
    ns = [2**k for k in range(7)]
    seq = [limit + _grid.sample(g, lambda r, n=n: np.exp(-(n * np.asarray(r)) ** 2)) for n in ns]
    defects = _diag.brezis_lieb_defect(seq, lambda s: np.abs(s) ** two_star, limit)
    return {"N": N, "radius": cfg.radius, "spreading": spread,
            "brezis_lieb": [{"n": n, "defect": d} for n, d in zip(ns, defects)]}


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "sweep": cmd_sweep, "constant": cmd_constant,
            "biradial": cmd_biradial, "diagnose": cmd_diagnose}


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    add = common.add_argument
    add("--config", help="JSON file with settings; flags override it")
    add("--dump-config", help="write the resolved settings as JSON to this path")
    add("--nl", choices=NL_KINDS)
    add("--dim", type=int)
    add("--p", help="exponent p (value or a:b:k range for sweep)")
    add("--m", help="mass m (value or a:b:k range for sweep)")
    add("--q", type=float)
    add("--rmax", type=float)
    add("--points", type=int)
    add("--grading", choices=("uniform", "geometric"))
    add("--eps", help="comma-separated eps schedule, e.g. 0.5,0.25,0")
    add("--tol", type=float)
    add("--max-iter", type=int, dest="max_iter")
    add("--out")
    add("--format", choices=("json", "csv"))
    add("--full-profile", action="store_const", const=True, dest="full_profile")
    add("--jobs", type=int)
    add("--level", type=float)
    add("--radius", type=float)
    add("--lams")
    add("--biradial-points", type=int, dest="biradial_points")
    add("-v", "--verbose", action="store_true")

    parser = _Parser(prog="scalarfield", description="Ground states of -Δu = g(u) on R^N.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "verify":
            p.add_argument("check", choices=tuple(VERIFY))
    return parser


_META = {"config", "dump_config", "verbose", "command", "check"}


def resolve_config(ns: argparse.Namespace) -> RunConfig:
    data = {}
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc}")
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
    flags = {k: v for k, v in vars(ns).items() if v is not None and k not in _META}
    data.update(flags)
    data["command"] = ns.command
    if ns.command == "verify":
        data["check"] = ns.check
    if ns.command == "sweep" and "format" not in flags and "format" not in data:
        data["format"] = "csv"
    return RunConfig.from_dict(data)


def run(argv: list[str] | None = None) -> int:
    """Execute one command; returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = build_parser().parse_args(argv)
        cfg = resolve_config(ns)
    except UsageError as exc:
        print(f"scalarfield: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if ns.dump_config:
        try:
            with open(ns.dump_config, "w", encoding="utf-8") as fh:
                json.dump(asdict(cfg), fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            print(f"scalarfield: error: {exc}", file=sys.stderr)
            return EXIT_FAILURE
    try:
        result = COMMANDS[cfg.command](cfg)
    except (UsageError, DomainError) as exc:
        print(f"scalarfield: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ScalarFieldError, ArithmeticError) as exc:
        print(f"scalarfield: failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    try:
        emit(result, cfg.format, cfg.out, cfg.full_profile)
    except OSError as exc:
        print(f"scalarfield: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def main() -> None:
    sys.exit(run())
