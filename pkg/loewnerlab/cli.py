"""Command-line interface for loewnerlab."""

import functools
import json
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import click
import humanize
import numpy as np
from rich.markup import escape
from rich.table import Table

from . import __version__
from .artifacts import (
    dumps,
    read_curves,
    read_driving_csv,
    read_json,
    read_map,
    region_from_dict,
    write_curves,
    write_driving_csv,
    write_json,
    write_manifest,
    write_path_batch,
)
from .config import LabConfig, RunConfig, ToleranceConfig, get_config_dir, get_config_path
from .energies import (
    Case,
    PotentialReport,
    chordal_energy,
    chordal_potential,
    exponents,
    forced_potential_bookkeeping,
    forced_radial_potential,
    multichordal_potential,
    multiradial_potential,
    radial_energy,
    radial_hull_identity,
    radial_potential,
    rho_potential,
)
from .errors import ErrorCode, InputError, LabError
from .geometry import ConformalMap, DiskRegion, HalfPlaneRegion, MapChain, Region, geodesic_neighborhood, hyperbolic_geodesic
from .logging import set_run_id, setup_logging
from .loewner import chordal_trace, extract_driving, extract_radial_driving, radial_trace
from .loopsoup import (
    CurveSet,
    LoopMassParams,
    Target,
    lattice_loop_mass,
    loop_mass_two_sets,
    multi_cross_mass,
)
from .models import INFINITY, Chart, CurvePath, DrivingFunction, DrivingKind, Estimate, MarkedConfiguration
from .optimizer import LOOP_MODES, OBJECTIVE_KINDS, ObjectiveSpec, minimize_potential
from .sampler import SamplerConfig, quadratic_variation, sample_batch, sample_trace
from .theme import RULE, console, err_console, report_table, verdict
from .verifier import (
    DEFORMATION_KINDS,
    OM_KINDS,
    OMCase,
    coefficient_cross_check,
    om_ratio_experiment,
    radial_normalization_check,
    standard_case,
    uniform_convergence_bracket,
    verify_deformation,
    verify_restriction_exponents,
)

UTC = timezone.utc

logger = logging.getLogger(__name__)

_L = RULE

ENERGY_KINDS = ("chordal", "rho", "radial", "rho-radial", "multi-chordal", "multi-radial")


# ---------------------------------------------------------------------------
# Run plumbing
# ---------------------------------------------------------------------------


@dataclass
class Run:
    """One command invocation: its RunConfig, output directory and written artifacts."""

    config: RunConfig
    lab: LabConfig
    as_json: bool = False
    started: datetime = field(default_factory=lambda: datetime.now(UTC))
    artifacts: list[Path] = field(default_factory=list)

    @property
    def out(self) -> Path:
        return Path(self.config.out_dir)

    @property
    def tolerances(self) -> ToleranceConfig:
        return self.config.tolerances

    def loop_params(self, **overrides: Any) -> LoopMassParams:
        return LoopMassParams.from_config(
            self.lab.loops,
            self.config.seed,
            n_samples=self.config.mc_samples,
            workers=self.lab.threads,
            **overrides,
        )

    def write(self, name: str, payload: dict[str, Any]) -> Path:
        path = write_json(self.out / name, payload, self.config)
        self.artifacts.append(path)
        return path

    def add(self, path: Path) -> Path:
        self.artifacts.append(path)
        return path

    def finish(self, payload: dict[str, Any], status: str = "ok") -> None:
        """Write the manifest, then print the payload in JSON mode or the elapsed time."""
        finished = datetime.now(UTC)
        manifest = write_manifest(self.out, self.config, self.artifacts, self.started, finished, status)
        if self.as_json:
            click.echo(dumps({**payload, "manifest": str(manifest)}))
            return
        elapsed = humanize.naturaldelta(finished - self.started, minimum_unit="milliseconds")
        console.print(f"\n[muted]{len(self.artifacts)} artifact(s) in {self.out} · {elapsed}[/muted]")


def _start(command: str, opts: dict[str, Any], inputs: dict[str, str | None] | None = None, **case: Any) -> Run:
    """Resolve the RunConfig from flags, the saved LabConfig and its environment overrides."""
    lab = LabConfig.load()
    tolerances = lab.tolerances
    if opts.get("tol") is not None:
        tolerances = replace(tolerances, deterministic=opts["tol"])
    eps_grid = case.pop("eps_grid", None) or []
    config = RunConfig(
        command=command,
        inputs={k: str(v) for k, v in (inputs or {}).items() if v is not None},
        out_dir=str(opts.get("out_dir") or Path("out") / command),
        seed=lab.seed if opts.get("seed") is None else int(opts["seed"]),
        tolerances=tolerances,
        mc_samples=opts.get("mc_samples") or case.pop("default_samples", lab.loops.n_samples),
        steps=opts.get("steps") or lab.sampler.steps,
        kappa=case.pop("kappa", None),
        rho=case.pop("rho", None),
        n=case.pop("n", None),
        mu=case.pop("mu", None),
        eps_grid=list(eps_grid),
        extra={k: v for k, v in case.items() if k != "default_samples"},
    )
    set_run_id(config.run_id)
    logger.info("Starting run", extra={"command": command, "seed": config.seed})
    return Run(config, lab, bool(opts.get("as_json")))


def run_options(func: Callable[..., Any]) -> Callable[..., Any]:
    """Flags shared by every computing command: --seed --tol --mc-samples --steps --out-dir --json."""
    options = [
        click.option("--seed", type=int, default=None, help="Root seed (default: saved config)"),
        click.option("--tol", type=float, default=None, help="Deterministic tolerance of identity checks"),
        click.option("--mc-samples", type=int, default=None, help="Monte Carlo samples or paths"),
        click.option("--steps", type=int, default=None, help="Time steps per path"),
        click.option("--out-dir", type=click.Path(file_okay=False), default=None, help="Artifact directory"),
        click.option("--json", "as_json", is_flag=True, help="Output as JSON"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _parse_grid(ctx: click.Context, param: click.Parameter, value: str | None) -> list[float] | None:
    if value is None:
        return None
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError as e:
        raise click.BadParameter("expected comma-separated numbers, e.g. 0.8,0.6,0.45") from e


def handle_lab_errors(func: Callable[..., Any]) -> Callable[..., Any]:
    """Print LabErrors in the error style and as {"error": ...} JSON on stdout; exit 2."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except LabError as e:
            logger.debug("Command failed", exc_info=True, extra={"code": e.code.value})
            err_console.print(f"[error]✗ {escape(str(e))}[/error]")
            click.echo(json.dumps({"error": e.to_dict()}, default=str))
            click.get_current_context().exit(2)

    return wrapper


def _split(opts: dict[str, Any]) -> dict[str, Any]:
    """Pop the shared run flags out of a command's kwargs."""
    return {k: opts.pop(k) for k in ("seed", "tol", "mc_samples", "steps", "out_dir", "as_json")}


def _fmt(value: float) -> str:
    if value is None or not math.isfinite(value):
        return str(value)
    return f"{value:.6g}"


def _print_potential(report: PotentialReport) -> None:
    rows = [(name, _fmt(value), "") for name, value in report.terms.items()]
    if report.loop is not None:
        rows.append(("loop", _fmt(report.loop.mean), _fmt(report.loop.stderr)))
    rows.append(("total", _fmt(report.total), _fmt(report.stderr)))
    console.print(report_table(f"{report.kind} potential", rows))
    if report.truncated:
        console.print(f"{_L} [warning]Curve does not reach its target; horizon T={_fmt(report.horizon)}[/warning]")


def _print_estimate(title: str, estimate: Estimate) -> None:
    console.print(f"\n[header]{title}[/header]")
    console.print(f"{_L} Mass: [value]{_fmt(estimate.mean)}[/value] ± [stderr]{_fmt(estimate.stderr)}[/stderr]")
    if estimate.n_samples:
        console.print(f"{_L} Samples: {humanize.intcomma(estimate.n_samples)}")
    bias = estimate.window.get("total_bias_bound", estimate.window.get("bias_bound"))
    if bias is not None:
        console.print(f"{_L} Truncation bias ≤ {_fmt(float(bias))}")


# ---------------------------------------------------------------------------
# Group
# ---------------------------------------------------------------------------


@click.group(invoke_without_command=True)
@click.version_option(version=__version__)
@click.option("--verbose", "-v", is_flag=True, help="Show debug logs on stderr")
@click.option("--json-logs", is_flag=True, help="Emit logs as JSON lines")
@click.option("--log-file", is_flag=True, help="Also log to ~/.loewnerlab/logs/loewnerlab.log")
@click.pass_context
def main(ctx: click.Context, verbose: bool, json_logs: bool, log_file: bool) -> None:
    """loewnerlab - numerical lab for Loewner chains, SLE potentials and loop masses."""
    ctx.ensure_object(dict)
    setup_logging(verbose=verbose, json_format=json_logs, log_to_file=log_file)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


# ---------------------------------------------------------------------------
# Loewner chains
# ---------------------------------------------------------------------------


@main.command()
@click.option("--driving", "driving_path", required=True, help="Driving CSV (t,value)")
@click.option("--T", "horizon", type=float, default=None, help="Capacity horizon (default: whole file)")
@click.option("--vertical", is_flag=True, help="Use vertical-slit steps")
@run_options
@handle_lab_errors
def trace(driving_path: str, horizon: float | None, vertical: bool, **opts: Any) -> None:
    """Driving function → Loewner trace."""
    run = _start("trace", _split(opts), {"driving": driving_path}, horizon=horizon, vertical=vertical)
    driving = read_driving_csv(driving_path)
    if horizon is not None:
        if horizon > driving.horizon * (1 + 1e-12):
            raise InputError(
                code=ErrorCode.INVALID_PARAMETER,
                message="--T exceeds the driving function's horizon",
                details={"T": horizon, "horizon": driving.horizon},
            )
        driving = driving.truncate(horizon)
    if driving.kind is DrivingKind.RADIAL:
        result = radial_trace(driving)
    else:
        result = chordal_trace(driving, vertical)
    tip = result.curve.tip
    payload = {
        "kind": driving.kind.value,
        "capacity": result.capacity,
        "tip": [tip.real, tip.imag],
        "truncated": result.truncated,
        "steps": driving.steps,
    }
    run.add(write_curves(run.out / "curve.json", [result.curve], run.config, **payload))
    if not run.as_json:
        console.print(f"\n[header]{driving.kind.value.title()} trace[/header]")
        console.print(f"{_L} Steps: {humanize.intcomma(driving.steps)}")
        console.print(f"{_L} Capacity: [value]{_fmt(result.capacity)}[/value]")
        console.print(f"{_L} Tip: [value]{_fmt(tip.real)} + {_fmt(tip.imag)}i[/value]")
        if result.truncated:
            console.print(f"{_L} [warning]Trace stopped at a swallowing time[/warning]")
    run.finish(payload)


@main.command()
@click.option("--curve", "curve_path", required=True, help="Curve JSON")
@click.option("--vertical", is_flag=True, help="Unzip with vertical slits")
@run_options
@handle_lab_errors
def extract(curve_path: str, vertical: bool, **opts: Any) -> None:
    """Curve → driving function (inverse zipper)."""
    run = _start("extract", _split(opts), {"curve": curve_path}, vertical=vertical)
    curve = read_curves(curve_path)[0]
    if curve.chart is Chart.D:
        driving = extract_radial_driving(curve)
        energy = radial_energy(driving)
    else:
        driving = extract_driving(curve, vertical)
        energy = chordal_energy(driving)
    run.add(write_driving_csv(run.out / "driving.csv", driving, run.config))
    payload = {"kind": driving.kind.value, "horizon": driving.horizon, "steps": driving.steps, "energy": energy}
    run.write("extract.json", payload)
    if not run.as_json:
        console.print(f"\n[header]Extracted {driving.kind.value} driving function[/header]")
        console.print(f"{_L} Steps: {humanize.intcomma(driving.steps)}")
        console.print(f"{_L} Capacity: [value]{_fmt(driving.horizon)}[/value]")
        console.print(f"{_L} Loewner energy: [value]{_fmt(energy)}[/value]")
    run.finish(payload)


# ---------------------------------------------------------------------------
# Energies and potentials
# ---------------------------------------------------------------------------


def _drivings(curve_paths: Sequence[str], driving_paths: Sequence[str], kind: DrivingKind) -> list[DrivingFunction]:
    out = [read_driving_csv(p, kind) for p in driving_paths]
    for path in curve_paths:
        for curve in read_curves(path):
            out.append(extract_radial_driving(curve) if kind is DrivingKind.RADIAL else extract_driving(curve))
    return out


def _curves(curve_paths: Sequence[str], driving_paths: Sequence[str]) -> list[CurvePath]:
    out = [c for p in curve_paths for c in read_curves(p)]
    for path in driving_paths:
        driving = read_driving_csv(path)
        traced = radial_trace(driving) if driving.kind is DrivingKind.RADIAL else chordal_trace(driving)
        out.append(traced.curve)
    return out


def _require_inputs(items: Sequence[Any], what: str) -> None:
    if not items:
        raise InputError(code=ErrorCode.MALFORMED_INPUT, message=f"{what} needs --curve or --driving")


@main.command()
@click.option("--kind", type=click.Choice(ENERGY_KINDS), default="chordal", help="Which potential")
@click.option("--curve", "curve_paths", multiple=True, help="Curve JSON (repeatable)")
@click.option("--driving", "driving_paths", multiple=True, help="Driving CSV (repeatable)")
@click.option("--rho", type=float, default=None, help="Force-point weight ρ")
@click.option("--mu", type=float, default=None, help="Spiral rate μ (multi-radial)")
@click.option("--force-point", type=float, default=None, help="Force point (real point, or angle for rho-radial)")
@click.option("--horizon", type=float, default=None, help="Cut radial drivers at this time")
@click.option("--hull", "hull_path", default=None, help="Hull curve JSON for the removal identities")
@click.option("--bookkeeping", is_flag=True, help="With --hull and --kind rho: trace G_t along the chain")
@click.option("--loops/--no-loops", default=True, help="Estimate Monte Carlo loop terms")
@run_options
@handle_lab_errors
def energy(
    kind: str,
    curve_paths: tuple[str, ...],
    driving_paths: tuple[str, ...],
    rho: float | None,
    mu: float | None,
    force_point: float | None,
    horizon: float | None,
    hull_path: str | None,
    bookkeeping: bool,
    loops: bool,
    **opts: Any,
) -> None:
    """Loewner energy and potential of a curve or driving function."""
    inputs = {"curve": ",".join(curve_paths) or None, "driving": ",".join(driving_paths) or None, "hull": hull_path}
    run = _start(
        "energy",
        _split(opts),
        inputs,
        kind=kind,
        rho=rho,
        mu=mu,
        force_point=force_point,
        horizon=horizon,
        bookkeeping=bookkeeping,
    )
    if hull_path is not None:
        _hull_identities(run, kind, curve_paths, driving_paths, hull_path, rho, force_point, bookkeeping, loops)
        return

    report: PotentialReport
    if kind in ("chordal", "rho"):
        curves = _curves(curve_paths, driving_paths)
        _require_inputs(curves, kind)
        curve = curves[0]
        if kind == "chordal":
            report = chordal_potential(curve, tol=run.tolerances)
        else:
            end = curve.marked.get("end", INFINITY if curve.chart is Chart.H else curve.tip)
            fp = None if force_point is None else complex(force_point)
            config = MarkedConfiguration.chordal(curve.start, end, chart=curve.chart, rho=rho, force_point=fp)
            report = rho_potential(curve, config, tol=run.tolerances)
    elif kind in ("radial", "rho-radial"):
        drivings = _drivings(curve_paths, driving_paths, DrivingKind.RADIAL)
        _require_inputs(drivings, kind)
        if kind == "radial":
            report = radial_potential(drivings[0], horizon)
        else:
            report = forced_radial_potential(drivings[0], rho if rho is not None else 0.0, force_point, horizon)
    elif kind == "multi-chordal":
        curves = _curves(curve_paths, driving_paths)
        _require_inputs(curves, kind)
        report = multichordal_potential(curves, None, run.loop_params() if loops else None)
    else:
        drivings = _drivings(curve_paths, driving_paths, DrivingKind.RADIAL)
        _require_inputs(drivings, kind)
        horizons = None if horizon is None else [horizon] * len(drivings)
        report = multiradial_potential(drivings, None, mu, horizons)

    payload = report.to_dict()
    run.write("energy.json", payload)
    if not run.as_json:
        _print_potential(report)
    run.finish(payload)


def _hull_identities(
    run: Run,
    kind: str,
    curve_paths: Sequence[str],
    driving_paths: Sequence[str],
    hull_path: str,
    rho: float | None,
    force_point: float | None,
    bookkeeping: bool,
    loops: bool,
) -> None:
    hull = read_curves(hull_path)[0]
    if bookkeeping:
        if kind != "rho":
            raise InputError(code=ErrorCode.INVALID_PARAMETER, message="--bookkeeping needs --kind rho")
        drivings = _drivings(curve_paths, driving_paths, DrivingKind.CHORDAL)
        _require_inputs(drivings, kind)
        trace_ = forced_potential_bookkeeping(drivings[0], hull, rho if rho is not None else 0.0, force_point)
        payload: dict[str, Any] = {
            "kind": "bookkeeping",
            "change": trace_.change,
            "times": trace_.times.tolist(),
            "values": trace_.values.tolist(),
        }
        run.write("bookkeeping.json", payload)
        if not run.as_json:
            console.print("\n[header]Forced-potential bookkeeping[/header]")
            console.print(f"{_L} Points: {humanize.intcomma(trace_.times.size)}")
            console.print(f"{_L} G_T − G_0: [value]{_fmt(trace_.change)}[/value]")
        run.finish(payload)
        return

    if kind != "radial":
        raise InputError(code=ErrorCode.INVALID_PARAMETER, message="--hull needs --kind radial or --bookkeeping")
    curves = _curves(curve_paths, driving_paths)
    _require_inputs(curves, kind)
    identity = radial_hull_identity(curves[0], hull, run.loop_params() if loops else None)
    payload = {"kind": "radial-hull", **identity.to_dict()}
    run.write("hull_identity.json", payload)
    if not run.as_json:
        rows = [
            ("ΔI^R", _fmt(identity.lhs), ""),
            ("quadrature", _fmt(identity.quadrature), ""),
            ("closed form", _fmt(identity.closed_form), ""),
            ("loop quadrature", _fmt(identity.loop_quadrature), ""),
        ]
        if identity.loop_estimate is not None:
            rows.append(("loop estimate", _fmt(identity.loop_estimate.mean), _fmt(identity.loop_estimate.stderr)))
        console.print(report_table("Radial hull removal", rows))
        console.print(f"{_L} Discrepancy: [value]{_fmt(identity.discrepancy)}[/value]")
    run.finish(payload)


# ---------------------------------------------------------------------------
# Loop masses
# ---------------------------------------------------------------------------


def _target(path: str) -> Target:
    """A region JSON ({"kind": ...}) or one or more curves."""
    data = read_json(path)
    if isinstance(data, dict) and "kind" in data:
        return region_from_dict(data)
    curves = read_curves(path)
    return curves[0] if len(curves) == 1 else CurveSet(tuple(curves))


def _target_chart(target: Target) -> Chart:
    if isinstance(target, CurveSet):
        return target.curves[0].chart
    return target.chart


@main.command()
@click.option("--first", "first_path", required=True, help="Curve(s) or region JSON")
@click.option("--second", "second_path", default=None, help="Curve(s) or region JSON")
@click.option("--domain", "domain_path", default=None, help="Region JSON (default: the whole chart)")
@click.option("--multi", is_flag=True, help="Multi-crossing mass of the curves in --first")
@click.option("--oracle-h", type=float, default=None, help="Also run the random-walk oracle at mesh h")
@run_options
@handle_lab_errors
def loopmass(
    first_path: str,
    second_path: str | None,
    domain_path: str | None,
    multi: bool,
    oracle_h: float | None,
    **opts: Any,
) -> None:
    """Brownian loop mass of loops hitting two sets."""
    inputs = {"first": first_path, "second": second_path, "domain": domain_path}
    run = _start("loopmass", _split(opts), inputs, multi=multi, oracle_h=oracle_h)
    first = _target(first_path)
    domain: Region
    if domain_path is not None:
        domain = region_from_dict(read_json(domain_path))
    elif _target_chart(first) is Chart.D:
        domain = DiskRegion()
    else:
        domain = HalfPlaneRegion()
    params = run.loop_params()

    payload: dict[str, Any]
    if multi:
        curves = list(first.curves) if isinstance(first, CurveSet) else [first]
        if not all(isinstance(c, CurvePath) for c in curves):
            raise InputError(code=ErrorCode.MALFORMED_INPUT, message="--multi needs curves in --first")
        estimate = multi_cross_mass(curves, domain, params)  # type: ignore[arg-type]
        payload = {"kind": "multi-cross", "estimate": estimate.to_dict()}
    else:
        if second_path is None:
            raise InputError(code=ErrorCode.MALFORMED_INPUT, message="loopmass needs --second (or --multi)")
        second = _target(second_path)
        estimate = loop_mass_two_sets(first, second, domain, params)
        payload = {"kind": "two-sets", "estimate": estimate.to_dict()}
        if oracle_h is not None:
            oracle = lattice_loop_mass(first, second, domain, oracle_h, run.config.mc_samples, run.config.seed)
            diff = estimate.minus(oracle)
            payload["oracle"] = oracle.to_dict()
            payload["agreement"] = {
                "difference": diff.mean,
                "stderr": diff.stderr,
                "passed": abs(diff.mean) <= 3 * diff.stderr,
            }
    run.write("loopmass.json", payload)
    if not run.as_json:
        _print_estimate("Brownian loop mass", estimate)
        if "oracle" in payload:
            agreement = payload["agreement"]
            console.print(f"{_L} Oracle: [value]{_fmt(payload['oracle']['mean'])}[/value] ± {_fmt(payload['oracle']['stderr'])}")
            console.print(f"{_L} Agreement at 3σ: {verdict(agreement['passed'])}")
    run.finish(payload)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


@main.command()
@click.option("--kappa", type=float, required=True, help="SLE parameter κ")
@click.option("--rho", type=float, default=None, help="Force-point weight ρ")
@click.option("--T", "horizon", type=float, default=None, help="Capacity horizon")
@click.option("--radial", is_flag=True, help="Radial SLE in the disk")
@click.option("--force-point", type=float, default=None, help="Force point V_0 (default: the start)")
@click.option("--traces", type=int, default=0, help="Also trace the first N paths")
@run_options
@handle_lab_errors
def sample(
    kappa: float,
    rho: float | None,
    horizon: float | None,
    radial: bool,
    force_point: float | None,
    traces: int,
    **opts: Any,
) -> None:
    """Sample SLE_κ(ρ) driving functions."""
    run = _start(
        "sample",
        _split(opts),
        kappa=kappa,
        rho=rho,
        horizon=horizon,
        radial=radial,
        force_point=force_point,
        default_samples=1000,
    )
    sampler = SamplerConfig.from_defaults(
        run.lab.sampler,
        kappa,
        rho=rho,
        kind=DrivingKind.RADIAL if radial else DrivingKind.CHORDAL,
        horizon=horizon or run.lab.sampler.horizon,
        steps=run.config.steps,
        seed=run.config.seed,
        n_paths=run.config.mc_samples,
        force_point=force_point,
        workers=run.lab.threads,
    )
    paths = sample_batch(sampler)
    drivings = [p.driving for p in paths]
    run.add(write_path_batch(run.out / "paths.bin", drivings, run.config))
    if traces:
        curves = [sample_trace(sampler, i).curve for i in range(min(traces, sampler.n_paths))]
        run.add(write_curves(run.out / "traces.json", curves, run.config))

    finals = np.array([d.values[-1] - d.values[0] for d in drivings])
    n = finals.size
    variance = float(finals.var(ddof=1)) if n > 1 else 0.0
    stats_ = {
        "n_paths": n,
        "mean_final": float(finals.mean()),
        "var_final": variance,
        "var_stderr": variance * math.sqrt(2 / (n - 1)) if n > 1 else math.inf,
        "expected_var": kappa * sampler.horizon if not sampler.forced else None,
        "mean_quadratic_variation": float(np.mean([quadratic_variation(d) for d in drivings])),
        "reflections": sum(p.reflections for p in paths),
        "rejections": sum(p.rejections for p in paths),
    }
    payload = {"sampler": sampler.to_dict(), "stats": stats_}
    run.write("sample.json", payload)
    if not run.as_json:
        console.print(f"\n[header]Sampled {humanize.intcomma(n)} SLE path(s)[/header]")
        console.print(f"{_L} κ={_fmt(kappa)}  ρ={rho}  T={_fmt(sampler.horizon)}  steps={sampler.steps}")
        console.print(f"{_L} Var(W_T − W_0): [value]{_fmt(variance)}[/value] ± {_fmt(stats_['var_stderr'])}")
        if stats_["expected_var"] is not None:
            console.print(f"{_L} κT: {_fmt(stats_['expected_var'])}")
        if stats_["reflections"] or stats_["rejections"]:
            console.print(f"{_L} Reflections: {stats_['reflections']}  Rejections: {stats_['rejections']}")
    run.finish(payload)


# ---------------------------------------------------------------------------
# Minimization
# ---------------------------------------------------------------------------


def _multichordal_config(n: int) -> MarkedConfiguration:
    """Adjacent pairs of 0, 1, ..., 2n−1 on ℝ linked in order."""
    boundary = tuple(complex(k) for k in range(2 * n))
    links = tuple((2 * j, 2 * j + 1) for j in range(n))
    return MarkedConfiguration(Chart.H, boundary, None, links)


@main.command()
@click.option("--kind", type=click.Choice(OBJECTIVE_KINDS), default="chordal", help="Potential to minimize")
@click.option("--T", "horizon", type=float, default=1.0, help="Capacity horizon")
@click.option("--rho", type=float, default=None, help="Force-point weight ρ")
@click.option("--n", "n_curves", type=int, default=1, help="Number of curves (multi kinds)")
@click.option("--mu", type=float, default=0.0, help="Spiral rate μ (multi-radial)")
@click.option("--loop-mode", type=click.Choice(LOOP_MODES), default="frozen", help="Loop-term handling")
@click.option("--init", "init_paths", multiple=True, help="Initial driving CSV (one per curve)")
@click.option("--max-iter", type=int, default=None, help="Iteration cap")
@run_options
@handle_lab_errors
def minimize(
    kind: str,
    horizon: float,
    rho: float | None,
    n_curves: int,
    mu: float,
    loop_mode: str,
    init_paths: tuple[str, ...],
    max_iter: int | None,
    **opts: Any,
) -> None:
    """Minimize a potential over piecewise-linear drivers."""
    shared = _split(opts)
    shared["steps"] = shared["steps"] or 20
    run = _start(
        "minimize",
        shared,
        {"init": ",".join(init_paths) or None},
        kind=kind,
        rho=rho,
        n=n_curves,
        mu=mu,
        horizon=horizon,
        loop_mode=loop_mode,
    )
    spec = ObjectiveSpec(
        kind=kind,
        horizon=horizon,
        steps=run.config.steps,
        rho=rho,
        n=n_curves,
        mu=mu,
        config=_multichordal_config(n_curves) if kind == "multi-chordal" else None,
        loop_mode=loop_mode,
        loop_params=run.loop_params(),
    )
    options = run.lab.optimizer if max_iter is None else replace(run.lab.optimizer, max_iter=max_iter)
    init = [read_driving_csv(p, spec.driving_kind) for p in init_paths] or None
    result = minimize_potential(spec, init, options, run.lab.threads)
    for index, driving in enumerate(result.drivers):
        run.add(write_driving_csv(run.out / f"driver_{index}.csv", driving, run.config))
    payload = {"spec": spec.to_dict(), **result.to_dict()}
    run.write("minimize.json", payload)
    if not run.as_json:
        console.print(f"\n[header]Minimized {kind} potential[/header]")
        console.print(f"{_L} Objective: {_fmt(result.objective_trace[0])} → [value]{_fmt(result.objective)}[/value]")
        console.print(f"{_L} Steps accepted: {result.accepted}  rejected: {result.rejected}")
        if result.refreshes:
            console.print(f"{_L} Loop refreshes: {len(result.refreshes)} (trace restarts at {result.refreshes})")
        console.print(f"{_L} Stopped: {result.reason}")
        _print_potential(result.report)
    run.finish(payload)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------


def _map(path: str | None) -> ConformalMap:
    return MapChain(()) if path is None else read_map(path)


@main.command("verify-deform")
@click.option("--case", "kind", type=click.Choice(DEFORMATION_KINDS), required=True, help="Deformation identity")
@click.option("--f", "f_path", default=None, help="Map JSON (default: identity)")
@click.option("--curve", "curve_paths", multiple=True, help="Replacement curve JSON")
@click.option("--eps", type=float, default=0.5, help="Neighborhood parameter of A")
@click.option("--rho", type=float, default=None, help="Force-point weight ρ (rho case)")
@click.option("--n", "n_curves", type=int, default=2, help="Number of arcs (multi-radial)")
@click.option("--mu", type=float, default=0.0, help="Spiral rate μ (multi-radial)")
@click.option("--clearance", type=float, default=0.0, help="Required distance of curves from ∂A")
@run_options
@handle_lab_errors
def verify_deform(
    kind: str,
    f_path: str | None,
    curve_paths: tuple[str, ...],
    eps: float,
    rho: float | None,
    n_curves: int,
    mu: float,
    clearance: float,
    **opts: Any,
) -> None:
    """Check a conformal-deformation identity; exit 1 when it fails."""
    inputs = {"f": f_path, "curve": ",".join(curve_paths) or None}
    run = _start(
        "verify-deform",
        _split(opts),
        inputs,
        rho=rho,
        n=n_curves,
        mu=mu,
        case=kind,
        eps=eps,
        clearance=clearance,
    )
    curves = [c for p in curve_paths for c in read_curves(p)]
    case = standard_case(
        kind,
        _map(f_path),
        eps=eps,
        n=n_curves,
        rho=0.0 if rho is None else rho,
        mu=mu,
        curves=curves or None,
        params=run.loop_params(),
        tol=run.tolerances,
        clearance=clearance,
        seed=run.config.seed,
    )
    report = verify_deformation(case)
    payload = report.to_dict()
    run.write("verify_deform.json", payload)
    if not run.as_json:
        rows = [
            ("Δ potential", _fmt(report.lhs), ""),
            ("log|f'| terms", _fmt(report.log_term), ""),
            ("loop difference", _fmt(report.loop_difference.mean), _fmt(report.loop_difference.stderr)),
            ("discrepancy", _fmt(report.discrepancy), _fmt(report.stderr)),
        ]
        console.print(report_table(f"{kind} deformation identity", rows))
        console.print(f"{_L} Tolerance: 3σ + {_fmt(report.tolerance)}  {verdict(report.passed)}")
    run.finish(payload, "ok" if report.passed else "failed")
    if not report.passed:
        click.get_current_context().exit(1)


@main.command()
@click.option("--eps-grid", callback=_parse_grid, default="0.4,0.3,0.2,0.1", help="Decreasing ε values")
@click.option("--region-eps", type=float, default=0.6, help="Neighborhood A of the fixed complement")
@click.option("--n-curves", type=int, default=8, help="Perturbed curves per ε")
@click.option("--amplitude", type=float, default=0.4, help="Bump size relative to ε")
@run_options
@handle_lab_errors
def bracket(eps_grid: list[float], region_eps: float, n_curves: int, amplitude: float, **opts: Any) -> None:
    """Spread of the loop term over curves near the geodesic, along an ε-grid."""
    run = _start(
        "bracket",
        _split(opts),
        eps_grid=eps_grid,
        region_eps=region_eps,
        n_curves=n_curves,
        amplitude=amplitude,
    )
    report = uniform_convergence_bracket(
        hyperbolic_geodesic(-1 + 0j, 1 + 0j),
        geodesic_neighborhood(region_eps),
        geodesic_neighborhood,
        eps_grid,
        run.loop_params(),
        n_curves,
        amplitude,
        run.config.seed,
    )
    payload = report.to_dict()
    run.write("bracket.json", payload)
    if not run.as_json:
        table = Table(title="Loop-term bracket", title_style="header", show_edge=False, pad_edge=False)
        for column in ("ε", "lower", "upper", "width", "stderr", "curves"):
            table.add_column(column, justify="right")
        for p in report.points:
            table.add_row(_fmt(p.eps), _fmt(p.lower), _fmt(p.upper), _fmt(p.width), _fmt(p.stderr), str(p.n_curves))
        console.print(table)
        console.print(f"{_L} Narrowing at 2σ: {verdict(report.monotone)}")
    run.finish(payload, "ok" if report.monotone else "failed")
    if not report.monotone:
        click.get_current_context().exit(1)


@main.command("om-ratio")
@click.option("--case", "kind", type=click.Choice(OM_KINDS), default="chordal", help="Reference curve")
@click.option("--f", "f_path", default=None, help="Map JSON (default: identity)")
@click.option("--kappa", type=float, default=2.0, help="SLE parameter κ")
@click.option("--rho", type=float, default=None, help="Force-point weight ρ (rho-chordal, rho-radial)")
@click.option("--n", "n_curves", type=int, default=2, help="Number of curves (multi kinds)")
@click.option("--loop-samples", type=int, default=4096, help="Loops per disjointness tilt (multi kinds)")
@click.option("--eps-grid", callback=_parse_grid, default="0.8,0.6,0.45", help="Decreasing ε values")
@click.option("--T", "horizon", type=float, default=None, help="Trace horizon (default: 16 chordal, 4 radial, slits to radius 0.3 multi-radial)")
@click.option("--bias-scale", type=float, default=1.0, help="Declared bias allowance per unit ε")
@click.option("--clearance", type=float, default=0.0, help="Required distance of curves from ∂A_ε")
@run_options
@handle_lab_errors
def om_ratio(
    kind: str,
    f_path: str | None,
    kappa: float,
    rho: float | None,
    n_curves: int,
    loop_samples: int,
    eps_grid: list[float],
    horizon: float | None,
    bias_scale: float,
    clearance: float,
    **opts: Any,
) -> None:
    """Empirical log-ratio of SLE probabilities of thin neighborhoods; exit 1 when it fails."""
    shared = _split(opts)
    shared["steps"] = shared["steps"] or 200
    run = _start(
        "om-ratio",
        shared,
        {"f": f_path},
        kappa=kappa,
        rho=rho,
        n=n_curves,
        eps_grid=eps_grid,
        case=kind,
        horizon=horizon,
        bias_scale=bias_scale,
        clearance=clearance,
        default_samples=10_000,
    )
    case = OMCase(
        kind,
        _map(f_path),
        kappa,
        tuple(eps_grid),
        rho=rho,
        n_paths=run.config.mc_samples,
        steps=run.config.steps,
        horizon=horizon,
        seed=run.config.seed,
        clearance=clearance,
        bias_scale=bias_scale,
        workers=run.lab.threads,
        n=n_curves,
        loop_params=LoopMassParams.from_config(run.lab.loops, run.config.seed, n_samples=loop_samples, workers=1),
        tol=run.tolerances,
    )
    with console.status(f"Sampling {humanize.intcomma(case.n_paths)} paths…", spinner="dots"):
        report = om_ratio_experiment(case)
    payload = report.to_dict()
    run.write("om_ratio.json", payload)
    if not run.as_json:
        table = Table(title=f"{kind} ratio (target {_fmt(report.target)})", title_style="header", show_edge=False)
        for column in ("ε", "log-ratio", "stderr", "gap", "allowance", "P₀", "P₁", ""):
            table.add_column(column, justify="right")
        for p in report.points:
            table.add_row(
                _fmt(p.eps),
                _fmt(p.log_ratio),
                _fmt(p.stderr),
                _fmt(p.gap),
                _fmt(p.allowance),
                _fmt(p.stay_base),
                _fmt(p.stay_image),
                verdict(p.passed),
            )
        console.print(table)
        console.print(f"{_L} Gap trend: {verdict(report.trend_ok)}  overall: {verdict(report.passed)}")
    run.finish(payload, "ok" if report.passed else "failed")
    if not report.passed:
        click.get_current_context().exit(1)


# ---------------------------------------------------------------------------
# Constants and configuration
# ---------------------------------------------------------------------------

_TABLE_CASES = {
    "chordal": Case.CHORDAL,
    "rho": Case.FORCED_CHORDAL,
    "radial": Case.RADIAL,
    "rho-radial": Case.FORCED_RADIAL,
    "multi-chordal": Case.MULTI_CHORDAL,
    "multi-radial": Case.MULTI_RADIAL,
}


@main.command()
@click.option("--kappa", type=float, required=True, help="SLE parameter κ")
@click.option("--rho", type=float, default=None, help="Force-point weight ρ")
@click.option("--n", "n_curves", type=int, default=None, help="Number of curves")
@click.option("--mu", type=float, default=None, help="Spiral rate μ")
@click.option(
    "--check",
    is_flag=True,
    help="Also run verify_restriction_exponents (e(j) = lim −2b_κ(j)/c(κ) against the deformation "
    "coefficients), the coefficient cross-check and the radial normalization check",
)
@run_options
@handle_lab_errors
def constants(
    kappa: float, rho: float | None, n_curves: int | None, mu: float | None, check: bool, **opts: Any
) -> None:
    """Dump the exponent table for κ (and ρ, n, μ); --check adds the restriction-exponent limits."""
    run = _start("constants", _split(opts), kappa=kappa, rho=rho, n=n_curves, mu=mu, check=check)
    table = exponents(kappa, rho, n_curves, mu)
    cases = {
        name: {
            "weights": table.weights(case),
            "limits": table.limits(case),
            "corrected": table.corrected_weights(case),
        }
        for name, case in _TABLE_CASES.items()
    }
    payload: dict[str, Any] = {"table": table.to_dict(), "cases": cases}
    reports = []
    if check:
        reports = [
            verify_restriction_exponents(),
            coefficient_cross_check(kappa),
            radial_normalization_check(seed=run.config.seed),
        ]
        payload["checks"] = [r.to_dict() for r in reports]
    run.write("constants.json", payload)
    if not run.as_json:
        out = Table(title=f"Exponents at κ={_fmt(kappa)}", title_style="header", show_edge=False, pad_edge=False)
        out.add_column("name", style="highlight")
        out.add_column("value", style="value", justify="right")
        for name, value in table.to_dict().items():
            out.add_row(name, _fmt(float(value)))
        console.print(out)
        for report in reports:
            failed = [row for row in report.rows if not row.passed]
            console.print(f"{_L} {report.title}: {len(report.rows)} rows {verdict(report.passed)}")
            for row in failed:
                console.print(f"{_L}   [fail]{escape(row.name)}[/fail]: {_fmt(row.value)} vs {_fmt(row.expected)}")
    passed = all(r.passed for r in reports)
    run.finish(payload, "ok" if passed else "failed")
    if not passed:
        click.get_current_context().exit(1)


@main.command("config")
@click.option("--show", is_flag=True, help="Show current config")
@click.option("--threads", type=int, default=None, help="Worker threads per pool")
@click.option("--seed", type=int, default=None, help="Default root seed")
@click.option("--mc-samples", type=int, default=None, help="Default loop samples")
@click.option("--reset", is_flag=True, help="Restore the default configuration")
@click.option("--json", "as_json", is_flag=True, help="Output as JSON")
@handle_lab_errors
def config_cmd(
    show: bool, threads: int | None, seed: int | None, mc_samples: int | None, reset: bool, as_json: bool
) -> None:
    """View or modify configuration."""
    config = LabConfig() if reset else LabConfig.load()
    changed = reset
    if threads is not None:
        config.threads = max(1, threads)
        changed = True
    if seed is not None:
        config.seed = seed
        changed = True
    if mc_samples is not None:
        config.loops = replace(config.loops, n_samples=mc_samples)
        changed = True
    if changed:
        config.save()
        if not as_json:
            console.print(f"[success]✓ Saved {get_config_path()}[/success]")

    if as_json:
        click.echo(dumps(config.to_dict()))
        return
    if show or not changed:
        console.print("\n[header]Current Configuration[/header]")
        console.print(f"{_L} Config dir: {get_config_dir()}")
        console.print(f"{_L} Threads: {config.threads}")
        console.print(f"{_L} Seed: {config.seed}")
        console.print(f"{_L} Loop samples: {humanize.intcomma(config.loops.n_samples)}")
        console.print(f"{_L} Bridge points: {config.loops.bridge_points}")
        console.print(f"{_L} Sampler steps: {config.sampler.steps}  policy: {config.sampler.swallow_policy}")
        console.print(f"{_L} Optimizer max_iter: {config.optimizer.max_iter}")
        tol = config.tolerances
        console.print(f"{_L} Tolerances: geometric {tol.geometric:g}, deterministic {tol.deterministic:g}")
