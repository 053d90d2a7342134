import functools
import json
import logging
import sys
from pathlib import Path

import click
import numpy as np
import pandas as pd

from . import __version__
from .exceptions import ConfigError, NoConvergence, NotExponentiallyErgodic, NumericalError
from .macromodels import (
    DmpCalibration,
    NkCalibration,
    RbcCalibration,
    dmp_law,
    economy_law,
    ge_equilibrium,
    ge_pe_transform,
    impulse_response,
    nk_forward_guidance_sweep,
    nk_law,
    pe_action_loading,
    rbc_law,
    solve_dmp,
    solve_nk,
    solve_rbc,
    to_long_format,
)
from .macromodels.nk import CONDITIONINGS
from .procspec import (
    autocorr,
    autocov_from_spec,
    check_exponential_ergodicity,
    decompose_persistence,
)
from .pseudotrue import (
    reaction_report,
    solve_mio_d_state,
    solve_one_state_exp_erg,
    solve_one_state_general,
)
from .selftest import run_selftest
from .settings import RunConfig, config

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
MODES = ("cree", "re")
# Lags of the partial equilibrium autocovariances written by ge-pe
GE_PE_LAGS = 5


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"Cannot serialize {type(value).__name__}")


def write_json(document: dict, path: Path) -> None:
    path.write_text(json.dumps(document, indent=2, default=_json_default) + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")


def write_table(frame: pd.DataFrame, run: RunConfig, stem: str) -> Path:
    """Write frame as <stem>.csv or <stem>.json depending on the run format"""
    run.output_dir.mkdir(parents=True, exist_ok=True)
    path = run.output_dir / f"{stem}.{run.format}"
    if run.format == "csv":
        frame.to_csv(path, index=False, float_format="%.17g", encoding="utf-8")
        logger.info(f"Wrote {path}")
    else:
        write_json(frame.to_dict(orient="records"), path)
    return path


def write_document(document: dict, run: RunConfig, name: str) -> Path:
    run.output_dir.mkdir(parents=True, exist_ok=True)
    path = run.output_dir / name
    write_json(document, path)
    return path


def _fail(error: Exception, code: int):
    click.echo(json.dumps({"error": type(error).__name__, "message": str(error)}), err=True)
    sys.exit(code)


def run_command(command):
    """Load the run configuration and turn library errors into exit codes"""

    @click.pass_obj
    @functools.wraps(command)
    def wrapper(options, **kwargs):
        run = None
        try:
            run = RunConfig.load(**options)
            return command(run, **kwargs)
        except ConfigError as error:
            _fail(error, EXIT_CONFIG)
        except NoConvergence as error:
            if run is not None:
                trace = pd.DataFrame({"residual": error.residuals})
                trace.insert(0, "iteration", np.arange(1, len(trace) + 1))
                write_table(trace, run, "residuals")
            _fail(error, EXIT_NUMERICAL)
        except NumericalError as error:
            _fail(error, EXIT_NUMERICAL)

    return wrapper


def _write_irfs(law, run: RunConfig, prefix: str = "irf") -> None:
    for shock in law.shocks:
        frame = impulse_response(
            law, shock, horizon=run.knob("irf-horizon"), scale=run.knob("irf-scale")
        )
        write_table(to_long_format(frame), run, f"{prefix}_{shock}")


@click.group()
@click.version_option(version=__version__)
@click.option(
    "--config",
    "config_path",
    default=None,
    metavar="{PATH}",
    help="YAML or JSON run configuration. Its keys override those of the preset",
)
@click.option(
    "--preset",
    default=None,
    metavar="{NAME}",
    help="Named configuration shipped with the package, e.g. 'nk-paper'",
)
@click.option(
    "--out",
    "output_dir",
    default=config["output-dir"],
    metavar="{DIR}",
    help="Directory receiving the result files",
)
@click.option(
    "--format",
    "format",
    type=click.Choice(["csv", "json"]),
    default=config["format"],
    show_default=True,
    help="Format of tabular outputs",
)
@click.option("--seed", type=int, default=config["seed"], show_default=True)
@click.option(
    "--tol",
    "tolerance",
    type=float,
    default=config["tolerance"],
    show_default=True,
    help="Tolerance of the equilibrium fixed points",
)
@click.pass_context
def main(ctx, config_path, preset, output_dir, format, seed, tolerance):
    """Pseudo-true state-space models and equilibria with simple forecasting models"""
    ctx.obj = {
        "config_path": config_path,
        "preset": preset,
        "output_dir": output_dir,
        "format": format,
        "seed": seed,
        "tolerance": tolerance,
    }


@main.command()
@click.option("--d", "d", type=int, default=1, show_default=True, help="Number of states")
@click.option(
    "--force-general",
    is_flag=True,
    default=False,
    help="Use the general one-state solver even for exponentially ergodic truths",
)
@run_command
def pseudotrue(run, d, force_general):
    """Pseudo-true d-state model of a process

    Writes model.json with the model and the ergodicity report, and the
    forecast weights on y_t, y_{t-1}, ... for each horizon.
    """
    acv = autocov_from_spec(run.section("process"))
    report = check_exponential_ergodicity(autocorr(acv))
    lags = run.knob("forecast-lags")
    if d == 1:
        if force_general or not report.is_exp_ergodic:
            solution = _general(acv, run)
        else:
            try:
                solution = solve_one_state_exp_erg(acv)
            except NotExponentiallyErgodic as error:
                logger.warning(f"{error}; using the general solver")
                solution = _general(acv, run)

        def weights(s):
            return solution.weights(s, lags)

    else:
        solution = solve_mio_d_state(acv, d)

        def weights(s):
            result = np.zeros((lags + 1, acv.n, acv.n))
            result[0] = solution.forecast_matrix(s)
            return result

    document = {"d": d, **solution.to_dict()}
    document["ergodicity"] = {
        "is_exp_ergodic": report.is_exp_ergodic,
        "first_violation_lag": report.first_violation_lag,
    }
    write_document(document, run, "model.json")

    rows = []
    for s in range(1, run.knob("forecast-horizon") + 1):
        for lag, matrix in enumerate(weights(s)):
            for i, j in np.ndindex(matrix.shape):
                rows.append(
                    {"horizon": s, "lag": lag, "row": i, "column": j, "weight": matrix[i, j]}
                )
    write_table(pd.DataFrame(rows), run, "forecasts")


def _general(acv, run):
    return solve_one_state_general(
        acv,
        grid_a=run.knob("grid-a"),
        grid_eta=run.knob("grid-eta"),
        top_k=run.knob("top-k"),
        tol=run.knob("polish-tolerance"),
    )


@main.command()
@click.option("--max-lag", type=int, default=None, help="Largest lag tested")
@run_command
def ergodicity(run, max_lag):
    """Exponential ergodicity test, lag by lag"""
    max_lag = max_lag or run.knob("max-lag")
    acv = autocov_from_spec(run.section("process"), L=max_lag)
    report = check_exponential_ergodicity(autocorr(acv), max_lag=max_lag)
    if report.is_exp_ergodic:
        logger.info("The process is exponentially ergodic")
    else:
        logger.info(f"Exponential ergodicity fails first at lag {report.first_violation_lag}")
    write_table(report.to_frame(), run, "ergodicity")


@main.command()
@run_command
def decompose(run):
    """Persistence decomposition and the over/under-reaction of a one-state model"""
    acv = autocov_from_spec(run.section("process"))
    write_table(decompose_persistence(acv).to_frame(), run, "decomposition")
    solution = _general(acv, run)
    write_table(reaction_report(solution, acv, run.knob("reaction-lags")), run, "reaction")


def _solve_nk(cal, run, mode="cree"):
    return solve_nk(
        cal,
        mode=mode,
        tol=run.tolerance,
        starts=run.knob("starts"),
        seed=run.seed,
        cap=run.knob("shock-autocorrelation-cap"),
    )


@main.command()
@click.option("--mode", type=click.Choice(MODES), default="cree", show_default=True)
@run_command
def nk(run, mode):
    """New Keynesian equilibrium and its impulse responses"""
    cal = NkCalibration.from_dict(run.section("nk"))
    eq = _solve_nk(cal, run, mode)
    write_document(eq.to_dict(), run, "equilibrium.json")
    _write_irfs(nk_law(eq), run)


@main.command("nk-fg")
@click.option("--t-max", type=int, default=None, help="Longest announced rate path")
@click.option(
    "--conditioning",
    type=click.Choice(CONDITIONINGS),
    default="pure",
    show_default=True,
    help="Whether the rate cut moves the other shocks as its innovation predicts",
)
@run_command
def nk_fg(run, t_max, conditioning):
    """Responses to a rate cut announced to last T more periods"""
    cal = NkCalibration.from_dict(run.section("nk"))
    t_max = run.knob("t-max") if t_max is None else t_max
    if t_max < 0:
        raise ConfigError(f"--t-max must be non-negative, got {t_max!r}")
    eq = _solve_nk(cal, run)
    write_document(eq.to_dict(), run, "equilibrium.json")
    sweep = nk_forward_guidance_sweep(eq, cal, t_max, conditioning=conditioning, progress=True)
    write_table(sweep, run, "fg_sweep")


@main.command()
@click.option("--mode", type=click.Choice(MODES), default="cree", show_default=True)
@click.option("--d", "d", type=int, default=1, show_default=True, help="Households' states")
@run_command
def rbc(run, mode, d):
    """Real business cycle equilibrium and its impulse responses"""
    cal = RbcCalibration.from_dict(run.section("rbc"))
    eq = solve_rbc(
        cal, mode=mode, d=d, tol=run.tolerance, starts=run.knob("starts"), seed=run.seed
    )
    law = rbc_law(eq, cal)
    document = eq.to_dict()
    document["moments"] = {
        "corr_consumption_capital": law.correlation("consumption", "capital"),
        "variance": law.variance().to_dict(),
    }
    write_document(document, run, "equilibrium.json")
    _write_irfs(law, run)


@main.command()
@click.option("--mode", type=click.Choice(MODES), default="cree", show_default=True)
@run_command
def dmp(run, mode):
    """Search and matching equilibrium and its impulse responses"""
    cal = DmpCalibration.from_dict(run.section("dmp"))
    eq = solve_dmp(cal, mode=mode, tol=run.tolerance, starts=run.knob("starts"), seed=run.seed)
    write_document(eq.to_dict(), run, "equilibrium.json")
    _write_irfs(dmp_law(eq, cal), run)


@main.command("ge-pe")
@run_command
def ge_pe(run):
    """Shock loadings of the general equilibrium economy equivalent to a partial one"""
    section = dict(run.section("ge_pe"))
    missing = {"H", "b", "c", "g", "beta", "alphas", "d"} - set(section)
    if missing:
        raise ConfigError(f"Section 'ge_pe' misses {sorted(missing)}")
    H = np.asarray(section["H"], dtype=float)
    args = (section["b"], section["c"])
    beta, alphas, d = section["beta"], section["alphas"], section["d"]
    H_tilde = ge_pe_transform(H, *args, section["g"], beta, alphas, d)
    loading = pe_action_loading(H, *args, beta, alphas, d)
    document = {"H_tilde": H_tilde, "pe_action_loading": loading}
    sigmas = section.get("sigmas", np.ones(H.shape[0]))
    general = ge_equilibrium(
        H_tilde,
        section["g"],
        section["b"],
        section["c"],
        section["beta"],
        section["alphas"],
        sigmas,
        section["d"],
        tol=run.tolerance,
    )
    document["ge_equilibrium"] = general.to_dict()
    document["max_loading_gap"] = float(np.abs(general.H_hat - H).max())
    write_document(document, run, "ge_pe.json")
    law = economy_law(H, loading, section["alphas"], sigmas)
    frames = []
    for lag in range(GE_PE_LAGS + 1):
        cov = law.covariance(lag).rename_axis("variable").reset_index()
        cov.insert(0, "lag", lag)
        frames.append(cov)
    write_table(pd.concat(frames, ignore_index=True), run, "ge_pe_autocov")


@main.command()
@click.option("--json", "as_json", is_flag=True, default=False, help="Print a JSON report")
@run_command
def selftest(run, as_json):
    """Run the golden checks; exit with 1 if any binding check fails"""
    report = run_selftest(run.sections, progress=not as_json)
    if as_json:
        click.echo(json.dumps(report.to_dict(orient="records"), indent=2, default=_json_default))
    else:
        click.echo(report.to_string(index=False))
    binding = report["binding"]
    failures = int((binding & ~report["passed"]).sum())
    mismatches = int((~binding & ~report["passed"]).sum())
    if mismatches:
        logger.warning(f"{mismatches} reference figures are not reproduced by the presets")
    if failures:
        logger.error(f"{failures} of {int(binding.sum())} checks failed")
        sys.exit(1)
    logger.info(f"All {int(binding.sum())} checks passed")
