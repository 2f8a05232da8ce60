"""Command-line interface for the crowd calibration toolkit."""
import logging
import os
from dataclasses import replace

import click

from crowdcal.config import Settings, configure_logging, load_config
from crowdcal.exceptions import CrowdCalError
from crowdcal.harness import FidelityPlan, SweepPlan, build_grid, replay as replay_run, run_fidelity, run_sweep
from crowdcal.harness.sweep import seed_set
from crowdcal.scenarios import BOTTLENECK_TRUTH, make_reference as build_reference, save_reference, triangular_weights

logger = logging.getLogger(__name__)

# seed stream of reference generation under the master seed
REFERENCE_STREAM = 3


def _csv(value, cast=str):
    return [cast(v.strip()) for v in value.split(",") if v.strip()]


@click.group()
@click.version_option(package_name="crowdcal")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="INI file with [force], [bottleneck], [exit_selection], [harness], [logging] sections")
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
@click.option("--quiet", "-q", is_flag=True, help="Suppress progress display")
@click.pass_context
def main(ctx, config_path, verbose, quiet):
    """Gradient-based calibration of crowd simulations."""
    try:
        settings = load_config(config_path)
    except CrowdCalError as e:
        raise click.ClickException(str(e))
    if verbose:
        settings = replace(settings, logging=replace(settings.logging, log_level="DEBUG"))
    if quiet:
        settings = replace(settings, harness=replace(settings.harness, show_progress=False))
    configure_logging(settings.logging)
    ctx.obj = settings


@main.result_callback()
@click.pass_context
def _exit_code(ctx, result, **kwargs):
    ctx.exit(result or 0)


@main.command()
@click.option("--scenario", "-s", required=True,
              type=click.Choice(["quadratic", "heaviside", "two-branch", "bottleneck-position", "bottleneck-evac"]))
@click.option("--points", type=int, default=100, help="Sweep points")
@click.option("--coordinate", type=int, default=0, help="Swept parameter coordinate")
@click.option("--lo", type=float, default=-2.0)
@click.option("--hi", type=float, default=2.0)
@click.option("--fixed", default=None, help="Comma-separated values of all coordinates")
@click.option("--sigma", type=float, default=0.0, help="Perturbation of IPA/DGO/HYBRID samples")
@click.option("--pgo-sigma", type=float, default=0.01, help="Perturbation of PGO")
@click.option("--samples", default="10,100,1000", help="Comma-separated sample counts")
@click.option("--estimators", default="ipa,dgo,hybrid,pgo")
@click.option("--reference-samples", type=int, default=None)
@click.option("--agents", type=int, default=None, help="Bottleneck agent count")
@click.option("--seed", type=int, default=0)
@click.option("--output-dir", "-o", default=None)
@click.pass_obj
def fidelity(settings: Settings, scenario, points, coordinate, lo, hi, fixed, sigma, pgo_sigma, samples,
             estimators, reference_samples, agents, seed, output_dir):
    """Compare gradient estimators along a one-coordinate sweep."""
    if agents is not None:
        settings = replace(settings, bottleneck=replace(settings.bottleneck, agents=agents))
    try:
        plan = FidelityPlan(
            scenario=scenario,
            coordinate=coordinate,
            lo=lo,
            hi=hi,
            points=points,
            fixed=_csv(fixed, float) if fixed else None,
            sigma=sigma,
            pgo_sigma=pgo_sigma,
            samples=_csv(samples, int),
            estimators=_csv(estimators),
            reference_samples=reference_samples or settings.harness.reference_samples,
            seed=seed,
            output_dir=output_dir or settings.harness.output_dir,
            show_progress=settings.harness.show_progress,
        )
        result = run_fidelity(plan, settings)
    except CrowdCalError as e:
        logger.error(f"Fidelity study failed: {e}")
        return 1

    click.echo(f"Wrote {result.csv_path} and {result.mae_path} ({result.jumps} jumps in the output curve)")
    return 0


@main.command("make-reference")
@click.option("--scenario", "-s", required=True,
              type=click.Choice(["bottleneck-position", "bottleneck-evac", "exit-selection"]))
@click.option("--seeds", type=int, default=100, help="Number of simulation seeds")
@click.option("--truth", default=None, help="Comma-separated ground-truth parameters")
@click.option("--master-seed", type=int, default=None)
@click.option("--output", "-o", required=True, help="Reference file path")
@click.pass_obj
def make_reference(settings: Settings, scenario, seeds, truth, master_seed, output):
    """Generate a synthetic reference from known ground-truth parameters."""
    if truth:
        values = _csv(truth, float)
    elif scenario == "exit-selection":
        values = triangular_weights(settings.exit_selection.bins).tolist()
    else:
        values = list(BOTTLENECK_TRUTH)

    master = master_seed if master_seed is not None else settings.harness.master_seed
    try:
        record = build_reference(
            scenario,
            values,
            seed_set(master, REFERENCE_STREAM, seeds),
            bottleneck=settings.bottleneck,
            exit_selection=settings.exit_selection,
            constants=settings.force,
            show_progress=settings.harness.show_progress,
        )
        path = save_reference(record, output)
    except CrowdCalError as e:
        logger.error(f"Reference generation failed: {e}")
        return 1

    click.echo(f"Wrote reference for {scenario} to {path}")
    return 0


@main.command()
@click.option("--scenario", "-s", required=True,
              type=click.Choice(["bottleneck-position", "bottleneck-evac", "exit-selection", "heaviside", "quadratic", "sphere"]))
@click.option("--reference", "reference_path", default=None, type=click.Path(dir_okay=False))
@click.option("--methods", default="gd-ipa,gd-dgo,gd-hybrid,gd-pgo,pso,ga")
@click.option("--grid", type=click.Choice(["desk", "full"]), default="desk")
@click.option("--macroreplications", type=int, default=None)
@click.option("--microreplications", type=int, default=None)
@click.option("--max-evaluations", type=int, default=None)
@click.option("--budget-seconds", type=float, default=None, help="Wall budget per run; 0 disables it")
@click.option("--post-seeds", type=int, default=None)
@click.option("--workers", "-w", type=int, default=None)
@click.option("--master-seed", type=int, default=None)
@click.option("--output-dir", "-o", default=None)
@click.pass_obj
def sweep(settings: Settings, scenario, reference_path, methods, grid, macroreplications, microreplications,
          max_evaluations, budget_seconds, post_seeds, workers, master_seed, output_dir):
    """Run a hyperparameter sweep with macro- and microreplications."""
    h = settings.harness
    master = master_seed if master_seed is not None else h.master_seed
    seconds = budget_seconds if budget_seconds is not None else h.budget_seconds
    try:
        plan = SweepPlan(
            scenario=scenario,
            configs=build_grid(_csv(methods), grid, seed=master),
            macroreplications=macroreplications or h.macroreplications,
            microreplications=microreplications or h.microreplications,
            max_evaluations=max_evaluations if max_evaluations is not None else h.max_evaluations,
            budget_seconds=seconds if seconds and seconds > 0 else None,
            post_seeds=post_seeds or h.post_seeds,
            crisp_seeds=h.crisp_seeds,
            master_seed=master,
            output_dir=output_dir or os.path.join(h.output_dir, scenario),
            reference_path=reference_path,
            workers=workers or h.workers,
            show_progress=h.show_progress,
        )
        result = run_sweep(plan, settings)
    except CrowdCalError as e:
        logger.error(f"Sweep failed to start: {e}")
        return 1

    click.echo(f"Sweep written to {result.output_dir}: {len(result.manifest)} runs, {len(result.failed)} failed")
    for _, row in result.summary.iterrows():
        click.echo(f"  {row['method']:<10} {row['config_id']:<16} mean post {row['mean_post']:.6g}")
    return 0 if result.ok else 1


@main.command()
@click.argument("run_id")
@click.option("--output-dir", "-o", required=True, type=click.Path(exists=True, file_okay=False))
@click.pass_obj
def replay(settings: Settings, run_id, output_dir):
    """Re-execute one recorded run and compare it with its stored trace."""
    try:
        identical, differing = replay_run(run_id, output_dir, settings)
    except CrowdCalError as e:
        logger.error(f"Replay failed: {e}")
        return 1

    if identical:
        click.echo(f"Run {run_id} reproduced exactly")
        return 0
    click.echo(f"Run {run_id} differs in: {', '.join(differing)}")
    return 1


if __name__ == "__main__":
    main()
