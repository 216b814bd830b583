"""Command-line interface.

Exit codes: 0 success, 2 validation failure, 3 infeasible input,
4 I/O or schema error.
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import serialize
from .costs import CostModel
from .errors import (EnumerationCapError, SchemaError, StateDependentCostError,
                     VoidpError, ZeroEvidenceError)
from .experiment import METHODS, render_figure, run_experiment, write_table
from .learn import BinSpec, load_series_csv, synthetic_diurnal
from .model import (ChainModel, Evidence, HmmModel, Mode, fold_hmm,
                    validate_hmm, validate_model)
from .multi import MultiChainModel, lower_bound_objective, schedule_multi
from .oracles import (greedy_subset, joint_from_chain, oracle_best_plan,
                      oracle_best_subset, oracle_total_reward, uniform_spacing)
from .plan import (CallbackSource, PlanTables, RecordedSource, build_plan,
                   execute_plan, plan_value)
from .rewards import RewardSpec, total_objective
from .subset import select_subset

EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    """Map toolkit exceptions onto the documented exit codes."""
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ZeroEvidenceError, StateDependentCostError, EnumerationCapError) as err:
            _fail(EXIT_INFEASIBLE, str(err))
        except SchemaError as err:
            _fail(EXIT_IO, str(err))
        except (OSError, json.JSONDecodeError) as err:
            _fail(EXIT_IO, str(err))
        except (ValueError, TypeError, VoidpError) as err:
            _fail(EXIT_VALIDATION, str(err))
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _load_typed(path, expected):
    return serialize.load(path, expected)


def _mode_option(fn):
    return click.option("--mode", type=click.Choice(["filtering", "smoothing"]),
                        default="smoothing", show_default=True,
                        help="Conditioning regime.")(fn)


def _costs_for(model, costs_path, budget):
    if costs_path is not None:
        costs = _load_typed(costs_path, CostModel)
        if budget is not None:
            costs = CostModel(costs.penalties, costs.betas, budget)
        return costs
    if budget is None:
        raise click.UsageError("provide --costs and/or --budget")
    return CostModel.uniform(model.n, budget)


@click.group()
def main():
    """Observation selection and conditional planning on chain models."""


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--hmm", "is_hmm", is_flag=True, help="Validate an HMM document.")
@_guard
def validate(model_path, is_hmm):
    """Check model invariants and report violations."""
    obj = _load_typed(model_path, HmmModel if is_hmm else ChainModel)
    report = validate_hmm(obj) if is_hmm else validate_model(obj)
    if report.ok:
        click.echo("ok")
        return
    for violation in report.violations:
        click.echo(f"violation: {violation}")
    sys.exit(EXIT_VALIDATION)


@main.command()
@click.option("--data", "data_path", type=click.Path(exists=True),
              help="CSV with one sequence per row; blank cells are interpolated.")
@click.option("--synthetic", type=int, default=None,
              help="Generate this many synthetic diurnal sequences instead of reading a file.")
@click.option("--bins", type=int, default=10, show_default=True)
@click.option("--quantile", is_flag=True, help="Quantile bin edges instead of fixed width.")
@click.option("--width", type=float, default=None, help="Fixed bin width.")
@click.option("--alpha", type=float, default=0.5, show_default=True,
              help="Pseudocount for smoothing the counts.")
@click.option("--tying", default=None,
              help="Comma-separated bucket id per transition step.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", "-o", required=True, type=click.Path())
@_guard
def learn(data_path, synthetic, bins, quantile, width, alpha, tying, seed, output):
    """Learn a chain model from time series."""
    from .learn import learn_chain

    spec = BinSpec(count=bins, mode="quantile" if quantile else "width", width=width)
    tying_tuple = None
    if tying:
        tying_tuple = tuple(int(x) for x in tying.split(","))
    if (data_path is None) == (synthetic is None):
        raise click.UsageError("provide exactly one of --data or --synthetic")
    if data_path is not None:
        dataset = load_series_csv(data_path, spec, tying_tuple)
    else:
        dataset = synthetic_diurnal(synthetic, seed=seed)
        if tying_tuple is not None or quantile or width is not None or bins != 10:
            dataset = type(dataset)(dataset.sequences, spec,
                                    tying_tuple if tying_tuple else dataset.tying)
    model = learn_chain(dataset, alpha=alpha)
    serialize.save(model, output)
    click.echo(f"learned chain with n={model.n}, d={model.domains[0]} -> {output}")


@main.command()
@click.option("--hmm", "hmm_path", required=True, type=click.Path(exists=True))
@click.option("--observations", required=True,
              help="Comma-separated emission symbols, one per step.")
@click.option("--output", "-o", required=True, type=click.Path())
@_guard
def fold(hmm_path, observations, output):
    """Fold a full emission sequence into the hidden chain."""
    hmm = _load_typed(hmm_path, HmmModel)
    symbols = [int(x) for x in observations.split(",")]
    folded = fold_hmm(hmm, symbols)
    serialize.save(folded, output)
    click.echo(f"folded chain -> {output}")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--reward", "reward_path", required=True, type=click.Path(exists=True))
@click.option("--costs", "costs_path", type=click.Path(exists=True))
@click.option("--budget", type=int, default=None, help="Budget override.")
@_mode_option
@click.option("--output", "-o", type=click.Path())
@_guard
def select(model_path, reward_path, costs_path, budget, mode, output):
    """Optimal open-loop observation subset."""
    model = _load_typed(model_path, ChainModel)
    spec = _load_typed(reward_path, RewardSpec)
    costs = _costs_for(model, costs_path, budget)
    result = select_subset(model, spec, costs, mode)
    click.echo(f"selected: {list(result.selected)}")
    click.echo(f"value: {result.value:.12g}")
    click.echo(f"evaluations: {result.eval_count}")
    if output:
        serialize.save(result, output)


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--reward", "reward_path", required=True, type=click.Path(exists=True))
@click.option("--costs", "costs_path", type=click.Path(exists=True))
@click.option("--budget", type=int, default=None, help="Budget override.")
@_mode_option
@click.option("--output", "-o", required=True, type=click.Path())
@_guard
def plan(model_path, reward_path, costs_path, budget, mode, output):
    """Build an optimal conditional plan."""
    model = _load_typed(model_path, ChainModel)
    spec = _load_typed(reward_path, RewardSpec)
    costs = _costs_for(model, costs_path, budget)
    tables = build_plan(model, spec, costs, mode)
    serialize.save(tables, output)
    click.echo(f"plan root value: {tables.root_value:.12g}")
    click.echo(f"evaluations: {tables.eval_count}")
    click.echo(f"saved -> {output}")


@main.command("exec")
@click.option("--plan", "plan_path", required=True, type=click.Path(exists=True))
@click.option("--interactive", is_flag=True, help="Prompt for each observation.")
@click.option("--replay", "replay_path", type=click.Path(exists=True),
              help="JSON file with a recorded assignment or answer map.")
@click.option("--output", "-o", type=click.Path(), help="Write the episode record.")
@_guard
def exec_plan(plan_path, interactive, replay_path, output):
    """Execute a plan against recorded or interactive observations."""
    tables = _load_typed(plan_path, PlanTables)
    if interactive == (replay_path is not None):
        raise click.UsageError("choose exactly one of --interactive or --replay")
    if replay_path:
        with open(replay_path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        if "assignment" in doc:
            source = RecordedSource([int(x) for x in doc["assignment"]])
        elif "answers" in doc:
            source = RecordedSource({int(j): int(x) for j, x in doc["answers"].items()})
        else:
            raise SchemaError("missing field", "assignment")
    else:
        def ask(index):
            d = tables.model.domain(index)
            return click.prompt(f"observe variable {index} (state 0..{d - 1})", type=int)
        source = CallbackSource(ask)
    episode = execute_plan(tables, source)
    record = {
        "queried": [[j, x] for j, x in episode.queried],
        "spent_budget": episode.spent_budget,
        "realized_reward": episode.realized_reward,
        "expected_value": episode.expected_value,
    }
    click.echo(json.dumps(record, indent=2))
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            json.dump(record, fh, indent=2)
            fh.write("\n")


@main.command()
@click.option("--multi", "multi_path", required=True, type=click.Path(exists=True))
@click.option("--costs", "costs_path", type=click.Path(exists=True))
@click.option("--budget", type=int, default=None, help="Per-sensor budget override.")
@click.option("--max-iters", type=int, default=20, show_default=True)
@click.option("--delta-tol", type=float, default=1e-6, show_default=True)
@click.option("--init", type=click.Choice(["independent", "random"]),
              default="independent", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--exact", "exact", is_flag=True, default=False,
              help="Force exact expectations (the default when --samples is absent).")
@click.option("--samples", type=int, default=None,
              help="Monte-Carlo sample count per expectation (enables sampled mode).")
@click.option("--output", "-o", type=click.Path())
@click.option("--figure", type=click.Path(), help="Render the objective trace.")
@_guard
def schedule(multi_path, costs_path, budget, max_iters, delta_tol, init, seed,
             exact, samples, output, figure):
    """Coordinate-ascent schedule for multiple correlated sensors."""
    if exact and samples is not None:
        raise click.UsageError("--exact and --samples are mutually exclusive")
    multi = _load_typed(multi_path, MultiChainModel)
    if costs_path is not None:
        costs = _load_typed(costs_path, CostModel)
        if budget is not None:
            costs = CostModel(costs.penalties, costs.betas, budget)
    elif budget is not None:
        costs = CostModel.uniform(multi.horizon, budget)
    else:
        raise click.UsageError("provide --costs and/or --budget")
    multi.validate_marginals()
    result = schedule_multi(multi, costs, max_iters=max_iters, delta_tol=delta_tol,
                            init=init, rng=seed, sample_count=samples)
    report = {
        "schedules": [list(times) for times in result.schedules],
        "objective": result.objective,
        "trace": list(result.trace),
        "deltas": list(result.deltas),
    }
    click.echo(json.dumps(report, indent=2))
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    if figure:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(range(len(result.trace)), result.trace, marker="o")
        ax.set_xlabel("iteration")
        ax.set_ylabel("lower-bound objective")
        fig.tight_layout()
        fig.savefig(figure, dpi=120)
        plt.close(fig)


@main.command()
@click.argument("task", type=click.Choice(["best-subset", "best-plan", "total"]))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--reward", "reward_path", required=True, type=click.Path(exists=True))
@click.option("--costs", "costs_path", type=click.Path(exists=True))
@click.option("--budget", type=int, default=None)
@click.option("--select", "selection", default=None,
              help="Comma-separated indices (for 'total').")
@_mode_option
@_guard
def oracle(task, model_path, reward_path, costs_path, budget, selection, mode):
    """Exhaustive enumeration oracles on small instances."""
    model = _load_typed(model_path, ChainModel)
    spec = _load_typed(reward_path, RewardSpec)
    costs = _costs_for(model, costs_path, budget)
    joint = joint_from_chain(model)
    if task == "best-subset":
        subset, value = oracle_best_subset(joint, spec, costs, mode)
        click.echo(json.dumps({"selected": list(subset), "value": value}))
    elif task == "best-plan":
        value = oracle_best_plan(joint, spec, costs, mode)
        click.echo(json.dumps({"value": value}))
    else:
        chosen = [int(x) for x in selection.split(",")] if selection else []
        value = oracle_total_reward(joint, spec, costs, chosen, mode)
        click.echo(json.dumps({"selected": chosen, "value": value}))


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--reward", "reward_path", required=True, type=click.Path(exists=True))
@click.option("--methods", default="optimal-subset,greedy,uniform", show_default=True,
              help=f"Comma-separated subset of {METHODS}.")
@click.option("--k-max", type=int, default=None, help="Largest budget (default n).")
@click.option("--penalty", type=float, default=0.0, show_default=True)
@_mode_option
@click.option("--output", "-o", required=True, type=click.Path())
@click.option("--figure", type=click.Path(), default=None,
              help="Figure path (default: next to the CSV).")
@_guard
def experiment(model_path, reward_path, methods, k_max, penalty, mode, output, figure):
    """Emit the method-comparison table and its figure."""
    model = _load_typed(model_path, ChainModel)
    spec = _load_typed(reward_path, RewardSpec)
    k_top = model.n if k_max is None else k_max
    rows = run_experiment(model, spec, [m.strip() for m in methods.split(",")],
                          range(0, k_top + 1), mode, penalty=penalty)
    write_table(rows, output)
    if figure is None:
        figure = output.rsplit(".", 1)[0] + ".png"
    render_figure(rows, figure)
    click.echo(f"table -> {output}")
    click.echo(f"figure -> {figure}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8321, show_default=True)
@_guard
def serve(host, port):
    """Run the interactive-session HTTP service."""
    from .service import serve as run

    click.echo(f"serving on http://{host}:{port}")
    run(host=host, port=port)


if __name__ == "__main__":
    main()
