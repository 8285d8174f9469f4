"""Command-line access to every pipeline stage and experiment.

Exit codes: 0 success, 2 validation problems (bad flags, malformed files,
inconsistent answers), 1 runtime failures. Every stochastic subcommand takes
``--seed`` and produces byte-identical outputs for identical invocations.
"""

from __future__ import annotations

import functools
import json
import sys

import click

from . import dataio
from .elicitation import (
    BenchmarkSpec,
    build_scenarios,
    elicit_neutral,
    elicit_optimistic,
    elicit_pessimistic,
)
from .errors import (
    AdvisorError,
    DomainError,
    InconsistentAnswersError,
    NotFoundError,
    ValidationError,
)
from .kantorovich import kantorovich_closed_form, kantorovich_socp
from .lotteries import build_breakpoints, risk_aversion
from .portfolio import BacktestConfig, PortfolioSpec, optimize_portfolio, run_backtest
from .questionnaire import LfmConfig, fit_lfm, select_pairs_random, select_pairs_spq
from .service import ApiConfig, run_server
from .simulation import run_convergence, run_spq_vs_random

_VALIDATION_ERRORS = (ValidationError, DomainError, InconsistentAnswersError, NotFoundError)


def _cli_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except _VALIDATION_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except AdvisorError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _write_json(payload, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dataio.canonical_json(payload))


def _load_items(path: str):
    if path.startswith("bundled:"):
        return dataio.bundled_item_set(path.split(":", 1)[1])
    return dataio.load_item_set(path)


@click.group()
def main() -> None:
    """Expected-utility robo-advisor toolkit."""


@main.command("fit-lfm")
@click.option("--ratings", required=True, help="ratings CSV (user_id,item_id,rating)")
@click.option("--items", "items_path", default=None, help="item set JSON to align ids")
@click.option("--factors", default=2, show_default=True, help="latent dimension")
@click.option("--lam-users", default=0.1, show_default=True)
@click.option("--lam-items", default=0.1, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, help="output model JSON")
@_cli_errors
def fit_lfm_cmd(ratings, items_path, factors, lam_users, lam_items, seed, out):
    """Fit the latent factor model to historical ratings."""
    items = _load_items(items_path) if items_path else None
    matrix = dataio.load_ratings(ratings, items)
    model = fit_lfm(
        matrix,
        LfmConfig(
            n_factors=factors, lam_users=lam_users, lam_items=lam_items, rng_seed=seed
        ),
    )
    _write_json(
        {
            "mu": model.mu,
            "item_ids": list(model.item_ids),
            "item_bias": model.item_bias.tolist(),
            "user_bias": model.user_bias.tolist(),
            "item_factors": model.item_factors.tolist(),
            "user_factors": model.user_factors.tolist(),
            "objective": model.objective,
        },
        out,
    )
    click.echo(f"fitted {len(model.item_ids)} items; objective {model.objective:.6g}")


@main.command("gen-questionnaire")
@click.option("--items", "items_path", required=True)
@click.option("--ratings", default=None, help="ratings CSV (required for spq)")
@click.option("--k", default=8, show_default=True)
@click.option("--method", type=click.Choice(["spq", "random"]), default="spq")
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True)
@_cli_errors
def gen_questionnaire_cmd(items_path, ratings, k, method, seed, out):
    """Select K question pairs from an item set."""
    items = _load_items(items_path)
    if method == "spq":
        if ratings is None:
            raise ValidationError("--ratings is required for the spq method")
        model = fit_lfm(dataio.load_ratings(ratings, items), LfmConfig(rng_seed=seed))
        questionnaire = select_pairs_spq(model, items, k)
    else:
        questionnaire = select_pairs_random(items, k, seed=seed)
    _write_json(dataio.questionnaire_to_dict(questionnaire), out)
    click.echo(f"wrote {len(questionnaire)} pairs to {out}")


def _analytics_payload(elicited) -> dict:
    analytics = risk_aversion(elicited.utility)
    return {
        "estimator": elicited.estimator,
        "gini": analytics.gini,
        "ara": [{"breakpoint": y, "value": v} for y, v in analytics.ara],
        "rra": [{"breakpoint": y, "value": v} for y, v in analytics.rra],
    }


@main.command("elicit")
@click.option("--items", "items_path", required=True)
@click.option("--questionnaire", "questionnaire_path", required=True)
@click.option("--answers", "answers_path", required=True)
@click.option(
    "--estimator",
    type=click.Choice(["all", "pessimistic", "optimistic", "neutral"]),
    default="all",
    show_default=True,
)
@click.option("--policy", type=click.Choice(["auto", "exact", "monte-carlo"]), default="auto")
@click.option("--mc-samples", default=10_000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--relax/--no-relax", default=False, help="slack-relax inconsistent answers")
@click.option("--out-dir", required=True)
@_cli_errors
def elicit_cmd(
    items_path, questionnaire_path, answers_path, estimator, policy, mc_samples, seed,
    relax, out_dir,
):
    """Elicit nominal utilities from recorded answers."""
    import os

    items = _load_items(items_path)
    with open(questionnaire_path, encoding="utf-8") as fh:
        questionnaire = dataio.questionnaire_from_dict(json.load(fh), items)
    with open(answers_path, encoding="utf-8") as fh:
        answers = dataio.answer_sheet_from_dict(json.load(fh), questionnaire)
    upper = items.max_outcome()
    grid = build_breakpoints(questionnaire, upper)
    if policy == "auto":
        from .simulation import default_scenarios

        scen = default_scenarios(items, seed=seed, mc_samples=mc_samples)
    else:
        scen = build_scenarios(
            items,
            BenchmarkSpec.uniform(items, policy=policy, mc_samples=mc_samples, seed=seed),
        )
    os.makedirs(out_dir, exist_ok=True)
    pes = elicit_pessimistic(answers, grid, scen, relax_inconsistent=relax)
    opt = elicit_optimistic(answers, grid, scen, relax_inconsistent=relax)
    neu = elicit_neutral(pes, opt, answers, grid, relax_inconsistent=relax)
    produced = {"pessimistic": pes, "optimistic": opt, "neutral": neu}
    wanted = list(produced) if estimator == "all" else [estimator]
    analytics = []
    for name in wanted:
        path = os.path.join(out_dir, f"utility_{name}.json")
        dataio.save_utility(produced[name], path)
        analytics.append(_analytics_payload(produced[name]))
        click.echo(f"wrote {path}")
    _write_json(analytics, os.path.join(out_dir, "analytics.json"))
    click.echo(f"wrote {os.path.join(out_dir, 'analytics.json')}")


@main.command("distance")
@click.option("--u", "u_path", required=True)
@click.option("--v", "v_path", required=True)
@click.option(
    "--method",
    type=click.Choice(["closed-form", "socp"]),
    default="closed-form",
    show_default=True,
)
@click.option("--out", default=None)
@_cli_errors
def distance_cmd(u_path, v_path, method, out):
    """Kantorovich distance between two stored utilities."""
    u = dataio.load_utility(u_path).utility
    v = dataio.load_utility(v_path).utility
    fn = kantorovich_closed_form if method == "closed-form" else kantorovich_socp
    result = fn(u, v)
    click.echo(f"{result.value:.10g}")
    if out:
        _write_json({"value": result.value, "method": result.method}, out)


@main.command("portfolio")
@click.option("--utility", "utility_path", required=True)
@click.option("--returns", "returns_path", required=True)
@click.option("--budget", default=10_000.0, show_default=True)
@click.option("--cap-fraction", default=0.4, show_default=True)
@click.option("--window", default=60, show_default=True, help="trailing days to use")
@click.option("--out", required=True)
@_cli_errors
def portfolio_cmd(utility_path, returns_path, budget, cap_fraction, window, out):
    """Recommend an allocation by maximizing average utility."""
    elicited = dataio.load_utility(utility_path)
    panel = dataio.load_returns(returns_path)
    spec = PortfolioSpec(
        budget=budget, caps=tuple(cap_fraction * budget for _ in range(panel.n_risky))
    )
    rows = panel.window(max(0, panel.n_days - window), panel.n_days)
    result = optimize_portfolio(elicited.utility, rows, spec)
    _write_json(
        {
            "assets": list(panel.asset_labels),
            "allocation": [float(a) for a in result.amounts],
            "objective": result.objective,
            "budget": budget,
        },
        out,
    )
    click.echo(f"objective {result.objective:.8g}; wrote {out}")


@main.command("backtest")
@click.option("--returns", "returns_path", required=True)
@click.option(
    "--utility",
    "utility_specs",
    multiple=True,
    required=True,
    help="name=utility.json (repeatable)",
)
@click.option("--window", default=60, show_default=True)
@click.option("--hold", default=7, show_default=True)
@click.option("--initial-wealth", default=10_000.0, show_default=True)
@click.option("--cap-fraction", default=0.4, show_default=True)
@click.option("--out", required=True, help="wealth curve CSV")
@_cli_errors
def backtest_cmd(returns_path, utility_specs, window, hold, initial_wealth, cap_fraction, out):
    """Rolling-window backtest across one or more utilities."""
    panel = dataio.load_returns(returns_path)
    utilities = {}
    for spec in utility_specs:
        name, _, path = spec.partition("=")
        if not path:
            raise ValidationError(f"--utility expects name=path, got {spec!r}")
        utilities[name] = dataio.load_utility(path).utility
    cfg = BacktestConfig(window=window, hold=hold, initial_wealth=initial_wealth)
    spec = PortfolioSpec(
        budget=initial_wealth,
        caps=tuple(cap_fraction * initial_wealth for _ in range(panel.n_risky)),
    )
    result = run_backtest(panel, cfg, utilities, spec)
    result.to_csv(out)
    finals = {name: float(curve[-1]) for name, curve in result.curves.items()}
    click.echo(f"final wealth: {json.dumps(finals, sort_keys=True)}; wrote {out}")


@main.group()
def simulate() -> None:
    """Virtual-user experiments."""


@simulate.command("spq-vs-random")
@click.option("--items", "items_path", default="bundled:items20", show_default=True)
@click.option("--k", "k_values", default="5,10,20", show_default=True)
@click.option("--reps", default=50, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-dir", required=True)
@_cli_errors
def simulate_spq_cmd(items_path, k_values, reps, seed, out_dir):
    """Compare greedy-selected questionnaires against random ones."""
    import os

    items = _load_items(items_path)
    ks = [int(x) for x in k_values.split(",") if x]
    report = run_spq_vs_random(items, ks, repetitions=reps, master_seed=seed)
    os.makedirs(out_dir, exist_ok=True)
    raw = os.path.join(out_dir, "spq_vs_random_raw.csv")
    agg = os.path.join(out_dir, "spq_vs_random_agg.csv")
    report.write_raw_csv(raw)
    report.write_aggregate_csv(agg)
    click.echo(f"wrote {raw} and {agg}")


@simulate.command("convergence")
@click.option("--items", "items_path", default="bundled:items20", show_default=True)
@click.option("--k", "k_values", default="10,50,100,190", show_default=True)
@click.option("--reps", default=30, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-dir", required=True)
@_cli_errors
def simulate_convergence_cmd(items_path, k_values, reps, seed, out_dir):
    """Distance to the true utility as questionnaires grow."""
    import os

    items = _load_items(items_path)
    ks = [int(x) for x in k_values.split(",") if x]
    report = run_convergence(items, ks, repetitions=reps, master_seed=seed)
    os.makedirs(out_dir, exist_ok=True)
    raw = os.path.join(out_dir, "convergence_raw.csv")
    agg = os.path.join(out_dir, "convergence_agg.csv")
    report.write_raw_csv(raw)
    report.write_aggregate_csv(agg)
    click.echo(f"wrote {raw} and {agg}")


@main.command("serve")
@click.option("--config", "config_path", default=None, help="JSON config file")
@click.option("--items", "items_path", default=None, help="item set JSON (default bundled items10)")
@click.option("--returns", "returns_path", default=None)
@click.option("--ratings", "ratings_path", default=None)
@click.option("--data-dir", default=None, help="session directory [default ./advisor-data]")
@click.option("--bind", default=None, help="[default 127.0.0.1:8000]")
@click.option("--default-k", default=None, type=int, help="[default 8]")
@click.option("--seed", default=None, type=int, help="[default 0]")
@click.option("--cors-origin", "cors_origins", multiple=True)
@_cli_errors
def serve_cmd(config_path, items_path, returns_path, ratings_path, data_dir, bind,
              default_k, seed, cors_origins):
    """Run the HTTP API server.

    Settings come from the config file, overridden by flags, overridden by
    the ADVISOR_BIND and ADVISOR_DATA_DIR environment variables.
    """
    import dataclasses
    import os

    fields: dict = {}
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            file_conf = json.load(fh)
        known = {f.name for f in dataclasses.fields(ApiConfig)}
        unknown = set(file_conf) - known
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}")
        fields.update(file_conf)
        if "cors_origins" in fields:
            fields["cors_origins"] = tuple(fields["cors_origins"])
    flag_values = {
        "bind": bind,
        "data_dir": data_dir,
        "item_set_path": items_path,
        "returns_path": returns_path,
        "ratings_path": ratings_path,
        "default_k": default_k,
        "seed": seed,
        "cors_origins": tuple(cors_origins) or None,
    }
    fields.update({k: v for k, v in flag_values.items() if v is not None})
    if "ADVISOR_BIND" in os.environ:
        fields["bind"] = os.environ["ADVISOR_BIND"]
    if "ADVISOR_DATA_DIR" in os.environ:
        fields["data_dir"] = os.environ["ADVISOR_DATA_DIR"]
    run_server(ApiConfig(**fields))


if __name__ == "__main__":
    main()
