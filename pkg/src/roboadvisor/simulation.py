"""Virtual-user experiments: questionnaire quality and estimator convergence.

A virtual user answers pairwise questions by exact expected-utility
comparison under a closed-form true utility. Experiments elicit the three
nominal utilities from those answers and measure how far each lands from
the truth in Kantorovich distance, always on the full item-set grid so that
results are comparable across questionnaires of different sizes.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from statistics import mean, pstdev
from typing import Iterable, Sequence

import numpy as np

from .elicitation import (
    AnswerSheet,
    BenchmarkSpec,
    ScenarioSet,
    build_scenarios,
    elicit_neutral,
    elicit_optimistic,
    elicit_pessimistic,
)
from .errors import InconsistentAnswersError, ValidationError
from .kantorovich import kantorovich_closed_form
from .lotteries import (
    BreakpointGrid,
    ClosedFormUtility,
    ItemSet,
    build_breakpoints,
    gini_coefficient,
    restrict_to_grid,
)
from .questionnaire import (
    LfmConfig,
    Questionnaire,
    RatingsMatrix,
    fit_lfm,
    select_pairs_random,
    select_pairs_spq,
)

_logger = logging.getLogger(__name__)

ESTIMATORS = ("pessimistic", "optimistic", "neutral")


@dataclass(frozen=True)
class VirtualUser:
    """A simulated user whose choices follow a known true utility exactly."""

    true_utility: ClosedFormUtility


def default_virtual_user(upper: float = 500_000.0) -> VirtualUser:
    """Exponential true utility saturating over [0, upper], normalized."""
    return VirtualUser(
        true_utility=ClosedFormUtility(kind="exp", upper=upper, params={"rate": 5.0 / upper})
    )


def answer_questionnaire(
    user: VirtualUser, questionnaire: Questionnaire, tie_tol: float = 1e-12
) -> AnswerSheet:
    """Choices by exact expected-utility comparison; near-ties map to 0."""
    choices = []
    for first, second in questionnaire.pairs:
        gap = user.true_utility.expected(first) - user.true_utility.expected(second)
        if abs(gap) <= tie_tol:
            choices.append(0)
        else:
            choices.append(1 if gap > 0 else -1)
    return AnswerSheet(questionnaire=questionnaire, choices=tuple(choices))


def quadratic_item_scores(items: ItemSet, a: float, b: float, c: float) -> np.ndarray:
    """Expected value of a v^2 + b v + c over each item's payoff."""
    first = np.array([it.mean() for it in items])
    second = np.array([it.second_moment() for it in items])
    return a * second + b * first + c


def simulate_rating_matrix(items: ItemSet, n_users: int, seed: int) -> RatingsMatrix:
    """Synthetic historical ratings from random quadratic value functions.

    Each synthetic rater draws coefficients (a, b, c) uniformly on [-50, 50],
    scores every item by the expectation of a v^2 + b v + c over its payoff,
    and min-max normalizes the scores to the 0..10 scale. Degenerate draws
    (all scores equal) are redrawn and logged.
    """
    if n_users < 1:
        raise ValidationError("need at least one synthetic rater")
    rng = np.random.default_rng(seed)
    entries: list[tuple[str, str, float]] = []
    item_ids = [it.id for it in items]
    for u in range(n_users):
        for attempt in range(100):
            a, b, c = rng.uniform(-50.0, 50.0, size=3)
            scores = quadratic_item_scores(items, a, b, c)
            spread = float(scores.max() - scores.min())
            if spread > 1e-9:
                break
            _logger.info("degenerate rating draw for user %d; redrawing", u)
        else:
            # every quadratic scores the items identically (moment-degenerate
            # item set); no amount of redrawing will help
            raise ValidationError(
                "item set is degenerate for quadratic raters: all scores equal"
            )
        scaled = np.clip(10.0 * (scores - scores.min()) / spread, 0.0, 10.0)
        uid = f"sim{u:04d}"
        entries.extend((uid, iid, float(s)) for iid, s in zip(item_ids, scaled))
    return RatingsMatrix.from_entries(entries, item_ids=item_ids)


@dataclass(frozen=True)
class ExperimentRow:
    method: str
    estimator: str
    k: int
    repetition: int
    seed: int
    distance: float


@dataclass(frozen=True)
class ExperimentReport:
    """Per-run distances plus the configuration needed to reproduce them."""

    kind: str
    config: dict
    rows: tuple[ExperimentRow, ...]

    def mean_distance(self, estimator: str, k: int, method: str | None = None) -> float:
        vals = [
            r.distance
            for r in self.rows
            if r.estimator == estimator and r.k == k and (method is None or r.method == method)
        ]
        if not vals:
            raise ValidationError(f"no rows for estimator={estimator!r} k={k}")
        return mean(vals)

    def write_raw_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["estimator", "method", "K", "repetition", "distance"])
            for r in self.rows:
                writer.writerow([r.estimator, r.method, r.k, r.repetition, f"{r.distance:.12g}"])

    def write_aggregate_csv(self, path: str) -> None:
        keys = sorted({(r.estimator, r.method, r.k) for r in self.rows})
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["estimator", "method", "K", "mean", "stddev"])
            for est, meth, k in keys:
                vals = [
                    r.distance
                    for r in self.rows
                    if (r.estimator, r.method, r.k) == (est, meth, k)
                ]
                writer.writerow(
                    [est, meth, k, f"{mean(vals):.12g}", f"{pstdev(vals):.12g}"]
                )


def _derived_seeds(master_seed: int, repetition: int, count: int) -> list[int]:
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(repetition,))
    return [int(s) for s in ss.generate_state(count, dtype=np.uint32)]


def default_scenarios(items: ItemSet, seed: int = 0, mc_samples: int = 10_000) -> ScenarioSet:
    """Uniform benchmark scenarios: exact when the support allows, else MC."""
    try:
        return build_scenarios(items, BenchmarkSpec.uniform(items, policy="exact"))
    except ValidationError:
        return build_scenarios(
            items,
            BenchmarkSpec.uniform(items, policy="monte-carlo", mc_samples=mc_samples, seed=seed),
        )


def _elicit_all(
    answers: AnswerSheet, grid: BreakpointGrid, scen: ScenarioSet
) -> dict[str, "object"]:
    pes = elicit_pessimistic(answers, grid, scen)
    opt = elicit_optimistic(answers, grid, scen)
    neu = elicit_neutral(pes, opt, answers, grid)
    return {"pessimistic": pes, "optimistic": opt, "neutral": neu}


def _distances_to_truth(elicited: dict, user: VirtualUser) -> dict[str, float]:
    """Distance of each nominal utility to the truth on the nominal's grid."""
    out = {}
    for name, eu in elicited.items():
        truth = restrict_to_grid(user.true_utility, eu.utility.grid)
        out[name] = kantorovich_closed_form(eu.utility, truth).value
    return out


def run_spq_vs_random(
    items: ItemSet,
    k_values: Sequence[int],
    repetitions: int,
    master_seed: int = 0,
    user: VirtualUser | None = None,
    n_raters: int = 200,
    scen: ScenarioSet | None = None,
    lfm_cfg: LfmConfig | None = None,
) -> ExperimentReport:
    """Head-to-head of greedy-selected vs random questionnaires.

    Every repetition regenerates the synthetic ratings, selects both kinds of
    questionnaires at each K, elicits the three estimators from the virtual
    user's answers, and records the distance of each nominal utility to the
    truth. Rows are reproducible from (master seed, repetition).
    """
    upper_bound = items.max_outcome()
    user = user or default_virtual_user(upper_bound)
    scen = scen if scen is not None else default_scenarios(items, seed=master_seed)
    rows: list[ExperimentRow] = []
    for rep in range(repetitions):
        ratings_seed, questionnaire_seed, lfm_seed = _derived_seeds(master_seed, rep, 3)
        ratings = simulate_rating_matrix(items, n_raters, ratings_seed)
        cfg = lfm_cfg or LfmConfig(rng_seed=lfm_seed)
        model = fit_lfm(ratings, cfg)
        for k in k_values:
            questionnaires = {
                "spq": select_pairs_spq(model, items, k),
                "random": select_pairs_random(items, k, seed=questionnaire_seed + k),
            }
            for method, questionnaire in questionnaires.items():
                answers = answer_questionnaire(user, questionnaire)
                grid = build_breakpoints(questionnaire, upper_bound)
                elicited = _elicit_all(answers, grid, scen)
                for est, dist in _distances_to_truth(elicited, user).items():
                    rows.append(
                        ExperimentRow(
                            method=method,
                            estimator=est,
                            k=k,
                            repetition=rep,
                            seed=ratings_seed,
                            distance=dist,
                        )
                    )
    return ExperimentReport(
        kind="spq-vs-random",
        config={
            "item_set": items.name,
            "k_values": list(k_values),
            "repetitions": repetitions,
            "master_seed": master_seed,
            "n_raters": n_raters,
            "scenario_policy": scen.policy,
            "scenario_count": scen.count,
        },
        rows=tuple(rows),
    )


def run_convergence(
    items: ItemSet,
    k_values: Sequence[int] = (10, 50, 100, 190),
    repetitions: int = 30,
    master_seed: int = 0,
    user: VirtualUser | None = None,
    scen: ScenarioSet | None = None,
) -> ExperimentReport:
    """Distance to the truth as random questionnaires grow."""
    upper_bound = items.max_outcome()
    max_pairs = len(items) * (len(items) - 1) // 2
    if any(not 1 <= k <= max_pairs for k in k_values):
        raise ValidationError(f"k values must lie in [1, {max_pairs}]")
    user = user or default_virtual_user(upper_bound)
    scen = scen if scen is not None else default_scenarios(items, seed=master_seed)
    rows: list[ExperimentRow] = []
    for rep in range(repetitions):
        (questionnaire_seed,) = _derived_seeds(master_seed, rep, 1)
        for k in k_values:
            questionnaire = select_pairs_random(items, k, seed=questionnaire_seed + k)
            answers = answer_questionnaire(user, questionnaire)
            grid = build_breakpoints(questionnaire, upper_bound)
            elicited = _elicit_all(answers, grid, scen)
            for est, dist in _distances_to_truth(elicited, user).items():
                rows.append(
                    ExperimentRow(
                        method="random",
                        estimator=est,
                        k=k,
                        repetition=rep,
                        seed=questionnaire_seed,
                        distance=dist,
                    )
                )
    return ExperimentReport(
        kind="convergence",
        config={
            "item_set": items.name,
            "k_values": list(k_values),
            "repetitions": repetitions,
            "master_seed": master_seed,
            "scenario_policy": scen.policy,
            "scenario_count": scen.count,
        },
        rows=tuple(rows),
    )


@dataclass(frozen=True)
class PreferenceGraph:
    """Directed preference relations: an edge (a, b) means b is preferred."""

    vertices: tuple[str, ...]
    edges: tuple[tuple[str, str], ...]


def build_preference_graph(answers: AnswerSheet) -> PreferenceGraph:
    """One edge per decided answer, pointing from the rejected item to the
    chosen one; undecided pairs contribute no edge."""
    vertices: list[str] = []
    for first, second in answers.questionnaire.pairs:
        for lot in (first, second):
            if lot.id not in vertices:
                vertices.append(lot.id)
    edges: list[tuple[str, str]] = []
    for (first, second), z in zip(answers.questionnaire.pairs, answers.choices):
        if z == 1:
            edges.append((second.id, first.id))
        elif z == -1:
            edges.append((first.id, second.id))
    return PreferenceGraph(vertices=tuple(vertices), edges=tuple(edges))


@dataclass(frozen=True)
class PopulationGiniReport:
    """Per-respondent risk-aversion coefficients with group statistics."""

    rows: tuple[dict, ...]
    skipped: int
    group_stats: dict[str, dict[str, dict[str, float]]]  # group -> estimator -> stats


def population_gini(
    sheets: Iterable[AnswerSheet],
    grid: BreakpointGrid,
    scen: ScenarioSet,
    groups: Sequence[str] | None = None,
) -> PopulationGiniReport:
    """Elicit all three utilities per answer sheet and summarize the Gini
    coefficients by group; infeasible sheets are counted and skipped."""
    sheets = list(sheets)
    if groups is not None and len(groups) != len(sheets):
        raise ValidationError("group labels must align with the answer sheets")
    rows: list[dict] = []
    skipped = 0
    for idx, answers in enumerate(sheets):
        label = groups[idx] if groups is not None else "all"
        try:
            elicited = _elicit_all(answers, grid, scen)
        except InconsistentAnswersError:
            skipped += 1
            rows.append({"index": idx, "group": label, "status": "infeasible"})
            continue
        ginis = {name: gini_coefficient(eu.utility) for name, eu in elicited.items()}
        rows.append({"index": idx, "group": label, "status": "ok", "gini": ginis})
    stats: dict[str, dict[str, dict[str, float]]] = {}
    labels = sorted({r["group"] for r in rows})
    for label in labels:
        ok_rows = [r for r in rows if r["group"] == label and r["status"] == "ok"]
        stats[label] = {}
        for est in ESTIMATORS:
            vals = [r["gini"][est] for r in ok_rows]
            if not vals:
                continue
            n = len(vals)
            avg = mean(vals)
            var = sum((v - avg) ** 2 for v in vals) / (n - 1) if n > 1 else 0.0
            stats[label][est] = {"count": n, "mean": avg, "variance": var}
    return PopulationGiniReport(rows=tuple(rows), skipped=skipped, group_stats=stats)
