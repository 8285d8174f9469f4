"""Portfolio recommendation by sample-average expected-utility maximization.

Asset returns enter as gross factors (1 + net daily return, risk-free = 1),
so a portfolio's payoff factor times wealth stays inside the utility domain.
The LP maximizes the average utility over historical factor rows using the
min-of-lines representation of the concave piecewise-linear utility; the
rolling backtest re-solves on a trailing window and compounds wealth.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .conic import ConicProgram, SolveSettings, solve
from .errors import DomainError, SolverFailureError, ValidationError
from .lotteries import PwlUtility, eval_utility

_logger = logging.getLogger(__name__)

CASH_LABEL = "CASH"


@dataclass(frozen=True)
class ReturnsPanel:
    """Daily gross return factors; column 0 is the risk-free asset at 1.0."""

    dates: tuple[str, ...]
    asset_labels: tuple[str, ...]
    factors: np.ndarray  # (T, S+1)

    def __post_init__(self) -> None:
        f = np.asarray(self.factors, dtype=float)
        if f.ndim != 2 or f.shape != (len(self.dates), len(self.asset_labels)):
            raise ValidationError("factor matrix shape must match dates and labels")
        if not np.all(np.isfinite(f)) or np.any(f <= 0):
            raise ValidationError("gross factors must be positive and finite")
        if np.any(np.abs(f[:, 0] - 1.0) > 1e-12):
            raise ValidationError("the risk-free column must be exactly 1.0")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValidationError("dates must be strictly increasing")

    @property
    def n_days(self) -> int:
        return len(self.dates)

    @property
    def n_risky(self) -> int:
        return len(self.asset_labels) - 1

    def window(self, start: int, stop: int) -> np.ndarray:
        return np.asarray(self.factors, dtype=float)[start:stop]


@dataclass(frozen=True)
class PortfolioSpec:
    """Budget and per-risky-asset caps; the risk-free position is uncapped."""

    budget: float
    caps: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.budget <= 0:
            raise ValidationError("budget must be positive")
        for c in self.caps:
            if not 0 < c <= self.budget:
                raise ValidationError("each cap must lie in (0, budget]")

    def cap_array(self) -> np.ndarray:
        """Caps including the risk-free slot (capped only by the budget)."""
        return np.concatenate(([self.budget], np.asarray(self.caps, dtype=float)))


@dataclass(frozen=True)
class Portfolio:
    amounts: np.ndarray  # (S+1,), currency, cash first
    objective: float


def direct_objective(u: PwlUtility, factors: np.ndarray, amounts: np.ndarray) -> float:
    """Average utility of the realized payoffs; the LP optimum must match it."""
    wealth = factors @ amounts
    capped = np.minimum(wealth, u.grid.upper)
    return float(np.mean(np.asarray(eval_utility(u, capped))))


def _allocation_program(
    alpha: np.ndarray,
    beta: np.ndarray,
    ybar: np.ndarray,
    factors: np.ndarray,
    budget: float,
    caps: np.ndarray,
    cap_utility: bool = False,
) -> ConicProgram:
    """The sample-average LP on the rescaled domain.

    The allocation variable carries the domain normalization (budget and
    caps arrive divided by the bound), so raw gross factors times it give
    payoffs measured in domain units directly.
    """
    t_rows, n_assets = factors.shape
    prog = ConicProgram(sense="max")
    prog.add_block("x", n_assets, nonneg=True)
    prog.add_block("z", t_rows)
    prog.set_objective([("z", t, 1.0 / t_rows) for t in range(t_rows)])
    prog.add_linear([("x", s, 1.0) for s in range(n_assets)], "=", budget)
    for s in range(n_assets):
        prog.add_linear([("x", s, 1.0)], "<=", float(caps[s]))
    cap_value = float(alpha[-1])
    for t in range(t_rows):
        for j in range(len(beta)):
            terms = [("z", t, 1.0)]
            terms += [
                ("x", s, -float(beta[j] * factors[t, s])) for s in range(n_assets)
            ]
            prog.add_linear(terms, "<=", float(alpha[j] - beta[j] * ybar[j]))
        if cap_utility:
            prog.add_linear([("z", t, 1.0)], "<=", cap_value)
    return prog


def optimize_portfolio(
    u: PwlUtility,
    factors: np.ndarray,
    spec: PortfolioSpec,
    cap_utility: bool = False,
    settings: SolveSettings | None = None,
) -> Portfolio:
    """Maximize average utility of end-of-period wealth over factor rows.

    With ``cap_utility`` false any feasible payoff above the utility domain
    bound raises ``DomainError``; with it true the utility saturates at 1
    beyond the bound (used by the backtest once wealth has compounded) and a
    warning is logged if saturation actually occurs.
    """
    factors = np.asarray(factors, dtype=float)
    if factors.ndim != 2 or factors.shape[0] < 1:
        raise ValidationError("factor window must be a non-empty 2-d array")
    n_assets = factors.shape[1]
    if len(spec.caps) != n_assets - 1:
        raise ValidationError("caps must cover every risky asset")
    upper = u.grid.upper
    fmax = float(factors.max())
    if not cap_utility and spec.budget * fmax > upper * (1 + 1e-12):
        raise DomainError(
            f"achievable wealth {spec.budget * fmax!r} exceeds the utility "
            f"domain bound {upper!r}"
        )
    prog = _allocation_program(
        u.alpha_array(),
        u.beta_array() * upper,
        u.grid.as_array() / upper,
        factors,
        spec.budget / upper,
        spec.cap_array() / upper,
        cap_utility=cap_utility,
    )
    result = solve(prog, settings)
    if result.status == "infeasible":
        raise ValidationError("budget and caps admit no feasible allocation")
    if result.status != "optimal":
        raise SolverFailureError(f"portfolio solve ended with status {result.status}")
    amounts = np.maximum(result.block("x") * upper, 0.0)
    if cap_utility and spec.budget * fmax > upper:
        realized = factors @ amounts
        if np.any(realized > upper):
            _logger.warning(
                "wealth argument %.6g clipped to the utility domain bound %.6g",
                float(realized.max()),
                upper,
            )
    return Portfolio(amounts=amounts, objective=float(result.objective))


@dataclass(frozen=True)
class BacktestConfig:
    """Rolling-window settings: solve on `window` days, hold for `hold` days."""

    window: int
    hold: int
    initial_wealth: float = 10_000.0
    estimators: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.window < 2:
            raise ValidationError("window must be at least 2 days")
        if self.hold < 1:
            raise ValidationError("hold must be at least 1 day")
        if self.initial_wealth <= 0:
            raise ValidationError("initial wealth must be positive")


@dataclass(frozen=True)
class RebalanceEvent:
    day_index: int
    estimator: str
    amounts: np.ndarray
    budget: float
    caps: np.ndarray


@dataclass(frozen=True)
class BacktestResult:
    dates: tuple[str, ...]  # out-of-sample dates
    curves: dict[str, np.ndarray]
    rebalances: tuple[RebalanceEvent, ...] = field(default_factory=tuple)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["date", "estimator", "wealth"])
            for name, curve in self.curves.items():
                for date, wealth in zip(self.dates, curve):
                    writer.writerow([date, name, f"{wealth:.10g}"])


def run_backtest(
    panel: ReturnsPanel,
    cfg: BacktestConfig,
    utilities: dict[str, PwlUtility],
    spec: PortfolioSpec,
) -> BacktestResult:
    """Rolling re-optimization with weekly-style holds and compounded wealth.

    ``spec`` fixes the cap structure as fractions of the budget; every
    rebalance re-solves at the current wealth with those fractions, holds
    the resulting weights for ``hold`` days, then rolls the window forward.
    """
    if panel.n_days < cfg.window + cfg.hold:
        raise ValidationError("panel shorter than one window plus one hold period")
    if len(spec.caps) != panel.n_risky:
        raise ValidationError("spec caps must cover every risky asset in the panel")
    names = cfg.estimators if cfg.estimators is not None else tuple(utilities)
    missing = [n for n in names if n not in utilities]
    if missing:
        raise ValidationError(f"no utility supplied for estimators {missing!r}")
    fractions = np.asarray(spec.caps, dtype=float) / spec.budget
    wealth = {name: float(cfg.initial_wealth) for name in names}
    curves: dict[str, list[float]] = {name: [] for name in names}
    rebalances: list[RebalanceEvent] = []
    out_dates: list[str] = []
    factors = np.asarray(panel.factors, dtype=float)
    start = cfg.window
    for t in range(start, panel.n_days, cfg.hold):
        in_sample = factors[t - cfg.window : t]
        hold_rows = factors[t : min(t + cfg.hold, panel.n_days)]
        for name in names:
            w_cur = wealth[name]
            local = PortfolioSpec(budget=w_cur, caps=tuple(fractions * w_cur))
            result = optimize_portfolio(utilities[name], in_sample, local, cap_utility=True)
            weights = result.amounts / w_cur
            rebalances.append(
                RebalanceEvent(
                    day_index=t,
                    estimator=name,
                    amounts=result.amounts,
                    budget=w_cur,
                    caps=local.cap_array(),
                )
            )
            for row in hold_rows:
                w_cur *= float(weights @ row)
                curves[name].append(w_cur)
            wealth[name] = w_cur
        out_dates.extend(panel.dates[t : min(t + cfg.hold, panel.n_days)])
    return BacktestResult(
        dates=tuple(out_dates),
        curves={name: np.asarray(vals) for name, vals in curves.items()},
        rebalances=tuple(rebalances),
    )
