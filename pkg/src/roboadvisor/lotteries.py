"""Domain types for lotteries, breakpoint grids and piecewise-linear utilities.

A lottery is a discrete non-negative random payoff; an item set is a named
collection of distinct lotteries used to build pairwise-comparison questions.
Utilities are normalized (u(0)=0, u(b)=1 where b is the largest payoff the
user cares about), monotone non-decreasing and concave, and are represented
piecewise linearly by their values ``alpha`` at grid breakpoints and segment
slopes ``beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ValidationError

PROB_TOL = 1e-9
VALUE_MERGE_TOL = 1e-9
SLOPE_TOL = 1e-9
CONCAVITY_TOL = 1e-12


@dataclass(frozen=True)
class Lottery:
    """A discrete payoff: finitely many non-negative outcomes with probabilities.

    Attributes:
        id: Unique identifier within an item set.
        label: Plain-language description shown to users.
        outcomes: Tuple of ``(value, prob)`` pairs. Values are distinct and
            non-negative; probabilities are positive and sum to one.
    """

    id: str
    label: str
    outcomes: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.outcomes:
            raise ValidationError(f"lottery {self.id!r} has no outcomes")
        values = [v for v, _ in self.outcomes]
        probs = [p for _, p in self.outcomes]
        if any(not math.isfinite(v) or v < 0 for v in values):
            raise ValidationError(f"lottery {self.id!r} has a negative or non-finite value")
        if any(not math.isfinite(p) or p <= 0 for p in probs):
            raise ValidationError(f"lottery {self.id!r} has a non-positive probability")
        if abs(sum(probs) - 1.0) > PROB_TOL:
            raise ValidationError(
                f"lottery {self.id!r} probabilities sum to {sum(probs)!r}, not 1"
            )
        for i, v in enumerate(values):
            for w in values[i + 1 :]:
                if abs(v - w) <= VALUE_MERGE_TOL:
                    raise ValidationError(f"lottery {self.id!r} has duplicate value {v!r}")

    @property
    def values(self) -> np.ndarray:
        return np.array([v for v, _ in self.outcomes], dtype=float)

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for _, p in self.outcomes], dtype=float)

    def mean(self) -> float:
        return float(self.values @ self.probs)

    def second_moment(self) -> float:
        return float((self.values**2) @ self.probs)

    def max_value(self) -> float:
        return float(self.values.max())

    def same_distribution(self, other: "Lottery", tol: float = PROB_TOL) -> bool:
        """True when both lotteries define the same payoff distribution."""
        a = sorted(self.outcomes)
        b = sorted(other.outcomes)
        if len(a) != len(b):
            return False
        return all(
            abs(va - vb) <= VALUE_MERGE_TOL and abs(pa - pb) <= tol
            for (va, pa), (vb, pb) in zip(a, b)
        )


@dataclass(frozen=True)
class ItemSet:
    """A named set of pairwise-distinct lotteries."""

    items: tuple[Lottery, ...]
    name: str

    def __post_init__(self) -> None:
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"item set {self.name!r} has duplicate item ids")
        for i, a in enumerate(self.items):
            for b in self.items[i + 1 :]:
                if a.same_distribution(b):
                    raise ValidationError(
                        f"items {a.id!r} and {b.id!r} are identical distributions"
                    )

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def by_id(self, item_id: str) -> Lottery:
        for it in self.items:
            if it.id == item_id:
                return it
        raise ValidationError(f"unknown item id {item_id!r} in item set {self.name!r}")

    def max_outcome(self) -> float:
        """Largest payoff across all items; the default utility-domain bound."""
        return max(it.max_value() for it in self.items)


@dataclass(frozen=True)
class BreakpointGrid:
    """Strictly increasing breakpoints ``0 = y_1 < ... < y_N = b``."""

    points: tuple[float, ...]

    def __post_init__(self) -> None:
        pts = self.points
        if len(pts) < 2:
            raise ValidationError("a breakpoint grid needs at least two points")
        if abs(pts[0]) > VALUE_MERGE_TOL:
            raise ValidationError("the first breakpoint must be 0")
        if any(b - a <= VALUE_MERGE_TOL for a, b in zip(pts, pts[1:])):
            raise ValidationError("breakpoints must be strictly increasing")

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def upper(self) -> float:
        """The domain bound b (largest breakpoint)."""
        return self.points[-1]

    def as_array(self) -> np.ndarray:
        return np.array(self.points, dtype=float)

    def segment_lengths(self) -> np.ndarray:
        arr = self.as_array()
        return arr[1:] - arr[:-1]

    def index_of(self, value: float, tol: float = VALUE_MERGE_TOL) -> int:
        """Index of the breakpoint equal to ``value`` (within ``tol``)."""
        arr = self.as_array()
        j = int(np.argmin(np.abs(arr - value)))
        if abs(arr[j] - value) > tol:
            raise DomainError(f"value {value!r} is not a grid breakpoint")
        return j

    def same_grid(self, other: "BreakpointGrid", tol: float = VALUE_MERGE_TOL) -> bool:
        if self.n_points != other.n_points:
            return False
        return bool(np.all(np.abs(self.as_array() - other.as_array()) <= tol))


@dataclass(frozen=True)
class PwlUtility:
    """Normalized monotone concave piecewise-linear utility on a grid.

    ``alpha[j]`` is the utility at breakpoint ``j``; ``beta[j]`` is the slope
    of the segment from breakpoint ``j`` to ``j+1``. The representation is
    redundant (beta is the chord slope of alpha) and the consistency is
    enforced at construction.
    """

    grid: BreakpointGrid
    alpha: tuple[float, ...]
    beta: tuple[float, ...]

    def __post_init__(self) -> None:
        a = np.asarray(self.alpha, dtype=float)
        b = np.asarray(self.beta, dtype=float)
        n = self.grid.n_points
        if a.shape != (n,) or b.shape != (n - 1,):
            raise ValidationError("alpha/beta lengths do not match the grid")
        if abs(a[0]) > 1e-9 or abs(a[-1] - 1.0) > 1e-9:
            raise ValidationError("utility must be normalized: u(0)=0 and u(b)=1")
        chords = (a[1:] - a[:-1]) / self.grid.segment_lengths()
        if np.max(np.abs(chords - b)) > SLOPE_TOL:
            raise ValidationError("beta does not match the chord slopes of alpha")
        if np.any(b < -SLOPE_TOL):
            raise ValidationError("slopes must be non-negative (monotone utility)")
        if np.any(b[1:] > b[:-1] + CONCAVITY_TOL):
            raise ValidationError("slopes must be non-increasing (concave utility)")

    @classmethod
    def from_beta(cls, grid: BreakpointGrid, beta: Sequence[float]) -> "PwlUtility":
        """Build a utility from slopes alone; alpha follows by accumulation.

        The slopes are renormalized so that the utility ends exactly at 1.
        """
        b = np.asarray(beta, dtype=float)
        total = float(b @ grid.segment_lengths())
        if total <= 0:
            raise ValidationError("slopes must accumulate to a positive total")
        b = b / total
        a = np.concatenate(([0.0], np.cumsum(b * grid.segment_lengths())))
        a[-1] = 1.0
        return cls(grid=grid, alpha=tuple(float(x) for x in a), beta=tuple(float(x) for x in b))

    @classmethod
    def linear(cls, grid: BreakpointGrid) -> "PwlUtility":
        """The normalized chord u(y) = y / b."""
        return cls.from_beta(grid, np.ones(grid.n_points - 1) / grid.upper)

    def alpha_array(self) -> np.ndarray:
        return np.asarray(self.alpha, dtype=float)

    def beta_array(self) -> np.ndarray:
        return np.asarray(self.beta, dtype=float)


def eval_utility(u: PwlUtility, y: float | np.ndarray) -> float | np.ndarray:
    """Evaluate a piecewise-linear utility at ``y`` in [0, b].

    The value at a breakpoint is its alpha; between breakpoints the segment
    slope interpolates. Raises ``DomainError`` outside the domain.
    """
    pts = u.grid.as_array()
    a = u.alpha_array()
    b = u.beta_array()
    upper = u.grid.upper
    arr = np.asarray(y, dtype=float)
    # snap float dust at the endpoints, reject anything genuinely outside
    grace = 1e-12 * max(1.0, upper)
    if np.any(arr < -grace) or np.any(arr > upper + grace):
        bad = arr[(arr < -grace) | (arr > upper + grace)]
        raise DomainError(f"utility argument {float(np.ravel(bad)[0])!r} outside [0, {upper!r}]")
    arr = np.clip(arr, 0.0, upper)
    seg = np.clip(np.searchsorted(pts, arr, side="right") - 1, 0, len(b) - 1)
    out = a[seg] + b[seg] * (arr - pts[seg])
    # exact normalization at the right endpoint
    out = np.where(arr >= upper, a[-1], out)
    if np.isscalar(y) or np.ndim(y) == 0:
        return float(out)
    return out


def expected_utility(u: PwlUtility, lottery: Lottery) -> float:
    """Expected utility of a lottery whose outcomes lie inside the domain."""
    vals = lottery.values
    return float(lottery.probs @ np.asarray(eval_utility(u, vals)))


def gini_coefficient(u: PwlUtility) -> float:
    """Risk-aversion summary: twice the area between u and the chord, over b.

    Exact closed form from the trapezoid areas of the segments. Zero for the
    linear chord; in [0, 1] for every valid (concave, normalized) utility.
    """
    a = u.alpha_array()
    seg = u.grid.segment_lengths()
    integral = float(((a[:-1] + a[1:]) / 2.0) @ seg)
    upper = u.grid.upper
    return 2.0 * (integral - upper / 2.0) / upper


@dataclass(frozen=True)
class RiskAnalytics:
    """Gini coefficient plus per-breakpoint risk-aversion measures.

    ``ara``/``rra`` hold ``(breakpoint, value)`` pairs for interior
    breakpoints only; the value is ``None`` where the left slope vanishes
    (the measure divides by it).
    """

    gini: float
    ara: tuple[tuple[float, float | None], ...]
    rra: tuple[tuple[float, float | None], ...]


def risk_aversion(u: PwlUtility) -> RiskAnalytics:
    """Kink-based absolute and relative risk aversion at interior breakpoints.

    At breakpoint y with left slope l and right slope r the absolute measure
    is (l - r) / (2 l) and the relative measure is y times that. A zero left
    slope makes the measure undefined at that point and is reported as None.
    """
    pts = u.grid.as_array()
    b = u.beta_array()
    ara: list[tuple[float, float | None]] = []
    rra: list[tuple[float, float | None]] = []
    for j in range(1, u.grid.n_points - 1):
        y = float(pts[j])
        left, right = float(b[j - 1]), float(b[j])
        if left <= 0.0:
            ara.append((y, None))
            rra.append((y, None))
            continue
        a_val = (left - right) / (2.0 * left)
        ara.append((y, a_val))
        rra.append((y, y * a_val))
    return RiskAnalytics(gini=gini_coefficient(u), ara=tuple(ara), rra=tuple(rra))


def _iter_lotteries(source) -> Iterable[Lottery]:
    if isinstance(source, ItemSet):
        return iter(source.items)
    if hasattr(source, "pairs"):  # a questionnaire
        return (lot for pair in source.pairs for lot in pair)
    return iter(source)


def build_breakpoints(source, upper: float) -> BreakpointGrid:
    """Grid from {0}, every outcome value in ``source``, and {upper}.

    ``source`` may be an item set, a questionnaire, or any iterable of
    lotteries. Values equal within 1e-9 are merged. ``upper`` must dominate
    every outcome.
    """
    values: list[float] = [0.0]
    for lot in _iter_lotteries(source):
        values.extend(float(v) for v in lot.values)
    max_val = max(values)
    if upper < max_val - VALUE_MERGE_TOL:
        raise ValidationError(
            f"domain bound {upper!r} is below the largest outcome {max_val!r}"
        )
    values.append(float(upper))
    values.sort()
    merged: list[float] = [values[0]]
    for v in values[1:]:
        if v - merged[-1] > VALUE_MERGE_TOL:
            merged.append(v)
    return BreakpointGrid(points=tuple(merged))


@dataclass(frozen=True)
class ClosedFormUtility:
    """A closed-form normalized monotone concave utility on [0, b].

    Supported kinds:
        * ``"exp"``: u(y) = (1 - exp(-rate*y)) / (1 - exp(-rate*b))
        * ``"power"``: u(y) = (y/b)**exponent with exponent in (0, 1]
        * ``"linear"``: u(y) = y/b
    """

    kind: str
    upper: float
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ("exp", "power", "linear"):
            raise ValidationError(f"unknown closed-form utility kind {self.kind!r}")
        if self.upper <= 0:
            raise ValidationError("domain bound must be positive")
        if self.kind == "exp" and self.params.get("rate", 0.0) <= 0:
            raise ValidationError("exp utility needs a positive rate")
        if self.kind == "power":
            e = self.params.get("exponent", 0.0)
            if not 0 < e <= 1:
                raise ValidationError("power utility needs an exponent in (0, 1]")
        if abs(self(0.0)) > 1e-9 or abs(self(self.upper) - 1.0) > 1e-9:
            raise ValidationError("closed-form utility is not normalized")

    def __call__(self, y: float | np.ndarray) -> float | np.ndarray:
        arr = np.asarray(y, dtype=float)
        if np.any(arr < -1e-9) or np.any(arr > self.upper * (1 + 1e-12)):
            raise DomainError(f"argument outside [0, {self.upper!r}]")
        arr = np.clip(arr, 0.0, self.upper)
        if self.kind == "exp":
            rate = self.params["rate"]
            out = (1.0 - np.exp(-rate * arr)) / (1.0 - math.exp(-rate * self.upper))
        elif self.kind == "power":
            out = (arr / self.upper) ** self.params["exponent"]
        else:
            out = arr / self.upper
        if np.isscalar(y) or np.ndim(y) == 0:
            return float(out)
        return out

    def expected(self, lottery: Lottery) -> float:
        return float(lottery.probs @ np.asarray(self(lottery.values)))


def restrict_to_grid(cf: ClosedFormUtility, grid: BreakpointGrid) -> PwlUtility:
    """Chord interpolation of a closed-form utility on a grid.

    Chords of a concave increasing normalized function are themselves
    concave, increasing and normalized, so the result is a valid utility.
    """
    if abs(grid.upper - cf.upper) > VALUE_MERGE_TOL:
        raise ValidationError("grid bound does not match the utility domain")
    a = np.asarray(cf(grid.as_array()), dtype=float)
    a[0], a[-1] = 0.0, 1.0
    beta = (a[1:] - a[:-1]) / grid.segment_lengths()
    beta = np.minimum.accumulate(np.maximum(beta, 0.0))
    return PwlUtility.from_beta(grid, beta)


def refine_to_grid(u: PwlUtility, grid: BreakpointGrid) -> PwlUtility:
    """Re-express a utility on a superset grid without changing the function."""
    fine = grid.as_array()
    missing = [p for p in u.grid.points if np.min(np.abs(fine - p)) > VALUE_MERGE_TOL]
    if missing:
        raise ValidationError(f"grid does not contain breakpoints {missing!r}")
    a = np.asarray(eval_utility(u, fine), dtype=float)
    a[0], a[-1] = 0.0, 1.0
    beta = (a[1:] - a[:-1]) / grid.segment_lengths()
    beta = np.minimum.accumulate(np.maximum(beta, 0.0))
    return PwlUtility.from_beta(grid, beta)
