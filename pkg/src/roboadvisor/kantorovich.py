"""Kantorovich distance between two piecewise-linear utilities.

Both routes work on the domain rescaled to [0, 1] (slopes multiplied by the
domain bound), so distances are dimensionless and bounded by 1:

* :func:`kantorovich_socp` solves the cone program whose optimum is the
  supremum of the integral difference over 1-Lipschitz test functions
  vanishing at 0, with per-segment cone constraints.
* :func:`kantorovich_closed_form` integrates |u - v| exactly. For normalized
  monotone utilities the derivative measures are probability measures whose
  cumulative functions are u and v themselves, so duality collapses the
  supremum to the L1 distance of the two curves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .conic import Affine, ConicProgram, SolveSettings, solve
from .errors import SolverFailureError, ValidationError
from .lotteries import PwlUtility


@dataclass(frozen=True)
class DistanceResult:
    value: float
    method: Literal["socp", "closed-form"]

    def __post_init__(self) -> None:
        if self.value < -1e-9:
            raise ValidationError("a distance cannot be negative")


def _normalized(u: PwlUtility) -> tuple[np.ndarray, np.ndarray]:
    """Grid and slopes rescaled onto [0, 1]; slope * length still sums to 1."""
    upper = u.grid.upper
    return u.grid.as_array() / upper, u.beta_array() * upper


def _require_same_grid(u: PwlUtility, v: PwlUtility) -> None:
    if not u.grid.same_grid(v.grid):
        raise ValidationError("utilities must share one breakpoint grid")


def kantorovich_closed_form(u: PwlUtility, v: PwlUtility) -> DistanceResult:
    """Exact integral of |u - v| on the rescaled domain, split at crossings."""
    _require_same_grid(u, v)
    pts, _ = _normalized(u)
    d = u.alpha_array() - v.alpha_array()
    total = 0.0
    for j in range(len(pts) - 1):
        length = pts[j + 1] - pts[j]
        d0, d1 = d[j], d[j + 1]
        if d0 * d1 >= 0.0:
            total += abs(d0 + d1) / 2.0 * length
        else:
            # the sign flips inside the segment; two triangles
            total += length * (d0 * d0 + d1 * d1) / (2.0 * abs(d0 - d1))
    return DistanceResult(value=float(total), method="closed-form")


def kantorovich_socp(
    u: PwlUtility, v: PwlUtility, settings: SolveSettings | None = None
) -> DistanceResult:
    """Cone-program value of the distance on the rescaled domain.

    Variables per segment j: the integral contribution w_j of the test
    function and the increment x_j of its endpoint values. Two cones per
    segment bound w_j by the extreme areas a 1-Lipschitz function can
    enclose between the recorded endpoint values.
    """
    _require_same_grid(u, v)
    pts, bu = _normalized(u)
    _, bv = _normalized(v)
    diff = bu - bv
    m = len(pts) - 1
    prog = ConicProgram(sense="max")
    prog.add_block("w", m)
    prog.add_block("x", m)
    prog.set_objective([("w", j, float(diff[j])) for j in range(m)])
    for j in range(m):
        dy = float(pts[j + 1] - pts[j])
        for sign in (1.0, -1.0):
            # affine part: sign * (-2 w_j + dy * (2 sum_{i<j} x_i + x_j)) + dy^2/2
            terms: list[tuple[str, int, float]] = [("w", j, -2.0 * sign)]
            for i in range(j):
                terms.append(("x", i, 2.0 * dy * sign))
            terms.append(("x", j, dy * sign))
            mid = Affine(terms=tuple(terms), const=dy * dy / 2.0)
            prog.add_soc(
                u1=Affine(terms=(("x", j, 1.0),)),
                u2=Affine(terms=mid.terms, const=mid.const - 0.5),
                radius=Affine(terms=mid.terms, const=mid.const + 0.5),
            )
    result = solve(prog, settings)
    if result.status != "optimal":
        raise SolverFailureError(f"distance solve ended with status {result.status}")
    return DistanceResult(value=max(float(result.objective), 0.0), method="socp")
