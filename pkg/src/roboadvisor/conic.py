"""A small language-neutral model for LPs and second-order cone programs.

Every optimization in the package is phrased against :class:`ConicProgram`
and solved through :func:`solve`, so no caller ever branches on the backend.
Pure LPs go to HiGHS (via :func:`scipy.optimize.linprog`); programs with
cone constraints go to the Clarabel interior-point solver. All cones are
three-dimensional: ``||(u1, u2)|| <= t`` for affine ``u1``, ``u2``, ``t``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Literal, Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import ModelError

Relation = Literal["<=", "=", ">="]

# (block name, index within block, coefficient)
Term = tuple[str, int, float]


@dataclass(frozen=True)
class Affine:
    """An affine expression: sum of terms plus a constant."""

    terms: tuple[Term, ...]
    const: float = 0.0


@dataclass(frozen=True)
class SolveSettings:
    """Solver tolerances and limits.

    ``max_iters`` caps interior-point iterations directly; the simplex
    fallback inside HiGHS gets ``max_iters * 5000`` pivots, which keeps the
    two backends roughly comparable in effort.
    """

    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_iters: int = 200


@dataclass(frozen=True)
class SolveResult:
    status: Literal["optimal", "infeasible", "unbounded", "numeric-failure"]
    objective: float | None
    primal: dict[str, np.ndarray] | None
    solve_time: float

    def block(self, name: str) -> np.ndarray:
        if self.primal is None:
            raise ModelError("no primal solution available")
        return self.primal[name]


@dataclass
class _LinearRows:
    # COO triplets shared by all linear rows of one relation kind
    rows: list[int] = field(default_factory=list)
    cols: list[int] = field(default_factory=list)
    vals: list[float] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)


class ConicProgram:
    """Mutable builder for an LP/SOCP; treat as immutable once handed to solve."""

    def __init__(self, sense: Literal["min", "max"] = "min"):
        if sense not in ("min", "max"):
            raise ModelError(f"unknown objective sense {sense!r}")
        self.sense = sense
        self._blocks: dict[str, tuple[int, int, bool]] = {}  # name -> (offset, size, nonneg)
        self._n = 0
        self._obj: dict[int, float] = {}
        self._ineq = _LinearRows()  # canonical form: row . x <= rhs
        self._eq = _LinearRows()
        self._socs: list[tuple[Affine, Affine, Affine]] = []
        self._raw_linear: list[tuple[tuple[Term, ...], Relation, float]] = []

    # -- construction ------------------------------------------------------

    def add_block(self, name: str, size: int, nonneg: bool = False) -> str:
        if name in self._blocks:
            raise ModelError(f"variable block {name!r} already declared")
        if size < 1:
            raise ModelError(f"variable block {name!r} must have positive size")
        self._blocks[name] = (self._n, size, nonneg)
        self._n += size
        return name

    def _col(self, block: str, idx: int) -> int:
        if block not in self._blocks:
            raise ModelError(f"unknown variable block {block!r}")
        off, size, _ = self._blocks[block]
        if not 0 <= idx < size:
            raise ModelError(f"index {idx} out of range for block {block!r}")
        return off + idx

    def set_objective(self, terms: Sequence[Term]) -> None:
        self._obj = {}
        for blk, idx, coef in terms:
            col = self._col(blk, idx)
            self._obj[col] = self._obj.get(col, 0.0) + float(coef)

    def add_linear(self, terms: Sequence[Term], relation: Relation, rhs: float) -> None:
        if relation not in ("<=", "=", ">="):
            raise ModelError(f"unknown relation {relation!r}")
        self._raw_linear.append((tuple(terms), relation, float(rhs)))
        sign = -1.0 if relation == ">=" else 1.0
        target = self._eq if relation == "=" else self._ineq
        r = len(target.rhs)
        for blk, idx, coef in terms:
            target.rows.append(r)
            target.cols.append(self._col(blk, idx))
            target.vals.append(sign * float(coef))
        target.rhs.append(sign * float(rhs))

    def add_soc(self, u1: Affine, u2: Affine, radius: Affine) -> None:
        """Add the constraint ||(u1, u2)|| <= radius."""
        for expr in (u1, u2, radius):
            for blk, idx, _ in expr.terms:
                self._col(blk, idx)  # validate references
        self._socs.append((u1, u2, radius))

    # -- introspection -----------------------------------------------------

    @property
    def n_variables(self) -> int:
        return self._n

    @property
    def blocks(self) -> Mapping[str, tuple[int, int, bool]]:
        return dict(self._blocks)

    @property
    def soc_constraints(self) -> list[tuple[Affine, Affine, Affine]]:
        return list(self._socs)

    def dump(self) -> str:
        """Plain-text rendering (variables, objective, constraints, cones)."""
        lines = [f"sense {self.sense}"]
        for name, (off, size, nonneg) in self._blocks.items():
            kind = "nonneg" if nonneg else "free"
            lines.append(f"var {name}[{size}] {kind} @ {off}")
        obj = " + ".join(f"{c:.12g}*x{j}" for j, c in sorted(self._obj.items()))
        lines.append(f"objective {obj or '0'}")
        for terms, rel, rhs in self._raw_linear:
            lhs = " + ".join(f"{c:.12g}*{b}[{i}]" for b, i, c in terms)
            lines.append(f"lin {lhs or '0'} {rel} {rhs:.12g}")
        for u1, u2, t in self._socs:

            def render(e: Affine) -> str:
                s = " + ".join(f"{c:.12g}*{b}[{i}]" for b, i, c in e.terms)
                return f"{s or '0'} + {e.const:.12g}"

            lines.append(f"soc ||({render(u1)}, {render(u2)})|| <= {render(t)}")
        return "\n".join(lines) + "\n"

    # -- assembly helpers --------------------------------------------------

    def _cost(self) -> np.ndarray:
        c = np.zeros(self._n)
        for col, coef in self._obj.items():
            c[col] = coef
        return c if self.sense == "min" else -c

    def _bounds(self) -> list[tuple[float | None, float | None]]:
        bounds: list[tuple[float | None, float | None]] = [(None, None)] * self._n
        for off, size, nonneg in self._blocks.values():
            if nonneg:
                for j in range(off, off + size):
                    bounds[j] = (0.0, None)
        return bounds

    def _matrices(self) -> tuple[sparse.csr_matrix, np.ndarray, sparse.csr_matrix, np.ndarray]:
        a_ub = sparse.coo_matrix(
            (self._ineq.vals, (self._ineq.rows, self._ineq.cols)),
            shape=(len(self._ineq.rhs), self._n),
        ).tocsr()
        a_eq = sparse.coo_matrix(
            (self._eq.vals, (self._eq.rows, self._eq.cols)),
            shape=(len(self._eq.rhs), self._n),
        ).tocsr()
        return a_ub, np.asarray(self._ineq.rhs), a_eq, np.asarray(self._eq.rhs)

    def _affine_row(self, expr: Affine) -> tuple[np.ndarray, float]:
        row = np.zeros(self._n)
        for blk, idx, coef in expr.terms:
            row[self._col(blk, idx)] += coef
        return row, expr.const

    def _split(self, x: np.ndarray) -> dict[str, np.ndarray]:
        return {
            name: x[off : off + size].copy() for name, (off, size, _) in self._blocks.items()
        }


def check_feasible(program: ConicProgram, point: Mapping[str, np.ndarray]) -> float:
    """Largest absolute constraint violation of ``point`` (0 when feasible).

    Covers linear rows, cone memberships and sign restrictions. Unknown or
    missing variable blocks raise ``ModelError``.
    """
    x = np.zeros(program.n_variables)
    blocks = program.blocks
    for name, vals in point.items():
        if name not in blocks:
            raise ModelError(f"unknown variable block {name!r}")
        off, size, _ = blocks[name]
        arr = np.asarray(vals, dtype=float)
        if arr.shape != (size,):
            raise ModelError(f"block {name!r} expects shape ({size},), got {arr.shape}")
        x[off : off + size] = arr
    for name, (off, size, _) in blocks.items():
        if name not in point:
            raise ModelError(f"missing variable block {name!r}")
    worst = 0.0
    a_ub, b_ub, a_eq, b_eq = program._matrices()
    if a_ub.shape[0]:
        worst = max(worst, float(np.max(np.maximum(a_ub @ x - b_ub, 0.0), initial=0.0)))
    if a_eq.shape[0]:
        worst = max(worst, float(np.max(np.abs(a_eq @ x - b_eq), initial=0.0)))
    for name, (off, size, nonneg) in blocks.items():
        if nonneg:
            worst = max(worst, float(np.max(-x[off : off + size], initial=0.0)))
    for u1, u2, t in program.soc_constraints:
        r1, c1 = program._affine_row(u1)
        r2, c2 = program._affine_row(u2)
        rt, ct = program._affine_row(t)
        norm = float(np.hypot(r1 @ x + c1, r2 @ x + c2))
        worst = max(worst, max(norm - (rt @ x + ct), 0.0))
    return worst


def _solve_lp(program: ConicProgram, settings: SolveSettings) -> SolveResult:
    a_ub, b_ub, a_eq, b_eq = program._matrices()
    t0 = time.perf_counter()
    res = linprog(
        program._cost(),
        A_ub=a_ub if a_ub.shape[0] else None,
        b_ub=b_ub if a_ub.shape[0] else None,
        A_eq=a_eq if a_eq.shape[0] else None,
        b_eq=b_eq if a_eq.shape[0] else None,
        bounds=program._bounds(),
        method="highs",
        options={
            "presolve": True,
            "primal_feasibility_tolerance": min(settings.feas_tol, 1e-8),
            "dual_feasibility_tolerance": min(settings.gap_tol, 1e-8),
            "maxiter": settings.max_iters * 5000,
        },
    )
    elapsed = time.perf_counter() - t0
    if res.status == 0:
        x = np.asarray(res.x)
        obj = float(res.fun) if program.sense == "min" else -float(res.fun)
        return SolveResult("optimal", obj, program._split(x), elapsed)
    if res.status == 2:
        return SolveResult("infeasible", None, None, elapsed)
    if res.status == 3:
        return SolveResult("unbounded", None, None, elapsed)
    return SolveResult("numeric-failure", None, None, elapsed)


def _solve_socp(program: ConicProgram, settings: SolveSettings) -> SolveResult:
    import clarabel

    n = program.n_variables
    a_ub, b_ub, a_eq, b_eq = program._matrices()
    blocks_a: list[sparse.spmatrix] = []
    blocks_b: list[np.ndarray] = []
    cones: list = []
    if a_eq.shape[0]:
        blocks_a.append(a_eq)
        blocks_b.append(b_eq)
        cones.append(clarabel.ZeroConeT(a_eq.shape[0]))
    nonneg_rows: list[np.ndarray] = []
    nonneg_rhs: list[float] = []
    for name, (off, size, nonneg) in program.blocks.items():
        if nonneg:
            for j in range(off, off + size):
                row = np.zeros(n)
                row[j] = -1.0
                nonneg_rows.append(row)
                nonneg_rhs.append(0.0)
    ineq_count = a_ub.shape[0] + len(nonneg_rows)
    if ineq_count:
        parts = []
        if a_ub.shape[0]:
            parts.append(a_ub)
        if nonneg_rows:
            parts.append(sparse.csr_matrix(np.vstack(nonneg_rows)))
        blocks_a.append(sparse.vstack(parts))
        blocks_b.append(np.concatenate([b_ub, np.asarray(nonneg_rhs)]))
        cones.append(clarabel.NonnegativeConeT(ineq_count))
    for u1, u2, t in program.soc_constraints:
        rows = np.zeros((3, n))
        consts = np.zeros(3)
        for k, expr in enumerate((t, u1, u2)):  # clarabel wants the radius first
            row, const = program._affine_row(expr)
            rows[k] = -row
            consts[k] = const
        blocks_a.append(sparse.csr_matrix(rows))
        blocks_b.append(consts)
        cones.append(clarabel.SecondOrderConeT(3))
    a_all = sparse.vstack(blocks_a).tocsc()
    b_all = np.concatenate(blocks_b)
    p_mat = sparse.csc_matrix((n, n))
    opts = clarabel.DefaultSettings()
    opts.verbose = False
    opts.max_iter = settings.max_iters
    # ask for one extra digit internally so the absolute violation contract
    # (1e-7 at optimal) holds even on badly scaled rows
    opts.tol_feas = settings.feas_tol * 0.1
    opts.tol_gap_abs = settings.gap_tol * 0.1
    opts.tol_gap_rel = settings.gap_tol * 0.1
    t0 = time.perf_counter()
    solver = clarabel.DefaultSolver(p_mat, program._cost(), a_all, b_all, cones, opts)
    sol = solver.solve()
    elapsed = time.perf_counter() - t0
    status = str(sol.status)
    if status in ("Solved", "AlmostSolved"):
        x = np.asarray(sol.x)
        obj = float(sol.obj_val) if program.sense == "min" else -float(sol.obj_val)
        return SolveResult("optimal", obj, program._split(x), elapsed)
    if status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        return SolveResult("infeasible", None, None, elapsed)
    if status in ("DualInfeasible", "AlmostDualInfeasible"):
        return SolveResult("unbounded", None, None, elapsed)
    return SolveResult("numeric-failure", None, None, elapsed)


def solve(program: ConicProgram, settings: SolveSettings | None = None) -> SolveResult:
    """Solve an assembled program; optimal points satisfy constraints to 1e-7.

    A nominally optimal answer whose recomputed violation exceeds 1e-7 is
    downgraded to ``numeric-failure`` rather than returned silently.
    """
    settings = settings or SolveSettings()
    if program.n_variables == 0:
        raise ModelError("program has no variables")
    backend = _solve_socp if program.soc_constraints else _solve_lp
    result = backend(program, settings)
    if result.status == "optimal" and result.primal is not None:
        if check_feasible(program, result.primal) <= 1e-7:
            return result
        # one retry at tighter tolerances before conceding numeric failure
        tighter = SolveSettings(
            feas_tol=settings.feas_tol * 1e-2,
            gap_tol=settings.gap_tol * 1e-2,
            max_iters=settings.max_iters,
        )
        retry = backend(program, tighter)
        if (
            retry.status == "optimal"
            and retry.primal is not None
            and check_feasible(program, retry.primal) <= 1e-7
        ):
            return retry
        return SolveResult("numeric-failure", None, None, result.solve_time)
    return result
