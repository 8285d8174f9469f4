"""Questionnaire generation from historical ratings.

Fits a biased latent factor model to a (possibly sparse) ratings matrix by
alternating ridge regressions, then greedily picks item pairs whose latent
difference vectors make the selection Gram matrix as well conditioned as
possible: the criterion is the trace of the inverse Gram matrix of the
difference vectors, which a forward greedy pass minimizes step by step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import SingularMatrixError, ValidationError
from .lotteries import ItemSet, Lottery

RIDGE_BOOTSTRAP = 1e-6


@dataclass(frozen=True)
class RatingsMatrix:
    """Sparse user-by-item ratings on a 0..10 scale.

    ``user_index``/``item_index``/``ratings`` are parallel arrays, one entry
    per recorded rating; missing pairs are simply absent.
    """

    user_ids: tuple[str, ...]
    item_ids: tuple[str, ...]
    user_index: np.ndarray
    item_index: np.ndarray
    ratings: np.ndarray

    def __post_init__(self) -> None:
        u = np.asarray(self.user_index)
        i = np.asarray(self.item_index)
        r = np.asarray(self.ratings, dtype=float)
        if not (len(u) == len(i) == len(r)):
            raise ValidationError("ratings entry arrays must have equal length")
        if len(r) == 0:
            raise ValidationError("ratings matrix has no entries")
        if not np.all(np.isfinite(r)):
            raise ValidationError("ratings must be finite")
        if np.any(r < 0.0) or np.any(r > 10.0):
            raise ValidationError("ratings must lie in [0, 10]")
        if np.any(u < 0) or np.any(u >= len(self.user_ids)):
            raise ValidationError("user index out of range")
        if np.any(i < 0) or np.any(i >= len(self.item_ids)):
            raise ValidationError("item index out of range")
        keys = set(zip(u.tolist(), i.tolist()))
        if len(keys) != len(r):
            raise ValidationError("at most one rating per (user, item) pair")

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @classmethod
    def from_entries(
        cls,
        entries: Sequence[tuple[str, str, float]],
        item_ids: Sequence[str] | None = None,
    ) -> "RatingsMatrix":
        users: list[str] = []
        user_pos: dict[str, int] = {}
        if item_ids is None:
            items: list[str] = []
            item_pos: dict[str, int] = {}
        else:
            items = list(item_ids)
            item_pos = {iid: k for k, iid in enumerate(items)}
        u_idx, i_idx, vals = [], [], []
        for uid, iid, r in entries:
            if uid not in user_pos:
                user_pos[uid] = len(users)
                users.append(uid)
            if iid not in item_pos:
                if item_ids is not None:
                    raise ValidationError(f"rating references unknown item {iid!r}")
                item_pos[iid] = len(items)
                items.append(iid)
            u_idx.append(user_pos[uid])
            i_idx.append(item_pos[iid])
            vals.append(float(r))
        return cls(
            user_ids=tuple(users),
            item_ids=tuple(items),
            user_index=np.asarray(u_idx, dtype=int),
            item_index=np.asarray(i_idx, dtype=int),
            ratings=np.asarray(vals, dtype=float),
        )


@dataclass(frozen=True)
class LfmConfig:
    """Hyperparameters for the alternating ridge fit.

    Two latent factors per item capture value-scale and risk-profile axes;
    higher ranks tend to chase the normalization residue of synthetic
    ratings and degrade pair selection.
    """

    n_factors: int = 2
    lam_users: float = 0.1
    lam_items: float = 0.1
    max_iters: int = 200
    tol: float = 1e-8
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.n_factors < 1:
            raise ValidationError("latent dimension must be at least 1")
        if self.tol <= 0:
            raise ValidationError("tolerance must be positive")
        if self.lam_users < 0 or self.lam_items < 0:
            raise ValidationError("regularization weights must be non-negative")


@dataclass(frozen=True)
class LfmModel:
    """Fitted latent factor model: rating ~ mu + item bias + user bias + p.q."""

    mu: float
    item_bias: np.ndarray
    user_bias: np.ndarray
    item_factors: np.ndarray  # (n, v)
    user_factors: np.ndarray  # (m, v)
    objective: float
    item_ids: tuple[str, ...]

    @property
    def n_factors(self) -> int:
        return self.item_factors.shape[1]


def _objective(
    r: np.ndarray,
    u_idx: np.ndarray,
    i_idx: np.ndarray,
    mu: float,
    b: np.ndarray,
    s: np.ndarray,
    p: np.ndarray,
    q: np.ndarray,
    lam_u: float,
    lam_i: float,
) -> float:
    pred = mu + b[i_idx] + s[u_idx] + np.einsum("ij,ij->i", p[i_idx], q[u_idx])
    sq = float(np.sum((r - pred) ** 2))
    reg = lam_u * (float(np.sum(q * q)) + float(np.sum(s * s)))
    reg += lam_i * (float(np.sum(p * p)) + float(np.sum(b * b)))
    return sq + reg


def fit_lfm(ratings: RatingsMatrix, cfg: LfmConfig | None = None) -> LfmModel:
    """Alternating ridge regression for the biased latent factor model.

    The global mean is fixed to the mean of observed ratings; error terms for
    unobserved pairs are dropped. Each pass solves the exact ridge problem
    for one side (all users, then all items), so the objective decreases
    monotonically; iteration stops when the decrease falls below ``tol``.
    """
    cfg = cfg or LfmConfig()
    m, n, v = ratings.n_users, ratings.n_items, cfg.n_factors
    r = ratings.ratings
    u_idx, i_idx = ratings.user_index, ratings.item_index
    mu = float(np.mean(r))
    rng = np.random.default_rng(cfg.rng_seed)
    p = 0.01 * rng.standard_normal((n, v))
    q = np.zeros((m, v))
    b = np.zeros(n)
    s = np.zeros(m)

    by_user = [np.nonzero(u_idx == u)[0] for u in range(m)]
    by_item = [np.nonzero(i_idx == i)[0] for i in range(n)]

    def ridge_side(
        rows_for: list[np.ndarray],
        other_factors: np.ndarray,
        other_bias: np.ndarray,
        other_of_entry: np.ndarray,
        lam: float,
    ) -> tuple[np.ndarray, np.ndarray]:
        factors = np.zeros((len(rows_for), v))
        bias = np.zeros(len(rows_for))
        eye = np.eye(v + 1)
        for k, rows in enumerate(rows_for):
            if len(rows) == 0:
                continue
            design = np.hstack(
                [other_factors[other_of_entry[rows]], np.ones((len(rows), 1))]
            )
            target = r[rows] - mu - other_bias[other_of_entry[rows]]
            gram = design.T @ design + lam * eye
            sol = np.linalg.solve(gram, design.T @ target)
            factors[k] = sol[:v]
            bias[k] = sol[v]
        return factors, bias

    prev = _objective(r, u_idx, i_idx, mu, b, s, p, q, cfg.lam_users, cfg.lam_items)
    obj = prev
    for _ in range(cfg.max_iters):
        q, s = ridge_side(by_user, p, b, i_idx, cfg.lam_users)
        p, b = ridge_side(by_item, q, s, u_idx, cfg.lam_items)
        obj = _objective(r, u_idx, i_idx, mu, b, s, p, q, cfg.lam_users, cfg.lam_items)
        if prev - obj < cfg.tol:
            break
        prev = obj
    return LfmModel(
        mu=mu,
        item_bias=b,
        user_bias=s,
        item_factors=p,
        user_factors=q,
        objective=float(obj),
        item_ids=ratings.item_ids,
    )


@dataclass(frozen=True)
class Questionnaire:
    """An ordered list of question pairs (first lottery, second lottery)."""

    pairs: tuple[tuple[Lottery, Lottery], ...]
    provenance: str
    objective: float | None = None

    def __post_init__(self) -> None:
        if len(self.pairs) < 1:
            raise ValidationError("a questionnaire needs at least one pair")
        seen: set[frozenset[str]] = set()
        for first, second in self.pairs:
            if first.id == second.id:
                raise ValidationError(f"pair ({first.id!r}, {second.id!r}) repeats one item")
            key = frozenset((first.id, second.id))
            if key in seen:
                raise ValidationError(f"duplicate unordered pair {sorted(key)!r}")
            seen.add(key)

    def __len__(self) -> int:
        return len(self.pairs)


def spq_objective(
    pairs: Sequence[tuple[int, int]],
    model: LfmModel,
    ridge: float = 0.0,
) -> float:
    """Trace of the inverse (ridged) Gram matrix of latent difference vectors.

    With ``ridge`` zero the Gram matrix must be invertible, otherwise a
    ``SingularMatrixError`` is raised.
    """
    if not pairs:
        raise ValidationError("pair list must be nonempty")
    p = model.item_factors
    d = np.stack([p[i] - p[j] for i, j in pairs], axis=1)  # (v, K)
    gram = d @ d.T + ridge * np.eye(model.n_factors)
    eigs = np.linalg.eigvalsh(gram)
    if eigs[0] <= 1e-14 * max(1.0, float(eigs[-1])):
        raise SingularMatrixError("difference Gram matrix is singular; use a ridge")
    return float(np.trace(np.linalg.inv(gram)))


def _candidate_pairs(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def select_pairs_spq(model: LfmModel, items: ItemSet, k: int) -> Questionnaire:
    """Forward greedy minimization of the trace criterion over unordered pairs.

    While fewer pairs than latent dimensions are selected the Gram matrix is
    rank deficient, so those steps are scored with a small ridge; afterwards
    the exact criterion is used whenever it is invertible. Ties break on the
    lexicographically smallest (i, j).
    """
    n = len(items)
    candidates = _candidate_pairs(n)
    if not 1 <= k <= len(candidates):
        raise ValidationError(f"k must be in [1, {len(candidates)}], got {k}")
    if tuple(model.item_ids) != tuple(it.id for it in items):
        raise ValidationError("model item ids do not match the item set")
    selected: list[tuple[int, int]] = []
    remaining = list(candidates)
    v = model.n_factors
    objective = math.inf
    for _ in range(k):
        ridge = RIDGE_BOOTSTRAP if len(selected) + 1 <= v else 0.0
        best: tuple[int, int] | None = None
        best_val = math.inf
        for cand in remaining:
            trial = selected + [cand]
            try:
                val = spq_objective(trial, model, ridge=ridge)
            except SingularMatrixError:
                val = spq_objective(trial, model, ridge=RIDGE_BOOTSTRAP)
            if val < best_val - 1e-15:
                best, best_val = cand, val
        assert best is not None
        selected.append(best)
        remaining.remove(best)
        objective = best_val
    try:
        objective = spq_objective(selected, model, ridge=0.0)
    except SingularMatrixError:
        objective = spq_objective(selected, model, ridge=RIDGE_BOOTSTRAP)
    lots = items.items
    return Questionnaire(
        pairs=tuple((lots[i], lots[j]) for i, j in selected),
        provenance="spq",
        objective=float(objective),
    )


def select_pairs_random(items: ItemSet, k: int, seed: int) -> Questionnaire:
    """K distinct unordered pairs drawn uniformly without replacement."""
    n = len(items)
    candidates = _candidate_pairs(n)
    if not 1 <= k <= len(candidates):
        raise ValidationError(f"k must be in [1, {len(candidates)}], got {k}")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(candidates), size=k, replace=False)
    lots = items.items
    return Questionnaire(
        pairs=tuple((lots[candidates[c][0]], lots[candidates[c][1]]) for c in chosen),
        provenance="random",
        objective=None,
    )
