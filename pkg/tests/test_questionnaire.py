from __future__ import annotations

import numpy as np
import pytest

from roboadvisor.errors import SingularMatrixError, ValidationError
from roboadvisor.questionnaire import (
    LfmConfig,
    Questionnaire,
    RatingsMatrix,
    fit_lfm,
    select_pairs_random,
    select_pairs_spq,
    spq_objective,
)


def dense_ratings(matrix: np.ndarray) -> RatingsMatrix:
    m, n = matrix.shape
    entries = [
        (f"u{u}", f"i{i}", float(matrix[u, i])) for u in range(m) for i in range(n)
    ]
    return RatingsMatrix.from_entries(entries)


def gauss_jordan_inverse(a: list[list[float]]) -> list[list[float]]:
    """Independent dense inverse used as the oracle for the trace criterion."""
    n = len(a)
    aug = [list(row) + [1.0 if i == j else 0.0 for j in range(n)] for i, row in enumerate(a)]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(aug[r][col]))
        aug[col], aug[pivot] = aug[pivot], aug[col]
        scale = aug[col][col]
        aug[col] = [x / scale for x in aug[col]]
        for r in range(n):
            if r != col:
                factor = aug[r][col]
                aug[r] = [x - factor * y for x, y in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


class TestRatingsMatrix:
    def test_rejects_out_of_range(self):
        with pytest.raises(ValidationError):
            dense_ratings(np.array([[11.0]]))

    def test_rejects_duplicates(self):
        with pytest.raises(ValidationError):
            RatingsMatrix.from_entries([("u", "i", 1.0), ("u", "i", 2.0)])

    def test_rejects_empty(self):
        with pytest.raises(ValidationError):
            RatingsMatrix.from_entries([])

    def test_rejects_unknown_item_when_aligned(self):
        with pytest.raises(ValidationError):
            RatingsMatrix.from_entries([("u", "mystery", 5.0)], item_ids=("i1",))


class TestFitLfm:
    def test_constant_matrix_shrinks_parameters(self):
        ratings = dense_ratings(np.full((6, 5), 7.0))
        model = fit_lfm(ratings, LfmConfig(lam_users=1.0, lam_items=1.0, rng_seed=0))
        assert model.mu == pytest.approx(7.0)
        assert np.linalg.norm(model.item_bias) <= 1e-6
        assert np.linalg.norm(model.user_bias) <= 1e-6
        assert np.linalg.norm(model.item_factors) <= 1e-6
        assert np.linalg.norm(model.user_factors) <= 1e-6

    def test_single_entry(self):
        model = fit_lfm(RatingsMatrix.from_entries([("u", "i", 7.0)]))
        assert model.mu == pytest.approx(7.0)
        assert model.objective == pytest.approx(0.0, abs=1e-12)

    def test_generate_then_recover(self):
        # synthesize noiseless rank-2 ratings and require near-exact recovery
        rng = np.random.default_rng(8)
        m, n, v = 40, 12, 2
        p = 0.5 * rng.standard_normal((n, v))
        q = 0.5 * rng.standard_normal((m, v))
        b = 0.2 * rng.standard_normal(n)
        s = 0.2 * rng.standard_normal(m)
        mu = 5.0
        table = mu + b[None, :] + s[:, None] + q @ p.T
        table = np.clip(table, 0.0, 10.0)
        ratings = dense_ratings(table)
        model = fit_lfm(
            ratings,
            LfmConfig(n_factors=v, lam_users=1e-8, lam_items=1e-8, max_iters=500, rng_seed=1),
        )
        pred = (
            model.mu
            + model.item_bias[None, :]
            + model.user_bias[:, None]
            + model.user_factors @ model.item_factors.T
        )
        rmse = float(np.sqrt(np.mean((pred - table) ** 2)))
        assert rmse <= 1e-3

    def test_objective_monotone_in_pass_count(self):
        rng = np.random.default_rng(3)
        ratings = dense_ratings(rng.uniform(0, 10, size=(15, 8)))
        objectives = [
            fit_lfm(ratings, LfmConfig(max_iters=k, tol=1e-16, rng_seed=5)).objective
            for k in (1, 2, 3, 5, 8)
        ]
        for earlier, later in zip(objectives, objectives[1:]):
            assert later <= earlier + 1e-9

    def test_missing_entries_are_dropped(self):
        # a user with a single rating contributes one residual, not n
        entries = [("u0", "i0", 2.0), ("u0", "i1", 8.0), ("u1", "i0", 4.0)]
        model = fit_lfm(RatingsMatrix.from_entries(entries))
        assert np.isfinite(model.objective)


def toy_model(diffs: np.ndarray, item_ids: tuple[str, ...]) -> "object":
    """LfmModel stand-in built directly from item factors."""
    from roboadvisor.questionnaire import LfmModel

    n, v = diffs.shape
    return LfmModel(
        mu=0.0,
        item_bias=np.zeros(n),
        user_bias=np.zeros(1),
        item_factors=diffs,
        user_factors=np.zeros((1, v)),
        objective=0.0,
        item_ids=item_ids,
    )


class TestSpqObjective:
    def test_scalar_case(self):
        model = toy_model(np.array([[2.0], [0.0]]), ("a", "b"))
        assert spq_objective([(0, 1)], model) == pytest.approx(0.25)

    def test_identity_gram(self):
        factors = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]])
        model = toy_model(factors, ("a", "b", "c"))
        assert spq_objective([(0, 1), (2, 1)], model) == pytest.approx(2.0)

    def test_matches_gauss_jordan_oracle(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            factors = rng.standard_normal((6, 2))
            model = toy_model(factors, tuple(f"i{k}" for k in range(6)))
            pairs = [(0, 1), (2, 3), (4, 5)]
            d = np.stack([factors[i] - factors[j] for i, j in pairs], axis=1)
            gram = (d @ d.T).tolist()
            inv = gauss_jordan_inverse(gram)
            oracle = sum(inv[k][k] for k in range(2))
            assert spq_objective(pairs, model) == pytest.approx(oracle, abs=1e-10)

    def test_invariant_to_order_and_swap(self):
        rng = np.random.default_rng(4)
        factors = rng.standard_normal((5, 2))
        model = toy_model(factors, tuple(f"i{k}" for k in range(5)))
        pairs = [(0, 1), (2, 3)]
        base = spq_objective(pairs, model)
        assert spq_objective(list(reversed(pairs)), model) == pytest.approx(base)
        assert spq_objective([(1, 0), (3, 2)], model) == pytest.approx(base)

    def test_singularity_error(self):
        model = toy_model(np.array([[1.0, 0.0], [0.0, 0.0]]), ("a", "b"))
        with pytest.raises(SingularMatrixError):
            spq_objective([(0, 1)], model)  # rank 1 < v = 2
        # a ridge resolves it
        assert spq_objective([(0, 1)], model, ridge=1e-6) > 0


def items_with_ids(ids):
    from roboadvisor.lotteries import ItemSet, Lottery

    lots = tuple(
        Lottery(id=i, label=i, outcomes=((float(k + 1), 1.0),))
        for k, i in enumerate(ids)
    )
    return ItemSet(items=lots, name="toy")


class TestSelectPairs:
    def test_k1_v1_maximizes_squared_difference(self):
        factors = np.array([[0.0], [1.0], [5.0], [2.0]])
        ids = ("a", "b", "c", "d")
        model = toy_model(factors, ids)
        items = items_with_ids(ids)
        questionnaire = select_pairs_spq(model, items, 1)
        chosen = {questionnaire.pairs[0][0].id, questionnaire.pairs[0][1].id}
        assert chosen == {"a", "c"}  # difference 5 is the largest
        assert questionnaire.objective == pytest.approx(1.0 / 25.0)

    def test_greedy_matches_exhaustive_for_v1(self):
        from itertools import combinations

        rng = np.random.default_rng(10)
        for _ in range(5):
            factors = rng.standard_normal((4, 1))
            ids = tuple(f"i{k}" for k in range(4))
            model = toy_model(factors, ids)
            items = items_with_ids(ids)
            questionnaire = select_pairs_spq(model, items, 2)
            all_pairs = [(i, j) for i in range(4) for j in range(i + 1, 4)]
            best = min(
                spq_objective(list(subset), model)
                for subset in combinations(all_pairs, 2)
                if not np.isclose(
                    sum((factors[i] - factors[j]) ** 2 for i, j in subset), 0.0
                )
            )
            assert questionnaire.objective == pytest.approx(best, rel=1e-9)

    def test_greedy_objective_monotone_along_prefix(self, items20):
        from roboadvisor.simulation import simulate_rating_matrix

        ratings = simulate_rating_matrix(items20, 50, seed=2)
        model = fit_lfm(ratings)
        questionnaire = select_pairs_spq(model, items20, 10)
        index = {it.id: k for k, it in enumerate(items20.items)}
        pairs = [(index[a.id], index[b.id]) for a, b in questionnaire.pairs]
        v = model.n_factors
        # adding a pair adds a positive-semidefinite rank-one update, so the
        # trace of the (ridged) inverse can only go down
        prev = None
        for t in range(v + 1, len(pairs) + 1):
            val = spq_objective(pairs[:t], model, ridge=1e-6)
            if prev is not None:
                assert val <= prev + 1e-9
            prev = val

    def test_random_selection(self, items20):
        ids2 = ("a", "b")
        items2 = items_with_ids(ids2)
        only = select_pairs_random(items2, 1, seed=0)
        assert {only.pairs[0][0].id, only.pairs[0][1].id} == {"a", "b"}
        q1 = select_pairs_random(items20, 8, seed=42)
        q2 = select_pairs_random(items20, 8, seed=42)
        assert [(a.id, b.id) for a, b in q1.pairs] == [(a.id, b.id) for a, b in q2.pairs]
        full = select_pairs_random(items20, 190, seed=7)
        assert len(full) == 190

    def test_k_out_of_range(self, items20):
        with pytest.raises(ValidationError):
            select_pairs_random(items20, 191, seed=0)
        with pytest.raises(ValidationError):
            select_pairs_random(items20, 0, seed=0)

    def test_questionnaire_rejects_duplicates(self, items20):
        a, b = items20.items[0], items20.items[1]
        with pytest.raises(ValidationError):
            Questionnaire(pairs=((a, b), (b, a)), provenance="spq")
        with pytest.raises(ValidationError):
            Questionnaire(pairs=((a, a),), provenance="spq")
