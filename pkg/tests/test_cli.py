from __future__ import annotations

import json

import numpy as np
import pytest
from click.testing import CliRunner

from roboadvisor import dataio
from roboadvisor.cli import main
from roboadvisor.lotteries import build_breakpoints
from roboadvisor.questionnaire import select_pairs_random
from roboadvisor.simulation import (
    answer_questionnaire,
    default_virtual_user,
    simulate_rating_matrix,
)

from test_service import write_returns_csv


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def workdir(tmp_path, items10):
    ratings = simulate_rating_matrix(items10, 25, seed=3)
    dataio.save_ratings(ratings, str(tmp_path / "ratings.csv"))
    write_returns_csv(tmp_path / "returns.csv", days=100, n_assets=3, seed=1)
    dataio.save_item_set(items10, str(tmp_path / "items10.json"))
    questionnaire = select_pairs_random(items10, 6, seed=9)
    answers = answer_questionnaire(default_virtual_user(items10.max_outcome()), questionnaire)
    with open(tmp_path / "questionnaire.json", "w") as fh:
        fh.write(dataio.canonical_json(dataio.questionnaire_to_dict(questionnaire)))
    with open(tmp_path / "answers.json", "w") as fh:
        fh.write(dataio.canonical_json(dataio.answer_sheet_to_dict(answers, "q1")))
    return tmp_path


def test_fit_lfm(runner, workdir):
    out = workdir / "model.json"
    result = runner.invoke(
        main,
        ["fit-lfm", "--ratings", str(workdir / "ratings.csv"),
         "--items", str(workdir / "items10.json"), "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    model = json.loads(out.read_text())
    assert len(model["item_ids"]) == 10
    assert np.isfinite(model["objective"])


def test_gen_questionnaire_spq_and_random(runner, workdir):
    out = workdir / "q_spq.json"
    result = runner.invoke(
        main,
        ["gen-questionnaire", "--items", str(workdir / "items10.json"),
         "--ratings", str(workdir / "ratings.csv"), "--k", "8",
         "--method", "spq", "--out", str(out)],
    )
    assert result.exit_code == 0, result.output
    payload = json.loads(out.read_text())
    assert len(payload["pairs"]) == 8
    assert payload["provenance"] == "spq"
    assert payload["objective"] is not None

    out2 = workdir / "q_rand.json"
    result = runner.invoke(
        main,
        ["gen-questionnaire", "--items", str(workdir / "items10.json"),
         "--k", "5", "--method", "random", "--seed", "4", "--out", str(out2)],
    )
    assert result.exit_code == 0
    assert len(json.loads(out2.read_text())["pairs"]) == 5


def test_gen_questionnaire_spq_needs_ratings(runner, workdir):
    result = runner.invoke(
        main,
        ["gen-questionnaire", "--items", str(workdir / "items10.json"),
         "--k", "4", "--method", "spq", "--out", str(workdir / "x.json")],
    )
    assert result.exit_code == 2


def test_elicit_distance_portfolio_backtest(runner, workdir):
    out_dir = workdir / "elicited"
    result = runner.invoke(
        main,
        ["elicit", "--items", str(workdir / "items10.json"),
         "--questionnaire", str(workdir / "questionnaire.json"),
         "--answers", str(workdir / "answers.json"),
         "--out-dir", str(out_dir)],
    )
    assert result.exit_code == 0, result.output
    for name in ("pessimistic", "optimistic", "neutral"):
        assert (out_dir / f"utility_{name}.json").exists()
    analytics = json.loads((out_dir / "analytics.json").read_text())
    assert {a["estimator"] for a in analytics} == {"pessimistic", "optimistic", "neutral"}

    # distance of a utility to itself is zero
    u_path = str(out_dir / "utility_neutral.json")
    result = runner.invoke(main, ["distance", "--u", u_path, "--v", u_path])
    assert result.exit_code == 0
    assert float(result.output.strip()) == pytest.approx(0.0, abs=1e-12)

    # socp route agrees
    result = runner.invoke(
        main,
        ["distance", "--u", str(out_dir / "utility_pessimistic.json"),
         "--v", str(out_dir / "utility_optimistic.json"), "--method", "socp",
         "--out", str(workdir / "d.json")],
    )
    assert result.exit_code == 0
    socp_val = json.loads((workdir / "d.json").read_text())["value"]
    result = runner.invoke(
        main,
        ["distance", "--u", str(out_dir / "utility_pessimistic.json"),
         "--v", str(out_dir / "utility_optimistic.json")],
    )
    assert float(result.output.strip()) == pytest.approx(socp_val, abs=1e-4)

    # portfolio on the trailing window
    result = runner.invoke(
        main,
        ["portfolio", "--utility", u_path, "--returns", str(workdir / "returns.csv"),
         "--budget", "10000", "--out", str(workdir / "portfolio.json")],
    )
    assert result.exit_code == 0, result.output
    body = json.loads((workdir / "portfolio.json").read_text())
    assert sum(body["allocation"]) == pytest.approx(10_000.0, abs=1e-3)

    # backtest across two estimators
    result = runner.invoke(
        main,
        ["backtest", "--returns", str(workdir / "returns.csv"),
         "--utility", f"neutral={u_path}",
         "--utility", f"pessimistic={out_dir / 'utility_pessimistic.json'}",
         "--window", "30", "--hold", "7",
         "--out", str(workdir / "wealth.csv")],
    )
    assert result.exit_code == 0, result.output
    lines = (workdir / "wealth.csv").read_text().strip().splitlines()
    assert lines[0] == "date,estimator,wealth"
    assert len(lines) > 1


def test_seeded_outputs_are_byte_identical(runner, workdir):
    args = ["gen-questionnaire", "--items", str(workdir / "items10.json"),
            "--k", "4", "--method", "random", "--seed", "11"]
    out1, out2 = workdir / "a.json", workdir / "b.json"
    assert runner.invoke(main, args + ["--out", str(out1)]).exit_code == 0
    assert runner.invoke(main, args + ["--out", str(out2)]).exit_code == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_simulate_spq_vs_random_small(runner, workdir):
    out_dir = workdir / "sim"
    result = runner.invoke(
        main,
        ["simulate", "spq-vs-random", "--items", str(workdir / "items10.json"),
         "--k", "3", "--reps", "1", "--seed", "0", "--out-dir", str(out_dir)],
    )
    assert result.exit_code == 0, result.output
    raw = (out_dir / "spq_vs_random_raw.csv").read_text().strip().splitlines()
    assert raw[0] == "estimator,method,K,repetition,distance"
    assert len(raw) == 7


def test_validation_exit_codes(runner, workdir):
    result = runner.invoke(
        main,
        ["elicit", "--items", str(workdir / "missing.json"),
         "--questionnaire", str(workdir / "questionnaire.json"),
         "--answers", str(workdir / "answers.json"), "--out-dir", str(workdir / "o")],
    )
    assert result.exit_code == 2
    result = runner.invoke(
        main,
        ["gen-questionnaire", "--items", str(workdir / "items10.json"),
         "--k", "999", "--method", "random", "--out", str(workdir / "x.json")],
    )
    assert result.exit_code == 2
