import json
import os
from pathlib import Path

import pytest

import unidomain as ud

DATA = Path(os.environ.get("UNIDOMAIN_TEST_DATA", Path(__file__).resolve().parents[2] / "tests" / "data"))


@pytest.fixture(scope="module")
def blocks():
    return ud.load_domain(DATA / "corpus" / "blocksworld.pddl")


@pytest.fixture(scope="module")
def kitchen():
    return ud.load_domain(DATA / "kitchen" / "domain.pddl")


def test_domain_roundtrip(blocks):
    again = ud.parse_domain(blocks.to_pddl())
    assert again == blocks
    assert "stack" in blocks.operators
    assert blocks.validate() == []


def test_parse_error_is_raised():
    with pytest.raises(ud.PddlError):
        ud.parse_domain("(define (domain x) (:predicates (p ?a)")
    assert issubclass(ud.PddlError, ud.UnidomainError)


def test_plan_and_validate(blocks):
    problem = ud.load_problem(DATA / "corpus" / "bw-p01.pddl", blocks)
    result = ud.plan(blocks, problem)
    assert result["outcome"] == "solved"
    plan = result["plan"]
    assert ud.validate_plan(blocks, problem, plan)["valid"]
    assert ud.optimal_cost(blocks, problem) == plan.cost
    broken = ud.parse_plan("\n".join(plan.steps[1:]))
    if plan.cost > 0:
        assert not ud.validate_plan(blocks, problem, broken)["valid"]


def test_keyframes():
    assert [i for i, _ in ud.extract_keyframes([0, 1, 4, 9, 4, 1, 0], 1)] == [0, 3, 6]
    assert ud.extract_keyframes([1, 2, 3], 1) == [(0, "min"), (2, "max")]
    assert len(ud.frame_energies(DATA / "learn" / "s3")) == 2


def test_filter_domain(kitchen):
    problem = ud.load_problem(DATA / "kitchen" / "gt" / "a4.pddl", kitchen)
    result = ud.filter_domain(kitchen, problem)
    assert result["o_reduced"] == result["o_pre"] | result["o_eff"]
    assert set(result["compact"].operators) == result["o_reduced"]


def test_metrics():
    episodes = [
        {"success": True, "cost": 5, "optimal": 4},
        {"success": False, "cost": 0, "optimal": 3},
    ]
    assert ud.success_rate(episodes) == 0.5
    assert ud.spl(episodes) == pytest.approx(0.4)
    assert ud.or_k(episodes, 0) == 0.0
    assert ud.or_k(episodes, 1) == 0.5
    summary = ud.summarize(episodes)
    assert summary["OR(0)"] <= summary["OR(1)"] <= summary["OR(2)"]
    with pytest.raises(ud.UnidomainError, match="no episodes"):
        ud.spl([])


def test_graph_stats(kitchen):
    stats = ud.graph_stats(kitchen)
    assert stats["operators"] == 13 and stats["predicates"] == 15


def test_fuse_replay(kitchen):
    listing = DATA / "atomic" / "kitchen.txt"
    paths = [listing.parent / line.strip() for line in listing.read_text().splitlines() if line.strip()]
    result = ud.fuse(paths, DATA / "atomic" / "transcript.jsonl", name="kitchen")
    assert result["domain"] == kitchen
    assert result["llm_calls"] == json.loads((DATA / "atomic" / "expected.json").read_text())["kitchen"]["llm_calls"]


def test_plan_task_replay(kitchen):
    result = ud.plan_task(kitchen, DATA / "kitchen" / "a1.json", DATA / "kitchen" / "transcript.jsonl")
    assert result["plan"].steps[0] == "(remove_lid lid)"
    assert len(result["plan"]) == 10
    assert result["trace"]["task_id"] == "a1"


def test_run_suite_replay_is_deterministic(kitchen):
    args = (kitchen, DATA / "kitchen" / "suite.json", DATA / "kitchen" / "transcript.jsonl")
    first = ud.run_suite(*args)
    assert ud.run_suite(*args) == first
    report = json.loads(first)
    assert report["overall"]["SR"] == 1.0
    assert report["overall"]["OR(0)"] == 1.0
    assert ud.run_suite(*args, format="csv").startswith("task_id,")
