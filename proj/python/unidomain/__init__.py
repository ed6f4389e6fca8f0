"""PDDL domain learning from demonstrations, domain fusion and task planning."""

from ._core import (
    Domain,
    PddlError,
    Plan,
    Problem,
    UnidomainError,
    extract_keyframes,
    filter_domain,
    frame_energies,
    fuse,
    graph_stats,
    load_domain,
    load_problem,
    optimal_cost,
    or_k,
    parse_domain,
    parse_plan,
    parse_problem,
    plan,
    plan_task,
    run_suite,
    spl,
    success_rate,
    summarize,
    validate_plan,
)

__all__ = [
    "Domain",
    "PddlError",
    "Plan",
    "Problem",
    "UnidomainError",
    "extract_keyframes",
    "filter_domain",
    "frame_energies",
    "fuse",
    "graph_stats",
    "load_domain",
    "load_problem",
    "optimal_cost",
    "or_k",
    "parse_domain",
    "parse_plan",
    "parse_problem",
    "plan",
    "plan_task",
    "run_suite",
    "spl",
    "success_rate",
    "summarize",
    "validate_plan",
]
