"""
The experiment pipeline as a LangGraph state machine:

    validate -> execute -> assess -> report

Every path ends with an `exit_reason`. A config error stops after `validate`
and writes no report.
"""

import asyncio
import logging
from typing import Literal, Optional, TypedDict

from langchain_core.callbacks.manager import adispatch_custom_event
from langchain_core.runnables import RunnableLambda
from langgraph.graph import END, StateGraph

from lab.exceptions import BudgetExhaustedError, ConfigError
from lab.experiments import COMMANDS, Budget, ExperimentContext
from lab.reporting import build_report, write_report
from lab.schemas import ExperimentConfig, parse_config
from parabolic.exceptions import ToolkitError

logger = logging.getLogger(__name__)

ExitReason = Literal[
    "COMPLETED",
    "CHECK_FAILED",
    "BUDGET_EXHAUSTED",
    "TOOLKIT_ERROR",
    "CONFIG_ERROR",
]

EXIT_CODES: dict[str, int] = {
    "COMPLETED": 0,
    "CHECK_FAILED": 1,
    "BUDGET_EXHAUSTED": 1,
    "TOOLKIT_ERROR": 1,
    "CONFIG_ERROR": 2,
}

NODES = ("validate", "execute", "assess", "report")


class ExperimentState(TypedDict):
    raw: Optional[dict]
    config: Optional[ExperimentConfig]
    results: dict
    checks: list[dict]
    draws: int
    error: Optional[str]
    report: Optional[dict]
    report_path: Optional[str]
    exit_reason: Optional[ExitReason]


def validate_node(state: ExperimentState) -> dict:
    if state.get("config") is not None:
        return {}
    try:
        return {"config": parse_config(state.get("raw") or {})}
    except ConfigError as e:
        return {"error": e.detail, "exit_reason": "CONFIG_ERROR"}


def has_config(state: ExperimentState) -> bool:
    return state.get("exit_reason") != "CONFIG_ERROR"


def execute_node(state: ExperimentState) -> dict:
    config = state["config"]
    ctx = ExperimentContext(config, Budget(config.budget))
    update: dict = {}
    try:
        COMMANDS[config.command](ctx)
    except BudgetExhaustedError as e:
        logger.warning("%s: %s", config.command, e.detail)
        update = {"error": e.detail, "exit_reason": "BUDGET_EXHAUSTED"}
    except ToolkitError as e:
        logger.error("%s failed: %s", config.command, e)
        update = {"error": str(e), "exit_reason": "TOOLKIT_ERROR"}
    return {"results": ctx.results, "checks": ctx.checks, "draws": ctx.budget.used, **update}


async def execute_node_async(state: ExperimentState) -> dict:
    update = await asyncio.to_thread(execute_node, state)
    for check in update["checks"]:
        await adispatch_custom_event("check", check)
    return update


def assess_node(state: ExperimentState) -> dict:
    if state.get("exit_reason") is not None:
        return {}
    failed = [c["name"] for c in state["checks"] if not c["passed"]]
    if failed:
        logger.info("failed checks: %s", ", ".join(failed))
        return {"exit_reason": "CHECK_FAILED"}
    return {"exit_reason": "COMPLETED"}


def report_node(state: ExperimentState) -> dict:
    report = build_report(state)
    path = write_report(report, state["config"].out)
    logger.info("report written to %s", path)
    return {"report": report, "report_path": str(path)}


async def report_node_async(state: ExperimentState) -> dict:
    update = await asyncio.to_thread(report_node, state)
    await adispatch_custom_event("report", {"path": update["report_path"]})
    return update


def build_pipeline():
    graph = StateGraph(ExperimentState)

    graph.add_node("validate", RunnableLambda(func=validate_node))
    graph.add_node("execute", RunnableLambda(func=execute_node, afunc=execute_node_async))
    graph.add_node("assess", RunnableLambda(func=assess_node))
    graph.add_node("report", RunnableLambda(func=report_node, afunc=report_node_async))

    graph.set_entry_point("validate")
    graph.add_conditional_edges(
        "validate",
        has_config,
        {True: "execute", False: END},
    )
    graph.add_edge("execute", "assess")
    graph.add_edge("assess", "report")
    graph.add_edge("report", END)
    return graph.compile()
