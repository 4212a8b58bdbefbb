from typing import Any, AsyncGenerator, Dict

from lab.graph import NODES, ExperimentState, build_pipeline
from lab.schemas import ExperimentConfig


def initial_state(config: ExperimentConfig | dict) -> ExperimentState:
    if isinstance(config, ExperimentConfig):
        raw, parsed = None, config
    else:
        raw, parsed = dict(config), None
    return {
        "raw": raw,
        "config": parsed,
        "results": {},
        "checks": [],
        "draws": 0,
        "error": None,
        "report": None,
        "report_path": None,
        "exit_reason": None,
    }


def run(config: ExperimentConfig | dict) -> ExperimentState:
    """Runs one experiment to completion and returns the final pipeline state."""
    pipeline = build_pipeline()
    return pipeline.invoke(initial_state(config))


async def stream_events(config: ExperimentConfig | dict) -> AsyncGenerator[Dict[str, Any], None]:
    """
    Node progress, per-check results and the final state of one experiment.
    """
    pipeline = build_pipeline()
    async for event in pipeline.astream_events(initial_state(config), version="v2"):
        kind = event["event"]

        if kind == "on_chain_start" and event["name"] in NODES:
            yield {"type": "node_start", "name": event["name"]}
        elif kind == "on_chain_end" and event["name"] in NODES:
            yield {"type": "node_end", "name": event["name"]}

        # The top-level chain end event in v2 carries the final state.
        elif kind == "on_chain_end" and event["name"] == "LangGraph":
            yield {"type": "final_state", "state": event["data"]["output"]}

        elif kind == "on_custom_event":
            if event["name"] == "check":
                yield {"type": "check", **event["data"]}
            elif event["name"] == "report":
                yield {"type": "report", "path": event["data"].get("path")}
