# src/sweep_config.py
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Union

from src.errors import ConfigurationError, ParseError
from src.placement import (
    DEFAULT_TEMPLATE,
    Hardware,
    RunConfig,
    SweepPlan,
    configs_from_rows,
    expand_sweep,
    hardware_preset,
)


def _load_hardware(obj: Dict[str, Any]) -> Hardware:
    if "hardware_preset" in obj:
        return hardware_preset(str(obj["hardware_preset"]))
    hw = obj.get("hardware")
    if not isinstance(hw, dict):
        raise ConfigurationError("sweep plan needs 'hardware' or 'hardware_preset'")
    try:
        return Hardware(
            tag=str(hw.get("tag", "custom")),
            cores_per_node=int(hw["cores_per_node"]),
            sockets_per_node=int(hw["sockets_per_node"]),
            gpus_per_node=int(hw.get("gpus_per_node", 0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigurationError(f"bad hardware block: {e}")


def plan_from_dict(obj: Dict[str, Any]) -> SweepPlan:
    """
    Build a SweepPlan from a plan document.

    Keys: hardware | hardware_preset, axes {nodes, total_ranks, distributions, threads},
    runs [rows], cores_per_socket_bind, allow_oversubscription, template, app,
    repetitions, workdir, results_index.
    """
    hardware = _load_hardware(obj)
    bind = obj.get("cores_per_socket_bind")
    oversub = bool(obj.get("allow_oversubscription", False))
    template = str(obj.get("template", DEFAULT_TEMPLATE))
    app = str(obj.get("app", ""))
    repetitions = int(obj.get("repetitions", 1))

    workdir = Path(obj.get("workdir", "runs"))
    index = Path(obj.get("results_index", workdir / "index.jsonl"))

    configs: List[RunConfig] = []
    axes = obj.get("axes")
    if axes:
        expanded = expand_sweep(
            axes.get("nodes", []),
            axes.get("total_ranks", []),
            axes.get("distributions", ["default"]),
            hardware,
            threads=axes.get("threads", "fill"),
            cores_per_socket_bind=bind,
            allow_oversubscription=oversub,
            command_template=template,
            app=app,
        )
        configs.extend(expanded.configs)
    if obj.get("runs"):
        configs.extend(
            configs_from_rows(obj["runs"], hardware, cores_per_socket_bind=bind, allow_oversubscription=oversub)
        )
    if not configs:
        raise ConfigurationError("sweep plan needs 'axes' or 'runs'")

    # de-duplicate by label, first occurrence wins
    seen = set()
    unique: List[RunConfig] = []
    for c in configs:
        if c.label in seen:
            continue
        seen.add(c.label)
        unique.append(c)

    return SweepPlan(
        configs=tuple(unique),
        repetitions=repetitions,
        command_template=template,
        app=app,
        workdir=str(workdir),
        results_index=str(index),
        hardware=hardware,
    )


def load_sweep_plan(path: Union[str, Path]) -> SweepPlan:
    p = Path(path)
    try:
        obj = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"{p}: {e.msg}", line_number=e.lineno)
    if not isinstance(obj, dict):
        raise ConfigurationError(f"{p}: sweep plan must be a JSON object")
    return plan_from_dict(obj)
