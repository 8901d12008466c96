# src/placement.py
from __future__ import annotations

import itertools
import shlex
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from src.errors import ConfigurationError, FeasibilityError, PlanningError, TemplateError


DISTRIBUTIONS: Tuple[str, ...] = ("default", "round_robin", "block")
THREADS_ENV_VAR = "OMP_NUM_THREADS"

TEMPLATE_PLACEHOLDERS: Tuple[str, ...] = ("{nodes}", "{total_ranks}", "{extra_flags}", "{app}")
DEFAULT_TEMPLATE = "srun --nodes={nodes} --ntasks={total_ranks} {extra_flags} {app}"

# Launcher spellings. Round robin has no documented flag of its own; cyclic is Slurm's name for it.
DISTRIBUTION_FLAGS: Dict[str, Optional[str]] = {
    "default": None,
    "round_robin": "--distribution=cyclic",
    "block": "--distribution=block",
}

ThreadPolicy = Union[str, int]  # "fill" or an explicit thread count


# ----------------------------
# Hardware
# ----------------------------

@dataclass(frozen=True)
class Hardware:
    tag: str
    cores_per_node: int
    sockets_per_node: int
    gpus_per_node: int = 0

    def __post_init__(self) -> None:
        if self.cores_per_node < 1 or self.sockets_per_node < 1:
            raise ConfigurationError(f"{self.tag}: cores and sockets per node must be >= 1")
        if self.cores_per_node % self.sockets_per_node:
            raise ConfigurationError(f"{self.tag}: cores_per_node must divide evenly across sockets")

    @property
    def cores_per_socket(self) -> int:
        return self.cores_per_node // self.sockets_per_node


HARDWARE_PRESETS: Dict[str, Hardware] = {
    "broadwell36": Hardware("broadwell36", cores_per_node=36, sockets_per_node=2),
    "broadwell24": Hardware("broadwell24", cores_per_node=24, sockets_per_node=2),
    "haswell20_v100": Hardware("haswell20_v100", cores_per_node=20, sockets_per_node=2, gpus_per_node=1),
    "cascade40_v100x2": Hardware("cascade40_v100x2", cores_per_node=40, sockets_per_node=2, gpus_per_node=2),
}


def hardware_preset(name: str) -> Hardware:
    try:
        return HARDWARE_PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown hardware preset {name!r}; known: {sorted(HARDWARE_PRESETS)}")


# ----------------------------
# Run configuration
# ----------------------------

@dataclass(frozen=True)
class RunConfig:
    nodes: int
    ranks_per_node: int
    threads_per_rank: int
    distribution: str = "default"
    cores_per_socket_bind: Optional[int] = None
    cores_per_node: int = 36
    sockets_per_node: int = 2
    label: str = ""
    hardware_tag: str = ""
    allow_oversubscription: bool = False
    app: Optional[str] = None  # per-run override of the plan's application command

    def __post_init__(self) -> None:
        for name in ("nodes", "ranks_per_node", "threads_per_rank", "cores_per_node", "sockets_per_node"):
            if getattr(self, name) < 1:
                raise FeasibilityError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.distribution not in DISTRIBUTIONS:
            raise ConfigurationError(f"unknown distribution {self.distribution!r}; expected one of {DISTRIBUTIONS}")

        used = self.ranks_per_node * self.threads_per_rank
        if used > self.cores_per_node and not self.allow_oversubscription:
            raise FeasibilityError(
                f"{self.ranks_per_node} ranks x {self.threads_per_rank} threads = {used} "
                f"exceeds {self.cores_per_node} cores per node"
            )

        if self.cores_per_socket_bind is not None:
            if self.cores_per_socket_bind < 1:
                raise FeasibilityError("cores_per_socket_bind must be >= 1")
            if self.ranks_per_node > self.sockets_per_node * self.cores_per_socket_bind:
                raise FeasibilityError(
                    f"{self.ranks_per_node} ranks per node cannot be bound with "
                    f"--cores-per-socket={self.cores_per_socket_bind} on {self.sockets_per_node} sockets"
                )

        if not self.label:
            object.__setattr__(self, "label", self.default_label())

    @property
    def total_ranks(self) -> int:
        return self.nodes * self.ranks_per_node

    @property
    def ranks_per_socket(self) -> float:
        return self.ranks_per_node / self.sockets_per_node

    def default_label(self) -> str:
        label = f"n{self.nodes}_r{self.total_ranks}_t{self.threads_per_rank}_{self.distribution}"
        if self.cores_per_socket_bind is not None:
            label += f"_cps{self.cores_per_socket_bind}"
        return label

    def snapshot(self) -> Dict[str, Any]:
        out = asdict(self)
        out["total_ranks"] = self.total_ranks
        out["ranks_per_socket"] = self.ranks_per_socket
        return out


def derive_threads(
    cores_per_node: int,
    ranks_per_node: int,
    policy: ThreadPolicy = "fill",
    *,
    allow_oversubscription: bool = False,
) -> int:
    """One thread per core under "fill"; an explicit count is feasibility-checked."""
    if ranks_per_node < 1:
        raise FeasibilityError(f"ranks_per_node must be >= 1, got {ranks_per_node}")
    if ranks_per_node > cores_per_node and not allow_oversubscription:
        raise FeasibilityError(f"{ranks_per_node} ranks per node exceed {cores_per_node} cores")

    if policy == "fill":
        return max(1, cores_per_node // ranks_per_node)

    if isinstance(policy, bool) or not isinstance(policy, int):
        raise ConfigurationError(f"thread policy must be 'fill' or an integer, got {policy!r}")
    if policy < 1:
        raise FeasibilityError(f"explicit thread count must be >= 1, got {policy}")
    if ranks_per_node * policy > cores_per_node and not allow_oversubscription:
        raise FeasibilityError(
            f"{ranks_per_node} ranks x {policy} threads oversubscribes {cores_per_node} cores"
        )
    return policy


# ----------------------------
# Plans
# ----------------------------

@dataclass(frozen=True)
class SweepPlan:
    configs: Tuple[RunConfig, ...]
    repetitions: int = 1
    command_template: str = DEFAULT_TEMPLATE
    app: str = ""
    workdir: str = "runs"
    results_index: str = "runs/index.jsonl"
    hardware: Optional[Hardware] = None

    def __post_init__(self) -> None:
        if not self.configs:
            raise PlanningError("sweep plan has no configurations")
        if self.repetitions < 1:
            raise ConfigurationError(f"repetitions must be >= 1, got {self.repetitions}")
        check_template(self.command_template)


def _make_config(
    hardware: Hardware,
    nodes: int,
    total_ranks: int,
    distribution: str,
    threads: ThreadPolicy,
    cores_per_socket_bind: Optional[int],
    allow_oversubscription: bool,
    label: str = "",
    app: Optional[str] = None,
) -> RunConfig:
    if nodes < 1:
        raise FeasibilityError(f"nodes must be >= 1, got {nodes}")
    if total_ranks < nodes or total_ranks % nodes:
        raise FeasibilityError(f"{total_ranks} ranks do not divide evenly over {nodes} nodes")
    ranks_per_node = total_ranks // nodes
    tpr = derive_threads(
        hardware.cores_per_node,
        ranks_per_node,
        threads,
        allow_oversubscription=allow_oversubscription,
    )
    return RunConfig(
        nodes=nodes,
        ranks_per_node=ranks_per_node,
        threads_per_rank=tpr,
        distribution=distribution,
        cores_per_socket_bind=cores_per_socket_bind,
        cores_per_node=hardware.cores_per_node,
        sockets_per_node=hardware.sockets_per_node,
        label=label,
        hardware_tag=hardware.tag,
        allow_oversubscription=allow_oversubscription,
        app=app,
    )


def expand_sweep(
    nodes: Sequence[int],
    total_ranks: Sequence[int],
    distributions: Sequence[str],
    hardware: Hardware,
    repetitions: int = 1,
    *,
    threads: ThreadPolicy = "fill",
    cores_per_socket_bind: Optional[int] = None,
    allow_oversubscription: bool = False,
    command_template: str = DEFAULT_TEMPLATE,
    app: str = "",
    workdir: str = "runs",
    results_index: Optional[str] = None,
) -> SweepPlan:
    """
    Cartesian product of the axes, filtered by placement feasibility.

    Ordering is lexicographic by (nodes, total ranks, distribution name).
    """
    if not nodes or not total_ranks or not distributions:
        raise PlanningError("every sweep axis needs at least one value")
    unknown = [d for d in distributions if d not in DISTRIBUTIONS]
    if unknown:
        raise ConfigurationError(f"unknown distribution(s): {unknown}")

    configs: List[RunConfig] = []
    rejected: List[Tuple[str, str]] = []
    for n, r, d in itertools.product(sorted(set(nodes)), sorted(set(total_ranks)), sorted(set(distributions))):
        try:
            configs.append(
                _make_config(hardware, n, r, d, threads, cores_per_socket_bind, allow_oversubscription)
            )
        except FeasibilityError as e:
            rejected.append((f"nodes={n} ranks={r} {d}", str(e)))

    if not configs:
        raise PlanningError("no feasible configuration in sweep", rejected)

    return SweepPlan(
        configs=tuple(configs),
        repetitions=repetitions,
        command_template=command_template,
        app=app,
        workdir=workdir,
        results_index=results_index or str(Path(workdir) / "index.jsonl"),
        hardware=hardware,
    )


def configs_from_rows(
    rows: Iterable[Mapping[str, Any]],
    hardware: Hardware,
    *,
    cores_per_socket_bind: Optional[int] = None,
    allow_oversubscription: bool = False,
) -> List[RunConfig]:
    """
    Explicit sweep rows: {nodes, total_ranks, threads?, distribution(s), cores_per_socket_bind?, label?, app?}.

    A row naming several distributions expands to one config per distribution.
    """
    out: List[RunConfig] = []
    for i, row in enumerate(rows):
        try:
            nodes = int(row["nodes"])
            ranks = int(row["total_ranks"])
        except (KeyError, TypeError, ValueError):
            raise ConfigurationError(f"run row {i} needs integer 'nodes' and 'total_ranks'")
        dists = row.get("distributions", row.get("distribution", "default"))
        if isinstance(dists, str):
            dists = [dists]
        threads = row.get("threads", "fill")
        bind = row.get("cores_per_socket_bind", cores_per_socket_bind)
        for d in dists:
            label = row.get("label", "")
            if label and len(dists) > 1:
                label = f"{label}_{d}"
            out.append(
                _make_config(
                    hardware,
                    nodes,
                    ranks,
                    d,
                    threads,
                    bind,
                    bool(row.get("allow_oversubscription", allow_oversubscription)),
                    label=label,
                    app=row.get("app"),
                )
            )
    return out


def plan_from_rows(
    rows: Iterable[Mapping[str, Any]],
    hardware: Hardware,
    repetitions: int = 1,
    *,
    command_template: str = DEFAULT_TEMPLATE,
    app: str = "",
    workdir: str = "runs",
    results_index: Optional[str] = None,
    cores_per_socket_bind: Optional[int] = None,
    allow_oversubscription: bool = False,
) -> SweepPlan:
    configs = configs_from_rows(
        rows,
        hardware,
        cores_per_socket_bind=cores_per_socket_bind,
        allow_oversubscription=allow_oversubscription,
    )
    return SweepPlan(
        configs=tuple(configs),
        repetitions=repetitions,
        command_template=command_template,
        app=app,
        workdir=workdir,
        results_index=results_index or str(Path(workdir) / "index.jsonl"),
        hardware=hardware,
    )


# ----------------------------
# Launch commands
# ----------------------------

@dataclass(frozen=True)
class LaunchSpec:
    argv: Tuple[str, ...]
    env: Tuple[Tuple[str, str], ...]
    expected_log: str

    @property
    def command_line(self) -> str:
        return shlex.join(self.argv)

    def env_dict(self) -> Dict[str, str]:
        return dict(self.env)


def check_template(template: str) -> None:
    missing = [p for p in TEMPLATE_PLACEHOLDERS if p not in template]
    if missing:
        raise TemplateError(f"command template lacks placeholder(s): {' '.join(missing)}")


def placement_flags(config: RunConfig) -> List[str]:
    flags: List[str] = []
    dist_flag = DISTRIBUTION_FLAGS[config.distribution]
    if dist_flag:
        flags.append(dist_flag)
    if config.cores_per_socket_bind is not None:
        flags.append(f"--cores-per-socket={config.cores_per_socket_bind}")
    return flags


def build_launch_command(
    config: RunConfig,
    template: str = DEFAULT_TEMPLATE,
    *,
    app: str = "",
    workdir: str = "runs",
    repetition: int = 1,
) -> LaunchSpec:
    check_template(template)
    app_cmd = config.app or app
    if not app_cmd.strip():
        raise TemplateError(f"{config.label}: no application command to substitute for {{app}}")

    rendered = (
        template.replace("{nodes}", str(config.nodes))
        .replace("{total_ranks}", str(config.total_ranks))
        .replace("{extra_flags}", " ".join(placement_flags(config)))
        .replace("{app}", app_cmd)
    )
    try:
        argv = tuple(shlex.split(rendered))
    except ValueError as e:
        raise TemplateError(f"cannot tokenize command {rendered!r}: {e}")
    if not argv:
        raise TemplateError("rendered command is empty")

    return LaunchSpec(
        argv=argv,
        env=((THREADS_ENV_VAR, str(config.threads_per_rank)),),
        expected_log=str(Path(workdir) / f"{config.label}_rep{repetition}.log"),
    )
