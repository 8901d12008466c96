# tests/test_placement.py
import pytest

from src.errors import ConfigurationError, FeasibilityError, ParseError, PlanningError, TemplateError
from src.placement import (
    THREADS_ENV_VAR,
    RunConfig,
    build_launch_command,
    derive_threads,
    expand_sweep,
    hardware_preset,
    plan_from_rows,
)
from src.sweep_config import load_sweep_plan, plan_from_dict

BROADWELL = hardware_preset("broadwell36")
TEMPLATE = "srun --nodes={nodes} --ntasks={total_ranks} {extra_flags} {app}"


@pytest.mark.parametrize("ranks_per_node,threads", [(2, 18), (4, 9), (6, 6), (18, 2), (36, 1)])
def test_fill_policy_gives_one_thread_per_core(ranks_per_node, threads):
    assert derive_threads(36, ranks_per_node) == threads


def test_explicit_threads_are_feasibility_checked():
    assert derive_threads(36, 18, 1) == 1
    with pytest.raises(FeasibilityError):
        derive_threads(36, 4, 10)
    assert derive_threads(36, 4, 10, allow_oversubscription=True) == 10


def test_more_ranks_than_cores_is_infeasible():
    with pytest.raises(FeasibilityError):
        derive_threads(36, 40)


def test_run_config_rejects_oversubscription():
    with pytest.raises(FeasibilityError):
        RunConfig(nodes=1, ranks_per_node=4, threads_per_rank=10)


def test_run_config_binding_feasibility():
    RunConfig(nodes=10, ranks_per_node=2, threads_per_rank=18, cores_per_socket_bind=1)
    with pytest.raises(FeasibilityError):
        RunConfig(nodes=10, ranks_per_node=4, threads_per_rank=9, cores_per_socket_bind=1)


def test_run_config_labels_and_ranks_per_socket():
    c = RunConfig(nodes=5, ranks_per_node=2, threads_per_rank=18, distribution="block")
    assert c.total_ranks == 10
    assert c.ranks_per_socket == 1.0
    assert c.label == "n5_r10_t18_block"
    snap = c.snapshot()
    assert snap["total_ranks"] == 10
    assert snap["ranks_per_socket"] == 1.0
    assert RunConfig(nodes=10, ranks_per_node=18, threads_per_rank=1).ranks_per_socket == 9.0


def test_expand_sweep_table_rows():
    plan = expand_sweep([10], [20, 40, 60], ["default", "round_robin", "block"], BROADWELL)
    assert len(plan.configs) == 9
    assert [c.threads_per_rank for c in plan.configs] == [18] * 3 + [9] * 3 + [6] * 3
    assert [c.distribution for c in plan.configs[:3]] == ["block", "default", "round_robin"]


def test_expand_sweep_is_deterministic_and_duplicate_free():
    a = expand_sweep([10, 1, 10], [20, 2], ["block", "block"], BROADWELL)
    b = expand_sweep([1, 10], [2, 20], ["block"], BROADWELL)
    assert a.configs == b.configs
    assert len({c.label for c in a.configs}) == len(a.configs)


def test_expand_sweep_trivial():
    plan = expand_sweep([1], [2], ["round_robin"], BROADWELL)
    assert len(plan.configs) == 1
    assert plan.configs[0].threads_per_rank == 18


def test_expand_sweep_filters_and_reports_rejections():
    plan = expand_sweep([1, 10], [20], ["default"], BROADWELL)
    # 20 ranks on a single node is fine (20 x 1 thread); 10 nodes gives 2 per node
    assert [(c.nodes, c.threads_per_rank) for c in plan.configs] == [(1, 1), (10, 18)]

    with pytest.raises(PlanningError) as exc:
        expand_sweep([1], [72], ["default"], BROADWELL)
    assert exc.value.rejected


def test_expand_sweep_rejects_unknown_distribution():
    with pytest.raises(ConfigurationError):
        expand_sweep([1], [2], ["scatter"], BROADWELL)


def test_table_rows_from_plan_file(fixtures_dir):
    plan = load_sweep_plan(fixtures_dir / "broadwell36_sweep.json")
    rows = {(c.nodes, c.total_ranks, c.threads_per_rank) for c in plan.configs}
    assert rows == {
        (1, 2, 18), (5, 10, 18), (10, 20, 18), (10, 40, 9),
        (10, 60, 6), (10, 180, 2), (10, 180, 1), (25, 50, 18),
    }
    bound = [c for c in plan.configs if c.cores_per_socket_bind == 1]
    assert len(bound) == 3
    for c in plan.configs:
        assert c.ranks_per_node * c.threads_per_rank <= c.cores_per_node
    assert len({c.label for c in plan.configs}) == len(plan.configs)


def test_plan_from_rows_expands_distributions():
    plan = plan_from_rows(
        [{"nodes": 10, "total_ranks": 180, "threads": 1, "distribution": "round_robin"},
         {"nodes": 1, "total_ranks": 2, "distributions": ["default", "block"], "label": "one"}],
        BROADWELL,
        app="./app",
    )
    assert [c.label for c in plan.configs] == ["n10_r180_t1_round_robin", "one_default", "one_block"]


def test_block_distribution_token_is_exact():
    c = RunConfig(nodes=10, ranks_per_node=2, threads_per_rank=18, distribution="block")
    spec = build_launch_command(c, TEMPLATE, app="cp2k.psmp")
    assert "--distribution=block" in spec.argv
    assert spec.argv[:3] == ("srun", "--nodes=10", "--ntasks=20")


def test_cores_per_socket_token_is_exact():
    c = RunConfig(nodes=10, ranks_per_node=2, threads_per_rank=18, cores_per_socket_bind=1)
    spec = build_launch_command(c, TEMPLATE, app="cp2k.psmp")
    assert "--cores-per-socket=1" in spec.argv


def test_default_distribution_has_no_token():
    c = RunConfig(nodes=10, ranks_per_node=2, threads_per_rank=18)
    spec = build_launch_command(c, TEMPLATE, app="cp2k.psmp -i in.inp")
    assert not any(t.startswith("--distribution") for t in spec.argv)
    assert spec.argv[-3:] == ("cp2k.psmp", "-i", "in.inp")


def test_round_robin_maps_to_cyclic():
    c = RunConfig(nodes=2, ranks_per_node=2, threads_per_rank=18, distribution="round_robin")
    assert "--distribution=cyclic" in build_launch_command(c, TEMPLATE, app="x").argv


def test_thread_env_matches_config_and_command_is_pure(tmp_path):
    c = RunConfig(nodes=10, ranks_per_node=4, threads_per_rank=9)
    a = build_launch_command(c, TEMPLATE, app="x", workdir=str(tmp_path), repetition=2)
    b = build_launch_command(c, TEMPLATE, app="x", workdir=str(tmp_path), repetition=2)
    assert a == b
    assert a.env_dict()[THREADS_ENV_VAR] == "9"
    assert a.expected_log == str(tmp_path / "n10_r40_t9_default_rep2.log")


def test_template_missing_placeholder():
    c = RunConfig(nodes=1, ranks_per_node=2, threads_per_rank=18)
    with pytest.raises(TemplateError):
        build_launch_command(c, "mpirun -n {total_ranks} {app}", app="x")


def test_missing_app_is_a_template_error():
    c = RunConfig(nodes=1, ranks_per_node=2, threads_per_rank=18)
    with pytest.raises(TemplateError):
        build_launch_command(c, TEMPLATE, app="")


def test_plan_file_needs_hardware():
    with pytest.raises(ConfigurationError):
        plan_from_dict({"axes": {"nodes": [1], "total_ranks": [2]}})


def test_plan_file_axes_and_custom_hardware():
    plan = plan_from_dict({
        "hardware": {"tag": "tiny", "cores_per_node": 8, "sockets_per_node": 2},
        "axes": {"nodes": [1, 2], "total_ranks": [4], "distributions": ["block"]},
        "app": "./bench",
        "repetitions": 3,
        "workdir": "out",
    })
    assert [c.threads_per_rank for c in plan.configs] == [2, 4]
    assert plan.repetitions == 3
    assert plan.results_index.endswith("index.jsonl")


def test_plan_file_bad_json(tmp_path):
    p = tmp_path / "plan.json"
    p.write_text('{"hardware_preset": ')
    with pytest.raises(ParseError):
        load_sweep_plan(p)


def test_unknown_preset():
    with pytest.raises(ConfigurationError):
        hardware_preset("epyc128")
    gpu = hardware_preset("cascade40_v100x2")
    assert (gpu.cores_per_socket, gpu.gpus_per_node) == (20, 2)
