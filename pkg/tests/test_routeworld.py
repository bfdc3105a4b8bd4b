"""Tests for the synthetic road world, candidate recall, behavior and dataset files."""

import json

import pytest

from scasrec.core.config import ModelConfig
from scasrec.core.errors import ConfigError, ContractError, DatasetParseError, SchemaVersionError
from scasrec.core.schema import DISCRETE_SCENE_COLUMNS, Route
from scasrec.routeworld import (
    build_grid_graph,
    build_world,
    coverage_rate,
    derive_trajectory,
    generate_candidates,
    generate_dataset,
    inject_noise,
    label_candidates,
    read_dataset,
    simulate_choice,
    write_dataset,
)
from scasrec.routeworld.dataset import encode_sample


@pytest.fixture(scope="module")
def grid():
    return build_grid_graph(6, 5, seed=3)


class TestGridGraph:
    def test_counts(self, grid):
        assert grid.n_nodes == 30
        # 5 rows of 5 horizontal edges plus 4 rows of 6 vertical edges
        assert grid.n_edges == 5 * 5 + 4 * 6

    def test_edge_ids_are_dense_and_stable(self, grid):
        assert [e.edge_id for e in grid.edges] == list(range(grid.n_edges))
        again = build_grid_graph(6, 5, seed=99)
        assert [(e.u, e.v) for e in again.edges] == [(e.u, e.v) for e in grid.edges]

    def test_same_seed_same_attributes(self, grid):
        again = build_grid_graph(6, 5, seed=3)
        assert again.edges == grid.edges

    def test_edge_lookup_is_symmetric(self, grid):
        assert grid.edge_id(0, 1) == grid.edge_id(1, 0)
        with pytest.raises(ContractError):
            grid.edge_id(0, 7)

    def test_adjacent_edges_share_an_endpoint(self, grid):
        edge = grid.edge(grid.edge_id(7, 8))
        for other in grid.adjacent_edges(edge.edge_id):
            e = grid.edge(other)
            assert {e.u, e.v} & {edge.u, edge.v}
        assert edge.edge_id not in grid.adjacent_edges(edge.edge_id)

    def test_too_small(self):
        with pytest.raises(ConfigError):
            build_grid_graph(1, 4, seed=0)


class TestCandidates:
    def test_distinct_simple_routes(self, grid):
        cs = generate_candidates(grid, 0, 29, n=6, seed=1, width=16)
        assert 1 <= len(cs.routes) <= 6
        sets = [frozenset(r.edge_ids) for r in cs.routes]
        assert len(set(sets)) == len(sets)
        for route, nodes in zip(cs.routes, cs.node_paths):
            assert nodes[0] == 0 and nodes[-1] == 29
            assert len(set(nodes)) == len(nodes)
            assert len(route.features) == 16

    def test_deterministic(self, grid):
        a = generate_candidates(grid, 3, 26, n=5, seed=11, width=16)
        b = generate_candidates(grid, 3, 26, n=5, seed=11, width=16)
        assert [r.edge_ids for r in a.routes] == [r.edge_ids for r in b.routes]

    def test_same_endpoints_rejected(self, grid):
        with pytest.raises(ContractError):
            generate_candidates(grid, 4, 4, n=3, seed=0)

    def test_non_positive_n_rejected(self, grid):
        with pytest.raises(ContractError):
            generate_candidates(grid, 0, 5, n=0, seed=0)


class TestCoverage:
    def test_identical_sets(self):
        assert coverage_rate([1, 2, 3], [3, 2, 1]) == 1.0

    def test_disjoint_sets(self):
        assert coverage_rate([1, 2], [3]) == 0.0

    def test_partial_overlap(self):
        assert coverage_rate([1, 2, 3, 4], [3, 4, 5]) == pytest.approx(2 / 5)

    def test_empty_sets_rejected(self):
        with pytest.raises(ContractError):
            coverage_rate([], [])

    def test_label_takes_first_maximum(self):
        routes = [
            Route(edge_ids=[1, 2], features=[0.0]),
            Route(edge_ids=[1, 2, 3], features=[0.0]),
            Route(edge_ids=[2, 3, 1], features=[0.0]),
        ]
        cr, gt = label_candidates(routes, [1, 2, 3])
        assert cr == [pytest.approx(2 / 3), 1.0, 1.0]
        assert gt == 1


class TestBehavior:
    def test_choice_without_noise_is_argmax(self):
        routes = [
            Route(edge_ids=[1], features=[3.0, 0.0]),
            Route(edge_ids=[2], features=[1.0, 0.0]),
            Route(edge_ids=[3], features=[2.0, 0.0]),
        ]
        assert simulate_choice(routes, [-1.0, 0.0], noise_seed=0, noise_scale=0.0) == 1

    def test_choice_width_mismatch(self):
        with pytest.raises(ContractError):
            simulate_choice([Route(edge_ids=[1], features=[1.0])], [1.0, 2.0], 0)

    def test_trajectory_without_deviation(self, grid):
        route = grid.path_edges([0, 1, 2, 8, 14])
        assert derive_trajectory(route, 0.0, seed=0, graph=grid) == sorted(route)

    def test_trajectory_replaces_at_least_one_edge(self, grid):
        route = grid.path_edges([0, 1, 2, 3, 9, 15, 21])
        driven = derive_trajectory(route, 0.05, seed=4, graph=grid)
        assert len(set(route) - set(driven)) == 1
        assert driven == sorted(set(driven))

    def test_trajectory_rate_out_of_range(self, grid):
        with pytest.raises(ContractError):
            derive_trajectory([0], 1.0, seed=0, graph=grid)


class TestNoise:
    def test_zero_ratio_leaves_samples(self, tiny_dataset):
        assert inject_noise(tiny_dataset, 0.0, seed=1) == list(tiny_dataset)

    def test_full_ratio_moves_ground_truth(self, tiny_dataset):
        noisy = inject_noise(tiny_dataset, 1.0, seed=1)
        for before, after in zip(tiny_dataset, noisy):
            if before.n_candidates < 2:
                assert after is before
                continue
            assert after.is_noisy
            assert after.cr[after.gt_index] == 1.0
            assert set(after.trajectory_edge_ids) == set(
                after.candidates[after.gt_index].edge_ids
            )

    def test_ratio_out_of_range(self, tiny_dataset):
        with pytest.raises(ContractError):
            inject_noise(tiny_dataset, 1.5, seed=0)


class TestDatasetGeneration:
    def test_sample_invariants(self, tiny_dataset, tiny_world_config):
        assert len(tiny_dataset) == tiny_world_config.samples
        for sample in tiny_dataset:
            assert 1 <= sample.n_candidates <= tiny_world_config.candidates
            assert len(sample.scene) == tiny_world_config.scene_width
            assert len(sample.history) == tiny_world_config.history_length
            assert all(len(h) == tiny_world_config.history_width for h in sample.history)
            assert sample.cr[sample.gt_index] == max(sample.cr)

    def test_scene_categories_fit_embedding_tables(self, tiny_dataset):
        model = ModelConfig()
        limits = (model.time_buckets, model.familiarity_levels, model.familiarity_levels)
        for sample in tiny_dataset:
            for col, limit in zip(DISCRETE_SCENE_COLUMNS, limits):
                value = sample.scene[col]
                assert value == int(value)
                assert 1 <= value <= limit

    def test_same_seed_same_bytes(self, tiny_world_config, tiny_dataset):
        again = generate_dataset(tiny_world_config, seed=0)
        assert [encode_sample(s) for s in again] == [encode_sample(s) for s in tiny_dataset]

    def test_workers_do_not_change_output(self, tiny_world_config, tiny_dataset):
        parallel = generate_dataset(tiny_world_config, seed=0, workers=2, count=6)
        assert [encode_sample(s) for s in parallel] == [
            encode_sample(s) for s in tiny_dataset[:6]
        ]

    def test_history_must_fit_route_width(self, tiny_world_config):
        config = tiny_world_config.model_copy(update={"history_width": 40})
        with pytest.raises(ConfigError):
            build_world(config)


class TestDatasetFiles:
    def test_write_then_read(self, tmp_path, tiny_dataset):
        path = tmp_path / "data.jsonl"
        assert write_dataset(tiny_dataset, path) == len(tiny_dataset)
        assert read_dataset(path) == tiny_dataset

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        assert read_dataset(path) == []

    def test_malformed_line_reports_line_number(self, tmp_path, tiny_dataset):
        path = tmp_path / "bad.jsonl"
        path.write_text(encode_sample(tiny_dataset[0]) + "\n{not json\n")
        with pytest.raises(DatasetParseError) as info:
            read_dataset(path)
        assert info.value.line_number == 2

    def test_inconsistent_record(self, tmp_path, tiny_dataset):
        record = json.loads(encode_sample(tiny_dataset[0]))
        record["n_candidates"] += 1
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps(record) + "\n")
        with pytest.raises(DatasetParseError):
            read_dataset(path)

    def test_unknown_schema_version(self, tmp_path, tiny_dataset):
        record = json.loads(encode_sample(tiny_dataset[0]))
        record["schema_version"] = 99
        path = tmp_path / "old.jsonl"
        path.write_text(json.dumps(record) + "\n")
        with pytest.raises(SchemaVersionError):
            read_dataset(path)
