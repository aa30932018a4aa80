from fractions import Fraction

import numpy as np
import pytest

from pursuitbench import sim
from pursuitbench.rng import STREAM_SIM, substream


def reference_raster(a, b):
    """Independent rasterization: per-axis linear interpolation with exact
    rational arithmetic, rounding half away from zero relative to a."""
    n = max(abs(b[0] - a[0]), abs(b[1] - a[1]))
    points = []
    for i in range(1, n + 1):
        point = []
        for axis in range(2):
            ideal = Fraction(i * (b[axis] - a[axis]), n)
            magnitude = (2 * abs(ideal.numerator) + ideal.denominator) \
                // (2 * ideal.denominator)
            offset = magnitude if ideal >= 0 else -magnitude
            point.append(a[axis] + offset)
        points.append(tuple(point))
    return points


class TestBresenham:
    def test_axis_aligned(self):
        assert sim.bresenham_line((0, 0), (3, 0)).tolist() == [[1, 0], [2, 0], [3, 0]]

    def test_exact_diagonal(self):
        assert sim.bresenham_line((0, 0), (2, 2)).tolist() == [[1, 1], [2, 2]]

    def test_golden_5_3(self):
        # Frozen from reference_raster((0, 0), (5, 3)).
        line = sim.bresenham_line((0, 0), (5, 3))
        assert line.tolist() == [[1, 1], [2, 1], [3, 2], [4, 2], [5, 3]]
        assert len(line) == 5
        assert np.all(np.diff(np.concatenate([[[0, 0]], line]), axis=0)[:, 0] == 1)

    def test_empty_for_equal_points(self):
        assert sim.bresenham_line((4, 4), (4, 4)).shape == (0, 2)

    def test_brute_force_equivalence_all_small_offsets(self):
        for dx in range(-16, 17):
            for dy in range(-16, 17):
                if dx == 0 and dy == 0:
                    continue
                a, b = (40, 40), (40 + dx, 40 + dy)
                line = sim.bresenham_line(a, b)
                assert line.tolist() == [list(p) for p in reference_raster(a, b)]

    def test_step_and_endpoint_properties(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            a = tuple(rng.integers(-50, 50, 2).tolist())
            b = tuple(rng.integers(-50, 50, 2).tolist())
            if a == b:
                continue
            line = sim.bresenham_line(a, b)
            assert len(line) == max(abs(b[0] - a[0]), abs(b[1] - a[1]))
            assert tuple(line[-1]) == b
            steps = np.diff(np.concatenate([[a], line]), axis=0)
            assert np.abs(steps).max() <= 1

    def test_point_matches_line(self):
        a, b = (3, -2), (-8, 5)
        line = sim.bresenham_line(a, b)
        for k in range(1, len(line) + 1):
            assert sim.bresenham_point(a, b, k) == tuple(line[k - 1])
        assert sim.bresenham_point(a, b, 99) == tuple(line[-1])
        assert sim.bresenham_point(a, b, 0) == a


class TestStepTarget:
    def test_moves_on_period(self):
        cfg = sim.SimConfig()
        assert sim.step_target((100, 50), 5, cfg) == (101, 50)

    def test_off_period_is_stationary(self):
        cfg = sim.SimConfig()
        assert sim.step_target((100, 50), 3, cfg) == (100, 50)

    def test_stops_at_east_boundary(self):
        cfg = sim.SimConfig()
        assert sim.step_target((4096, 50), 5, cfg) == (4096, 50)


class TestRandomWalk:
    def test_deterministic_under_fixed_seed(self, full_config):
        runs = [sim.simulate(full_config, sim.StrategyKind.RANDOM_WALK,
                             substream(123, STREAM_SIM, 0, 0)) for _ in range(2)]
        assert np.array_equal(runs[0].u_path, runs[1].u_path)
        assert runs[0].termination == runs[1].termination

    def test_direction_marginals_uniform(self):
        cfg = sim.SimConfig(walk_wait_max=0)
        rng = np.random.default_rng(5)
        walker = sim._RandomWalker(cfg)
        counts = {m: 0 for m in sim.COMPASS_MOVES}
        draws = 0
        u = (0, 0)
        while draws < 100_000:
            before = walker.direction
            walker.step(u, rng)
            if walker.clock % cfg.random_walk_period == 1:
                counts[walker.direction] += 1
                draws += 1
        freqs = np.array(list(counts.values())) / draws
        assert np.all(np.abs(freqs - 1 / 8) < 0.01)

    def test_redraw_count(self):
        cfg = sim.SimConfig()
        walker = sim._RandomWalker(cfg)
        rng = np.random.default_rng(11)
        seen = 0
        for _ in range(6000):
            if walker.clock % cfg.random_walk_period == 0:
                seen += 1
            walker.step((0, 0), rng)
        assert seen == 6000 // cfg.random_walk_period


class TestChasing:
    def test_first_raster_point(self):
        assert sim.bresenham_point((0, 0), (3, 0), 1) == (1, 0)

    def test_overshoot_lands_on_target(self):
        assert sim.bresenham_point((0, 0), (3, 0), 5) == (3, 0)

    def test_distance_non_increasing_between_target_moves(self, full_config):
        traj = sim.simulate(full_config, sim.StrategyKind.CHASING,
                            substream(99, STREAM_SIM, 1, 0))
        u, v = traj.u_path, traj.v_path
        for t in range(1, traj.active_len):
            if np.array_equal(v[t], v[t - 1]):   # V did not move this step
                d_now = np.abs(u[t] - v[t]).max()
                d_prev = np.abs(u[t - 1] - v[t - 1]).max()
                assert d_now <= d_prev

    def test_terminates_caught_with_short_active_len(self, full_config):
        caught = 0
        for i in range(20):
            traj = sim.simulate(full_config, sim.StrategyKind.CHASING,
                                substream(42, STREAM_SIM, 1, i))
            if traj.termination == sim.Termination.CAUGHT:
                caught += 1
                assert traj.active_len < full_config.max_steps
        assert caught >= 15


class TestFollowing:
    def test_stays_behind_at_every_active_step(self, full_config):
        for i in range(10):
            traj = sim.simulate(full_config, sim.StrategyKind.FOLLOWING,
                                substream(42, STREAM_SIM, 2, i))
            active = slice(0, traj.active_len)
            assert np.all(traj.u_path[active, 0] < traj.v_path[active, 0])

    def test_deterministic(self, full_config):
        a = sim.simulate(full_config, sim.StrategyKind.FOLLOWING,
                         substream(5, STREAM_SIM, 2, 0))
        b = sim.simulate(full_config, sim.StrategyKind.FOLLOWING,
                         substream(5, STREAM_SIM, 2, 0))
        assert np.array_equal(a.u_path, b.u_path)
        assert np.array_equal(a.v_path, b.v_path)


class TestSimulate:
    def test_start_and_length(self, full_config):
        for strategy in sim.StrategyKind:
            traj = sim.simulate(full_config, strategy,
                                substream(1, STREAM_SIM, int(strategy), 0))
            assert tuple(traj.u_path[0]) == full_config.u_start
            assert len(traj.u_path) == len(traj.v_path) == full_config.max_steps

    def test_padded_suffix_constant(self, full_config):
        traj = sim.simulate(full_config, sim.StrategyKind.CHASING,
                            substream(2, STREAM_SIM, 1, 3))
        assert traj.termination == sim.Termination.CAUGHT
        tail = traj.u_path[traj.active_len - 1:]
        assert np.all(tail == tail[0])
        tail_v = traj.v_path[traj.active_len - 1:]
        assert np.all(tail_v == tail_v[0])

    def test_terminations_closed_set(self, full_config):
        for i in range(100):
            traj = sim.simulate(full_config, sim.StrategyKind.CHASING,
                                substream(42, STREAM_SIM, 1, i))
            assert traj.termination in (sim.Termination.CAUGHT,
                                        sim.Termination.TIME_LIMIT,
                                        sim.Termination.OUT_OF_BOUNDS)

    def test_active_coordinates_in_bounds(self, small_config):
        for strategy in sim.StrategyKind:
            for i in range(6):
                traj = sim.simulate(small_config, strategy,
                                    substream(3, STREAM_SIM, int(strategy), i))
                active_u = traj.u_path[:traj.active_len]
                assert active_u.min() >= 0
                assert active_u.max() <= small_config.grid_size

    def test_out_of_bounds_termination_reachable(self):
        # U starting in a corner walks out quickly for some seeds.
        cfg = sim.SimConfig(u_start=(2, 2), min_start_gap=1, seed=0)
        terms = {sim.simulate(cfg, sim.StrategyKind.RANDOM_WALK,
                              substream(0, STREAM_SIM, 0, i)).termination
                 for i in range(30)}
        assert sim.Termination.OUT_OF_BOUNDS in terms


class TestGenerateDataset:
    def test_counts_and_labels(self, small_dataset):
        assert len(small_dataset) == 18
        assert small_dataset.class_counts() == {0: 6, 1: 6, 2: 6}

    def test_minimal_dataset(self, small_config):
        ds = sim.generate_dataset(small_config, 1)
        assert len(ds) == 3
        assert sorted(ds.labels.tolist()) == [0, 1, 2]

    def test_deterministic(self, small_config):
        a = sim.generate_dataset(small_config, 2)
        b = sim.generate_dataset(small_config, 2)
        assert np.array_equal(a.u, b.u)
        assert np.array_equal(a.v, b.v)
        assert np.array_equal(a.labels, b.labels)

    def test_trajectories_use_distinct_substreams(self, small_config):
        ds = sim.generate_dataset(small_config, 6)
        walks = ds.u[ds.labels == 0]
        assert not np.array_equal(walks[0], walks[1])
