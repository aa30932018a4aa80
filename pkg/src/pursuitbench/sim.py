"""Two-boat pursuit simulation on a bounded integer grid.

Boat U starts at the grid centre and moves according to one of three
strategies (random walk, chasing, following); boat V starts at a random
point and drifts one unit east every ``v_move_period`` steps, stopping at
the east boundary.  A run ends when U catches V, when U steps out of
bounds, or when the step limit is reached; both paths are then padded to
``max_steps`` by repeating the final position.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

from .data import Dataset
from .rng import STREAM_SIM, substream


class StrategyKind(IntEnum):
    """Boat U movement strategy; enum values are the class labels."""

    RANDOM_WALK = 0
    CHASING = 1
    FOLLOWING = 2


class Termination(Enum):
    CAUGHT = "caught"
    TIME_LIMIT = "time_limit"
    OUT_OF_BOUNDS = "out_of_bounds"


# 8 compass moves as (dx, dy), x east, y north.
COMPASS_MOVES = (
    (1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1),
)


@dataclass(frozen=True)
class SimConfig:
    grid_size: int = 4096
    max_steps: int = 6000
    u_start: tuple[int, int] = (2048, 2048)
    v_move_period: int = 5
    random_walk_period: int = 5
    catch_radius: int = 1
    seed: int = 0
    # Behaviour knobs left open by the scenario description.
    walk_wait_max: int = 2            # wait drawn uniformly from 0..walk_wait_max
    chase_speed_range: tuple[int, int] = (1, 3)   # inclusive, drawn per trajectory
    follow_redraw_range: tuple[int, int] = (20, 100)  # sub-mode duration, inclusive
    zigzag_period: int = 8
    min_start_gap: int = 64           # minimum Chebyshev gap between U and V starts

    def __post_init__(self):
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if self.v_move_period < 1 or self.random_walk_period < 1:
            raise ValueError("periods must be >= 1")
        x, y = self.u_start
        if not (0 <= x <= self.grid_size and 0 <= y <= self.grid_size):
            raise ValueError("u_start must lie inside the grid")


@dataclass(frozen=True)
class TrajectoryPair:
    """One simulated run, padded to fixed length.

    ``active_len`` counts the recorded points before padding, so
    ``u_path[active_len - 1]`` is the last genuine position and the padded
    suffix repeats it.
    """

    u_path: np.ndarray          # (max_steps, 2) int64
    v_path: np.ndarray          # (max_steps, 2) int64
    label: int
    termination: Termination
    active_len: int


def chebyshev(a: tuple[int, int], b: tuple[int, int]) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def bresenham_line(a: tuple[int, int], b: tuple[int, int]) -> np.ndarray:
    """Integer raster from ``a`` (exclusive) to ``b`` (inclusive).

    Returns an (n, 2) int64 array with n = max(|dx|, |dy|); consecutive
    points differ by at most one unit per axis and the last row equals
    ``b``.  For ``a == b`` the result is empty.
    """
    n = chebyshev(a, b)
    if n == 0:
        return np.empty((0, 2), dtype=np.int64)
    i = np.arange(1, n + 1, dtype=np.int64)
    pts = np.empty((n, 2), dtype=np.int64)
    pts[:, 0] = a[0] + _axis_offsets(i, b[0] - a[0], n)
    pts[:, 1] = a[1] + _axis_offsets(i, b[1] - a[1], n)
    return pts


def _axis_offsets(i: np.ndarray, delta: int, n: int) -> np.ndarray:
    # Offset of the i-th raster point along one axis: |delta|*i/n rounded
    # half away from zero, done in exact integer arithmetic.
    off = (2 * i * abs(delta) + n) // (2 * n)
    return off if delta >= 0 else -off


def bresenham_point(a: tuple[int, int], b: tuple[int, int], k: int) -> tuple[int, int]:
    """The k-th raster point from ``a`` toward ``b``, clamped to ``b``."""
    n = chebyshev(a, b)
    if n == 0 or k <= 0:
        return a
    k = min(k, n)
    return (
        a[0] + int(_axis_offsets(np.int64(k), b[0] - a[0], n)),
        a[1] + int(_axis_offsets(np.int64(k), b[1] - a[1], n)),
    )


def step_target(v: tuple[int, int], t: int, config: SimConfig) -> tuple[int, int]:
    """Boat V's position at step t: one unit east every v_move_period steps.

    V stops at the east boundary rather than leaving the grid; only boat U
    can terminate a run by going out of bounds.
    """
    if t % config.v_move_period == 0 and v[0] < config.grid_size:
        return (v[0] + 1, v[1])
    return v


class _RandomWalker:
    """Compass walk: redraw direction and wait every ``period`` steps."""

    def __init__(self, config: SimConfig):
        self.period = config.random_walk_period
        self.wait_max = config.walk_wait_max
        self.direction = (0, 0)
        self.wait = 0
        self.clock = 0

    def step(self, u: tuple[int, int], rng: np.random.Generator) -> tuple[int, int]:
        if self.clock % self.period == 0:
            self.direction = COMPASS_MOVES[int(rng.integers(0, len(COMPASS_MOVES)))]
            self.wait = int(rng.integers(0, self.wait_max + 1))
        self.clock += 1
        if self.wait > 0:
            self.wait -= 1
            return u
        return (u[0] + self.direction[0], u[1] + self.direction[1])


class _Chaser:
    """Advance along the Bresenham raster toward V at a fixed per-run speed."""

    def __init__(self, config: SimConfig, rng: np.random.Generator):
        lo, hi = config.chase_speed_range
        self.speed = int(rng.integers(lo, hi + 1))

    def step(self, u, v, rng):
        return bresenham_point(u, v, self.speed)


class _Follower:
    """Stay strictly west of V while mixing zigzag/chase/random sub-modes."""

    def __init__(self, config: SimConfig):
        self.config = config
        self.sub_mode = None
        self.steps_left = 0
        self.zig_phase = 0
        self.walker = _RandomWalker(config)

    def step(self, t: int, u, v, rng: np.random.Generator):
        if self.steps_left <= 0:
            self.sub_mode = ("zigzag", "chase", "random")[int(rng.integers(0, 3))]
            lo, hi = self.config.follow_redraw_range
            self.steps_left = int(rng.integers(lo, hi + 1))
            self.zig_phase = 0
        self.steps_left -= 1

        if self.sub_mode == "zigzag":
            half = self.config.zigzag_period // 2
            dy = 1 if (self.zig_phase % self.config.zigzag_period) < half else -1
            self.zig_phase += 1
            dx = 1 if t % self.config.v_move_period == 0 else 0
            nu = (u[0] + dx, u[1] + dy)
        elif self.sub_mode == "chase":
            nu = bresenham_point(u, v, 1)
        else:
            nu = self.walker.step(u, rng)

        # Keep U behind (strictly west of) V.
        if nu[0] > v[0] - 1:
            nu = (v[0] - 1, nu[1])
        return nu


def _draw_v_start(config: SimConfig, strategy: StrategyKind,
                  rng: np.random.Generator) -> tuple[int, int]:
    # Uniform over the grid, redrawn while too close to U's start.  For
    # following runs V must additionally start east of U, otherwise the
    # stay-behind constraint is violated from the first step.
    gs = config.grid_size
    ux = config.u_start[0]
    while True:
        v = (int(rng.integers(0, gs + 1)), int(rng.integers(0, gs + 1)))
        if chebyshev(v, config.u_start) < config.min_start_gap:
            continue
        if strategy == StrategyKind.FOLLOWING and v[0] < ux + config.min_start_gap:
            continue
        return v


def simulate(config: SimConfig, strategy: StrategyKind,
             rng: np.random.Generator) -> TrajectoryPair:
    """Run one trajectory to termination and pad it to ``max_steps``."""
    gs = config.grid_size
    u = config.u_start
    v = _draw_v_start(config, strategy, rng)

    u_path = np.empty((config.max_steps, 2), dtype=np.int64)
    v_path = np.empty((config.max_steps, 2), dtype=np.int64)
    u_path[0] = u
    v_path[0] = v

    if strategy == StrategyKind.RANDOM_WALK:
        walker = _RandomWalker(config)
        move = lambda t, u, v: walker.step(u, rng)
    elif strategy == StrategyKind.CHASING:
        chaser = _Chaser(config, rng)
        move = lambda t, u, v: chaser.step(u, v, rng)
    elif strategy == StrategyKind.FOLLOWING:
        follower = _Follower(config)
        move = lambda t, u, v: follower.step(t, u, v, rng)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")

    termination = Termination.TIME_LIMIT
    active_len = config.max_steps
    for t in range(1, config.max_steps):
        v = step_target(v, t, config)
        nu = move(t, u, v)
        if not (0 <= nu[0] <= gs and 0 <= nu[1] <= gs):
            termination = Termination.OUT_OF_BOUNDS
            active_len = t
            break
        u = nu
        u_path[t] = u
        v_path[t] = v
        if chebyshev(u, v) <= config.catch_radius:
            termination = Termination.CAUGHT
            active_len = t + 1
            break

    u_path[active_len:] = u_path[active_len - 1]
    v_path[active_len:] = v_path[active_len - 1]
    return TrajectoryPair(u_path=u_path, v_path=v_path, label=int(strategy),
                          termination=termination, active_len=active_len)


def generate_dataset(config: SimConfig, n_per_class: int) -> Dataset:
    """Simulate ``n_per_class`` runs per strategy into one labeled dataset.

    Trajectory i of class c uses the (STREAM_SIM, c, i) sub-stream of
    ``config.seed``, so datasets are reproducible per trajectory.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    n = 3 * n_per_class
    u = np.empty((n, config.max_steps, 2), dtype=np.int64)
    v = np.empty_like(u)
    labels = np.empty(n, dtype=np.int64)
    terminations = []
    active_lens = np.empty(n, dtype=np.int64)

    idx = 0
    for strategy in StrategyKind:
        for i in range(n_per_class):
            traj = simulate(config, strategy,
                            substream(config.seed, STREAM_SIM, int(strategy), i))
            u[idx] = traj.u_path
            v[idx] = traj.v_path
            labels[idx] = traj.label
            terminations.append(traj.termination)
            active_lens[idx] = traj.active_len
            idx += 1

    return Dataset(u=u, v=v, labels=labels, ids=np.arange(n, dtype=np.int64),
                   terminations=tuple(terminations), active_lens=active_lens)
