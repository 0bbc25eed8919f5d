"""Deterministic gridworld task environments.

Five environments with explicit, inspectable termination kinds:

* ``empty``: reach the goal in an open room (single terminal condition).
* ``doorkey``: pick up a key, unlock a door, reach the goal behind it.
* ``gotodoor``: four doors of distinct colors on the four walls; opening
  any door ends the episode, only the red one counts as success.
* ``redbluedoors``: open the red door, then the blue one; opening the blue
  door ends the episode regardless of order.
* ``distshift``: fixed room with a lava strip next to the top wall; the
  goal sits in the far corner, touching lava ends the episode.

Transitions are pure values: ``reset`` and ``step`` take and return state,
no hidden shared mutation. Identical (spec, seed, action sequence) always
reproduces the identical trajectory.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import NamedTuple, Optional

import numpy as np

from gailbias.errors import ConfigurationError, UsageError


class Action(IntEnum):
    TURN_LEFT = 0
    TURN_RIGHT = 1
    FORWARD = 2
    PICKUP = 3
    TOGGLE = 4


N_ACTIONS = 5


class CellType(IntEnum):
    EMPTY = 0
    WALL = 1
    LAVA = 2
    GOAL = 3
    KEY = 4
    DOOR = 5


class Color(IntEnum):
    RED = 0
    GREEN = 1
    BLUE = 2
    YELLOW = 3


N_COLORS = 4


class DoorState(IntEnum):
    LOCKED = 0
    CLOSED = 1
    OPEN = 2


class Direction(IntEnum):
    NORTH = 0
    EAST = 1
    SOUTH = 2
    WEST = 3


# (dx, dy) per direction; y grows downward (row index).
DIR_VEC = ((0, -1), (1, 0), (0, 1), (-1, 0))


class TerminationKind(IntEnum):
    NONE = 0
    GOAL = 1
    LAVA = 2
    TASK_DOOR_OPENED = 3
    NON_TASK_DOOR_OPENED = 4
    TIMEOUT = 5


def success(kind: TerminationKind) -> bool:
    """True exactly for task-completing termination kinds."""
    return kind in (TerminationKind.GOAL, TerminationKind.TASK_DOOR_OPENED)


class EnvId(IntEnum):
    EMPTY = 0
    DOORKEY = 1
    GOTODOOR = 2
    REDBLUEDOORS = 3
    DISTSHIFT = 4


ENV_NAMES = {
    EnvId.EMPTY: "empty",
    EnvId.DOORKEY: "doorkey",
    EnvId.GOTODOOR: "gotodoor",
    EnvId.REDBLUEDOORS: "redbluedoors",
    EnvId.DISTSHIFT: "distshift",
}
ENV_IDS_BY_NAME = {name: env_id for env_id, name in ENV_NAMES.items()}

# default (width, height) per environment, outer walls included
_DEFAULT_SIZES = {
    EnvId.EMPTY: (6, 6),
    EnvId.DOORKEY: (6, 6),
    EnvId.GOTODOOR: (6, 6),
    EnvId.REDBLUEDOORS: (8, 6),
    EnvId.DISTSHIFT: (9, 7),
}

# observation feature widths
CELL_FEATURES = len(CellType) + N_COLORS + len(DoorState)  # 13
CARRY_FEATURES = 1 + N_COLORS


@dataclass(frozen=True)
class EnvSpec:
    env_id: EnvId
    width: int
    height: int
    max_steps: int
    layout_randomization: bool = True

    @staticmethod
    def make(env_id: EnvId | str, width: int | None = None, height: int | None = None,
             max_steps: int | None = None, layout_randomization: bool = True) -> "EnvSpec":
        if isinstance(env_id, str):
            try:
                env_id = ENV_IDS_BY_NAME[env_id.lower()]
            except KeyError:
                raise ConfigurationError(f"unknown environment id: {env_id!r}") from None
        dw, dh = _DEFAULT_SIZES[env_id]
        w = dw if width is None else int(width)
        h = dh if height is None else int(height)
        spec = EnvSpec(env_id, w, h,
                       4 * w * h if max_steps is None else int(max_steps),
                       layout_randomization)
        _validate_spec(spec)
        return spec

    @property
    def name(self) -> str:
        return ENV_NAMES[self.env_id]


def _validate_spec(spec: EnvSpec) -> None:
    w, h = spec.width, spec.height
    if spec.max_steps < 1:
        raise ConfigurationError("max_steps must be positive")
    if w < 4 or h < 4:
        raise ConfigurationError(f"grid {w}x{h} too small for {spec.name}")
    if spec.env_id == EnvId.DOORKEY and w < 5:
        # needs a splitting wall with at least one column on each side
        raise ConfigurationError("doorkey needs width >= 5")
    if spec.env_id == EnvId.DISTSHIFT and (w < 7 or h < 4):
        raise ConfigurationError("distshift needs at least a 7x4 grid")


def obs_length(spec: EnvSpec) -> int:
    """Observation vector length: w*h*13 + w + h + 4 + 5 + 1."""
    w, h = spec.width, spec.height
    return w * h * CELL_FEATURES + w + h + len(Direction) + CARRY_FEATURES + 1


@dataclass(frozen=True)
class Cell:
    """Inspection view of one grid cell."""
    kind: CellType
    color: Optional[Color] = None
    door_state: Optional[DoorState] = None


@dataclass
class EnvState:
    spec: EnvSpec
    cell_type: np.ndarray   # (h, w) uint8
    cell_color: np.ndarray  # (h, w) uint8, meaningful for keys and doors
    cell_door: np.ndarray   # (h, w) uint8, meaningful for doors
    agent_x: int
    agent_y: int
    agent_dir: Direction
    carrying: Optional[Color]
    step_count: int
    termination: TerminationKind
    _grid_enc: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def agent_pos(self) -> tuple[int, int]:
        return (self.agent_x, self.agent_y)

    def cell(self, x: int, y: int) -> Cell:
        kind = CellType(self.cell_type[y, x])
        if kind in (CellType.KEY, CellType.DOOR):
            color = Color(self.cell_color[y, x])
        else:
            color = None
        door = DoorState(self.cell_door[y, x]) if kind == CellType.DOOR else None
        return Cell(kind, color, door)

    def pose_key(self) -> tuple:
        """Hashable key over everything that can change during an episode."""
        return (self.agent_x, self.agent_y, int(self.agent_dir), self.carrying,
                self.cell_type.tobytes(), self.cell_door.tobytes())

    def fingerprint(self) -> bytes:
        """Byte string identifying the full state (layout included)."""
        scalars = np.array(
            [self.spec.env_id, self.spec.width, self.spec.height, self.spec.max_steps,
             self.agent_x, self.agent_y, int(self.agent_dir),
             -1 if self.carrying is None else int(self.carrying),
             self.step_count, int(self.termination)],
            dtype=np.int64)
        return (scalars.tobytes() + self.cell_type.tobytes()
                + self.cell_color.tobytes() + self.cell_door.tobytes())


class StepResult(NamedTuple):
    state: EnvState
    obs: np.ndarray
    env_reward: float
    done: bool
    kind: TerminationKind


# ---------------------------------------------------------------------------
# observation encoding


def _grid_encoding(state: EnvState) -> np.ndarray:
    h, w = state.cell_type.shape
    n = h * w
    types = state.cell_type.ravel().astype(np.intp)
    enc = np.zeros((n, CELL_FEATURES), dtype=np.float64)
    enc[np.arange(n), types] = 1.0
    colored = (types == CellType.KEY) | (types == CellType.DOOR)
    if colored.any():
        idx = np.nonzero(colored)[0]
        enc[idx, len(CellType) + state.cell_color.ravel()[idx].astype(np.intp)] = 1.0
    doors = types == CellType.DOOR
    if doors.any():
        idx = np.nonzero(doors)[0]
        enc[idx, len(CellType) + N_COLORS + state.cell_door.ravel()[idx].astype(np.intp)] = 1.0
    return enc.ravel()


def encode_observation(state: EnvState) -> np.ndarray:
    """Flat {0,1} observation per the fixed layout; absorbing flag is 0."""
    spec = state.spec
    w, h = spec.width, spec.height
    if state._grid_enc is None:
        state._grid_enc = _grid_encoding(state)
    grid_len = w * h * CELL_FEATURES
    obs = np.zeros(obs_length(spec), dtype=np.float64)
    obs[:grid_len] = state._grid_enc
    base = grid_len
    obs[base + state.agent_x] = 1.0
    obs[base + w + state.agent_y] = 1.0
    obs[base + w + h + int(state.agent_dir)] = 1.0
    carry_base = base + w + h + len(Direction)
    obs[carry_base + (0 if state.carrying is None else 1 + int(state.carrying))] = 1.0
    return obs


# ---------------------------------------------------------------------------
# layout generation


def _base_grid(spec: EnvSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    h, w = spec.height, spec.width
    ct = np.zeros((h, w), dtype=np.uint8)
    ct[0, :] = CellType.WALL
    ct[-1, :] = CellType.WALL
    ct[:, 0] = CellType.WALL
    ct[:, -1] = CellType.WALL
    cc = np.zeros((h, w), dtype=np.uint8)
    cd = np.zeros((h, w), dtype=np.uint8)
    return ct, cc, cd


def _random_interior(rng: np.random.Generator, spec: EnvSpec, exclude: set) -> tuple[int, int]:
    while True:
        x = int(rng.integers(1, spec.width - 1))
        y = int(rng.integers(1, spec.height - 1))
        if (x, y) not in exclude:
            return x, y


def _gen_layout(spec: EnvSpec, rng: np.random.Generator) -> EnvState:
    w, h = spec.width, spec.height
    ct, cc, cd = _base_grid(spec)
    carrying = None

    if spec.env_id == EnvId.EMPTY:
        goal = (w - 2, h - 2)
        ct[goal[1], goal[0]] = CellType.GOAL
        ax, ay = _random_interior(rng, spec, {goal})
        adir = Direction(int(rng.integers(4)))

    elif spec.env_id == EnvId.DOORKEY:
        split = int(rng.integers(2, w - 2))
        ct[:, split] = CellType.WALL
        door_y = int(rng.integers(1, h - 1))
        ct[door_y, split] = CellType.DOOR
        cc[door_y, split] = Color.YELLOW
        cd[door_y, split] = DoorState.LOCKED
        goal = (w - 2, h - 2)
        ct[goal[1], goal[0]] = CellType.GOAL
        left = [(x, y) for x in range(1, split) for y in range(1, h - 1)]
        key = left[int(rng.integers(len(left)))]
        ct[key[1], key[0]] = CellType.KEY
        cc[key[1], key[0]] = Color.YELLOW
        remaining = [p for p in left if p != key]
        ax, ay = remaining[int(rng.integers(len(remaining)))]
        adir = Direction(int(rng.integers(4)))

    elif spec.env_id == EnvId.GOTODOOR:
        # one door per wall: north, east, south, west
        slots = [
            (int(rng.integers(1, w - 1)), 0),
            (w - 1, int(rng.integers(1, h - 1))),
            (int(rng.integers(1, w - 1)), h - 1),
            (0, int(rng.integers(1, h - 1))),
        ]
        colors = rng.permutation(N_COLORS)
        for (dx, dy), color in zip(slots, colors):
            ct[dy, dx] = CellType.DOOR
            cc[dy, dx] = color
            cd[dy, dx] = DoorState.CLOSED
        ax, ay = _random_interior(rng, spec, set())
        adir = Direction(int(rng.integers(4)))

    elif spec.env_id == EnvId.REDBLUEDOORS:
        red_y = int(rng.integers(1, h - 1))
        blue_y = int(rng.integers(1, h - 1))
        ct[red_y, 0] = CellType.DOOR
        cc[red_y, 0] = Color.RED
        cd[red_y, 0] = DoorState.CLOSED
        ct[blue_y, w - 1] = CellType.DOOR
        cc[blue_y, w - 1] = Color.BLUE
        cd[blue_y, w - 1] = DoorState.CLOSED
        ax, ay = _random_interior(rng, spec, set())
        adir = Direction(int(rng.integers(4)))

    elif spec.env_id == EnvId.DISTSHIFT:
        # fixed map: lava strip next to the top wall, goal in the far corner
        ct[1, w - 2] = CellType.GOAL
        for x in range(3, w - 3):
            ct[1, x] = CellType.LAVA
        ax, ay = 1, 1
        adir = Direction.EAST

    else:  # pragma: no cover
        raise ConfigurationError(f"unknown env id {spec.env_id}")

    return EnvState(spec, ct, cc, cd, ax, ay, adir, carrying, 0, TerminationKind.NONE)


def _flood(state: EnvState, start: tuple[int, int]) -> np.ndarray:
    """Cells reachable from start through empty/goal/open-door cells."""
    h, w = state.cell_type.shape
    walkable = np.zeros((h, w), dtype=bool)
    ct = state.cell_type
    walkable |= ct == CellType.EMPTY
    walkable |= ct == CellType.GOAL
    walkable |= (ct == CellType.DOOR) & (state.cell_door == DoorState.OPEN)
    seen = np.zeros((h, w), dtype=bool)
    stack = [start]
    seen[start[1], start[0]] = True
    while stack:
        x, y = stack.pop()
        for dx, dy in DIR_VEC:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and walkable[ny, nx] and not seen[ny, nx]:
                seen[ny, nx] = True
                stack.append((nx, ny))
    return seen


def _adjacent_reachable(reach: np.ndarray, x: int, y: int) -> bool:
    h, w = reach.shape
    return any(0 <= x + dx < w and 0 <= y + dy < h and reach[y + dy, x + dx]
               for dx, dy in DIR_VEC)


def _layout_feasible(state: EnvState) -> bool:
    ct = state.cell_type
    reach = _flood(state, state.agent_pos)
    if state.spec.env_id in (EnvId.EMPTY, EnvId.DISTSHIFT):
        gy, gx = np.argwhere(ct == CellType.GOAL)[0]
        return bool(reach[gy, gx])
    if state.spec.env_id == EnvId.DOORKEY:
        ky, kx = np.argwhere(ct == CellType.KEY)[0]
        dy, dx = np.argwhere(ct == CellType.DOOR)[0]
        if not (_adjacent_reachable(reach, kx, ky) and _adjacent_reachable(reach, dx, dy)):
            return False
        # goal side: flood from the door cell with the door treated as open
        opened = replace(state, cell_door=state.cell_door.copy())
        opened.cell_door[dy, dx] = DoorState.OPEN
        reach2 = _flood(opened, (int(dx), int(dy)))
        gy, gx = np.argwhere(ct == CellType.GOAL)[0]
        return bool(reach2[gy, gx])
    # door tasks: every door must be reachable from the inside
    doors = np.argwhere(ct == CellType.DOOR)
    return all(_adjacent_reachable(reach, x, y) for y, x in doors)


def reset(spec: EnvSpec, episode_seed: int) -> tuple[EnvState, np.ndarray]:
    """Fresh randomized layout for the episode; deterministic per (spec, seed)."""
    seed = episode_seed if spec.layout_randomization else 0
    rng = np.random.Generator(np.random.PCG64(seed))
    for _ in range(1000):
        state = _gen_layout(spec, rng)
        if _layout_feasible(state):
            return state, encode_observation(state)
    raise ConfigurationError(
        f"could not generate a feasible {spec.name} layout for seed {episode_seed}")


# ---------------------------------------------------------------------------
# transition


def _front(state: EnvState) -> tuple[int, int]:
    dx, dy = DIR_VEC[state.agent_dir]
    return state.agent_x + dx, state.agent_y + dy


def step(state: EnvState, action: Action) -> StepResult:
    """One deterministic transition. Inapplicable actions are no-ops that
    still advance the step counter."""
    if state.termination != TerminationKind.NONE:
        raise UsageError("step() called on a terminated episode")

    spec = state.spec
    ct, cc, cd = state.cell_type, state.cell_color, state.cell_door
    ax, ay, adir = state.agent_x, state.agent_y, state.agent_dir
    carrying = state.carrying
    kind = TerminationKind.NONE
    grid_enc = state._grid_enc
    action = Action(action)

    if action == Action.TURN_LEFT:
        adir = Direction((adir - 1) % 4)
    elif action == Action.TURN_RIGHT:
        adir = Direction((adir + 1) % 4)
    elif action == Action.FORWARD:
        fx, fy = _front(state)
        target = ct[fy, fx]
        if target == CellType.EMPTY or (
                target == CellType.DOOR and cd[fy, fx] == DoorState.OPEN):
            ax, ay = fx, fy
        elif target == CellType.GOAL:
            ax, ay = fx, fy
            kind = TerminationKind.GOAL
        elif target == CellType.LAVA:
            ax, ay = fx, fy
            kind = TerminationKind.LAVA
        # walls, keys and unopened doors block
    elif action == Action.PICKUP:
        fx, fy = _front(state)
        if ct[fy, fx] == CellType.KEY and carrying is None:
            carrying = Color(cc[fy, fx])
            ct = ct.copy()
            cc = cc.copy()
            ct[fy, fx] = CellType.EMPTY
            cc[fy, fx] = 0
            grid_enc = None
    elif action == Action.TOGGLE:
        fx, fy = _front(state)
        if ct[fy, fx] == CellType.DOOR:
            door_state = DoorState(cd[fy, fx])
            new_door = None
            if door_state == DoorState.LOCKED:
                if carrying is not None and carrying == cc[fy, fx]:
                    new_door = DoorState.OPEN
            elif door_state == DoorState.CLOSED:
                new_door = DoorState.OPEN
            else:
                new_door = DoorState.CLOSED
            if new_door is not None:
                cd = cd.copy()
                cd[fy, fx] = new_door
                grid_enc = None
                if new_door == DoorState.OPEN:
                    kind = _door_opened_kind(spec, ct, cc, cd, fx, fy)
    else:  # pragma: no cover
        raise UsageError(f"unknown action {action!r}")

    step_count = state.step_count + 1
    if kind == TerminationKind.NONE and step_count >= spec.max_steps:
        kind = TerminationKind.TIMEOUT

    new_state = EnvState(spec, ct, cc, cd, ax, ay, adir, carrying,
                         step_count, kind, _grid_enc=grid_enc)
    obs = encode_observation(new_state)
    done = kind != TerminationKind.NONE
    env_reward = (1.0 - 0.9 * step_count / spec.max_steps) if success(kind) else 0.0
    return StepResult(new_state, obs, env_reward, done, kind)


def _door_opened_kind(spec: EnvSpec, ct, cc, cd, fx: int, fy: int) -> TerminationKind:
    """Termination kind after the door at (fx, fy) switches to open."""
    color = Color(cc[fy, fx])
    if spec.env_id == EnvId.GOTODOOR:
        return (TerminationKind.TASK_DOOR_OPENED if color == Color.RED
                else TerminationKind.NON_TASK_DOOR_OPENED)
    if spec.env_id == EnvId.REDBLUEDOORS:
        if color != Color.BLUE:
            return TerminationKind.NONE  # red door toggling is not terminal
        red = (ct == CellType.DOOR) & (cc == Color.RED)
        red_open = bool((cd[red] == DoorState.OPEN).all()) and red.any()
        return (TerminationKind.TASK_DOOR_OPENED if red_open
                else TerminationKind.NON_TASK_DOOR_OPENED)
    return TerminationKind.NONE  # doorkey door opening continues the episode
