"""Scripted expert demonstrations.

Experts are exact shortest-path planners, not trained policies. Each task
is decomposed into ordered subgoals (pick up the key, open the door, reach
the goal) and each subgoal is solved by breadth-first search over the true
transition function. Ties break on action order, so demonstrations are
deterministic given the episode seed.

Datasets of (observation, action) pairs are stored in a compact binary
format, magic ``AILD``, documented in :func:`save_dataset`.
"""
from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from gailbias.errors import DatasetError, PlanningError
from gailbias.gridworld import (
    Action, CellType, Color, DoorState, EnvId, EnvSpec, EnvState,
    TerminationKind, obs_length, reset, step, success,
)

DATASET_MAGIC = b"AILD"
DATASET_VERSION = 1
_DATASET_SEED_TAG = 0x45585045


@dataclass
class Trajectory:
    observations: np.ndarray  # (T, D) float32, observation before each action
    actions: np.ndarray       # (T,) uint8
    terminal_kind: TerminationKind

    def __len__(self) -> int:
        return len(self.actions)

    def env_reward(self, spec: EnvSpec) -> float:
        if not success(self.terminal_kind):
            return 0.0
        return 1.0 - 0.9 * len(self.actions) / spec.max_steps


@dataclass
class Dataset:
    env_id: EnvId
    width: int
    height: int
    trajectories: list[Trajectory]
    # seed that produced the trajectories; informational, not persisted
    generator_seed: Optional[int] = None

    def spec(self) -> EnvSpec:
        return EnvSpec.make(self.env_id, self.width, self.height)

    def n_transitions(self) -> int:
        return sum(len(t) for t in self.trajectories)

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """All transitions as (observations (N, D) float64, actions (N,))."""
        obs = np.concatenate([t.observations for t in self.trajectories]).astype(np.float64)
        actions = np.concatenate([t.actions for t in self.trajectories]).astype(np.intp)
        return obs, actions


# ---------------------------------------------------------------------------
# planning


def _door_open(state: EnvState, color: Color | None = None) -> bool:
    doors = state.cell_type == CellType.DOOR
    if color is not None:
        doors &= state.cell_color == color
    return bool(doors.any()) and bool((state.cell_door[doors] == DoorState.OPEN).all())


def _subgoals(spec: EnvSpec):
    if spec.env_id in (EnvId.EMPTY, EnvId.DISTSHIFT):
        return [lambda s, k: k == TerminationKind.GOAL]
    if spec.env_id == EnvId.DOORKEY:
        return [
            lambda s, k: s.carrying is not None,
            lambda s, k: _door_open(s),
            lambda s, k: k == TerminationKind.GOAL,
        ]
    if spec.env_id == EnvId.GOTODOOR:
        return [lambda s, k: k == TerminationKind.TASK_DOOR_OPENED]
    if spec.env_id == EnvId.REDBLUEDOORS:
        return [
            lambda s, k: k == TerminationKind.NONE and _door_open(s, Color.RED),
            lambda s, k: k == TerminationKind.TASK_DOOR_OPENED,
        ]
    raise PlanningError(f"no expert available for {spec.name}")  # pragma: no cover


def _search(start: EnvState, accept) -> tuple[list[Action], EnvState]:
    """Shortest action sequence from start to an accepting transition."""
    queue = deque([(start, ())])
    seen = {start.pose_key()}
    while queue:
        state, actions = queue.popleft()
        for action in Action:
            # freeze the step counter so planning depth cannot hit the timeout
            res = step(replace(state, step_count=0), action)
            if accept(res.state, res.kind):
                return [*actions, action], res.state
            if res.kind != TerminationKind.NONE:
                continue  # premature termination is a dead end
            key = res.state.pose_key()
            if key not in seen:
                seen.add(key)
                queue.append((res.state, (*actions, action)))
    raise PlanningError("subgoal unreachable from the given state")


def plan_actions(state: EnvState) -> list[Action]:
    """Full action sequence solving the task from the given reset state."""
    actions: list[Action] = []
    current = state
    for accept in _subgoals(state.spec):
        stage_actions, current = _search(current, accept)
        actions.extend(stage_actions)
    return actions


def plan_episode(spec: EnvSpec, episode_seed: int) -> Trajectory:
    """Plan and execute one demonstration episode."""
    state, obs = reset(spec, episode_seed)
    actions = plan_actions(state)
    if len(actions) >= spec.max_steps:
        raise PlanningError(
            f"plan of length {len(actions)} exceeds max_steps {spec.max_steps}")
    obs_rows = np.empty((len(actions), obs_length(spec)), dtype=np.float32)
    for i, action in enumerate(actions):
        obs_rows[i] = obs
        state, obs, _, done, kind = step(state, action)
    if not success(kind):
        raise PlanningError(f"executed plan ended with {kind.name}")
    return Trajectory(obs_rows, np.asarray(actions, dtype=np.uint8), kind)


def generate_dataset(spec: EnvSpec, n_trajectories: int, seed: int) -> Dataset:
    """n independent demonstrations with episode seeds drawn from seed."""
    rng = np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed, _DATASET_SEED_TAG])))
    episode_seeds = rng.integers(0, 2 ** 62, size=n_trajectories)
    trajectories = [plan_episode(spec, int(s)) for s in episode_seeds]
    return Dataset(spec.env_id, spec.width, spec.height, trajectories,
                   generator_seed=seed)


# ---------------------------------------------------------------------------
# serialization


def _step_dtype(obs_len: int) -> np.dtype:
    return np.dtype([("obs", "<f4", (obs_len,)), ("action", "u1")])


def save_dataset(dataset: Dataset, path) -> None:
    """Binary layout, all little endian:

    magic ``AILD`` | version u16 | env_id u8 | width u16 | height u16 |
    n_trajectories u32 | per trajectory: length u32, then length records of
    (observation f32[obs_len], action u8), then terminal_kind u8.
    """
    obs_len = obs_length(dataset.spec())
    dtype = _step_dtype(obs_len)
    with open(path, "wb") as f:
        f.write(DATASET_MAGIC)
        f.write(struct.pack("<HBHHI", DATASET_VERSION, int(dataset.env_id),
                            dataset.width, dataset.height, len(dataset.trajectories)))
        for traj in dataset.trajectories:
            f.write(struct.pack("<I", len(traj)))
            rows = np.empty(len(traj), dtype=dtype)
            rows["obs"] = traj.observations
            rows["action"] = traj.actions
            f.write(rows.tobytes())
            f.write(struct.pack("<B", int(traj.terminal_kind)))


def load_dataset(path) -> Dataset:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != DATASET_MAGIC:
        raise DatasetError(f"{path}: not a demonstration dataset file")
    header = struct.Struct("<HBHHI")
    if len(raw) < 4 + header.size:
        raise DatasetError(f"{path}: truncated header")
    version, env_id, width, height, n_traj = header.unpack_from(raw, 4)
    if version != DATASET_VERSION:
        raise DatasetError(f"{path}: unsupported version {version}")
    try:
        spec = EnvSpec.make(EnvId(env_id), width, height)
    except ValueError:
        raise DatasetError(f"{path}: unknown env id {env_id}") from None
    obs_len = obs_length(spec)
    dtype = _step_dtype(obs_len)
    offset = 4 + header.size
    trajectories = []
    for _ in range(n_traj):
        if offset + 4 > len(raw):
            raise DatasetError(f"{path}: truncated trajectory header")
        (length,) = struct.unpack_from("<I", raw, offset)
        offset += 4
        nbytes = length * dtype.itemsize
        if offset + nbytes + 1 > len(raw):
            raise DatasetError(f"{path}: truncated trajectory body")
        rows = np.frombuffer(raw, dtype=dtype, count=length, offset=offset)
        offset += nbytes
        kind = TerminationKind(raw[offset])
        offset += 1
        trajectories.append(Trajectory(
            rows["obs"].copy(), rows["action"].copy(), kind))
    if offset != len(raw):
        raise DatasetError(f"{path}: trailing bytes after last trajectory")
    return Dataset(EnvId(env_id), width, height, trajectories)
