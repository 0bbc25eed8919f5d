"""Experiment harness: config files, the training loop, metrics, summaries.

A run is fully described by an INI config plus a seed. Training draws every
random number from named PCG64 streams derived from that seed, so a rerun
with the same config, seed and kernel backend reproduces metrics.jsonl byte
for byte. Evaluation episode seeds live in a range disjoint from training
episode seeds; evaluation layouts are therefore never seen in training.

Run directory layout:

    config.ini      canonical copy of the effective configuration
    metrics.jsonl   one JSON object per evaluation point, sorted keys
    snapshot.ails   final model weights (discriminator first, if any)
"""
from __future__ import annotations

import configparser
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from gailbias import dac
from gailbias.discriminator import (
    RewardKind, RewardSpec, build_features, init_discriminator,
    probs, rewards_from_probs, train_epoch,
)
from gailbias.errors import ConfigurationError, DatasetError, TrainingError, UsageError
from gailbias.expert import load_dataset
from gailbias.gridworld import EnvSpec, obs_length, reset, step, success
from gailbias.policy import (
    EpisodeRecord, Policy, PPOConfig, RolloutCollector, act, compute_gae,
    greedy_action, init_policy, ppo_update,
)

METHODS = ("positive", "negative", "neutral",
           "constant_positive", "constant_negative", "dac")
ENV_ORDER = ("empty", "doorkey", "gotodoor", "redbluedoors", "distshift")

_TAG_POLICY = 0x504F4C49
_TAG_DISCRIM = 0x44495343
_TAG_UPDATE = 0x55504454
_TAG_DBATCH = 0x44424154
_TAG_EVAL = 0x4556414C

SNAPSHOT_MAGIC = b"AILS"
SNAPSHOT_VERSION = 1


def _stream(seed: int, *tags: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *tags])))


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    env: EnvSpec
    method: str
    reward: RewardSpec
    ppo: PPOConfig
    discrim_hidden: int
    discrim_lr: float
    discrim_batch: int
    discrim_steps: int          # 0 selects one pass over the buffer
    total_frames: int
    eval_every: int
    eval_episodes: int
    dataset_path: Optional[Path]
    seed: int

    @property
    def uses_discriminator(self) -> bool:
        return not self.reward.is_constant


_SECTION_KEYS = {
    "env": {"name", "width", "height", "max_steps"},
    "method": {"name", "epsilon"},
    "ppo": {"gamma", "gae_lambda", "clip_ratio", "entropy_coef", "value_coef",
            "learning_rate", "rollout_horizon", "epochs_per_update",
            "minibatch_size", "hidden_dim"},
    "discrim": {"hidden_dim", "learning_rate", "batch_size", "steps_per_update"},
    "run": {"total_frames", "eval_every", "eval_episodes", "seed", "dataset"},
}


def _parse_seed_list(raw: str) -> list[int]:
    parts = raw.replace(",", " ").split()
    if not parts:
        raise ConfigurationError("empty seed list")
    return [int(p) for p in parts]


def load_seed_list(path) -> list[int]:
    """Seeds of the sweep described by a config file ([run] seed, default 0)."""
    parser = configparser.ConfigParser()
    if not parser.read(Path(path)):
        raise ConfigurationError(f"cannot read config file {path}")
    raw = parser.get("run", "seed", fallback=None)
    return [0] if raw is None else _parse_seed_list(raw)


def load_config(path, seed_override: Optional[int] = None) -> RunConfig:
    path = Path(path)
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"cannot read config file {path}")
    for section in parser.sections():
        allowed = _SECTION_KEYS.get(section)
        if allowed is None:
            raise ConfigurationError(f"{path}: unknown section [{section}]")
        unknown = set(parser[section]) - allowed
        if unknown:
            raise ConfigurationError(
                f"{path}: unknown key(s) {sorted(unknown)} in [{section}]")

    def get(section, key, fallback=None):
        return parser.get(section, key, fallback=fallback)

    env_name = get("env", "name")
    if env_name is None:
        raise ConfigurationError(f"{path}: [env] name is required")
    env = EnvSpec.make(
        env_name,
        width=_opt_int(get("env", "width")),
        height=_opt_int(get("env", "height")),
        max_steps=_opt_int(get("env", "max_steps")))

    method = (get("method", "name") or "neutral").strip().lower()
    if method not in METHODS:
        raise ConfigurationError(f"{path}: unknown method {method!r}")
    epsilon = float(get("method", "epsilon") or 0.01)
    base_kind = RewardKind.POSITIVE if method == "dac" else RewardKind(method)
    reward = RewardSpec(base_kind, epsilon)

    ppo_kwargs = {}
    if parser.has_section("ppo"):
        for key in parser["ppo"]:
            raw = parser.get("ppo", key)
            ppo_kwargs[key] = int(raw) if key in (
                "rollout_horizon", "epochs_per_update", "minibatch_size",
                "hidden_dim") else float(raw)
    ppo = PPOConfig(**ppo_kwargs)

    total_frames = _opt_int(get("run", "total_frames"))
    if total_frames is None or total_frames < 1:
        raise ConfigurationError(f"{path}: [run] total_frames must be a positive int")
    if seed_override is not None:
        seed = seed_override
    else:
        raw_seed = get("run", "seed")
        # a list-valued seed key describes a sweep; a plain load takes its head
        seed = _parse_seed_list(raw_seed)[0] if raw_seed else 0

    dataset = get("run", "dataset")
    dataset_path = None
    if dataset:
        dataset_path = Path(dataset)
        if not dataset_path.is_absolute():
            dataset_path = path.parent / dataset_path
    if reward.is_constant and dataset_path is not None:
        raise ConfigurationError(
            f"{path}: method {method} takes no demonstrations; remove dataset")
    if not reward.is_constant and dataset_path is None:
        raise ConfigurationError(f"{path}: method {method} requires [run] dataset")

    return RunConfig(
        env=env, method=method, reward=reward, ppo=ppo,
        discrim_hidden=_opt_int(get("discrim", "hidden_dim")) or 64,
        discrim_lr=float(get("discrim", "learning_rate") or 3e-4),
        discrim_batch=_opt_int(get("discrim", "batch_size")) or 256,
        discrim_steps=_opt_int(get("discrim", "steps_per_update")) or 0,
        total_frames=total_frames,
        eval_every=_opt_int(get("run", "eval_every")) or 50_000,
        eval_episodes=_opt_int(get("run", "eval_episodes")) or 20,
        dataset_path=dataset_path,
        seed=seed)


def _opt_int(raw) -> Optional[int]:
    return None if raw is None or raw == "" else int(raw)


def write_config(cfg: RunConfig, path) -> None:
    """Canonical dump of the effective configuration."""
    parser = configparser.ConfigParser()
    parser["env"] = {
        "name": cfg.env.name, "width": str(cfg.env.width),
        "height": str(cfg.env.height), "max_steps": str(cfg.env.max_steps)}
    parser["method"] = {"name": cfg.method, "epsilon": repr(cfg.reward.epsilon)}
    parser["ppo"] = {
        "gamma": repr(cfg.ppo.gamma), "gae_lambda": repr(cfg.ppo.gae_lambda),
        "clip_ratio": repr(cfg.ppo.clip_ratio),
        "entropy_coef": repr(cfg.ppo.entropy_coef),
        "value_coef": repr(cfg.ppo.value_coef),
        "learning_rate": repr(cfg.ppo.learning_rate),
        "rollout_horizon": str(cfg.ppo.rollout_horizon),
        "epochs_per_update": str(cfg.ppo.epochs_per_update),
        "minibatch_size": str(cfg.ppo.minibatch_size),
        "hidden_dim": str(cfg.ppo.hidden_dim)}
    parser["discrim"] = {
        "hidden_dim": str(cfg.discrim_hidden),
        "learning_rate": repr(cfg.discrim_lr),
        "batch_size": str(cfg.discrim_batch),
        "steps_per_update": str(cfg.discrim_steps)}
    run = {"total_frames": str(cfg.total_frames),
           "eval_every": str(cfg.eval_every),
           "eval_episodes": str(cfg.eval_episodes),
           "seed": str(cfg.seed)}
    if cfg.dataset_path is not None:
        run["dataset"] = str(cfg.dataset_path)
    parser["run"] = run
    with open(path, "w") as f:
        parser.write(f)


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvalSummary:
    episodes: list[EpisodeRecord] = field(default_factory=list)

    @property
    def success_rate(self) -> float:
        if not self.episodes:
            return 0.0
        return sum(success(e.kind) for e in self.episodes) / len(self.episodes)

    @property
    def mean_length(self) -> float:
        if not self.episodes:
            return 0.0
        return sum(e.length for e in self.episodes) / len(self.episodes)

    @property
    def mean_env_reward(self) -> float:
        if not self.episodes:
            return 0.0
        return sum(e.env_reward for e in self.episodes) / len(self.episodes)

    def by_kind(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for e in self.episodes:
            counts[e.kind.name] = counts.get(e.kind.name, 0) + 1
        return dict(sorted(counts.items()))


def rollout_episode(spec: EnvSpec, episode_seed: int, action_fn) -> EpisodeRecord:
    """Play one episode under action_fn(state, obs); returns its record."""
    state, obs = reset(spec, episode_seed)
    while True:
        state, obs, env_reward, done, kind = step(state, action_fn(state, obs))
        if done:
            return EpisodeRecord(state.step_count, kind, env_reward)


def eval_episodes(spec: EnvSpec, n_episodes: int, seed: int, action_fn) -> EvalSummary:
    """Run any actor on held-out episode seeds (disjoint from training's)."""
    rng = _stream(seed, _TAG_EVAL)
    result = EvalSummary()
    for _ in range(n_episodes):
        episode_seed = 2 ** 62 + int(rng.integers(0, 2 ** 62))
        result.episodes.append(rollout_episode(spec, episode_seed, action_fn))
    return result


def eval_policy(policy: Policy, spec: EnvSpec, n_episodes: int, seed: int,
                greedy: bool = False) -> EvalSummary:
    """Frozen-policy evaluation; sampling rng is private to this call."""
    rng = _stream(seed, _TAG_EVAL, 2)
    if greedy:
        action_fn = lambda state, obs: greedy_action(policy, obs)  # noqa: E731
    else:
        action_fn = lambda state, obs: act(policy, obs, rng)[0]  # noqa: E731
    return eval_episodes(spec, n_episodes, seed, action_fn)


# ---------------------------------------------------------------------------
# training loop


def run_experiment(cfg: RunConfig, out_dir) -> list[dict]:
    """Train one run to cfg.total_frames; returns the metric records."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_config(cfg, out_dir / "config.ini")
    metrics_path = out_dir / "metrics.jsonl"

    spec = cfg.env
    dim = obs_length(spec)
    policy = init_policy(dim, cfg.ppo, _stream(cfg.seed, _TAG_POLICY))
    update_rng = _stream(cfg.seed, _TAG_UPDATE)
    collector = RolloutCollector(spec, cfg.seed)

    discrim = None
    expert_feats = None
    dbatch_rng = None
    if cfg.uses_discriminator:
        dataset = load_dataset(cfg.dataset_path)
        if (dataset.env_id != spec.env_id or dataset.width != spec.width
                or dataset.height != spec.height):
            raise DatasetError(
                f"dataset {cfg.dataset_path} was recorded on "
                f"{dataset.spec().name} {dataset.width}x{dataset.height}, "
                f"run wants {spec.name} {spec.width}x{spec.height}")
        if cfg.method == "dac":
            e_obs, e_act = dac.augment_expert_transitions(dataset)
        else:
            e_obs, e_act = dataset.stacked()
        expert_feats = build_features(e_obs, e_act)
        discrim = init_discriminator(dim + 5, cfg.discrim_hidden,
                                     _stream(cfg.seed, _TAG_DISCRIM), cfg.discrim_lr)
        dbatch_rng = _stream(cfg.seed, _TAG_DBATCH)

    eval_seed_rng = _stream(cfg.seed, _TAG_EVAL, 1)
    records: list[dict] = []
    frames = 0
    next_eval = 0
    with open(metrics_path, "w") as metrics_file:
        while frames < cfg.total_frames:
            rollout = collector.collect(policy, cfg.ppo.rollout_horizon)
            frames += len(rollout)

            discrim_loss = 0.0
            if discrim is not None:
                agent_feats = build_features(rollout.obs, rollout.actions)
                train_feats = agent_feats
                if cfg.method == "dac":
                    n_abs = int(dac.absorbing_mask(rollout.kinds).sum())
                    if n_abs:
                        train_feats = np.concatenate([
                            agent_feats,
                            np.repeat(dac.absorbing_pair_features(spec), n_abs, axis=0)])
                steps = cfg.discrim_steps or max(
                    1, len(rollout) // max(cfg.discrim_batch // 2, 1))
                discrim_loss = train_epoch(discrim, expert_feats, train_feats,
                                           steps, dbatch_rng, cfg.discrim_batch)
                rollout.rewards = rewards_from_probs(
                    cfg.reward, probs(discrim, agent_feats))
                if cfg.method == "dac":
                    tail = dac.terminal_reward(discrim, cfg.reward, cfg.ppo.gamma)
                    rollout.rewards = dac.apply_terminal_tails(
                        rollout.rewards, rollout.kinds, tail)
            else:
                rollout.rewards = rewards_from_probs(
                    cfg.reward, np.full(len(rollout), 0.5))

            adv, rets = compute_gae(rollout, cfg.ppo)
            if not np.isfinite(adv).all():
                raise TrainingError("non-finite advantages", frames=frames)
            stats = ppo_update(policy, cfg.ppo, rollout, adv, rets, update_rng)

            if frames >= next_eval or frames >= cfg.total_frames:
                summary = eval_policy(policy, spec, cfg.eval_episodes,
                                      int(eval_seed_rng.integers(0, 2 ** 62)))
                record = {
                    "frames": frames,
                    "success_rate": summary.success_rate,
                    "mean_episode_length": summary.mean_length,
                    "mean_episode_env_reward": summary.mean_env_reward,
                    "mean_discriminator_reward": float(np.mean(rollout.rewards)),
                    "discriminator_loss": discrim_loss,
                    "entropy": stats["entropy"],
                    "episodes_by_kind": summary.by_kind(),
                }
                metrics_file.write(json.dumps(record, sort_keys=True) + "\n")
                metrics_file.flush()
                records.append(record)
                next_eval = (frames // cfg.eval_every + 1) * cfg.eval_every

    arrays = []
    if discrim is not None:
        arrays.extend(discrim.params())
    arrays.extend(policy.params())
    save_snapshot(out_dir / "snapshot.ails", arrays)
    return records


# ---------------------------------------------------------------------------
# snapshots


def save_snapshot(path, arrays: list[np.ndarray]) -> None:
    """magic AILS | version u16 | n_arrays u8 | per array:
    ndim u8, each dim u32, float64 data, all little endian."""
    with open(path, "wb") as f:
        f.write(SNAPSHOT_MAGIC)
        f.write(struct.pack("<HB", SNAPSHOT_VERSION, len(arrays)))
        for arr in arrays:
            arr = np.ascontiguousarray(arr, dtype=np.float64)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.astype("<f8").tobytes())


def load_snapshot(path) -> list[np.ndarray]:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != SNAPSHOT_MAGIC:
        raise DatasetError(f"{path}: not a snapshot file")
    version, n_arrays = struct.unpack_from("<HB", raw, 4)
    if version != SNAPSHOT_VERSION:
        raise DatasetError(f"{path}: unsupported snapshot version {version}")
    offset = 7
    arrays = []
    for _ in range(n_arrays):
        ndim = raw[offset]
        offset += 1
        shape = struct.unpack_from(f"<{ndim}I", raw, offset)
        offset += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        offset += 8 * count
        arrays.append(arr.reshape(shape).copy())
    if offset != len(raw):
        raise DatasetError(f"{path}: trailing bytes in snapshot")
    return arrays


def load_run_policy(run_dir) -> tuple[Policy, RunConfig]:
    """Rebuild the trained policy saved in a run directory."""
    run_dir = Path(run_dir)
    cfg = load_config(run_dir / "config.ini")
    arrays = load_snapshot(run_dir / "snapshot.ails")
    if len(arrays) not in (6, 10):
        raise DatasetError(f"{run_dir}: snapshot has {len(arrays)} arrays, want 6 or 10")
    w1, b1, wp, bp, wv, bv = arrays[-6:]
    policy = init_policy(obs_length(cfg.env), cfg.ppo, _stream(cfg.seed, _TAG_POLICY))
    for dst, src in zip(policy.params(), (w1, b1, wp, bp, wv, bv)):
        if dst.shape != src.shape:
            raise DatasetError(f"{run_dir}: snapshot shape {src.shape} does not "
                               f"match config-derived shape {dst.shape}")
        dst[...] = src
    return policy, cfg


# ---------------------------------------------------------------------------
# cross-run summary

SUMMARY_COLUMNS = ("env", "method", "seeds", "frames",
                   "success_mean", "success_std", "length_mean")


def final_record(run_dir) -> dict:
    lines = (Path(run_dir) / "metrics.jsonl").read_text().strip().splitlines()
    if not lines:
        raise DatasetError(f"{run_dir}: empty metrics file")
    return json.loads(lines[-1])


def collect_runs(root) -> dict[tuple[str, str], list[dict]]:
    """Group runs under root by (env name, method)."""
    groups: dict[tuple[str, str], list[dict]] = {}
    specs: dict[tuple[str, str], EnvSpec] = {}
    for config_path in sorted(Path(root).glob("**/config.ini")):
        run_dir = config_path.parent
        if not (run_dir / "metrics.jsonl").exists():
            continue
        cfg = load_config(config_path)
        key = (cfg.env.name, cfg.method)
        seen = specs.setdefault(key, cfg.env)
        if seen != cfg.env:
            raise UsageError(f"runs grouped under {key} use different env specs: "
                             f"{seen} vs {cfg.env}")
        groups.setdefault(key, []).append(final_record(run_dir))
    return groups


def summarize_runs(root, out_csv) -> list[dict]:
    """One CSV row per (method, env) cell; population std across seeds."""
    groups = collect_runs(root)
    rows = []
    for method in METHODS:
        for env in ENV_ORDER:
            records = groups.get((env, method))
            if not records:
                rows.append({"env": env, "method": method, "seeds": 0,
                             "frames": "missing", "success_mean": "missing",
                             "success_std": "missing", "length_mean": "missing"})
                continue
            succ = np.array([r["success_rate"] for r in records])
            lengths = np.array([r["mean_episode_length"] for r in records])
            rows.append({
                "env": env, "method": method, "seeds": len(records),
                "frames": max(r["frames"] for r in records),
                "success_mean": f"{succ.mean():.3f}",
                "success_std": f"{succ.std(ddof=0):.3f}",
                "length_mean": f"{lengths.mean():.1f}",
            })
    import csv
    with open(out_csv, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    return rows
