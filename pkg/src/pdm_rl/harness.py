"""Seeded training runs, incremental persistence and parallel execution."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rl
from .config import Algorithm, TrainConfig
from .envs import make
from .net import NumericalError

log = logging.getLogger(__name__)

SMOOTH_WINDOW = 100


@dataclass
class RunRecord:
    seed: int
    scores: list[float] = field(default_factory=list)
    policy_losses: list[float] = field(default_factory=list)
    value_losses: list[float] = field(default_factory=list)
    local_losses: list[list[float]] = field(default_factory=list)
    wall_ms: list[float] = field(default_factory=list)
    failed: bool = False
    error: str = ""

    def __len__(self) -> int:
        return len(self.scores)

    def append(self, score: float, update: rl.UpdateRecord, wall_ms: float) -> dict:
        self.scores.append(float(score))
        self.policy_losses.append(update.policy_loss)
        self.value_losses.append(update.value_loss)
        self.local_losses.append([float(x) for x in update.local_losses])
        self.wall_ms.append(wall_ms)
        i = len(self.scores) - 1
        recent = self.scores[max(0, i + 1 - SMOOTH_WINDOW):]
        return {
            "iteration": i,
            "score": self.scores[-1],
            "smoothed_score": float(np.mean(recent)),
            "policy_loss": update.policy_loss,
            "value_loss": update.value_loss,
            "local_losses": self.local_losses[-1],
            "wall_ms": wall_ms,
        }

    def deterministic_view(self) -> tuple:
        """Everything except wall-clock timings."""
        return (self.seed, self.scores, self.policy_losses, self.value_losses,
                self.local_losses, self.failed, self.error)


def config_hash(config: TrainConfig) -> str:
    payload = {k: v for k, v in config.to_dict().items() if k != "seeds"}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


def _run_paths(out_dir: Path, seed: int) -> tuple[Path, Path]:
    return out_dir / f"seed_{seed}.jsonl", out_dir / f"seed_{seed}.meta.json"


def train_run(config: TrainConfig, seed: int, out_dir: Path | None = None) -> RunRecord:
    """Train one seed; every iteration is appended to ``seed_<n>.jsonl`` as it finishes."""
    ss = np.random.SeedSequence(seed)
    init_ss, env_ss, act_ss, upd_ss = ss.spawn(4)
    env = make(config.env)
    env.reset(seed=int(env_ss.generate_state(1)[0]))
    net, head = rl.build_network(config, env, np.random.default_rng(init_ss))
    act_rng = np.random.default_rng(act_ss)
    upd_rng = np.random.default_rng(upd_ss)

    record = RunRecord(seed)
    sink = None
    if out_dir is not None:
        jsonl, meta = _run_paths(out_dir, seed)
        meta.unlink(missing_ok=True)
        sink = open(jsonl, "w")

    buffer = rl.ReplayBuffer(config.buffer_size)
    collector = rl.BufferCollector(env, config.gamma)
    last_score = None
    try:
        for _ in range(config.n_iterations):
            t0 = time.perf_counter()
            if config.algorithm is Algorithm.PPO:
                finished = collector.fill(net, head, buffer, act_rng)
                update = rl.ppo_update(net, head, buffer, config, upd_rng)
                if finished:
                    last_score = float(np.mean(finished))
                score = last_score if last_score is not None else collector.episode_return
            else:
                episode = rl.collect_episode(env, net, head, act_rng, config.gamma)
                if config.algorithm is Algorithm.REINFORCE:
                    update = rl.reinforce_update(net, head, episode, config)
                else:
                    update = rl.value_baseline_update(net, head, episode, config)
                score = episode.total_reward
            if not np.isfinite(score):
                raise NumericalError("non-finite episode score")
            line = record.append(score, update, (time.perf_counter() - t0) * 1000.0)
            if sink is not None:
                sink.write(json.dumps(line) + "\n")
                sink.flush()
    except NumericalError as exc:
        record.failed = True
        record.error = str(exc)
        log.warning("seed %d failed at iteration %d: %s", seed, len(record), exc)
    finally:
        if sink is not None:
            sink.close()
    if out_dir is not None:
        _run_paths(out_dir, seed)[1].write_text(json.dumps({
            "seed": seed, "failed": record.failed, "error": record.error,
            "iterations": len(record), "config_hash": config_hash(config),
        }))
    return record


def _train_job(args) -> RunRecord:
    config_dict, seed, out_dir = args
    return train_run(TrainConfig.from_dict(config_dict), seed, Path(out_dir) if out_dir else None)


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("PDM_RL_THREADS")
    n = requested if requested is not None else (int(cap) if cap else 1)
    if cap:
        n = min(n, int(cap))
    return max(1, n)


def run(config: TrainConfig, out_dir=None, workers: int | None = None,
        resume: bool = False) -> list[RunRecord]:
    """One record per seed, in seed order.

    With ``resume`` a seed whose finished record in ``out_dir`` was produced by
    the same configuration is loaded instead of retrained.  A numerically
    failing seed is marked failed; the others are unaffected.
    """
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2))

    records: dict[int, RunRecord] = {}
    todo = []
    for seed in config.seeds:
        if resume and out is not None:
            cached = _load_if_complete(out, seed, config)
            if cached is not None:
                records[seed] = cached
                continue
        todo.append(seed)

    n_workers = min(worker_count(workers), max(1, len(todo)))
    jobs = [(config.to_dict(), s, str(out) if out else None) for s in todo]
    if n_workers == 1:
        results = map(_train_job, jobs)
    else:
        pool = ProcessPoolExecutor(n_workers)
        results = pool.map(_train_job, jobs)
    for seed, rec in zip(todo, results):
        records[seed] = rec
    if n_workers > 1:
        pool.shutdown()
    return [records[s] for s in config.seeds]


def _load_if_complete(out: Path, seed: int, config: TrainConfig) -> RunRecord | None:
    jsonl, meta_path = _run_paths(out, seed)
    if not (jsonl.exists() and meta_path.exists()):
        return None
    meta = json.loads(meta_path.read_text())
    if meta.get("config_hash") != config_hash(config):
        return None
    if not meta["failed"] and meta["iterations"] != config.n_iterations:
        return None
    return load_run(jsonl, meta_path)


def load_run(jsonl, meta_path=None) -> RunRecord:
    jsonl = Path(jsonl)
    if meta_path is None:
        meta_path = jsonl.with_name(jsonl.name.replace(".jsonl", ".meta.json"))
    meta = json.loads(Path(meta_path).read_text()) if Path(meta_path).exists() else {}
    seed = meta.get("seed", int(jsonl.stem.split("_")[-1]))
    rec = RunRecord(seed, failed=meta.get("failed", False), error=meta.get("error", ""))
    with open(jsonl) as fh:
        for n, line in enumerate(fh):
            row = json.loads(line)
            if row["iteration"] != n:
                raise ValueError(f"{jsonl}: iteration {row['iteration']} out of order at line {n + 1}")
            rec.scores.append(row["score"])
            rec.policy_losses.append(row["policy_loss"])
            rec.value_losses.append(row["value_loss"])
            rec.local_losses.append(row["local_losses"])
            rec.wall_ms.append(row["wall_ms"])
    return rec


@dataclass
class RunSet:
    """All seeds of one configuration as stored in a run directory."""

    path: Path
    config: TrainConfig
    records: list[RunRecord]

    @property
    def label(self) -> str:
        c = self.config
        return f"{c.algorithm.value}/{c.mode.value}"

    @property
    def ok(self) -> list[RunRecord]:
        return [r for r in self.records if not r.failed and len(r)]

    @property
    def attrition(self) -> int:
        return len(self.records) - len(self.ok)


def load_run_dir(path) -> RunSet:
    path = Path(path)
    cfg_path = path / "config.json"
    if not cfg_path.exists():
        raise FileNotFoundError(f"{cfg_path} missing")
    config = TrainConfig.from_dict(json.loads(cfg_path.read_text()))
    files = sorted(path.glob("seed_*.jsonl"), key=lambda p: int(p.stem.split("_")[-1]))
    if not files:
        raise FileNotFoundError(f"no seed_*.jsonl records in {path}")
    return RunSet(path, config, [load_run(f) for f in files])
