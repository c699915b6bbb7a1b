"""
Pipeline Stages for dllm_agent_lab

One BaseStage per CLI subcommand. Each stage reads its inputs, writes its
artifacts into one output directory and returns a StageResult; the CLI
wraps it in a PipelineJob and writes the run manifest.

Stages:
- GenerateDataStage: world, task splits, gold episodes, training examples
- TrainStage: one regime's fine-tuning run and checkpoint
- RunStage: budgeted episodes with a checkpoint, plus decode traces
- AnalyzeStage: metrics, seeker histogram, decoding-dynamics tables
- ReportStage: side-by-side regime comparison

Usage:
    from scripts.stages import TrainStage

    result = TrainStage().run(data="runs/data", out="runs/dllm", regime="diffusion")
"""

from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd

from agent.policies import ModelPolicy
from agent.runtime import Budget, run_episodes
from analysis.dynamics import check_conservation, decode_dynamics
from analysis.metrics import episode_metrics, episodes_frame, histogram_frame
from analysis.report import compare_runs, format_table
from analysis.validation import load_episode_records, load_traces
from analysis.warehouse import upsert_frame
from core.base import BaseStage, StageResult
from core.config import ConfigurationError
from core.utils import ensure_directory_exists, read_json, write_json, write_jsonl
from diffusion.decoding import DecodeConfig
from diffusion.model import ModelConfig, load_checkpoint, save_checkpoint
from diffusion.training import TrainConfig, evaluate, train
from world.generator import TaskSpec, World, WorldConfig, generate_world, sample_tasks
from world.trajectories import (
    GoldEpisode,
    build_gold_trajectory,
    load_examples,
    make_training_set,
    save_episodes,
    save_examples,
)
from world.vocab import Vocab


WORLD_FILE = "world.json"
TASKS_FILE = "tasks.json"
VOCAB_FILE = "vocab.json"
CHECKPOINT_FILE = "model.pt"
ROLES = (None, "planner", "seeker")


def _csv(result: StageResult, name: str, df: pd.DataFrame, path: Path, index: bool = False) -> None:
    df.to_csv(path, index=index, float_format="%.10g")
    result.add_artifact(name, path, len(df))


def checkpoint_target(out: str) -> Tuple[Path, Path]:
    """
    Split train --out into (output directory, checkpoint path).

    A path ending in .pt names the checkpoint itself; anything else is a
    directory that receives model.pt.
    """
    path = Path(out)
    if path.suffix == ".pt":
        return path.parent, path
    return path, path / CHECKPOINT_FILE


def _load_vocab(data_dir: Path) -> Vocab:
    path = data_dir / VOCAB_FILE
    if not path.is_file():
        raise ConfigurationError(
            message=f"No {VOCAB_FILE} in {data_dir}",
            fix="Point --data at a directory written by gen-data."
        )
    return Vocab.from_dict(read_json(path))


def _load_world_and_tasks(data_dir: Path, split: str) -> tuple:
    world_path = data_dir / WORLD_FILE
    if not world_path.is_file():
        raise ConfigurationError(
            message=f"No {WORLD_FILE} in {data_dir}",
            fix="Point --data at a directory written by gen-data."
        )
    world = World.from_dict(read_json(world_path))
    tasks = [TaskSpec.from_dict(t) for t in read_json(data_dir / TASKS_FILE)[split]]
    return world, tasks


# ============================================
# gen-data
# ============================================


class GenerateDataStage(BaseStage):
    """Synthesize the world and everything derived from it."""

    def __init__(self, logger=None):
        super().__init__("gen-data", logger)

    def run(
        self,
        out: str,
        seed: int = 7,
        entities: int = 20,
        attributes: int = 4,
        values: int = 10,
        docs: int = 3,
        tasks: int = 1000,
        heldout: int = 200,
        constraints: Optional[int] = None,
        vocab_size: int = 256,
        **_
    ) -> StageResult:
        self._start_stage()
        result = StageResult(self.stage_name)
        out_dir = ensure_directory_exists(Path(out))

        vocab = Vocab.default(vocab_size)
        world = generate_world(WorldConfig(seed, entities, attributes, values, docs))
        train_tasks = sample_tasks(world, tasks, seed, prefix="t", n_constraints=constraints)
        heldout_tasks = sample_tasks(world, heldout, seed, prefix="h", n_constraints=constraints)

        train_eps = [GoldEpisode(t.task_id, build_gold_trajectory(t, world)) for t in train_tasks]
        heldout_eps = [GoldEpisode(t.task_id, build_gold_trajectory(t, world)) for t in heldout_tasks]
        train_examples = make_training_set(train_eps)
        heldout_examples = make_training_set(heldout_eps)

        result.add_artifact("world", write_json(out_dir / WORLD_FILE, world.to_dict()), len(world.documents))
        result.add_artifact("vocab", write_json(out_dir / VOCAB_FILE, vocab.to_dict()), vocab.size)
        write_json(out_dir / TASKS_FILE, {
            "train": [t.to_dict() for t in train_tasks],
            "heldout": [t.to_dict() for t in heldout_tasks],
        })
        result.add_artifact("tasks", out_dir / TASKS_FILE, len(train_tasks) + len(heldout_tasks))
        n = save_episodes(out_dir / "episodes.jsonl", train_eps + heldout_eps)
        result.add_artifact("episodes", out_dir / "episodes.jsonl", n)
        n = save_examples(out_dir / "train.jsonl", train_examples, vocab.size)
        result.add_artifact("train", out_dir / "train.jsonl", n)
        n = save_examples(out_dir / "heldout.jsonl", heldout_examples, vocab.size)
        result.add_artifact("heldout", out_dir / "heldout.jsonl", n)

        result.values["train_examples"] = len(train_examples)
        result.values["longest_example"] = max((e.layout.total_len for e in train_examples), default=0)
        self._log_stage_summary(result)
        return result


# ============================================
# train
# ============================================


class TrainStage(BaseStage):
    """Fine-tune one regime and save the checkpoint with its loss log."""

    def __init__(self, logger=None):
        super().__init__("train", logger)

    def run(
        self,
        data: str,
        out: str,
        regime: str = "diffusion",
        seed: int = 0,
        epochs: int = 5,
        lr: float = 1e-3,
        lr_end: float = 0.0,
        batch_size: int = 16,
        noise_levels: int = 16,
        lam: float = 0.5,
        block_len: int = 32,
        d_model: int = 64,
        layers: int = 2,
        heads: int = 4,
        max_len: int = 512,
        context_clean: bool = True,
        span_aware: bool = True,
        **_
    ) -> StageResult:
        self._start_stage()
        result = StageResult(self.stage_name)
        data_dir = Path(data)
        out_dir, ckpt_path = checkpoint_target(out)
        ensure_directory_exists(out_dir)

        vocab = _load_vocab(data_dir)
        examples = load_examples(data_dir / "train.jsonl", vocab.size)
        config = TrainConfig(
            epochs=epochs, lr_start=lr, lr_end=lr_end, batch_size=batch_size, K=noise_levels,
            lam=lam, seed=seed, context_clean=context_clean, span_aware=span_aware,
            regime=regime, block_len=block_len,
        )
        model_config = ModelConfig(vocab.size, d_model, layers, heads, max_len, seed)

        trained = train(config, examples, model_config, vocab)
        ckpt = save_checkpoint(
            ckpt_path, trained.model, trained.steps,
            extra={"regime": regime, "train_config": asdict(config), "stream_hash": trained.stream_hash},
        )
        result.add_artifact("checkpoint", ckpt, 1)
        _csv(result, "loss_log", trained.loss_log, out_dir / "loss_log.csv")
        epochs_df = pd.DataFrame([dict(epoch=i, **e.to_dict()) for i, e in enumerate(trained.epoch_losses)])
        _csv(result, "epoch_losses", epochs_df, out_dir / "epoch_losses.csv")

        heldout_path = data_dir / "heldout.jsonl"
        if heldout_path.is_file():
            heldout = load_examples(heldout_path, vocab.size)
            if heldout:
                scores = evaluate(trained.model, heldout, vocab, K=noise_levels, seed=seed, block_len=block_len)
                write_json(out_dir / "eval.json", scores)
                result.add_artifact("eval", out_dir / "eval.json", 1)
                result.values["heldout_l_mdm"] = round(scores["l_mdm"], 6)

        result.values["stream_hash"] = trained.stream_hash
        result.values["final_l_total"] = round(trained.epoch_losses[-1].l_total, 6)
        self._log_stage_summary(result)
        return result


# ============================================
# run
# ============================================


class RunStage(BaseStage):
    """Run budgeted episodes with a frozen checkpoint."""

    def __init__(self, logger=None):
        super().__init__("run", logger)

    def run(
        self,
        data: str,
        ckpt: str,
        out: str,
        regime: Optional[str] = None,
        split: str = "heldout",
        limit: Optional[int] = None,
        tau: float = 0.9,
        block_len: int = 32,
        max_action_len: int = 64,
        budget: str = "",
        jobs: int = 1,
        **_
    ) -> StageResult:
        self._start_stage()
        result = StageResult(self.stage_name)
        data_dir, out_dir = Path(data), ensure_directory_exists(Path(out))

        world, tasks = _load_world_and_tasks(data_dir, split)
        if limit is not None:
            tasks = tasks[:limit]
        model, meta = load_checkpoint(ckpt)
        vocab = _load_vocab(data_dir)
        if vocab.size != model.config.vocab_size:
            raise ConfigurationError(
                message=f"Checkpoint vocab_size {model.config.vocab_size} != data vocab size {vocab.size}",
                fix="Use the checkpoint trained on this data directory."
            )
        regime = regime or meta.get("extra", {}).get("regime", "diffusion")
        decode_config = DecodeConfig(tau=tau, block_len=block_len, max_action_len=max_action_len, regime=regime)
        limits = Budget.parse(budget)

        policy = ModelPolicy(model, vocab, decode_config)
        outputs = run_episodes(tasks, world, lambda task: policy, limits, jobs)

        episode_rows: List[Dict] = []
        trace_rows: List[Dict] = []
        for record, traces in outputs:
            record.traces_path = "traces.jsonl"
            episode_rows.append(record.to_dict())
            for trace in traces:
                trace_rows.extend(trace.records())

        result.add_artifact("episodes", out_dir / "episodes.jsonl", write_jsonl(out_dir / "episodes.jsonl", episode_rows))
        result.add_artifact("traces", out_dir / "traces.jsonl", write_jsonl(out_dir / "traces.jsonl", trace_rows))

        report = episode_metrics([record for record, _ in outputs]) if outputs else None
        result.values["regime"] = regime
        result.values["policy"] = policy.describe()
        result.values["budget"] = limits.to_dict()
        if report is not None:
            result.values["accuracy_pct"] = report.accuracy_pct
            result.values["invalid_action_rate_pct"] = report.invalid_action_rate_pct
        self._log_stage_summary(result)
        return result


# ============================================
# analyze
# ============================================


class AnalyzeStage(BaseStage):
    """Metrics and dynamics tables for one run directory."""

    def __init__(self, logger=None):
        super().__init__("analyze", logger)

    def run(self, run: str, out: Optional[str] = None, warehouse: Optional[str] = None, **_) -> StageResult:
        self._start_stage()
        result = StageResult(self.stage_name)
        run_dir = Path(run)
        out_dir = ensure_directory_exists(Path(out) if out else run_dir / "analysis")

        episodes_path = run_dir / "episodes.jsonl"
        if not episodes_path.is_file():
            raise ConfigurationError(
                message=f"No episodes.jsonl in {run_dir}",
                fix="Point --run at a directory written by the run subcommand."
            )
        records = load_episode_records(episodes_path)
        traces_path = run_dir / "traces.jsonl"
        traces = load_traces(traces_path) if traces_path.is_file() else []

        report = episode_metrics(records)
        _csv(result, "metrics", report.to_frame(), out_dir / "metrics.csv")
        histogram = histogram_frame(report.seeker_call_histogram, report.regime)
        _csv(result, "seeker_histogram", histogram, out_dir / "seeker_histogram.csv")
        episodes_df = episodes_frame(records)
        _csv(result, "episodes", episodes_df.drop(columns=["wall_clock"]), out_dir / "episodes.csv")

        latency_rows = []
        for role in ROLES:
            suffix = role or "all"
            dynamics = decode_dynamics(traces, role=role)
            _csv(result, f"entropy_{suffix}", dynamics.entropy_series, out_dir / f"dynamics_entropy_{suffix}.csv")
            _csv(result, f"remaining_{suffix}", dynamics.remaining_mask_series, out_dir / f"dynamics_remaining_{suffix}.csv")
            _csv(result, f"tokens_per_step_{suffix}", dynamics.tokens_per_step_series,
                 out_dir / f"dynamics_tokens_per_step_{suffix}.csv")
            _csv(result, f"confidence_{suffix}", dynamics.confidence_decode_probability,
                 out_dir / f"dynamics_confidence_{suffix}.csv")
            _csv(result, f"decode_order_{suffix}", dynamics.decode_order_matrix(),
                 out_dir / f"decode_order_{suffix}.csv", index=True)
            _csv(result, f"decode_order_relative_{suffix}", dynamics.decode_order_matrix(relative=True),
                 out_dir / f"decode_order_relative_{suffix}.csv", index=True)
            latency = {k: v for k, v in dynamics.latency.items() if k != "wall_clock_total"}
            latency_rows.append({"regime": report.regime, "role": suffix, "n_traces": dynamics.n_traces, **latency})
        _csv(result, "latency", pd.DataFrame(latency_rows), out_dir / "dynamics_latency.csv")

        problems = [p for t in traces for p in check_conservation(t)]
        for i, problem in enumerate(problems[:20]):
            result.add_error(f"conservation_{i}", problem)

        if warehouse:
            tables = {"episodes": episodes_df, "metrics": report.to_frame(), "seeker_histogram": histogram}
            for table, df in tables.items():
                if not upsert_frame(warehouse, df, table):
                    result.add_error(f"warehouse_{table}", f"upsert into {warehouse} failed")

        result.values["wall_clock_total"] = round(report.wall_clock_total, 3)
        self._log_stage_summary(result)
        return result


# ============================================
# report
# ============================================


class ReportStage(BaseStage):
    """Comparison table across run directories."""

    def __init__(self, logger=None):
        super().__init__("report", logger)

    def run(self, compare: Sequence[str], out: str, **_) -> StageResult:
        self._start_stage()
        result = StageResult(self.stage_name)
        out_dir = ensure_directory_exists(Path(out))

        table = compare_runs(compare)
        _csv(result, "comparison", table, out_dir / "comparison.csv")
        result.values["table"] = "\n" + format_table(table)
        self._log_stage_summary(result)
        return result
