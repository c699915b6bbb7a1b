"""
Shared fixtures for the dllm_agent_lab test suite.

- a default-size world with sampled tasks, gold episodes and examples
- tiny backbone configs (fast on CPU)
- scripted scorers with hand-set confidences
- an EpisodeRecord builder for metric fixtures
"""

import logging
from typing import List, Optional, Sequence

import pytest
import torch

from agent.actions import ParseError, ParseReason, Terminate, ToolCall, serialize_action
from agent.runtime import EpisodeRecord, Outcome, RoundRecord
from diffusion.model import ModelConfig, TinyTransformer
from world.generator import WorldConfig, generate_world, sample_tasks
from world.trajectories import GoldEpisode, build_gold_trajectory, make_training_set
from world.vocab import Vocab


# ============================================
# Environment
# ============================================


@pytest.fixture(autouse=True)
def lab_env(tmp_path, monkeypatch):
    """Keep logs and default outputs inside the test's tmp directory."""
    monkeypatch.setenv("LAB_LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.setenv("LAB_DATA_DIR", str(tmp_path / "runs"))
    monkeypatch.setenv("LAB_LOG_LEVEL", "INFO")
    yield
    root = logging.getLogger()
    for handler in list(root.handlers):
        if isinstance(handler, logging.FileHandler):
            handler.close()
            root.removeHandler(handler)


# ============================================
# World and Data
# ============================================


@pytest.fixture(scope="session")
def vocab() -> Vocab:
    return Vocab.default()


@pytest.fixture(scope="session")
def world():
    return generate_world(WorldConfig())


@pytest.fixture(scope="session")
def tasks(world):
    return sample_tasks(world, 24, seed=7)


@pytest.fixture(scope="session")
def gold_episodes(world, tasks) -> List[GoldEpisode]:
    return [GoldEpisode(t.task_id, build_gold_trajectory(t, world)) for t in tasks]


@pytest.fixture(scope="session")
def examples(gold_episodes):
    return make_training_set(gold_episodes)


# ============================================
# Models and Scorers
# ============================================


@pytest.fixture
def tiny_model_config(vocab) -> ModelConfig:
    return ModelConfig(vocab_size=vocab.size, d_model=16, n_layers=1, n_heads=2, max_len=512, seed=0)


@pytest.fixture
def tiny_model(tiny_model_config) -> TinyTransformer:
    model = TinyTransformer(tiny_model_config)
    model.eval()
    return model


class StepwiseScorer:
    """
    Scorer whose confidences change from call to call.

    Call c gives action position p the target token token_ids[p] with
    probability schedule[c][p] (the last row repeats); the remaining mass is
    spread evenly over the other symbols.
    """

    def __init__(self, schedule: Sequence[Sequence[float]], token_ids: Sequence[int], vocab_size: int, ctx_len: int):
        self.schedule = [list(row) for row in schedule]
        self.token_ids = list(token_ids)
        self.vocab_size = vocab_size
        self.ctx_len = ctx_len
        self.calls = 0

    def score(self, tokens: torch.Tensor, allow: torch.Tensor, positions: Sequence[int], shift: bool) -> torch.Tensor:
        row = self.schedule[min(self.calls, len(self.schedule) - 1)]
        self.calls += 1
        logits = torch.empty(len(positions), self.vocab_size, dtype=torch.float64)
        for i, pos in enumerate(positions):
            rel = pos - self.ctx_len
            conf = row[rel]
            probs = torch.full((self.vocab_size,), (1.0 - conf) / (self.vocab_size - 1), dtype=torch.float64)
            probs[self.token_ids[rel]] = conf
            logits[i] = torch.log(probs)
        return logits


@pytest.fixture
def stepwise_scorer():
    return StepwiseScorer


# ============================================
# Episode Records
# ============================================


def _round(index: int, action, role: str, executed: bool, valid: bool = True, observation: str = "") -> RoundRecord:
    raw = serialize_action(action) if valid else ["BEGIN_ACTION"]
    return RoundRecord(
        index=index,
        raw_tokens=raw,
        action=action.to_dict(),
        observation=observation,
        role=role,
        valid=valid,
        executed=executed,
    )


def build_record(
    task_id: str = "t0",
    regime: str = "diffusion",
    tool_calls: int = 1,
    turns: Optional[int] = None,
    seeker_calls: Optional[int] = None,
    correct: bool = True,
    invalid: bool = False,
    gold: str = "e1",
) -> EpisodeRecord:
    """
    Episode with exact counts.

    The first tool_calls rounds are executed ToolCalls (seeker_calls of them
    searches, the rest distinct think calls); an invalid round follows when
    requested; the last round is Terminate. Filler rounds are think calls
    that were never executed.
    """
    seeker_calls = tool_calls if seeker_calls is None else seeker_calls
    turns = tool_calls + 1 + int(invalid) if turns is None else turns
    if turns < tool_calls + 1 + int(invalid):
        raise ValueError("turns too small for the requested counts")

    rounds: List[RoundRecord] = []
    for i in range(tool_calls):
        if i < seeker_calls:
            rounds.append(_round(i, ToolCall("batch_web_search", {"query": f"p={i}"}), "seeker", True, observation="d1:e1"))
        else:
            rounds.append(_round(i, ToolCall("think", {"thought": f"step{i}"}), "planner", True))
    if invalid:
        rounds.append(_round(len(rounds), ParseError(ParseReason.MISSING_DELIMITER), "planner", False, valid=False))
    while len(rounds) < turns - 1:
        rounds.append(_round(len(rounds), ToolCall("think", {"thought": "wait"}), "planner", False))

    answer = gold if correct else "e999"
    rounds.append(_round(len(rounds), Terminate(answer), "planner", False))
    return EpisodeRecord(
        task_id=task_id,
        regime=regime,
        gold_answer=gold,
        rounds=rounds,
        outcome=Outcome.ANSWERED_CORRECT if correct else Outcome.ANSWERED_WRONG,
        answer=answer,
        budget={"context_cap": 2048, "t_max": 15, "tool_cap": 12, "gen_token_cap": 2048},
    )


@pytest.fixture
def make_record():
    return build_record
