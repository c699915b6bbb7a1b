"""
Agent Policies for dllm_agent_lab

A policy maps a serialized context to one raw action span. The runtime
never looks behind this interface, so model-backed, scripted and replay
policies all go through the same loop.

Policies:
- ModelPolicy: a checkpoint decoded with decode_diffusion or decode_ar
- ScriptedPolicy: fixed spans (or a callable) for tests and fuzzing
- GoldReplayPolicy: replays the gold trajectory of a task

Usage:
    from agent.policies import ModelPolicy

    policy = ModelPolicy(model, vocab, DecodeConfig(regime="diffusion"))
    output = policy.propose(context_tokens, round_index=0, attempt=0, trace_id="t0:0:0")
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Union

from diffusion.decoding import DecodeConfig, DecodeTrace, ModelScorer, decode
from world.generator import TaskSpec, World
from world.trajectories import build_gold_trajectory
from world.vocab import Vocab


@dataclass
class PolicyOutput:
    tokens: List[str]
    trace: Optional[DecodeTrace] = None


class Policy(ABC):
    """
    Base class for everything that emits action spans.

    Attributes:
        regime: Regime label recorded on episodes ('diffusion' or 'ar')
        max_action_len: Longest span the policy can emit in one call
        context_limit: Longest context plus span the policy accepts (None = unlimited)
    """

    regime: str = "scripted"
    max_action_len: int = 64
    context_limit: Optional[int] = None

    @abstractmethod
    def propose(self, context: Sequence[str], round_index: int, attempt: int, trace_id: str) -> PolicyOutput:
        """Emit one raw span for the given context (attempt 1 is the retry)."""
        raise NotImplementedError

    def describe(self) -> dict:
        return {"policy": self.__class__.__name__, "max_action_len": self.max_action_len}


class ModelPolicy(Policy):
    """Decode spans from a frozen backbone; safe to share across episode workers."""

    def __init__(self, model, vocab: Vocab, config: DecodeConfig):
        self.model = model
        self.vocab = vocab
        self.config = config
        self.regime = config.regime
        self.max_action_len = config.max_action_len
        self.context_limit = model.config.max_len
        self._scorer = ModelScorer(model)

    def propose(self, context: Sequence[str], round_index: int, attempt: int, trace_id: str) -> PolicyOutput:
        result = decode(self._scorer, self.vocab.encode(context), self.config, self.vocab, trace_id=trace_id)
        return PolicyOutput(result.tokens, result.trace)

    def describe(self) -> dict:
        return {
            "policy": "ModelPolicy",
            "regime": self.regime,
            "tau": self.config.tau,
            "block_len": self.config.block_len,
            "max_action_len": self.max_action_len,
        }


SpanSource = Union[Sequence[Sequence[str]], Callable[[Sequence[str], int, int], Sequence[str]]]


class ScriptedPolicy(Policy):
    """
    Emit pre-written spans.

    Args:
        spans: Either a list indexed by call number (the last span repeats)
               or a callable (context, round_index, attempt) -> span
        regime: Regime label to record
    """

    def __init__(self, spans: SpanSource, regime: str = "scripted", max_action_len: int = 64):
        self.spans = spans
        self.regime = regime
        self.max_action_len = max_action_len
        self._calls = 0

    def propose(self, context: Sequence[str], round_index: int, attempt: int, trace_id: str) -> PolicyOutput:
        if callable(self.spans):
            span = self.spans(context, round_index, attempt)
        else:
            span = self.spans[min(self._calls, len(self.spans) - 1)]
        self._calls += 1
        return PolicyOutput(list(span)[: self.max_action_len])


class GoldReplayPolicy(Policy):
    """Replay a task's gold spans round by round."""

    def __init__(self, task: TaskSpec, world: World, regime: str = "scripted"):
        self.spans = [r.action for r in build_gold_trajectory(task, world)]
        self.regime = regime
        self.max_action_len = max(len(s) for s in self.spans)

    def propose(self, context: Sequence[str], round_index: int, attempt: int, trace_id: str) -> PolicyOutput:
        return PolicyOutput(list(self.spans[min(round_index, len(self.spans) - 1)]))
