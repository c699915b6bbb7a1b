"""
Gold Trajectories and Training Examples for dllm_agent_lab

Builds deterministic expert episodes for synthetic tasks and slices them
into per-round (context, action span) training examples.

Gold planner:
- one constraint: search for it, then Terminate
- several constraints: assign_tasks with the full constraint set (planner),
  then one search per attribute slot (seeker) until the candidate set
  narrows to one entity, then Terminate (planner)

Usage:
    from world.trajectories import build_gold_trajectory, make_training_set

    episode = GoldEpisode(task.task_id, build_gold_trajectory(task, world))
    examples = make_training_set([episode])
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Set, Union

from agent.actions import (
    ParseError,
    StructuredAction,
    Terminate,
    ToolCall,
    action_from_dict,
    parse_action,
    serialize_action,
)
from agent.history import History
from agent.tools import VirtualFileStore, execute_tool
from core.config import DatasetError, GenerationError
from core.utils import iter_jsonl, write_jsonl
from world.generator import TaskSpec, World
from world.vocab import BEGIN_ACTION, END_ACTION


logger = logging.getLogger(__name__)

T_MAX = 15


# ============================================
# Span Layout
# ============================================


@dataclass(frozen=True)
class SpanLayout:
    """
    Prefix layout of one example: context positions, then the action span.

    Attributes:
        ctx_len: |I_ctx|; context occupies 0..ctx_len-1
        total_len: Sequence length; the action span is ctx_len..total_len-1
    """
    ctx_len: int
    total_len: int

    def __post_init__(self) -> None:
        if self.total_len < 1 or not 0 <= self.ctx_len <= self.total_len:
            raise ValueError(f"Malformed layout: ctx_len={self.ctx_len}, total_len={self.total_len}")

    @property
    def I_ctx(self) -> range:
        return range(0, self.ctx_len)

    @property
    def I_loss(self) -> range:
        return range(self.ctx_len, self.total_len)

    @property
    def loss_len(self) -> int:
        return self.total_len - self.ctx_len

    @classmethod
    def from_index_sets(cls, ctx: Iterable[int], loss: Iterable[int], total_len: int) -> "SpanLayout":
        """
        Validate explicit index sets and build the layout.

        Raises:
            ValueError: If the sets overlap, miss positions, or the context
                        is not a prefix
        """
        ctx_set: Set[int] = set(ctx)
        loss_set: Set[int] = set(loss)
        if ctx_set & loss_set:
            raise ValueError("I_ctx and I_loss overlap")
        if ctx_set | loss_set != set(range(total_len)):
            raise ValueError("I_ctx and I_loss do not cover 0..total_len-1")
        if ctx_set and loss_set and max(ctx_set) >= min(loss_set):
            raise ValueError("Context is not a strict prefix of the action span")
        return cls(ctx_len=len(ctx_set), total_len=total_len)

    def to_dict(self) -> Dict:
        return {"ctx_len": self.ctx_len, "loss_len": self.loss_len, "total_len": self.total_len}

    @classmethod
    def from_dict(cls, data: Dict) -> "SpanLayout":
        return cls(ctx_len=int(data["ctx_len"]), total_len=int(data["total_len"]))


# ============================================
# Episodes and Examples
# ============================================


@dataclass(frozen=True)
class GoldRound:
    """
    One round of a gold episode.

    Attributes:
        context: Serialized H_{t-1}
        action: Action span tokens including delimiters
        observation: Serialized observation block (empty after Terminate)
        role: Acting role
        action_struct: The structured action the span encodes
    """
    context: List[str]
    action: List[str]
    observation: List[str]
    role: str
    action_struct: Union[StructuredAction, ParseError]

    def to_dict(self) -> Dict:
        return {
            "context": self.context,
            "action": self.action,
            "observation": self.observation,
            "role": self.role,
            "parsed": self.action_struct.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "GoldRound":
        return cls(
            context=list(data["context"]),
            action=list(data["action"]),
            observation=list(data["observation"]),
            role=data["role"],
            action_struct=action_from_dict(data["parsed"]),
        )


@dataclass(frozen=True)
class GoldEpisode:
    task_id: str
    rounds: List[GoldRound]

    def to_dict(self) -> Dict:
        return {"task_id": self.task_id, "rounds": [r.to_dict() for r in self.rounds]}

    @classmethod
    def from_dict(cls, data: Dict) -> "GoldEpisode":
        return cls(task_id=data["task_id"], rounds=[GoldRound.from_dict(r) for r in data["rounds"]])


@dataclass(frozen=True)
class TrainingExample:
    """One (clean context prefix, target action span) pair."""
    context: List[str]
    action: List[str]
    layout: SpanLayout
    episode_id: str = ""
    round_index: int = 0

    @property
    def tokens(self) -> List[str]:
        return self.context + self.action

    def pad_to_blocks(self, block_len: int) -> "TrainingExample":
        """
        Fill the action span with END_ACTION up to a multiple of block_len.

        The block decoder opens whole blocks of masks, so the positions
        after the closing delimiter are targets too. The filler belongs to
        I_loss.

        Example:
            span of 14 tokens, block_len 32 -> 14 tokens + 18 x END_ACTION
        """
        if block_len < 1:
            raise ValueError(f"block_len must be >= 1, got {block_len}")
        fill = -self.layout.loss_len % block_len
        if fill == 0:
            return self
        return TrainingExample(
            context=self.context,
            action=self.action + [END_ACTION] * fill,
            layout=SpanLayout(self.layout.ctx_len, self.layout.total_len + fill),
            episode_id=self.episode_id,
            round_index=self.round_index,
        )

    def to_dict(self, vocab_size: int) -> Dict:
        return {
            "episode_id": self.episode_id,
            "round": self.round_index,
            "context_tokens": self.context,
            "action_tokens": self.action,
            "layout": self.layout.to_dict(),
            "vocab_size": vocab_size,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "TrainingExample":
        return cls(
            context=list(data["context_tokens"]),
            action=list(data["action_tokens"]),
            layout=SpanLayout.from_dict(data["layout"]),
            episode_id=data.get("episode_id", ""),
            round_index=int(data.get("round", 0)),
        )


# ============================================
# Gold Trajectory Construction
# ============================================


def gold_actions(task: TaskSpec, world: World) -> List[StructuredAction]:
    """
    Expand the gold planner into its action sequence.

    Raises:
        GenerationError: If the task is not uniquely solvable in the world
    """
    satisfiers = world.satisfiers(task.constraints)
    if satisfiers != [task.gold_answer]:
        raise GenerationError(
            f"Task {task.task_id} is not solvable: satisfiers={satisfiers}, gold={task.gold_answer}"
        )

    if len(task.constraints) == 1:
        return [ToolCall("batch_web_search", {"query": task.query_text}), Terminate(task.gold_answer)]

    actions: List[StructuredAction] = [ToolCall("assign_tasks", {"tasks": task.query_text})]

    groups: Dict[int, List] = {}
    for attr, value in task.constraints:
        groups.setdefault(world.slot_of(attr), []).append((attr, value))

    candidates: Optional[Set[str]] = None
    for slot in sorted(groups):
        facts = groups[slot]
        actions.append(ToolCall("batch_web_search", {"query": ";".join(f"{a}={v}" for a, v in facts)}))
        hits = {d.entity_id for d in world.search(facts)}
        candidates = hits if candidates is None else candidates & hits
        if len(candidates) == 1:
            break

    if candidates != {task.gold_answer}:
        raise GenerationError(f"Task {task.task_id}: gold search narrowed to {sorted(candidates or [])}")

    actions.append(Terminate(task.gold_answer))
    return actions


def build_gold_trajectory(task: TaskSpec, world: World) -> List[GoldRound]:
    """
    Build the gold (context, action, observation) rounds for a task.

    Observations are produced by the real tool implementations, so replaying
    the actions through the runtime reproduces the same history.

    Args:
        task: Closed task
        world: World the task was sampled from

    Returns:
        Rounds whose last action is Terminate(gold_answer)

    Raises:
        GenerationError: If the task is unsolvable or exceeds T_MAX rounds
    """
    actions = gold_actions(task, world)
    if len(actions) > T_MAX:
        raise GenerationError(f"Task {task.task_id}: gold trajectory has {len(actions)} rounds > {T_MAX}")

    history = History.for_query(task.query_text)
    store = VirtualFileStore()
    rounds: List[GoldRound] = []

    for action in actions:
        context = history.tokens()
        span = serialize_action(action)
        if isinstance(action, Terminate):
            rounds.append(GoldRound(context, span, [], action.role, action))
            break
        observation = execute_tool(action, world, store)
        block = history.append_round(action.role, span, observation.tokens)
        rounds.append(GoldRound(context, span, block, action.role, action))

    return rounds


# ============================================
# Training Set
# ============================================


def _layout_from_delimiters(context: Sequence[str], action: Sequence[str]) -> SpanLayout:
    tokens = list(context) + list(action)
    begin = tokens.index(BEGIN_ACTION, len(context))
    end = len(tokens) - 1 - tokens[::-1].index(END_ACTION)
    return SpanLayout.from_index_sets(range(0, begin), range(begin, end + 1), end + 1)


def make_training_set(episodes: Sequence[GoldEpisode]) -> List[TrainingExample]:
    """
    Slice episodes into one TrainingExample per round.

    Args:
        episodes: Gold (or otherwise valid) episodes

    Returns:
        Examples in episode order, then round order

    Raises:
        DatasetError: If any round's action does not parse
    """
    examples: List[TrainingExample] = []
    for episode in episodes:
        for index, rnd in enumerate(episode.rounds):
            parsed = parse_action(rnd.action)
            if isinstance(parsed, ParseError):
                raise DatasetError(
                    f"Unparseable action ({parsed.reason.value}: {parsed.detail})",
                    episode_id=episode.task_id,
                    round_index=index,
                )
            if rnd.action[0] != BEGIN_ACTION or rnd.action[-1] != END_ACTION:
                raise DatasetError(
                    "Action span must start and end with its delimiters",
                    episode_id=episode.task_id,
                    round_index=index,
                )
            layout = _layout_from_delimiters(rnd.context, rnd.action)
            examples.append(TrainingExample(list(rnd.context), list(rnd.action), layout, episode.task_id, index))

    logger.info(f"Built {len(examples):,} training examples from {len(episodes):,} episodes")
    return examples


# ============================================
# Persistence
# ============================================


def save_episodes(path: Union[str, Path], episodes: Iterable[GoldEpisode]) -> int:
    return write_jsonl(path, (e.to_dict() for e in episodes))


def load_episodes(path: Union[str, Path]) -> List[GoldEpisode]:
    return [GoldEpisode.from_dict(record) for _, record in iter_jsonl(path)]


def save_examples(path: Union[str, Path], examples: Iterable[TrainingExample], vocab_size: int) -> int:
    return write_jsonl(path, (e.to_dict(vocab_size) for e in examples))


def load_examples(path: Union[str, Path], vocab_size: Optional[int] = None) -> List[TrainingExample]:
    """
    Read training examples, checking the recorded vocabulary size.

    Raises:
        DatasetError: If a line was written for a different vocabulary size
    """
    examples = []
    for line_number, record in iter_jsonl(path):
        if vocab_size is not None and int(record.get("vocab_size", vocab_size)) != vocab_size:
            raise DatasetError(
                f"{path} line {line_number}: vocab_size {record['vocab_size']} != {vocab_size}",
                episode_id=record.get("episode_id", ""),
                round_index=int(record.get("round", 0)),
            )
        examples.append(TrainingExample.from_dict(record))
    return examples
