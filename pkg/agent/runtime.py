"""
Agent Runtime for dllm_agent_lab

The backbone-agnostic think-act-observe loop. Both regimes run through the
same code: serialize history, ask the policy for a span, parse it, recover
once on a parse error, execute, append the observation.

Termination (checked in this order every round):
- t_max rounds used                           -> BudgetExhausted
- context (+ retry slot + max span) > cap     -> Fallback
- tool_cap reached: prompt once with <finish>; anything but Terminate -> Fallback
- generated tokens > gen_token_cap            -> Fallback
- Terminate(answer)                           -> AnsweredCorrect / AnsweredWrong

Fallback and BudgetExhausted episodes still carry a candidate answer: the
most recently observed entity id.

Usage:
    from agent.runtime import Budget, run_episode

    record, traces = run_episode(task, world, policy, Budget())
    print(record.outcome, record.turns, record.tool_calls)
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from agent.actions import ParseError, Terminate, action_from_dict, parse_action
from agent.history import History
from agent.policies import Policy
from agent.tools import Observation, VirtualFileStore, execute_tool
from core.config import ConfigurationError
from core.utils import stable_hash
from diffusion.decoding import DecodeTrace
from scheduler.runner import JobScheduler
from world.generator import TaskSpec, World
from world.vocab import FINISH, RETRY


logger = logging.getLogger(__name__)


# ============================================
# Budgets and Records
# ============================================


@dataclass(frozen=True)
class Budget:
    """
    Per-episode limits, shared verbatim by every regime in a comparison.

    Attributes:
        context_cap: Max serialized context tokens fed to the policy
        t_max: Max rounds
        tool_cap: Max environment-facing tool invocations
        gen_token_cap: Max policy-generated tokens (retries included)
    """
    context_cap: int = 2048
    t_max: int = 15
    tool_cap: int = 12
    gen_token_cap: int = 2048

    _ALIASES = {"ctx": "context_cap", "context": "context_cap", "gen": "gen_token_cap"}

    def __post_init__(self) -> None:
        for name, value in asdict(self).items():
            if not isinstance(value, int) or value < 1:
                raise ConfigurationError(
                    message=f"Budget {name} must be a positive integer, got {value!r}",
                    fix="Example: --budget t_max=15,tool_cap=12,ctx=2048"
                )

    @classmethod
    def parse(cls, text: str) -> "Budget":
        """Parse 't_max=15,tool_cap=12,ctx=2048' (unset fields keep defaults)."""
        values: Dict[str, int] = {}
        for part in filter(None, (p.strip() for p in text.split(","))):
            if "=" not in part:
                raise ConfigurationError(message=f"Bad budget entry: {part!r}", fix="Use key=value pairs separated by commas")
            key, raw = (s.strip() for s in part.split("=", 1))
            key = cls._ALIASES.get(key, key)
            if key not in cls.__dataclass_fields__:
                raise ConfigurationError(
                    message=f"Unknown budget key: {key}",
                    fix="Valid keys: t_max, tool_cap, ctx (context_cap), gen_token_cap"
                )
            try:
                values[key] = int(raw)
            except ValueError:
                raise ConfigurationError(message=f"Budget {key} is not an integer: {raw!r}", fix="Use integers")
        return cls(**values)

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


class Outcome(str, Enum):
    ANSWERED_CORRECT = "AnsweredCorrect"
    ANSWERED_WRONG = "AnsweredWrong"
    BUDGET_EXHAUSTED = "BudgetExhausted"
    FALLBACK = "Fallback"


@dataclass
class RoundRecord:
    """
    One round: the raw span x_t, its parse a_t, the observation o_t.

    Attributes:
        index: Zero-based round index
        raw_tokens: Span as emitted by the final attempt
        action: Parsed action or parse error, as a dict
        observation: Observation text ('' when nothing was executed)
        role: Acting role
        valid: Whether the final attempt parsed
        retried: Whether the corrective re-decode ran
        executed: Whether a ToolCall was executed
        trace_ids: Decode traces produced this round
        wall_clock: Seconds spent in the round
    """
    index: int
    raw_tokens: List[str]
    action: Dict
    observation: str
    role: str
    valid: bool
    retried: bool = False
    executed: bool = False
    trace_ids: List[str] = field(default_factory=list)
    wall_clock: float = 0.0

    def parsed(self):
        return action_from_dict(self.action)


@dataclass
class EpisodeRecord:
    """
    Full trajectory of one episode plus budget accounting.

    Attributes:
        task_id: Task identifier
        regime: Policy regime
        gold_answer: Expected entity
        rounds: RoundRecords in order
        outcome: Outcome code
        answer: Final or fallback answer (None when none exists)
        fallback_reason: Which limit fired for Fallback / BudgetExhausted
        budget: Budget the episode ran under
        budgets_consumed: rounds, tool invocations, generated tokens, max context
        control_path: Ordered runtime events (regime-independent)
        traces_path: Where this episode's decode traces were written
    """
    task_id: str
    regime: str
    gold_answer: str
    rounds: List[RoundRecord] = field(default_factory=list)
    outcome: Outcome = Outcome.BUDGET_EXHAUSTED
    answer: Optional[str] = None
    fallback_reason: Optional[str] = None
    budget: Dict[str, int] = field(default_factory=dict)
    budgets_consumed: Dict[str, int] = field(default_factory=dict)
    control_path: List[str] = field(default_factory=list)
    traces_path: Optional[str] = None

    @property
    def turns(self) -> int:
        return len(self.rounds)

    @property
    def tool_calls(self) -> int:
        """Executed ToolCall invocations, cognitive tools included."""
        return sum(1 for r in self.rounds if r.executed)

    @property
    def seeker_calls(self) -> int:
        """Executed rounds acting in the information-seeker role."""
        return sum(1 for r in self.rounds if r.executed and r.role == "seeker")

    @property
    def has_invalid(self) -> bool:
        """At least one unparsable span was emitted, recovered by the retry or not."""
        return any(not r.valid or r.retried for r in self.rounds)

    @property
    def correct(self) -> bool:
        return self.outcome == Outcome.ANSWERED_CORRECT

    @property
    def fallback_correct(self) -> bool:
        return self.outcome in (Outcome.FALLBACK, Outcome.BUDGET_EXHAUSTED) and self.answer == self.gold_answer

    def symmetry_hash(self) -> str:
        """Hash of the runtime configuration and the code path taken."""
        return stable_hash({"budget": self.budget, "control_path": self.control_path})

    def to_dict(self) -> Dict:
        return {
            "task_id": self.task_id,
            "regime": self.regime,
            "gold_answer": self.gold_answer,
            "outcome": self.outcome.value,
            "answer": self.answer,
            "fallback_reason": self.fallback_reason,
            "turns": self.turns,
            "tool_calls": self.tool_calls,
            "seeker_calls": self.seeker_calls,
            "budget": self.budget,
            "budgets_consumed": self.budgets_consumed,
            "control_path": self.control_path,
            "traces_path": self.traces_path,
            "rounds": [asdict(r) for r in self.rounds],
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "EpisodeRecord":
        return cls(
            task_id=data["task_id"],
            regime=data["regime"],
            gold_answer=data["gold_answer"],
            rounds=[RoundRecord(**r) for r in data["rounds"]],
            outcome=Outcome(data["outcome"]),
            answer=data.get("answer"),
            fallback_reason=data.get("fallback_reason"),
            budget=dict(data.get("budget", {})),
            budgets_consumed=dict(data.get("budgets_consumed", {})),
            control_path=list(data.get("control_path", [])),
            traces_path=data.get("traces_path"),
        )


# ============================================
# Episode Loop
# ============================================


class _EpisodeState:
    """Mutable bookkeeping of one running episode."""

    def __init__(self, task: TaskSpec, policy: Policy, budget: Budget):
        self.history = History.for_query(task.query_text)
        self.store = VirtualFileStore()
        self.record = EpisodeRecord(task.task_id, policy.regime, task.gold_answer, budget=budget.to_dict())
        self.traces: List[DecodeTrace] = []
        self.env_calls = 0
        self.generated = 0
        self.max_context = 0
        self.last_entity: Optional[str] = None

    def event(self, name: str) -> None:
        self.record.control_path.append(name)

    def observe(self, observation: Observation) -> None:
        entities = observation.entities()
        if entities:
            self.last_entity = entities[-1]


def _decode(state: _EpisodeState, policy: Policy, prompt: List[str], round_index: int, attempt: int, task_id: str):
    trace_id = f"{policy.regime}:{task_id}:{round_index}:{attempt}"
    state.max_context = max(state.max_context, len(prompt))
    output = policy.propose(prompt, round_index, attempt, trace_id)
    tokens = list(output.tokens)[: policy.max_action_len]
    state.generated += len(tokens)
    if output.trace is not None:
        state.traces.append(output.trace)
    return tokens, parse_action(tokens), (trace_id if output.trace is not None else None)


def _finish(state: _EpisodeState, outcome: Outcome, reason: Optional[str] = None, answer: Optional[str] = None) -> None:
    record = state.record
    record.outcome = outcome
    record.fallback_reason = reason
    record.answer = answer if answer is not None else state.last_entity
    state.event(f"end:{outcome.value}" + (f":{reason}" if reason else ""))


def run_episode(
    task: TaskSpec,
    world: World,
    policy: Policy,
    budget: Budget
) -> Tuple[EpisodeRecord, List[DecodeTrace]]:
    """
    Run one task to completion under a budget.

    Never raises for policy misbehaviour: malformed spans, over-budget
    behaviour and tool failures all end up in the record.

    Args:
        task: Task to solve
        world: World the tools read from
        policy: Span source
        budget: Limits for this episode

    Returns:
        (EpisodeRecord, decode traces produced during the episode)
    """
    state = _EpisodeState(task, policy, budget)
    record = state.record
    limit = budget.context_cap
    if policy.context_limit is not None:
        limit = min(limit, policy.context_limit)
    finish_prompted = False

    while True:
        index = record.turns
        if index >= budget.t_max:
            _finish(state, Outcome.BUDGET_EXHAUSTED, "t_max")
            break

        context = state.history.tokens()
        # room for the <finish> and <retry> suffixes plus one full span
        if len(context) + 2 + policy.max_action_len > limit:
            _finish(state, Outcome.FALLBACK, "context_cap")
            break

        if state.env_calls >= budget.tool_cap and not finish_prompted:
            finish_prompted = True
            state.event("finish_prompt")
            context = context + [FINISH]

        started = time.perf_counter()
        state.event("decode")
        tokens, parsed, trace_id = _decode(state, policy, context, index, 0, task.task_id)
        trace_ids = [trace_id] if trace_id else []
        retried = False

        if isinstance(parsed, ParseError) and state.generated <= budget.gen_token_cap:
            retried = True
            state.event(f"retry:{parsed.reason.value}")
            tokens, parsed, trace_id = _decode(state, policy, context + [RETRY], index, 1, task.task_id)
            if trace_id:
                trace_ids.append(trace_id)

        role = "planner" if isinstance(parsed, ParseError) else parsed.role
        if trace_ids:
            for trace in state.traces[-len(trace_ids):]:
                trace.role = role

        rnd = RoundRecord(
            index=index,
            raw_tokens=tokens,
            action=parsed.to_dict(),
            observation="",
            role=role,
            valid=not isinstance(parsed, ParseError),
            retried=retried,
            trace_ids=trace_ids,
        )
        record.rounds.append(rnd)

        if state.generated > budget.gen_token_cap:
            rnd.wall_clock = time.perf_counter() - started
            _finish(state, Outcome.FALLBACK, "gen_token_cap")
            break

        if isinstance(parsed, Terminate):
            rnd.wall_clock = time.perf_counter() - started
            state.event("terminate")
            correct = parsed.answer == task.gold_answer
            _finish(state, Outcome.ANSWERED_CORRECT if correct else Outcome.ANSWERED_WRONG, answer=parsed.answer)
            break

        if finish_prompted:
            rnd.wall_clock = time.perf_counter() - started
            _finish(state, Outcome.FALLBACK, "tool_cap")
            break

        if isinstance(parsed, ParseError):
            state.event("invalid")
            rnd.observation = "invalid"
            state.history.append_round(role, tokens, ["invalid"])
        else:
            state.event(f"execute:{parsed.tool_id}")
            observation = execute_tool(parsed, world, state.store)
            if not parsed.is_cognitive:
                state.env_calls += 1
            state.observe(observation)
            rnd.observation = observation.text
            rnd.executed = True
            state.history.append_round(role, tokens, observation.tokens)
        rnd.wall_clock = time.perf_counter() - started

    record.budgets_consumed = {
        "rounds": record.turns,
        "tool_invocations": state.env_calls,
        "generated_tokens": state.generated,
        "max_context_tokens": state.max_context,
    }
    logger.debug(f"Episode {task.task_id} [{policy.regime}]: {record.outcome.value} in {record.turns} rounds")
    return record, state.traces


def run_episodes(
    tasks: Sequence[TaskSpec],
    world: World,
    policy_factory: Callable[[TaskSpec], Policy],
    budget: Budget,
    jobs: int = 1
) -> List[Tuple[EpisodeRecord, List[DecodeTrace]]]:
    """
    Run independent episodes, optionally in parallel.

    Args:
        tasks: Tasks to run
        world: Shared read-only world
        policy_factory: Builds a policy per task (policies may hold state)
        budget: Budget for every episode
        jobs: Worker count; results keep task order regardless

    Returns:
        (record, traces) per task, in task order
    """
    scheduler = JobScheduler(max_workers=jobs)
    return scheduler.map(
        lambda task: run_episode(task, world, policy_factory(task), budget),
        tasks,
        name="episodes",
    )
