"""Tests for the budgeted agent runtime."""

import re
from collections import Counter

import numpy as np
import pytest

from agent.actions import Terminate, ToolCall, serialize_action
from agent.policies import GoldReplayPolicy, ModelPolicy, ScriptedPolicy
from agent.runtime import Budget, EpisodeRecord, Outcome, run_episode, run_episodes
from core.config import ConfigurationError
from diffusion.decoding import DecodeConfig
from world.trajectories import build_gold_trajectory
from world.vocab import BEGIN_ACTION, FINISH, RETRY


GARBAGE = [BEGIN_ACTION, "ToolCall", "nope"]


def search(query: str):
    return serialize_action(ToolCall("batch_web_search", {"query": query}))


def think(thought: str = "plan"):
    return serialize_action(ToolCall("think", {"thought": thought}))


def answer(entity: str):
    return serialize_action(Terminate(entity))


class TestBudget:
    """Tests for Budget."""

    def test_defaults(self):
        assert Budget().to_dict() == {"context_cap": 2048, "t_max": 15, "tool_cap": 12, "gen_token_cap": 2048}

    def test_parse(self):
        budget = Budget.parse("t_max=5, tool_cap=3,ctx=100,gen=50")
        assert (budget.t_max, budget.tool_cap, budget.context_cap, budget.gen_token_cap) == (5, 3, 100, 50)
        assert Budget.parse("") == Budget()

    @pytest.mark.parametrize("text", ["t_max", "speed=3", "t_max=x", "t_max=0"])
    def test_parse_errors(self, text):
        with pytest.raises(ConfigurationError):
            Budget.parse(text)


class TestRunEpisode:
    """Tests for run_episode outcomes."""

    def test_gold_replay_is_correct(self, world, tasks):
        for task in tasks:
            record, traces = run_episode(task, world, GoldReplayPolicy(task, world), Budget())
            assert record.outcome == Outcome.ANSWERED_CORRECT
            assert record.turns == len(build_gold_trajectory(task, world))
            assert not record.has_invalid
            assert traces == []

    def test_three_calls_then_terminate(self, world, tasks):
        task = tasks[0]
        policy = ScriptedPolicy([search("p=1"), search("p=2"), search("p=3"), answer(task.gold_answer)])
        record, _ = run_episode(task, world, policy, Budget())
        assert record.tool_calls == 3
        assert record.turns == 4
        assert record.seeker_calls == 3
        assert record.correct

    def test_wrong_answer(self, world, tasks):
        task = tasks[0]
        wrong = next(e for e in world.entities if e != task.gold_answer)
        record, _ = run_episode(task, world, ScriptedPolicy([answer(wrong)]), Budget())
        assert record.outcome == Outcome.ANSWERED_WRONG
        assert record.answer == wrong

    def test_always_malformed_hits_t_max(self, world, tasks):
        record, _ = run_episode(tasks[0], world, ScriptedPolicy([GARBAGE]), Budget())
        assert record.outcome == Outcome.BUDGET_EXHAUSTED
        assert record.fallback_reason == "t_max"
        assert record.turns == 15
        assert all(not r.valid and r.retried for r in record.rounds)
        assert all(r.observation == "invalid" for r in record.rounds)
        assert record.has_invalid

    def test_retry_recovers(self, world, tasks):
        task = tasks[0]
        seen = []

        def spans(context, round_index, attempt):
            seen.append(list(context))
            return GARBAGE if attempt == 0 else answer(task.gold_answer)

        record, _ = run_episode(task, world, ScriptedPolicy(spans), Budget())
        assert record.correct
        assert record.rounds[0].retried and record.rounds[0].valid
        assert seen[1] == seen[0] + [RETRY]
        assert record.has_invalid
        assert "retry:MissingDelimiter" in record.control_path

    def test_tool_cap_prompts_finish_once(self, world, tasks):
        task = tasks[0]
        record, _ = run_episode(task, world, ScriptedPolicy([search("p=1")]), Budget())
        assert record.outcome == Outcome.FALLBACK
        assert record.fallback_reason == "tool_cap"
        assert record.turns == 13
        assert record.tool_calls == 12
        assert record.control_path.count("finish_prompt") == 1
        assert record.budgets_consumed["tool_invocations"] == 12

    def test_finish_prompt_then_terminate(self, world, tasks):
        task = tasks[0]

        def spans(context, round_index, attempt):
            return answer(task.gold_answer) if context[-1] == FINISH else search("p=2")

        record, _ = run_episode(task, world, ScriptedPolicy(spans), Budget(tool_cap=2))
        assert record.correct
        assert record.turns == 3

    def test_cognitive_tools_are_free(self, world, tasks):
        record, _ = run_episode(tasks[0], world, ScriptedPolicy([think()]), Budget(tool_cap=2))
        assert record.fallback_reason == "t_max"
        assert record.budgets_consumed["tool_invocations"] == 0
        assert record.tool_calls == 15
        assert "finish_prompt" not in record.control_path

    def test_fallback_answer_is_last_entity(self, world, tasks):
        task = tasks[0]
        fact = world.documents[0].facts[0]
        query = f"{fact[0]}={fact[1]}"
        expected = world.search([fact])[-1].entity_id
        record, _ = run_episode(task, world, ScriptedPolicy([search(query)]), Budget(tool_cap=1))
        assert record.outcome == Outcome.FALLBACK
        assert record.answer == expected
        assert record.fallback_correct == (expected == task.gold_answer)

    def test_context_cap(self, world, tasks):
        record, _ = run_episode(tasks[0], world, ScriptedPolicy([think()]), Budget(context_cap=20))
        assert record.outcome == Outcome.FALLBACK
        assert record.fallback_reason == "context_cap"
        assert record.turns == 0
        assert record.answer is None

    def test_gen_token_cap(self, world, tasks):
        record, _ = run_episode(tasks[0], world, ScriptedPolicy([think("longthought")]), Budget(gen_token_cap=10))
        assert record.outcome == Outcome.FALLBACK
        assert record.fallback_reason == "gen_token_cap"
        assert record.turns == 1

    def test_record_round_trip(self, world, tasks):
        task = tasks[1]
        record, _ = run_episode(task, world, GoldReplayPolicy(task, world), Budget())
        assert EpisodeRecord.from_dict(record.to_dict()).to_dict() == record.to_dict()


class TestBudgetSafety:
    """Adversarial scripted policies never push an episode past its budget."""

    def test_fuzz(self, world, tasks):
        budget = Budget(context_cap=400, t_max=15, tool_cap=5, gen_token_cap=300)
        never_answers = [GARBAGE, think(), think("x" * 30), search("p=1"), search("q=2"), ["x"] * 70, []]
        may_answer = never_answers + [answer("e3")]
        outcomes = Counter()
        for seed in range(500):
            rng = np.random.default_rng(seed)
            pool = may_answer if seed % 2 else never_answers
            script = [pool[int(i)] for i in rng.integers(0, len(pool), size=40)]
            policy = ScriptedPolicy(script, max_action_len=64)
            record, _ = run_episode(tasks[seed % len(tasks)], world, policy, budget)
            used = record.budgets_consumed
            assert record.turns <= budget.t_max, seed
            assert used["tool_invocations"] <= budget.tool_cap, seed
            assert used["max_context_tokens"] + policy.max_action_len <= budget.context_cap, seed
            assert record.outcome in Outcome
            if record.fallback_reason is not None:
                assert record.outcome in (Outcome.FALLBACK, Outcome.BUDGET_EXHAUSTED)
            outcomes[record.outcome] += 1
        assert outcomes[Outcome.FALLBACK] >= 50
        assert sum(outcomes.values()) == 500

    def test_symmetric_control_path(self, world, tasks):
        script = [think(), GARBAGE, search("p=1"), answer("e2")]
        a, _ = run_episode(tasks[0], world, ScriptedPolicy(script, regime="diffusion"), Budget())
        b, _ = run_episode(tasks[0], world, ScriptedPolicy(script, regime="ar"), Budget())
        assert a.symmetry_hash() == b.symmetry_hash()
        assert (a.regime, b.regime) == ("diffusion", "ar")


class TestModelEpisodes:
    """Episodes driven by a real (untrained) backbone."""

    def test_trace_ids(self, tiny_model, vocab, world, tasks):
        task = tasks[0]
        policy = ModelPolicy(tiny_model, vocab, DecodeConfig(block_len=8, max_action_len=16))
        record, traces = run_episode(task, world, policy, Budget(t_max=3))
        pattern = re.compile(rf"diffusion:{task.task_id}:(\d+):([01])")
        ids = [t for r in record.rounds for t in r.trace_ids]
        assert ids == [t.trace_id for t in traces]
        for rnd in record.rounds:
            for trace_id in rnd.trace_ids:
                match = pattern.fullmatch(trace_id)
                assert match and int(match.group(1)) == rnd.index
        for trace in traces:
            assert trace.role in ("planner", "seeker")

    def test_replay_determinism(self, tiny_model, vocab, world, tasks):
        config = DecodeConfig(block_len=8, max_action_len=16, regime="ar")
        runs = [
            run_episode(tasks[2], world, ModelPolicy(tiny_model, vocab, config), Budget(t_max=2))[0]
            for _ in range(2)
        ]
        assert [r.raw_tokens for r in runs[0].rounds] == [r.raw_tokens for r in runs[1].rounds]
        assert runs[0].control_path == runs[1].control_path


class TestRunEpisodes:
    """Tests for run_episodes."""

    def test_parallel_keeps_task_order(self, world, tasks):
        factory = lambda task: GoldReplayPolicy(task, world)
        serial = run_episodes(tasks[:8], world, factory, Budget(), jobs=1)
        parallel = run_episodes(tasks[:8], world, factory, Budget(), jobs=4)
        assert [r.task_id for r, _ in parallel] == [t.task_id for t in tasks[:8]]
        assert [r.control_path for r, _ in serial] == [r.control_path for r, _ in parallel]
