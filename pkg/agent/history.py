"""
Workflow History for dllm_agent_lab

The accumulated interaction history H serialized as one token sequence:

    <bos> <query> q-tokens
    [action span] <role> <obs> o-tokens      (one block per round)

Appending a round extends the serialization, so the context for round t is
always context(t-1) + action(t-1) + observation block(t-1).

Usage:
    from agent.history import History

    history = History.for_query("p=3;q=1")
    history.append_round("seeker", action_tokens, ["d", "4", ":", "e", "1", "7"])
    context = history.tokens()
"""

from dataclasses import dataclass
from typing import List, Sequence

from world.vocab import BOS, OBS, QUERY, ROLE_TOKENS, value_tokens


@dataclass(frozen=True)
class HistoryEntry:
    role: str
    kind: str  # query | action | observation
    tokens: List[str]


def observation_block(role: str, observation_tokens: Sequence[str]) -> List[str]:
    """Role tag, <obs> separator, then the observation tokens."""
    return [ROLE_TOKENS[role], OBS, *observation_tokens]


class History:
    """
    Ordered record of query, actions and observations.

    Attributes:
        entries: Query entry followed by strictly alternating action and
                 observation entries
        token_count: Running serialized length
    """

    def __init__(self, query_tokens: Sequence[str]):
        first = HistoryEntry("user", "query", [BOS, QUERY, *query_tokens])
        self.entries: List[HistoryEntry] = [first]
        self.token_count = len(first.tokens)

    @classmethod
    def for_query(cls, query_text: str) -> "History":
        return cls(value_tokens(query_text))

    @property
    def rounds(self) -> int:
        return (len(self.entries) - 1) // 2

    def append_round(self, role: str, action_tokens: Sequence[str], observation_tokens: Sequence[str]) -> List[str]:
        """
        Append one action and its observation.

        Args:
            role: Acting role ('planner' or 'seeker')
            action_tokens: Raw action span as emitted (valid or not)
            observation_tokens: Tool output tokens

        Returns:
            The serialized observation block that was appended
        """
        if role not in ROLE_TOKENS:
            raise ValueError(f"Unknown role: {role}")
        block = observation_block(role, observation_tokens)
        self.entries.append(HistoryEntry(role, "action", list(action_tokens)))
        self.entries.append(HistoryEntry(role, "observation", block))
        self.token_count += len(action_tokens) + len(block)
        return block

    def tokens(self) -> List[str]:
        out: List[str] = []
        for entry in self.entries:
            out.extend(entry.tokens)
        return out

    def is_consistent(self) -> bool:
        """Alternation holds and token_count matches the re-serialized length."""
        kinds = [e.kind for e in self.entries[1:]]
        alternates = all(k == ("action" if i % 2 == 0 else "observation") for i, k in enumerate(kinds))
        return alternates and len(kinds) % 2 == 0 and self.token_count == len(self.tokens())
