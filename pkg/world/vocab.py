"""
Token Vocabulary for dllm_agent_lab

The vocabulary is a fixed, ordered symbol list. Every artifact (training
examples, checkpoints, traces) records its size so mismatched runs fail
fast instead of silently producing garbage.

Symbol groups, in id order:
- special tokens (<pad>, <mask>, delimiters, role and turn separators)
- action keywords and registered tool names
- argument keys
- whole-word observation tokens
- punctuation, letters and digits (the content alphabet)
- reserved padding symbols up to the configured size

Usage:
    from world.vocab import Vocab

    vocab = Vocab.default()
    ids = vocab.encode(["BEGIN_ACTION", "Terminate"])
    vocab.decode(ids)
"""

import string
from typing import Dict, Iterable, List, Sequence

from core.config import ConfigurationError


# ============================================
# Symbol Groups
# ============================================

PAD = "<pad>"
MASK = "<mask>"
BOS = "<bos>"
BEGIN_ACTION = "BEGIN_ACTION"
END_ACTION = "END_ACTION"
QUERY = "<query>"
PLANNER = "<planner>"
SEEKER = "<seeker>"
OBS = "<obs>"
RETRY = "<retry>"
FINISH = "<finish>"

SPECIAL_TOKENS = [PAD, MASK, BOS, BEGIN_ACTION, END_ACTION, QUERY, PLANNER, SEEKER, OBS, RETRY, FINISH]

TOOLCALL = "ToolCall"
TERMINATE = "Terminate"

TOOL_NAMES = [
    "think",
    "reflect",
    "batch_web_search",
    "url_crawler",
    "document_qa",
    "file_read",
    "file_write",
    "assign_tasks",
    "task_done",
]

# Accepted by the parser, canonicalized on parse
TOOL_ALIAS_NAMES = ["search"]

ARG_KEYS = ["thought", "query", "url", "doc", "question", "path", "content", "tasks", "summary", "answer"]

WORD_TOKENS = ["ok", "not", "found", "empty", "error", "invalid"]

PUNCTUATION = ["=", '"', ":", ",", ";", ".", "_", "-"]

CONTENT_CHARS = list(string.ascii_lowercase) + list(string.digits)

ROLE_TOKENS = {"planner": PLANNER, "seeker": SEEKER}

DEFAULT_VOCAB_SIZE = 256


def base_symbols() -> List[str]:
    """All meaningful symbols in id order (no reserved padding)."""
    return (
        SPECIAL_TOKENS
        + [TOOLCALL, TERMINATE]
        + TOOL_NAMES
        + TOOL_ALIAS_NAMES
        + ARG_KEYS
        + WORD_TOKENS
        + PUNCTUATION
        + CONTENT_CHARS
    )


class Vocab:
    """
    Ordered symbol table with fixed size V.

    Attributes:
        tokens: Symbol strings indexed by id
        size: V, the number of ids the model predicts over
    """

    def __init__(self, tokens: Sequence[str]):
        if len(set(tokens)) != len(tokens):
            raise ConfigurationError(
                message="Vocabulary contains duplicate symbols.",
                fix="Every symbol, special or content, must appear exactly once."
            )
        self.tokens: List[str] = list(tokens)
        self._index: Dict[str, int] = {tok: i for i, tok in enumerate(self.tokens)}

    @classmethod
    def default(cls, size: int = DEFAULT_VOCAB_SIZE) -> "Vocab":
        """
        Build the standard vocabulary padded with reserved symbols.

        Args:
            size: Total vocabulary size V

        Raises:
            ConfigurationError: If size is smaller than the base alphabet
        """
        symbols = base_symbols()
        if size < len(symbols):
            raise ConfigurationError(
                message=f"Vocabulary size {size} is smaller than the {len(symbols)} base symbols.",
                fix=f"Use a vocab size of at least {len(symbols)} (default {DEFAULT_VOCAB_SIZE})."
            )
        symbols += [f"<unused_{i}>" for i in range(size - len(symbols))]
        return cls(symbols)

    @classmethod
    def from_dict(cls, data: Dict) -> "Vocab":
        return cls(data["tokens"])

    def to_dict(self) -> Dict:
        return {"size": self.size, "tokens": self.tokens}

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, symbol: str) -> bool:
        return symbol in self._index

    def id_of(self, symbol: str) -> int:
        try:
            return self._index[symbol]
        except KeyError:
            raise ValueError(f"Unknown symbol: {symbol!r}")

    @property
    def pad_id(self) -> int:
        return self._index[PAD]

    @property
    def mask_id(self) -> int:
        return self._index[MASK]

    @property
    def end_action_id(self) -> int:
        return self._index[END_ACTION]

    def encode(self, symbols: Iterable[str]) -> List[int]:
        return [self.id_of(s) for s in symbols]

    def decode(self, ids: Iterable[int]) -> List[str]:
        return [self.tokens[int(i)] for i in ids]

    def text_to_tokens(self, text: str) -> List[str]:
        """
        Tokenize observation text.

        Whitespace-separated words that are whole symbols ("not", "found")
        stay whole; everything else is split into single characters, each
        of which must be in the vocabulary.

        Example:
            >>> Vocab.default().text_to_tokens("not found")
            ['not', 'found']
            >>> Vocab.default().text_to_tokens("d4:e17")
            ['d', '4', ':', 'e', '1', '7']
        """
        tokens: List[str] = []
        for word in text.split():
            if word in self._index and word not in SPECIAL_TOKENS:
                tokens.append(word)
                continue
            for ch in word:
                if ch not in self._index:
                    raise ValueError(f"Character {ch!r} is not in the vocabulary")
                tokens.append(ch)
        return tokens


def value_tokens(value: str) -> List[str]:
    """
    Split an action argument value into single-character content tokens.

    Argument values use the character alphabet only, so the string form is
    recovered exactly by concatenation.
    """
    allowed = set(CONTENT_CHARS) | set(PUNCTUATION) - {'"'}
    tokens = list(value)
    for ch in tokens:
        if ch not in allowed:
            raise ValueError(f"Character {ch!r} is not allowed in argument values")
    return tokens
