"""
Structured Actions for dllm_agent_lab

This module defines the unit of agent decision and its token grammar.
Both backbones share this serializer and parser byte for byte.

Grammar (over vocabulary symbols):

    span      := BEGIN_ACTION body END_ACTION
    body      := 'ToolCall' TOOL arg* | 'Terminate' 'answer' '=' value
    arg       := KEY '=' value
    value     := '"' CHAR* '"'

Usage:
    from agent.actions import ToolCall, Terminate, parse_action, serialize_action

    tokens = serialize_action(ToolCall("batch_web_search", {"query": "p=3"}))
    action = parse_action(tokens)
"""

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Sequence, Tuple, Union

from world.vocab import (
    BEGIN_ACTION,
    CONTENT_CHARS,
    END_ACTION,
    PUNCTUATION,
    TERMINATE,
    TOOLCALL,
    TOOL_ALIAS_NAMES,
    TOOL_NAMES,
    value_tokens,
)


# ============================================
# Tool Registry
# ============================================

VALUE_PATTERNS: Dict[str, "re.Pattern[str]"] = {
    "text": re.compile(r"[a-z0-9=;:,._-]+"),
    "facts": re.compile(r"[a-z]=\d+(;[a-z]=\d+)*"),
    "doc": re.compile(r"d\d+"),
    "attr": re.compile(r"[a-z]"),
    "path": re.compile(r"[a-z0-9_.-]+"),
}

# Required keys in canonical serialization order, with their value types
TOOL_SCHEMAS: Dict[str, List[Tuple[str, str]]] = {
    "think": [("thought", "text")],
    "reflect": [("thought", "text")],
    "batch_web_search": [("query", "facts")],
    "url_crawler": [("url", "doc")],
    "document_qa": [("doc", "doc"), ("question", "attr")],
    "file_read": [("path", "path")],
    "file_write": [("path", "path"), ("content", "text")],
    "assign_tasks": [("tasks", "facts")],
    "task_done": [("summary", "text")],
}

TOOL_ALIASES = {"search": "batch_web_search"}

COGNITIVE_TOOLS = frozenset({"think", "reflect"})

SEEKER_TOOLS = frozenset({"batch_web_search", "url_crawler", "document_qa", "task_done"})

assert set(TOOL_SCHEMAS) == set(TOOL_NAMES)
assert set(TOOL_ALIASES) == set(TOOL_ALIAS_NAMES)

_VALUE_CHARS = frozenset(CONTENT_CHARS) | (frozenset(PUNCTUATION) - {'"'})


# ============================================
# Action Types
# ============================================


@dataclass(frozen=True)
class ToolCall:
    """Invoke a registered tool with string arguments."""
    tool_id: str
    args: Dict[str, str] = field(default_factory=dict)

    @property
    def is_cognitive(self) -> bool:
        return self.tool_id in COGNITIVE_TOOLS

    @property
    def role(self) -> str:
        return "seeker" if self.tool_id in SEEKER_TOOLS else "planner"

    def key(self) -> Tuple:
        """Hashable identity used for redundancy detection."""
        return (self.tool_id, tuple(sorted(self.args.items())))

    def to_dict(self) -> Dict:
        return {"type": "ToolCall", "tool_id": self.tool_id, "args": dict(self.args)}


@dataclass(frozen=True)
class Terminate:
    """End the episode with an answer."""
    answer: str

    @property
    def role(self) -> str:
        return "planner"

    def to_dict(self) -> Dict:
        return {"type": "Terminate", "answer": self.answer}


StructuredAction = Union[ToolCall, Terminate]


class ParseReason(str, Enum):
    MISSING_DELIMITER = "MissingDelimiter"
    UNKNOWN_TOOL = "UnknownTool"
    BAD_ARGS = "BadArgs"
    MULTIPLE_SPANS = "MultipleSpans"


@dataclass(frozen=True)
class ParseError:
    """Parser rejection; returned, never raised."""
    reason: ParseReason
    detail: str = ""

    def to_dict(self) -> Dict:
        return {"type": "ParseError", "reason": self.reason.value, "detail": self.detail}


def action_from_dict(data: Dict) -> Union[StructuredAction, ParseError]:
    """Rebuild an action (or parse error) from its to_dict() form."""
    kind = data["type"]
    if kind == "ToolCall":
        return ToolCall(data["tool_id"], dict(data["args"]))
    if kind == "Terminate":
        return Terminate(data["answer"])
    return ParseError(ParseReason(data["reason"]), data.get("detail", ""))


# ============================================
# Serialization
# ============================================


def _serialize_value(value: str) -> List[str]:
    return ['"', *value_tokens(value), '"']


def serialize_action(action: StructuredAction) -> List[str]:
    """
    Render an action as its canonical token span.

    Arguments are emitted in schema order, so parse -> serialize is the
    identity on every canonical span.

    Raises:
        ValueError: If the action violates its tool schema
    """
    if isinstance(action, Terminate):
        return [BEGIN_ACTION, TERMINATE, "answer", "=", *_serialize_value(action.answer), END_ACTION]

    schema = TOOL_SCHEMAS.get(action.tool_id)
    if schema is None:
        raise ValueError(f"Unknown tool: {action.tool_id}")
    problem = _check_schema(action.tool_id, action.args)
    if problem:
        raise ValueError(problem)

    tokens = [BEGIN_ACTION, TOOLCALL, action.tool_id]
    for key, _ in schema:
        tokens += [key, "=", *_serialize_value(action.args[key])]
    tokens.append(END_ACTION)
    return tokens


# ============================================
# Parsing
# ============================================


def _check_schema(tool_id: str, args: Dict[str, str]) -> str:
    """Return a problem description, or '' when args satisfy the schema."""
    schema = dict(TOOL_SCHEMAS[tool_id])
    missing = [k for k in schema if k not in args]
    if missing:
        return f"{tool_id}: missing {','.join(missing)}"
    extra = [k for k in args if k not in schema]
    if extra:
        return f"{tool_id}: unexpected {','.join(extra)}"
    for key, kind in schema.items():
        if not VALUE_PATTERNS[kind].fullmatch(args[key]):
            return f"{tool_id}: {key} is not a valid {kind}"
    return ""


def _parse_args(body: Sequence[str]) -> Union[Dict[str, str], ParseError]:
    args: Dict[str, str] = {}
    i = 0
    while i < len(body):
        if i + 2 >= len(body) or body[i + 1] != "=" or body[i + 2] != '"':
            return ParseError(ParseReason.BAD_ARGS, f"expected key=\"value\" at {i}")
        key = body[i]
        try:
            close = body.index('"', i + 3)
        except ValueError:
            return ParseError(ParseReason.BAD_ARGS, f"unterminated value for {key}")
        chars = body[i + 3:close]
        if any(ch not in _VALUE_CHARS for ch in chars):
            return ParseError(ParseReason.BAD_ARGS, f"illegal token in value for {key}")
        if key in args:
            return ParseError(ParseReason.BAD_ARGS, f"duplicate key {key}")
        args[key] = "".join(chars)
        i = close + 1
    return args


def parse_action(tokens: Sequence[str]) -> Union[StructuredAction, ParseError]:
    """
    Locate exactly one delimited span and parse it.

    Args:
        tokens: Raw symbol sequence (anything; never raises)

    Returns:
        ToolCall, Terminate, or ParseError with a reason code
    """
    tokens = [str(t) for t in tokens]
    begins = [i for i, t in enumerate(tokens) if t == BEGIN_ACTION]
    ends = [i for i, t in enumerate(tokens) if t == END_ACTION]

    if not begins or not ends:
        return ParseError(ParseReason.MISSING_DELIMITER, "no complete BEGIN_ACTION/END_ACTION pair")
    if len(begins) > 1 or len(ends) > 1:
        return ParseError(ParseReason.MULTIPLE_SPANS, f"{len(begins)} begins, {len(ends)} ends")
    if ends[0] < begins[0]:
        return ParseError(ParseReason.MISSING_DELIMITER, "END_ACTION precedes BEGIN_ACTION")

    body = tokens[begins[0] + 1:ends[0]]
    if not body:
        return ParseError(ParseReason.BAD_ARGS, "empty span")

    if body[0] == TERMINATE:
        args = _parse_args(body[1:])
        if isinstance(args, ParseError):
            return args
        if set(args) != {"answer"} or not args["answer"]:
            return ParseError(ParseReason.BAD_ARGS, "Terminate takes exactly a non-empty answer")
        return Terminate(args["answer"])

    if body[0] != TOOLCALL or len(body) < 2:
        return ParseError(ParseReason.BAD_ARGS, f"unexpected head {body[0]!r}")

    tool_id = TOOL_ALIASES.get(body[1], body[1])
    if tool_id not in TOOL_SCHEMAS:
        return ParseError(ParseReason.UNKNOWN_TOOL, body[1])

    args = _parse_args(body[2:])
    if isinstance(args, ParseError):
        return args
    problem = _check_schema(tool_id, args)
    if problem:
        return ParseError(ParseReason.BAD_ARGS, problem)
    return ToolCall(tool_id, args)
