"""
Simulated Tool Execution for dllm_agent_lab

Deterministic tool semantics over a synthetic World. Tool failures are
observations, never exceptions, so a misbehaving policy cannot crash an
episode.

Tool outputs:
- batch_web_search(query)   -> "d4:e17,d9:e3" (doc:entity, doc-id order) or "empty"
- url_crawler(url)          -> document text "e17:p=3;q=1" or "not found"
- document_qa(doc, question)-> "q=1" or "not found"
- file_read(path)           -> stored content or "not found"
- file_write(path, content) -> "ok"
- think / reflect           -> "" (cognitive, free of the tool budget)
- assign_tasks / task_done  -> "ok"

Usage:
    from agent.tools import VirtualFileStore, execute_tool

    store = VirtualFileStore()
    obs = execute_tool(ToolCall("batch_web_search", {"query": "p=3"}), world, store)
    print(obs.text)
"""

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from agent.actions import ToolCall
from world.generator import Fact, World
from world.vocab import Vocab


_TOKENIZER = Vocab.default()

_ENTITY_PATTERN = re.compile(r"e\d+")

NOT_FOUND = "not found"


@dataclass(frozen=True)
class Observation:
    """Tool output text; is_error marks failures reported to the agent."""
    text: str
    is_error: bool = False

    @property
    def tokens(self) -> List[str]:
        return _TOKENIZER.text_to_tokens(self.text)

    def entities(self) -> List[str]:
        """Entity ids mentioned in the observation, in order of appearance."""
        return _ENTITY_PATTERN.findall(self.text)


@dataclass
class VirtualFileStore:
    """Per-episode in-memory file system."""
    files: Dict[str, str] = field(default_factory=dict)

    def read(self, path: str) -> Optional[str]:
        return self.files.get(path)

    def write(self, path: str, content: str) -> None:
        self.files[path] = content


def parse_facts(query: str) -> List[Fact]:
    """'p=3;q=1' -> [('p', 3), ('q', 1)]"""
    facts = []
    for part in query.split(";"):
        attr, value = part.split("=")
        facts.append((attr, int(value)))
    return facts


def execute_tool(action: ToolCall, world: World, store: VirtualFileStore) -> Observation:
    """
    Execute one ToolCall against the world and the episode file store.

    Args:
        action: Schema-valid ToolCall
        world: Synthetic world the tools read from
        store: Episode-local file store (mutated by file_write)

    Returns:
        Observation; failures come back with is_error=True
    """
    tool = action.tool_id
    args = action.args

    if tool in ("think", "reflect"):
        return Observation("")

    if tool == "batch_web_search":
        hits = world.search(parse_facts(args["query"]))
        if not hits:
            return Observation("empty")
        return Observation(",".join(f"{d.doc_id}:{d.entity_id}" for d in hits))

    if tool == "url_crawler":
        doc = world.document(args["url"])
        if doc is None:
            return Observation(NOT_FOUND, is_error=True)
        return Observation(doc.text)

    if tool == "document_qa":
        doc = world.document(args["doc"])
        if doc is None:
            return Observation(NOT_FOUND, is_error=True)
        for attr, value in doc.facts:
            if attr == args["question"]:
                return Observation(f"{attr}={value}")
        return Observation(NOT_FOUND, is_error=True)

    if tool == "file_read":
        content = store.read(args["path"])
        if content is None:
            return Observation(NOT_FOUND, is_error=True)
        return Observation(content)

    if tool == "file_write":
        store.write(args["path"], args["content"])
        return Observation("ok")

    if tool in ("assign_tasks", "task_done"):
        return Observation("ok")

    # parse_action only yields registered tools
    return Observation("error", is_error=True)
