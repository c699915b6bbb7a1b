"""
Synthetic Task World for dllm_agent_lab

A deterministic stand-in for the web: a flat attribute store of entities
plus synthetic documents that each mention a slice of one entity's facts.
Tasks are multi-constraint lookups with exactly one satisfying entity.

Layout of the world:
- entities e0..eN-1, each with one integer value per attribute
- attributes are split into D contiguous slots; every entity has one
  document per slot, so any entity is fully described by D documents
- document ids are a seeded permutation, so ids carry no entity order

Usage:
    from world.generator import WorldConfig, generate_world, sample_tasks

    world = generate_world(WorldConfig(seed=7, n_entities=20))
    tasks = sample_tasks(world, n_tasks=100, seed=7)
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.config import ConfigurationError, GenerationError
from core.utils import derive_seed


logger = logging.getLogger(__name__)

ATTRIBUTE_NAMES = list("pqrstuvwxyz")

Fact = Tuple[str, int]


# ============================================
# Configuration
# ============================================


@dataclass(frozen=True)
class WorldConfig:
    """
    Size parameters of a synthetic world.

    Attributes:
        seed: World seed; generation is a pure function of the config
        n_entities: Number of entities
        n_attributes: Attributes per entity (named p, q, r, ...)
        n_values: Values per attribute (0..n_values-1)
        docs_per_entity: D, documents (attribute slots) per entity
    """
    seed: int = 7
    n_entities: int = 20
    n_attributes: int = 4
    n_values: int = 10
    docs_per_entity: int = 3

    def __post_init__(self) -> None:
        for name in ("n_entities", "n_attributes", "n_values", "docs_per_entity"):
            if getattr(self, name) < 1:
                raise ConfigurationError(
                    message=f"World size parameter {name} must be positive, got {getattr(self, name)}.",
                    fix="Use positive integers for all world sizes."
                )
        if self.n_attributes > len(ATTRIBUTE_NAMES):
            raise ConfigurationError(
                message=f"n_attributes={self.n_attributes} exceeds the {len(ATTRIBUTE_NAMES)} attribute names.",
                fix=f"Use at most {len(ATTRIBUTE_NAMES)} attributes."
            )
        if self.docs_per_entity > self.n_attributes:
            raise ConfigurationError(
                message=f"docs_per_entity={self.docs_per_entity} exceeds n_attributes={self.n_attributes}.",
                fix="Every document must mention at least one fact; lower docs_per_entity."
            )
        if self.n_values ** self.n_attributes < self.n_entities:
            raise ConfigurationError(
                message=(
                    f"{self.n_entities} entities cannot have distinct attribute vectors with "
                    f"{self.n_attributes} attributes of {self.n_values} values; unique-answer tasks are impossible."
                ),
                fix="Increase n_values or n_attributes, or lower n_entities."
            )


# ============================================
# Domain Types
# ============================================


@dataclass(frozen=True)
class Document:
    doc_id: str
    entity_id: str
    facts: Tuple[Fact, ...]

    @property
    def text(self) -> str:
        """Document text, e.g. 'e17:p=3;q=1'."""
        return f"{self.entity_id}:" + ";".join(f"{a}={v}" for a, v in self.facts)

    def mentions(self, fact: Fact) -> bool:
        return fact in self.facts


@dataclass
class World:
    """
    Entities, documents and the attribute-slot layout.

    Attributes:
        config: Generating configuration (seed included)
        entities: entity_id -> {attribute: value}
        documents: Documents in doc-id order
        slots: Attribute names per document slot
    """
    config: WorldConfig
    entities: Dict[str, Dict[str, int]]
    documents: List[Document]
    slots: List[List[str]]
    _doc_index: Dict[str, Document] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        self._doc_index = {d.doc_id: d for d in self.documents}

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def attribute_names(self) -> List[str]:
        return ATTRIBUTE_NAMES[: self.config.n_attributes]

    def document(self, doc_id: str) -> Optional[Document]:
        return self._doc_index.get(doc_id)

    def slot_of(self, attribute: str) -> int:
        for index, names in enumerate(self.slots):
            if attribute in names:
                return index
        raise KeyError(attribute)

    def search(self, facts: Sequence[Fact]) -> List[Document]:
        """Documents mentioning every fact, in doc-id order."""
        return [d for d in self.documents if all(d.mentions(f) for f in facts)]

    def satisfiers(self, constraints: Sequence[Fact]) -> List[str]:
        """Brute-force scan: entities satisfying every constraint."""
        return [
            entity_id
            for entity_id, attrs in self.entities.items()
            if all(attrs.get(a) == v for a, v in constraints)
        ]

    def to_dict(self) -> Dict:
        return {
            "config": asdict(self.config),
            "entities": [{"entity_id": k, "attributes": v} for k, v in self.entities.items()],
            "documents": [
                {"doc_id": d.doc_id, "entity_id": d.entity_id, "text": d.text,
                 "facts": [[a, v] for a, v in d.facts]}
                for d in self.documents
            ],
            "slots": self.slots,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "World":
        return cls(
            config=WorldConfig(**data["config"]),
            entities={e["entity_id"]: dict(e["attributes"]) for e in data["entities"]},
            documents=[
                Document(d["doc_id"], d["entity_id"], tuple((a, int(v)) for a, v in d["facts"]))
                for d in data["documents"]
            ],
            slots=[list(s) for s in data["slots"]],
        )


@dataclass(frozen=True)
class TaskSpec:
    """
    A closed multi-constraint lookup.

    Attributes:
        task_id: Identifier; (seed, task_id) regenerates the task exactly
        constraints: (attribute, value) predicates in attribute order
        gold_answer: The unique satisfying entity id
        seed: Task-sampling seed
    """
    task_id: str
    constraints: Tuple[Fact, ...]
    gold_answer: str
    seed: int

    @property
    def query_text(self) -> str:
        """Constraint string, e.g. 'p=3;q=1'."""
        return ";".join(f"{a}={v}" for a, v in self.constraints)

    def to_dict(self) -> Dict:
        return {
            "task_id": self.task_id,
            "constraints": [[a, v] for a, v in self.constraints],
            "gold_answer": self.gold_answer,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "TaskSpec":
        return cls(
            task_id=data["task_id"],
            constraints=tuple((a, int(v)) for a, v in data["constraints"]),
            gold_answer=data["gold_answer"],
            seed=int(data["seed"]),
        )


# ============================================
# Generation
# ============================================


def generate_world(config: WorldConfig) -> World:
    """
    Generate a world deterministically from its configuration.

    Every entity gets a distinct attribute vector, so a task that lists all
    attributes of an entity always has exactly one satisfier.

    Args:
        config: Validated world configuration

    Returns:
        World whose every attribute fact appears in exactly one document
    """
    rng = np.random.default_rng(derive_seed(config.seed, "world"))
    names = ATTRIBUTE_NAMES[: config.n_attributes]

    vectors: List[Tuple[int, ...]] = []
    seen = set()
    while len(vectors) < config.n_entities:
        vector = tuple(int(v) for v in rng.integers(0, config.n_values, size=config.n_attributes))
        if vector in seen:
            continue
        seen.add(vector)
        vectors.append(vector)

    entities = {f"e{i}": dict(zip(names, vec)) for i, vec in enumerate(vectors)}
    slots = [[names[j] for j in chunk] for chunk in np.array_split(np.arange(config.n_attributes), config.docs_per_entity)]

    n_docs = config.n_entities * config.docs_per_entity
    doc_numbers = rng.permutation(n_docs)
    documents = []
    k = 0
    for entity_id, attrs in entities.items():
        for slot in slots:
            facts = tuple((a, attrs[a]) for a in slot)
            documents.append(Document(f"d{int(doc_numbers[k])}", entity_id, facts))
            k += 1
    documents.sort(key=lambda d: int(d.doc_id[1:]))

    logger.debug(f"Generated world seed={config.seed}: {len(entities)} entities, {len(documents)} documents")
    return World(config=config, entities=entities, documents=documents, slots=slots)


def make_task(world: World, seed: int, task_id: str, n_constraints: Optional[int] = None) -> TaskSpec:
    """
    Build one closed task from (seed, task_id).

    A gold entity is drawn, then a random attribute subset of the requested
    size; attributes are added in a seeded order until the gold entity is
    the only satisfier.

    Args:
        world: World to draw from
        seed: Task-sampling seed
        task_id: Task identifier (part of the derived seed)
        n_constraints: Initial constraint count (random in 1..A when None)

    Raises:
        GenerationError: If no unique constraint set exists for the draw
    """
    rng = np.random.default_rng(derive_seed(seed, "task", task_id))
    entity_ids = list(world.entities)
    gold = entity_ids[int(rng.integers(0, len(entity_ids)))]
    names = world.attribute_names

    order = [names[int(i)] for i in rng.permutation(len(names))]
    m = n_constraints if n_constraints is not None else int(rng.integers(1, len(names) + 1))
    m = max(1, min(m, len(names)))

    attrs = world.entities[gold]
    chosen = order[:m]
    while True:
        constraints = tuple((a, attrs[a]) for a in names if a in chosen)
        if world.satisfiers(constraints) == [gold]:
            return TaskSpec(task_id=task_id, constraints=constraints, gold_answer=gold, seed=seed)
        if len(chosen) == len(order):
            raise GenerationError(f"Task {task_id}: entity {gold} is not uniquely identifiable")
        chosen = order[: len(chosen) + 1]


def sample_tasks(
    world: World,
    n_tasks: int,
    seed: int,
    prefix: str = "t",
    n_constraints: Optional[int] = None
) -> List[TaskSpec]:
    """
    Sample closed tasks with ids prefix0..prefixN-1.

    Args:
        world: World to draw from
        n_tasks: Number of tasks
        seed: Task-sampling seed
        prefix: Task-id prefix (separates train and held-out splits)
        n_constraints: Fixed initial constraint count, or None for random

    Returns:
        List of TaskSpec
    """
    return [make_task(world, seed, f"{prefix}{i}", n_constraints) for i in range(n_tasks)]
