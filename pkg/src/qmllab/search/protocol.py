"""Wire documents exchanged with a remote candidate generator.

Request (JSON object, exactly these keys)::

    {"top_k":     [{"spec": <ModelSpec object>, "fitness": <float>}, ...],
     "agents":    [{"role": <str>, "template_id": <str>}, ...],
     "alpha_row": [<float>, ...]}

Response::

    {"spec": <ModelSpec object>}

See docs/protocol.md for the field-level description.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from ..errors import ConfigurationError, ParseError, StateError
from ..models.spec import ModelSpec

REQUEST_KEYS = ("top_k", "agents", "alpha_row")
RESPONSE_KEYS = ("spec",)


@dataclass(frozen=True)
class AgentTopology:
    """Agent roles and the interaction weights ``alpha[i][j]``.

    Row ``i`` is how much agent ``i`` weighs agent ``j``'s latest output. The
    weights are transported to the remote orchestrator, not applied here.
    """

    agents: tuple = (("translator", "classical-to-quantum"), ("optimizer", "refine-hyperparameters"), ("critic", "review-fitness"))
    interaction: tuple = ((0.5, 0.25, 0.25), (0.25, 0.5, 0.25), (0.25, 0.25, 0.5))

    def __post_init__(self):
        agents = tuple((str(r), str(t)) for r, t in self.agents)
        rows = tuple(tuple(float(a) for a in row) for row in self.interaction)
        object.__setattr__(self, "agents", agents)
        object.__setattr__(self, "interaction", rows)
        if not agents:
            raise ConfigurationError("topology needs at least one agent")
        if len(rows) != len(agents) or any(len(r) != len(agents) for r in rows):
            raise ConfigurationError(f"interaction must be {len(agents)}x{len(agents)}")
        if any(not math.isfinite(a) or a < 0 for r in rows for a in r):
            raise ConfigurationError("interaction weights must be finite and non-negative")

    def to_dict(self) -> dict:
        return {"agents": [list(a) for a in self.agents], "interaction": [list(r) for r in self.interaction]}

    @classmethod
    def from_dict(cls, d: dict) -> "AgentTopology":
        return cls(tuple(tuple(a) for a in d["agents"]), tuple(tuple(r) for r in d["interaction"]))


def _ranked(archive, k):
    evaluated = [c for c in archive.candidates.values() if c.fitness is not None]
    evaluated.sort(key=lambda c: (-c.fitness, c.id))
    return evaluated[:k]


def compose_generator_request(archive, topology: AgentTopology, k: int, agent_index: int = 0) -> dict:
    """Top-k candidates (fitness descending, id ascending), the agent roster and one alpha row."""
    if k < 1:
        raise ConfigurationError(f"k must be >= 1, got {k}")
    top = _ranked(archive, k)
    if not top:
        raise StateError("archive has no evaluated candidate")
    i = agent_index % len(topology.agents)
    return {
        "top_k": [{"spec": c.spec.to_dict(), "fitness": float(c.fitness)} for c in top],
        "agents": [{"role": r, "template_id": t} for r, t in topology.agents],
        "alpha_row": list(topology.interaction[i]),
    }


def serialize(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _load(document) -> dict:
    if isinstance(document, dict):
        return document
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"document is not UTF-8: {exc}") from None
    if not isinstance(document, str):
        raise ParseError(f"unsupported document type {type(document).__name__}")
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("document must be a JSON object")
    return doc


def _exact_keys(doc, keys, what):
    if set(doc) != set(keys):
        raise ParseError(f"{what} must have exactly the keys {list(keys)}, got {sorted(doc)}")


def parse_request(document) -> dict:
    """Validate a request document and return it as a plain dict."""
    doc = _load(document)
    _exact_keys(doc, REQUEST_KEYS, "request")
    if not isinstance(doc["top_k"], list) or not doc["top_k"]:
        raise ParseError("top_k must be a nonempty list")
    for entry in doc["top_k"]:
        if not isinstance(entry, dict):
            raise ParseError("top_k entries must be objects")
        _exact_keys(entry, ("spec", "fitness"), "top_k entry")
        ModelSpec.from_dict(entry["spec"])
        f = entry["fitness"]
        if isinstance(f, bool) or not isinstance(f, (int, float)) or not 0 <= f <= 1:
            raise ParseError(f"fitness must be a number in [0, 1], got {f!r}")
    if not isinstance(doc["agents"], list) or not doc["agents"]:
        raise ParseError("agents must be a nonempty list")
    for a in doc["agents"]:
        if not isinstance(a, dict):
            raise ParseError("agents entries must be objects")
        _exact_keys(a, ("role", "template_id"), "agent")
        if not isinstance(a["role"], str) or not isinstance(a["template_id"], str):
            raise ParseError("agent role and template_id must be strings")
    row = doc["alpha_row"]
    if not isinstance(row, list) or len(row) != len(doc["agents"]):
        raise ParseError("alpha_row must list one weight per agent")
    if any(isinstance(a, bool) or not isinstance(a, (int, float)) or a < 0 for a in row):
        raise ParseError("alpha_row weights must be non-negative numbers")
    return doc


def parse_generator_response(document) -> ModelSpec:
    """A validated ModelSpec from ``{"spec": {...}}``; anything else is a ParseError."""
    doc = _load(document)
    _exact_keys(doc, RESPONSE_KEYS, "response")
    return ModelSpec.from_dict(doc["spec"])


def make_response(spec: ModelSpec) -> str:
    return serialize({"spec": spec.to_dict()})
