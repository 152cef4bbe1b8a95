"""Evolutionary search over model specifications."""

from .evolve import (
    Archive,
    Candidate,
    GeneratorError,
    ScriptedMutation,
    SearchConfig,
    dedup_key,
    evaluate_candidate,
    evolve,
    mutate,
)
from .profiles import PROFILES, BudgetProfile, get_profile
from .protocol import (
    AgentTopology,
    compose_generator_request,
    make_response,
    parse_generator_response,
    parse_request,
    serialize,
)
from .remote import RemoteGenerator, http_post

__all__ = [
    "AgentTopology",
    "Archive",
    "BudgetProfile",
    "Candidate",
    "GeneratorError",
    "PROFILES",
    "RemoteGenerator",
    "ScriptedMutation",
    "SearchConfig",
    "compose_generator_request",
    "dedup_key",
    "evaluate_candidate",
    "evolve",
    "get_profile",
    "http_post",
    "make_response",
    "mutate",
    "parse_generator_response",
    "parse_request",
    "serialize",
]
