"""HTTP client for a remote candidate generator."""

from __future__ import annotations

import urllib.error
import urllib.request
from dataclasses import dataclass
from typing import Callable

from ..models.spec import ModelSpec
from .evolve import Archive, Candidate, GeneratorError
from .protocol import AgentTopology, compose_generator_request, parse_generator_response, serialize

# (url, body bytes, timeout) -> response bytes
Transport = Callable[[str, bytes, float], bytes]


def http_post(url: str, body: bytes, timeout: float) -> bytes:
    req = urllib.request.Request(url, data=body, headers={"Content-Type": "application/json"}, method="POST")
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.read()
    except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
        raise GeneratorError(f"POST {url} failed: {exc}") from None


@dataclass
class RemoteGenerator:
    """One POST per refill slot; the composing agent rotates with the slot."""

    endpoint: str
    topology: AgentTopology
    top_k: int = 3
    timeout: float = 30.0
    transport: Transport = http_post

    def request(self, archive: Archive, slot: int) -> dict:
        return compose_generator_request(archive, self.topology, self.top_k, agent_index=slot)

    def propose(self, parent: Candidate, archive: Archive, slot: int) -> ModelSpec:
        body = serialize(self.request(archive, slot)).encode("utf-8")
        return parse_generator_response(self.transport(self.endpoint, body, self.timeout))
