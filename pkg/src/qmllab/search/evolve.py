"""Generate / evaluate / select / refine loop over ModelSpecs."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from ..data import DatasetSplit
from ..errors import ConfigurationError, ParseError, StateError, TrainingError
from ..models import build_model
from ..models.spec import ModelKind, ModelSpec, default_spec
from ..training import TrainConfig, train
from .protocol import AgentTopology

log = logging.getLogger(__name__)

SEED_KINDS = (ModelKind.QMLP, ModelKind.QFF, ModelKind.QBP, ModelKind.BASELINE_QNN)
TOGGLE_KINDS = (ModelKind.QMLP, ModelKind.QFF, ModelKind.QBP)
DEPTH_RANGE = (1, 4)
QUBIT_RANGE = (4, 10)
WIDTH_RANGE = (4, 64)
THRESHOLD_RANGE = (0.25, 8.0)
MAX_CONSECUTIVE_FAILURES = 3


def _clamp(v, lo, hi):
    return min(max(v, lo), hi)


def mutate(spec: ModelSpec, rng: np.random.Generator) -> ModelSpec:
    """Perturb exactly one field of ``spec``; clamping may leave it unchanged."""
    ops = ["depth", "qubits", "threshold", "kind"]
    if spec.classical_widths:
        ops.insert(2, "width")
    op = ops[int(rng.integers(len(ops)))]
    up = bool(rng.integers(2))
    if op == "depth":
        return spec.replace(ansatz_depth=_clamp(spec.ansatz_depth + (1 if up else -1), *DEPTH_RANGE))
    if op == "qubits":
        return spec.replace(num_qubits=_clamp(spec.num_qubits + (1 if up else -1), *QUBIT_RANGE))
    if op == "width":
        i = int(rng.integers(len(spec.classical_widths)))
        widths = list(spec.classical_widths)
        widths[i] = _clamp(widths[i] * 2 if up else widths[i] // 2, *WIDTH_RANGE)
        return spec.replace(classical_widths=tuple(widths))
    if op == "threshold":
        thr = spec.ff_threshold * 1.5 if up else spec.ff_threshold / 1.5
        return spec.replace(ff_threshold=float(_clamp(thr, *THRESHOLD_RANGE)))
    others = [k for k in TOGGLE_KINDS if k is not spec.kind]
    kind = others[int(rng.integers(len(others)))]
    # keep the result valid when leaving a classical kind
    fields = {"kind": kind, "ansatz_depth": _clamp(spec.ansatz_depth, *DEPTH_RANGE)}
    if kind is ModelKind.QFF:
        fields["ff_threshold"] = float(_clamp(abs(spec.ff_threshold), *THRESHOLD_RANGE))
    return spec.replace(**fields)


@dataclass
class Candidate:
    id: int
    spec: ModelSpec
    train_config: TrainConfig
    fitness: float | None = None
    parent_id: int | None = None
    generation: int = 0
    status: str = "pending"
    note: str = ""
    reused_from: int | None = None

    def __post_init__(self):
        if self.generation < 0:
            raise ConfigurationError(f"generation must be >= 0, got {self.generation}")
        if (self.parent_id is None) != (self.generation == 0):
            raise ConfigurationError("parent_id must be absent exactly for generation 0")

    @property
    def key(self) -> str:
        return dedup_key(self.spec, self.train_config)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "generation": self.generation,
            "parent_id": self.parent_id,
            "spec": self.spec.to_dict(),
            "train_config": self.train_config.to_dict(),
            "fitness": self.fitness,
            "status": self.status,
            "reused_from": self.reused_from,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Candidate":
        return cls(
            id=d["id"],
            spec=ModelSpec.from_dict(d["spec"]),
            train_config=TrainConfig.from_dict(d["train_config"]),
            fitness=d["fitness"],
            parent_id=d["parent_id"],
            generation=d["generation"],
            status=d["status"],
            note=d["note"],
            reused_from=d["reused_from"],
        )


def dedup_key(spec: ModelSpec, budget: TrainConfig) -> str:
    return spec.canonical() + "|" + json.dumps(budget.to_dict(), sort_keys=True, separators=(",", ":"))


class Archive:
    """Every evaluated candidate, the shared evaluations and the loop's notes.

    With ``path`` set, each candidate is appended as one JSON line when it is
    recorded. Lines carry no timing, so reruns produce identical files.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.candidates: dict[int, Candidate] = {}
        self.best_per_generation: list[float] = []
        self.notes: list[str] = []
        self.training_runs = 0
        self._evaluations: dict[str, int] = {}
        self._next_id = 0
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text("")

    def __len__(self):
        return len(self.candidates)

    def new_id(self) -> int:
        i = self._next_id
        self._next_id += 1
        return i

    def lookup(self, candidate: Candidate) -> Candidate | None:
        i = self._evaluations.get(candidate.key)
        return None if i is None else self.candidates[i]

    def record(self, candidate: Candidate) -> None:
        if candidate.id in self.candidates:
            raise StateError(f"candidate id {candidate.id} already archived")
        if candidate.fitness is None or not 0.0 <= candidate.fitness <= 1.0:
            raise StateError(f"candidate {candidate.id} has no valid fitness")
        self.candidates[candidate.id] = candidate
        self._evaluations.setdefault(candidate.key, candidate.id)
        if self.path is not None:
            with self.path.open("a") as fh:
                fh.write(json.dumps(candidate.to_dict(), sort_keys=True) + "\n")

    def note(self, message: str) -> None:
        log.warning(message)
        self.notes.append(message)

    def best(self) -> Candidate:
        if not self.candidates:
            raise StateError("archive is empty")
        return min(self.candidates.values(), key=lambda c: (-c.fitness, c.id))

    def close_generation(self) -> None:
        self.best_per_generation.append(self.best().fitness)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(c.to_dict(), sort_keys=True) + "\n" for c in self.candidates.values())

    def summary(self) -> dict:
        best = self.best()
        return {
            "best": best.to_dict(),
            "best_per_generation": list(self.best_per_generation),
            "candidates": len(self.candidates),
            "training_runs": self.training_runs,
            "notes": list(self.notes),
        }


def evaluate_candidate(candidate: Candidate, split: DatasetSplit, archive: Archive | None = None) -> float:
    """Train and score ``candidate``; a spec already in the archive reuses its fitness."""
    if candidate.fitness is not None:
        raise StateError(f"candidate {candidate.id} already has a fitness")
    if archive is not None:
        prior = archive.lookup(candidate)
        if prior is not None:
            candidate.fitness = prior.fitness
            candidate.status = "reused"
            candidate.reused_from = prior.reused_from if prior.reused_from is not None else prior.id
            return candidate.fitness
        archive.training_runs += 1
    model = build_model(candidate.spec, num_features=split.train.x.shape[1])
    try:
        report = train(model, split, candidate.train_config)
    except TrainingError as exc:
        candidate.fitness = 0.0
        candidate.status = "failed"
        candidate.note = str(exc)
        return 0.0
    candidate.fitness = float(report.test_accuracy)
    candidate.status = "ok"
    return candidate.fitness


class Generator(Protocol):
    def propose(self, parent: Candidate, archive: Archive, slot: int) -> ModelSpec: ...


class GeneratorError(RuntimeError):
    """The remote generator could not deliver a usable spec."""


@dataclass
class ScriptedMutation:
    rng: np.random.Generator

    def propose(self, parent: Candidate, archive: Archive, slot: int) -> ModelSpec:
        return mutate(parent.spec, self.rng)


@dataclass(frozen=True)
class SearchConfig:
    population: int = 6
    generations: int = 3
    elite_count: int = 2
    seed: int = 1
    generator: str = "scripted"
    endpoint: str | None = None
    eval_budget: TrainConfig = field(default_factory=TrainConfig)
    topology: AgentTopology = field(default_factory=AgentTopology)
    top_k: int = 3

    def __post_init__(self):
        self.validate()

    def validate(self) -> "SearchConfig":
        for name in ("population", "generations", "elite_count", "seed", "top_k"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool):
                raise ConfigurationError(f"{name} must be an integer, got {v!r}")
        if self.generations < 1:
            raise ConfigurationError(f"generations must be >= 1, got {self.generations}")
        if not 1 <= self.elite_count < self.population:
            raise ConfigurationError(
                f"elite_count must satisfy 1 <= elite_count < population, got {self.elite_count} / {self.population}"
            )
        if self.seed < 0:
            raise ConfigurationError(f"seed must be non-negative, got {self.seed}")
        if self.top_k < 1:
            raise ConfigurationError(f"top_k must be >= 1, got {self.top_k}")
        if self.generator not in ("scripted", "remote"):
            raise ConfigurationError(f"generator must be 'scripted' or 'remote', got {self.generator!r}")
        if self.generator == "remote" and not self.endpoint:
            raise ConfigurationError("endpoint is required for the remote generator")
        return self

    def replace(self, **changes) -> "SearchConfig":
        return replace(self, **changes)


def _ranked(candidates):
    return sorted(candidates, key=lambda c: (-c.fitness, c.id))


def evolve(
    config: SearchConfig,
    split: DatasetSplit,
    generator: Generator | None = None,
    archive_path: str | os.PathLike | None = None,
    progress: Callable[[Candidate], None] | None = None,
) -> tuple[Candidate, Archive]:
    """Run the search and return the best-ever candidate and the archive.

    ``generator`` proposes refill specs for generations >= 1. Without one, or
    once it has failed three times in a row, seeded mutation takes over.
    Selection and mutation draw from separate streams so that a fallback run
    continues exactly like a scripted one.
    """
    config.validate()
    select_rng = np.random.default_rng([config.seed, 0])
    scripted = ScriptedMutation(np.random.default_rng([config.seed, 1]))
    archive = Archive(archive_path)
    budget = config.eval_budget

    def admit(spec, generation, parent_id):
        c = Candidate(archive.new_id(), spec, budget, parent_id=parent_id, generation=generation)
        evaluate_candidate(c, split, archive)
        archive.record(c)
        if progress is not None:
            progress(c)
        return c

    seeds = [default_spec(k, seed=config.seed) for k in SEED_KINDS][: config.population]
    specs = list(seeds)
    while len(specs) < config.population:
        base = seeds[int(select_rng.integers(len(seeds)))]
        specs.append(mutate(base, scripted.rng))
    population = [admit(s, 0, None) for s in specs]
    archive.close_generation()

    remote = generator
    failures = 0
    for gen in range(1, config.generations):
        elites = _ranked(population)[: config.elite_count]
        fresh = []
        for slot in range(config.population - config.elite_count):
            parent = elites[int(select_rng.integers(len(elites)))]
            spec = None
            while remote is not None and spec is None:
                try:
                    spec = remote.propose(parent, archive, slot)
                    failures = 0
                except (GeneratorError, ParseError, OSError) as exc:
                    failures += 1
                    archive.note(f"generation {gen} slot {slot}: generator failure {failures}: {exc}")
                    if failures >= MAX_CONSECUTIVE_FAILURES:
                        archive.note(f"generation {gen} slot {slot}: falling back to scripted mutation")
                        remote = None
            if spec is None:
                spec = scripted.propose(parent, archive, slot)
            fresh.append(admit(spec, gen, parent.id))
        population = elites + fresh
        archive.close_generation()
    return archive.best(), archive
