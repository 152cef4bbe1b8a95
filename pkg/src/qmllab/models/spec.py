"""ModelSpec: the searchable description of one candidate model."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from enum import Enum

from ..errors import ConfigurationError, ParseError


class ModelKind(str, Enum):
    QMLP = "QMLP"
    QFF = "QFF"
    QBP = "QBP"
    BASELINE_QNN = "BaselineQNN"
    CLASSICAL_MLP = "ClassicalMLP"
    CLASSICAL_FF = "ClassicalFF"

    @property
    def is_quantum(self) -> bool:
        return self in QUANTUM_KINDS

    @property
    def is_ff(self) -> bool:
        return self in (ModelKind.QFF, ModelKind.CLASSICAL_FF)


QUANTUM_KINDS = frozenset({ModelKind.QMLP, ModelKind.QFF, ModelKind.QBP, ModelKind.BASELINE_QNN})

MIN_QUBITS, MAX_QUBITS = 2, 13

# accepted on the command line and in documents, case-insensitive
_ALIASES = {k.value.lower(): k for k in ModelKind}
_ALIASES.update({"baseline": ModelKind.BASELINE_QNN, "mlp": ModelKind.CLASSICAL_MLP, "ff": ModelKind.CLASSICAL_FF})


def parse_kind(name) -> ModelKind:
    if isinstance(name, ModelKind):
        return name
    try:
        return _ALIASES[str(name).lower()]
    except KeyError:
        raise ConfigurationError(f"unknown model kind {name!r}") from None


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    num_qubits: int = 8
    ansatz_depth: int = 2
    classical_widths: tuple = ()
    ff_threshold: float = 1.0
    readout_classes: int = 10
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", parse_kind(self.kind))
        object.__setattr__(self, "classical_widths", tuple(self.classical_widths))
        self.validate()

    def validate(self) -> "ModelSpec":
        def is_int(v):
            return isinstance(v, int) and not isinstance(v, bool)

        if not is_int(self.num_qubits) or not MIN_QUBITS <= self.num_qubits <= MAX_QUBITS:
            raise ConfigurationError(f"num_qubits must be an integer in [{MIN_QUBITS}, {MAX_QUBITS}], got {self.num_qubits!r}")
        if not is_int(self.ansatz_depth) or self.ansatz_depth < (1 if self.kind.is_quantum else 0):
            raise ConfigurationError(f"ansatz_depth must be >= 1 for quantum kinds, got {self.ansatz_depth!r}")
        if not all(is_int(w) and w >= 1 for w in self.classical_widths):
            raise ConfigurationError(f"classical_widths must be positive integers, got {self.classical_widths!r}")
        if self.kind is ModelKind.CLASSICAL_FF and not self.classical_widths:
            raise ConfigurationError("ClassicalFF needs at least one hidden width")
        thr = self.ff_threshold
        if isinstance(thr, bool) or not isinstance(thr, (int, float)) or not math.isfinite(thr):
            raise ConfigurationError(f"ff_threshold must be a finite number, got {thr!r}")
        if self.kind.is_ff and thr <= 0:
            raise ConfigurationError(f"ff_threshold must be > 0 for FF kinds, got {thr!r}")
        if not is_int(self.readout_classes) or not 2 <= self.readout_classes <= 10:
            raise ConfigurationError(f"readout_classes must be in [2, 10], got {self.readout_classes!r}")
        if not is_int(self.seed) or self.seed < 0:
            raise ConfigurationError(f"seed must be a non-negative integer, got {self.seed!r}")
        return self

    def replace(self, **changes) -> "ModelSpec":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        d["classical_widths"] = list(self.classical_widths)
        d["ff_threshold"] = float(self.ff_threshold)
        return d

    def canonical(self) -> str:
        """Stable serialization used for dedup and on the wire."""
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, d) -> "ModelSpec":
        """Strict inverse of ``to_dict``: every field required, none extra."""
        if not isinstance(d, dict):
            raise ParseError(f"spec must be an object, got {type(d).__name__}")
        names = set(SPEC_FIELDS)
        extra = set(d) - names
        missing = names - set(d)
        if extra:
            raise ParseError(f"unknown spec fields: {sorted(extra)}")
        if missing:
            raise ParseError(f"missing spec fields: {sorted(missing)}")
        widths = d["classical_widths"]
        if not isinstance(widths, list):
            raise ParseError("classical_widths must be a list")
        thr = d["ff_threshold"]
        if isinstance(thr, int) and not isinstance(thr, bool):
            thr = float(thr)
        try:
            return cls(
                kind=d["kind"],
                num_qubits=d["num_qubits"],
                ansatz_depth=d["ansatz_depth"],
                classical_widths=tuple(widths),
                ff_threshold=thr,
                readout_classes=d["readout_classes"],
                seed=d["seed"],
            )
        except ConfigurationError as exc:
            raise ParseError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "ModelSpec":
        try:
            d = json.loads(text)
        except (json.JSONDecodeError, TypeError) as exc:
            raise ParseError(f"invalid JSON: {exc}") from None
        return cls.from_dict(d)


SPEC_FIELDS = ("kind", "num_qubits", "ansatz_depth", "classical_widths", "ff_threshold", "readout_classes", "seed")

_DEFAULT_WIDTHS = {
    ModelKind.QMLP: (16,),
    ModelKind.CLASSICAL_MLP: (32,),
    ModelKind.CLASSICAL_FF: (32, 32),
}


def default_spec(kind, seed: int = 0, **overrides) -> ModelSpec:
    """The artifact's default spec for ``kind``: 8 qubits, depth 2, threshold 1."""
    kind = parse_kind(kind)
    base = dict(kind=kind, classical_widths=_DEFAULT_WIDTHS.get(kind, ()), seed=seed)
    base.update(overrides)
    return ModelSpec(**base)
