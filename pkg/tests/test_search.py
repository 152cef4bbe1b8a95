import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmllab.data import DatasetSplit, load_digit_angles, split
from qmllab.errors import ConfigurationError, ParseError, StateError
from qmllab.models import ModelKind, ModelSpec, default_spec
from qmllab.search import (
    AgentTopology,
    Archive,
    Candidate,
    GeneratorError,
    RemoteGenerator,
    SearchConfig,
    compose_generator_request,
    dedup_key,
    evaluate_candidate,
    evolve,
    get_profile,
    make_response,
    mutate,
    parse_generator_response,
    parse_request,
    serialize,
)
from qmllab.search.evolve import DEPTH_RANGE, QUBIT_RANGE, THRESHOLD_RANGE, WIDTH_RANGE
from qmllab.training import TrainConfig

TINY_BUDGET = TrainConfig(epochs=1, batch_size=16)


@pytest.fixture(scope="module")
def tiny_split(digits_csv):
    s = split(load_digit_angles(digits_csv), 0.75, seed=1)
    return DatasetSplit(s.train.subset(range(48)), s.test.subset(range(24)), 1, 0.75, s.train_indices[:48], s.test_indices[:24])


def random_spec(rng) -> ModelSpec:
    kind = list(ModelKind)[int(rng.integers(len(ModelKind)))]
    fields = {
        "num_qubits": int(rng.integers(2, 14)),
        "ansatz_depth": int(rng.integers(1, 5)),
        "ff_threshold": float(rng.uniform(0.1, 8)),
        "readout_classes": int(rng.integers(2, 11)),
        "seed": int(rng.integers(0, 2**31)),
    }
    if kind in (ModelKind.CLASSICAL_MLP, ModelKind.CLASSICAL_FF) or rng.integers(2):
        fields["classical_widths"] = tuple(int(w) for w in rng.integers(1, 65, int(rng.integers(1, 4))))
    return default_spec(kind, **fields)


def scored(archive, spec, fitness, generation=0, parent=None):
    c = Candidate(archive.new_id(), spec, TINY_BUDGET, fitness=fitness, parent_id=parent, generation=generation)
    archive.record(c)
    return c


def changed_fields(a: ModelSpec, b: ModelSpec):
    da, db = a.to_dict(), b.to_dict()
    return {k for k in da if da[k] != db[k]}


# mutate


def test_depth_clamps_at_four():
    spec = default_spec(ModelKind.QFF, ansatz_depth=4)
    seen = set()
    for seed in range(200):
        out = mutate(spec, np.random.default_rng(seed))
        seen.add(out.ansatz_depth)
    assert max(seen) == 4 and 3 in seen


def test_mutate_is_deterministic():
    spec = default_spec(ModelKind.QMLP)
    assert mutate(spec, np.random.default_rng(5)) == mutate(spec, np.random.default_rng(5))


def test_thousand_mutations_are_valid():
    rng = np.random.default_rng(0)
    spec = default_spec(ModelKind.QMLP)
    for _ in range(1000):
        spec = mutate(spec, rng)
        assert ModelSpec.from_dict(spec.to_dict()) == spec
        assert DEPTH_RANGE[0] <= spec.ansatz_depth <= DEPTH_RANGE[1]
        assert QUBIT_RANGE[0] <= spec.num_qubits <= QUBIT_RANGE[1]
        assert THRESHOLD_RANGE[0] <= spec.ff_threshold <= THRESHOLD_RANGE[1]
        assert all(WIDTH_RANGE[0] <= w <= WIDTH_RANGE[1] for w in spec.classical_widths)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 10_000), kind=st.sampled_from(list(ModelKind)))
def test_mutation_touches_one_field(seed, kind):
    spec = default_spec(kind)
    out = mutate(spec, np.random.default_rng(seed))
    diff = changed_fields(spec, out)
    # a kind toggle may also pull depth or threshold back into range
    assert len(diff) <= 1 or "kind" in diff


def test_mutate_from_classical_kind_is_valid():
    spec = ModelSpec(ModelKind.CLASSICAL_MLP, ansatz_depth=0, classical_widths=(8,))
    for seed in range(100):
        ModelSpec.from_dict(mutate(spec, np.random.default_rng(seed)).to_dict())


# candidates and archive


def test_candidate_parent_invariant():
    spec = default_spec(ModelKind.QFF)
    with pytest.raises(ConfigurationError):
        Candidate(0, spec, TINY_BUDGET, parent_id=3, generation=0)
    with pytest.raises(ConfigurationError):
        Candidate(0, spec, TINY_BUDGET, generation=1)


def test_candidate_round_trip():
    c = Candidate(4, default_spec(ModelKind.QBP), TINY_BUDGET, fitness=0.5, parent_id=1, generation=2, status="ok")
    assert Candidate.from_dict(json.loads(json.dumps(c.to_dict()))) == c


def test_archive_ids_unique_and_fitness_checked():
    a = Archive()
    c = scored(a, default_spec(ModelKind.QFF), 0.3)
    with pytest.raises(StateError):
        a.record(c)
    with pytest.raises(StateError):
        a.record(Candidate(a.new_id(), default_spec(ModelKind.QMLP), TINY_BUDGET, fitness=1.5))
    with pytest.raises(StateError):
        Archive().best()


def test_duplicate_reuses_fitness_without_training(tiny_split):
    a = Archive()
    first = scored(a, default_spec(ModelKind.QFF), 0.42)
    dup = Candidate(a.new_id(), default_spec(ModelKind.QFF), TINY_BUDGET, parent_id=first.id, generation=1)
    assert evaluate_candidate(dup, tiny_split, a) == 0.42
    assert a.training_runs == 0 and dup.status == "reused" and dup.reused_from == first.id


def test_budget_is_part_of_the_dedup_key():
    spec = default_spec(ModelKind.QFF)
    assert dedup_key(spec, TINY_BUDGET) != dedup_key(spec, TrainConfig(epochs=2))


def test_training_failure_gives_zero_fitness(tiny_split, monkeypatch):
    import sys

    from qmllab.errors import TrainingError

    evolve_mod = sys.modules["qmllab.search.evolve"]

    def boom(*a, **k):
        raise TrainingError("non-finite loss or parameters in epoch 1")

    monkeypatch.setattr(evolve_mod, "train", boom)
    c = Candidate(0, default_spec(ModelKind.QMLP), TINY_BUDGET)
    assert evaluate_candidate(c, tiny_split) == 0.0
    assert c.status == "failed" and "non-finite" in c.note


def test_fitness_is_test_accuracy_in_unit_range(tiny_split):
    a = Archive()
    c = Candidate(a.new_id(), default_spec(ModelKind.BASELINE_QNN, seed=1), TINY_BUDGET)
    f = evaluate_candidate(c, tiny_split, a)
    assert 0.0 <= f <= 1.0 and a.training_runs == 1 and c.status == "ok"


# config and topology


@pytest.mark.parametrize(
    "bad",
    [
        {"elite_count": 0},
        {"elite_count": 6},
        {"generations": 0},
        {"population": 1, "elite_count": 1},
        {"generator": "llm"},
        {"generator": "remote"},
        {"seed": -2},
        {"top_k": 0},
    ],
)
def test_search_config_rejects(bad):
    with pytest.raises(ConfigurationError):
        SearchConfig(**bad)


@pytest.mark.parametrize(
    "agents, interaction",
    [
        ((), ()),
        ((("a", "t"), ("b", "t")), ((1.0, 0.0),)),
        ((("a", "t"),), ((-0.1,),)),
        ((("a", "t"),), ((math.inf,),)),
    ],
)
def test_topology_rejects(agents, interaction):
    with pytest.raises(ConfigurationError):
        AgentTopology(agents, interaction)


def test_topology_round_trip():
    t = AgentTopology()
    assert AgentTopology.from_dict(json.loads(json.dumps(t.to_dict()))) == t


# protocol


def test_request_orders_by_fitness_then_id():
    a = Archive()
    for f in (0.2, 0.5, 0.5, 0.1):
        scored(a, default_spec(ModelKind.QFF, seed=len(a)), f)
    req = compose_generator_request(a, AgentTopology(), 3)
    assert [e["fitness"] for e in req["top_k"]] == [0.5, 0.5, 0.2]
    assert [e["spec"]["seed"] for e in req["top_k"]] == [1, 2, 0]
    assert req["alpha_row"] == [0.5, 0.25, 0.25]
    assert [x["role"] for x in req["agents"]] == ["translator", "optimizer", "critic"]


def test_request_k_larger_than_archive():
    a = Archive()
    scored(a, default_spec(ModelKind.QBP), 0.3)
    assert len(compose_generator_request(a, AgentTopology(), 10)["top_k"]) == 1


def test_request_needs_candidates():
    with pytest.raises(StateError):
        compose_generator_request(Archive(), AgentTopology(), 3)


def test_request_round_trip_and_alpha_row_rotation():
    a = Archive()
    scored(a, default_spec(ModelKind.QMLP), 0.25)
    t = AgentTopology()
    for i in range(4):
        req = compose_generator_request(a, t, 2, agent_index=i)
        assert parse_request(serialize(req)) == req
        assert req["alpha_row"] == list(t.interaction[i % 3])


def test_hundred_specs_round_trip():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        spec = random_spec(rng)
        assert parse_generator_response(make_response(spec)) == spec


def test_qff_spec_round_trip_and_classical_kind_accepted():
    qff = default_spec(ModelKind.QFF, seed=3)
    assert parse_generator_response(make_response(qff)) == qff
    mlp = ModelSpec(ModelKind.CLASSICAL_MLP, ansatz_depth=0, classical_widths=(16,))
    assert parse_generator_response(json.dumps({"spec": mlp.to_dict()})).kind is ModelKind.CLASSICAL_MLP


def malformed_documents():
    good = default_spec(ModelKind.QFF).to_dict()
    return [
        "",
        "not json",
        "[]",
        "42",
        "null",
        '{"spec": ',
        b"\xff\xfe",
        json.dumps({}),
        json.dumps({"spec": good, "extra": 1}),
        json.dumps({"model": good}),
        json.dumps({"spec": None}),
        json.dumps({"spec": [1, 2]}),
        json.dumps({"spec": {**good, "num_qubits": 99}}),
        json.dumps({"spec": {**good, "kind": "Transformer"}}),
        json.dumps({"spec": {**good, "ansatz_depth": 0}}),
        json.dumps({"spec": {**good, "ff_threshold": -1.0}}),
        json.dumps({"spec": {**good, "unknown_field": True}}),
        json.dumps({"spec": {k: v for k, v in good.items() if k != "seed"}}),
        json.dumps({"spec": {**good, "num_qubits": "four"}}),
        json.dumps({"spec": {**good, "readout_classes": 11}}),
    ]


@pytest.mark.parametrize("doc", malformed_documents())
def test_malformed_response_is_parse_error(doc):
    with pytest.raises(ParseError):
        parse_generator_response(doc)


def test_num_qubits_99_rejected():
    with pytest.raises(ParseError, match="num_qubits"):
        parse_generator_response({"spec": {**default_spec(ModelKind.QFF).to_dict(), "num_qubits": 99}})


# remote generator


def test_remote_generator_posts_request_and_parses_reply():
    a = Archive()
    parent = scored(a, default_spec(ModelKind.QMLP), 0.5)
    sent = []
    reply = default_spec(ModelKind.QBP, seed=9)

    def transport(url, body, timeout):
        sent.append((url, json.loads(body)))
        return make_response(reply).encode()

    gen = RemoteGenerator("http://orchestrator/propose", AgentTopology(), top_k=2, transport=transport)
    assert gen.propose(parent, a, slot=1) == reply
    url, doc = sent[0]
    assert url == "http://orchestrator/propose"
    assert parse_request(doc) == doc and doc["alpha_row"] == [0.25, 0.5, 0.25]


def test_http_post_failure_is_generator_error():
    from qmllab.search.remote import http_post

    with pytest.raises(GeneratorError):
        http_post("http://127.0.0.1:9/none", b"{}", timeout=1.0)


# evolve


def small_config(**kw):
    return SearchConfig(population=4, generations=3, elite_count=2, seed=1, eval_budget=TINY_BUDGET, **kw)


def test_evolve_is_deterministic_and_elitist(tiny_split, tmp_path):
    best1, a1 = evolve(small_config(), tiny_split, archive_path=tmp_path / "a.jsonl")
    best2, a2 = evolve(small_config(), tiny_split, archive_path=tmp_path / "b.jsonl")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert a1.to_jsonl() == (tmp_path / "a.jsonl").read_text()
    assert len(a1) <= 12 and a1.training_runs <= len(a1)
    assert all(x <= y for x, y in zip(a1.best_per_generation, a1.best_per_generation[1:]))
    assert len(a1.best_per_generation) == 3
    assert best1.fitness == max(c.fitness for c in a1.candidates.values())
    assert best1.to_dict() == best2.to_dict()


def test_generation_zero_holds_one_default_per_kind(tiny_split):
    _, a = evolve(small_config(), tiny_split)
    gen0 = [c for c in a.candidates.values() if c.generation == 0]
    assert [c.spec for c in gen0] == [
        default_spec(k, seed=1) for k in (ModelKind.QMLP, ModelKind.QFF, ModelKind.QBP, ModelKind.BASELINE_QNN)
    ]
    later = [c for c in a.candidates.values() if c.generation > 0]
    assert len(later) == 4 and all(c.parent_id is not None for c in later)


class AlwaysFails:
    def __init__(self, exc=GeneratorError("unreachable")):
        self.calls = 0
        self.exc = exc

    def propose(self, parent, archive, slot):
        self.calls += 1
        raise self.exc


def test_failing_generator_falls_back_to_scripted(tiny_split):
    _, scripted = evolve(small_config(), tiny_split)
    gen = AlwaysFails()
    _, fallen = evolve(small_config(), tiny_split, generator=gen)
    assert gen.calls == 3
    assert fallen.to_jsonl() == scripted.to_jsonl()
    assert any("falling back" in n for n in fallen.notes)


def test_malformed_replies_count_toward_fallback(tiny_split):
    docs = malformed_documents()
    replies = iter(docs)

    def transport(url, body, timeout):
        return next(replies)

    gen = RemoteGenerator("http://stub", AgentTopology(), transport=transport)
    _, a = evolve(small_config(), tiny_split, generator=gen)
    failures = [n for n in a.notes if "generator failure" in n]
    assert len(failures) == 3 and "falling back" in a.notes[-1]


def test_all_twenty_malformed_replies_are_counted():
    a = Archive()
    parent = scored(a, default_spec(ModelKind.QMLP), 0.5)
    count = 0
    for doc in malformed_documents():
        gen = RemoteGenerator("http://stub", AgentTopology(), transport=lambda u, b, t, d=doc: d)
        try:
            gen.propose(parent, a, 0)
        except ParseError:
            count += 1
    assert count == 20


def test_remote_success_resets_failure_count(tiny_split):
    good = default_spec(ModelKind.QBP, seed=2)
    pattern = iter(["bad", "bad", make_response(good)] * 10)
    gen = RemoteGenerator("http://stub", AgentTopology(), transport=lambda u, b, t: next(pattern))
    _, a = evolve(small_config(), tiny_split, generator=gen)
    assert not any("falling back" in n for n in a.notes)
    later = [c for c in a.candidates.values() if c.generation > 0]
    assert all(c.spec == good for c in later)
    assert sum(c.status == "reused" for c in later) == 3


def test_ci_profile_caps_split(digits_csv):
    s = get_profile("ci").apply(split(load_digit_angles(digits_csv), 0.75, seed=1))
    assert (len(s.train), len(s.test)) == (320, 160)
    with pytest.raises(ConfigurationError):
        get_profile("huge")
