"""Command-line entry point: train, compare, search, gradcheck.

Exit codes: 0 success, 1 validation or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from .data import default_data_path, load_digit_angles, split
from .errors import ConfigurationError, InputError, ParseError, QmlLabError, ValidationError
from .gradients import override_shift
from .models import build_model, check_model_gradients
from .models.spec import ModelKind, ModelSpec, default_spec, parse_kind
from .search import AgentTopology, RemoteGenerator, SearchConfig, evolve, get_profile
from .training import TrainConfig, train

log = logging.getLogger("qmllab")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
GRAD_TOLERANCE = 1e-4
DEFAULT_SEED = 1
COMPARE_ROWS = (
    ("Baseline QNN", ModelKind.BASELINE_QNN),
    ("QMLP", ModelKind.QMLP),
    ("QFF", ModelKind.QFF),
    ("QBP", ModelKind.QBP),
)
# published accuracies (%) for the same four families; shown for context only
REFERENCE_ACCURACY = {"Baseline QNN": 15.55, "QMLP": 9.40, "QFF": 15.17, "QBP": 12.37}

MODEL_KEYS = {"kind", "num_qubits", "ansatz_depth", "classical_widths", "ff_threshold", "readout_classes", "seed"}
TRAIN_KEYS = {"epochs", "batch_size", "learning_rate", "optimizer", "seed", "shuffle"}
SEARCH_KEYS = {"population", "generations", "elite_count", "seed", "generator", "endpoint", "top_k"}
CONFIG_KEYS = (
    {"data", "out", "profile", "split.ratio", "split.seed", "topology.agents", "topology.interaction"}
    | {f"model.{k}" for k in MODEL_KEYS}
    | {f"train.{k}" for k in TRAIN_KEYS}
    | {f"search.{k}" for k in SEARCH_KEYS}
)


class DataFileError(ConfigurationError):
    pass


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def load_config_file(path) -> dict:
    """Flat dotted-key JSON object, e.g. {"train.epochs": 5}."""
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {p} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigurationError(f"config file {p} must hold a JSON object")
    unknown = sorted(set(doc) - CONFIG_KEYS)
    if unknown:
        raise ConfigurationError(f"unknown config field(s): {', '.join(unknown)}")
    return doc


def merge_config(args) -> dict:
    """Profile budget, then config file, then flags; later sources win."""
    cfg: dict = {}
    profile_name = args.profile
    file_cfg = load_config_file(args.config) if args.config else {}
    profile_name = profile_name or file_cfg.get("profile")
    if profile_name:
        cfg["profile"] = profile_name
        for k, v in get_profile(profile_name).train_config.to_dict().items():
            cfg[f"train.{k}"] = v
    cfg.update(file_cfg)

    if args.seed is not None:
        for k in ("model.seed", "train.seed", "split.seed", "search.seed"):
            cfg[k] = args.seed
    flag_map = {
        "data": "data",
        "out": "out",
        "model": "model.kind",
        "epochs": "train.epochs",
        "batch": "train.batch_size",
        "lr": "train.learning_rate",
        "qubits": "model.num_qubits",
        "depth": "model.ansatz_depth",
        "generator": "search.generator",
        "endpoint": "search.endpoint",
        "population": "search.population",
        "generations": "search.generations",
    }
    for attr, key in flag_map.items():
        v = getattr(args, attr, None)
        if v is not None:
            cfg[key] = v
    return cfg


def _section(cfg: dict, prefix: str) -> dict:
    return {k[len(prefix) + 1 :]: v for k, v in cfg.items() if k.startswith(prefix + ".")}


def _build(what, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (ConfigurationError, ParseError, TypeError) as exc:
        raise ConfigurationError(f"{what}: {exc}") from None


def model_spec_from(cfg: dict, kind=None) -> ModelSpec:
    fields = _section(cfg, "model")
    kind = kind if kind is not None else fields.pop("kind", None)
    fields.pop("kind", None)
    if kind is None:
        raise ConfigurationError("model.kind: no model given (use --model)")
    kind = _build("model.kind", parse_kind, kind)
    fields.setdefault("seed", DEFAULT_SEED)
    if "classical_widths" in fields:
        fields["classical_widths"] = tuple(fields["classical_widths"])
    return _build("model", default_spec, kind, **fields)


def train_config_from(cfg: dict) -> TrainConfig:
    fields = _section(cfg, "train")
    fields.setdefault("seed", DEFAULT_SEED)
    return _build("train", TrainConfig.from_dict, fields)


def load_split(cfg: dict):
    path = cfg.get("data") or default_data_path()
    if not path:
        raise ConfigurationError("data: no dataset path (pass --data or set QMLLAB_DATA)")
    try:
        samples = load_digit_angles(path)
    except FileNotFoundError:
        raise DataFileError(f"data: file not found: {path}") from None
    except (ParseError, ValidationError) as exc:
        raise DataFileError(f"data: {path}: {exc}") from None
    ratio = cfg.get("split.ratio", 0.75)
    seed = cfg.get("split.seed", DEFAULT_SEED)
    s = _build("split", split, samples, ratio, seed)
    if cfg.get("profile"):
        s = get_profile(cfg["profile"]).apply(s)
    return s


def out_dir(cfg: dict) -> Path:
    return Path(cfg.get("out") or "qmllab-out")


def _report_doc(spec, config, report) -> str:
    doc = {"spec": spec.to_dict(), "train_config": config.to_dict(), "report": report.to_dict(timing=False)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def cmd_train(cfg: dict) -> int:
    spec = model_spec_from(cfg)
    config = train_config_from(cfg)
    data = load_split(cfg)
    out = out_dir(cfg)
    report = train(build_model(spec, num_features=data.train.x.shape[1]), data, config)
    write_atomic(out / "report.json", _report_doc(spec, config, report))
    write_atomic(out / "curve.tsv", report.curve_table())
    print(
        f"{spec.kind.value}: train accuracy {100 * report.train_accuracy:.2f}%, "
        f"test accuracy {100 * report.test_accuracy:.2f}% ({report.wall_time:.1f} s)"
    )
    print(f"wrote {out / 'report.json'} and {out / 'curve.tsv'}")
    return EXIT_OK


def format_compare_table(rows) -> str:
    """``rows`` is a list of (name, accuracy in [0, 1] or None for a failed model)."""
    width = max(len("Model"), *(len(n) for n, _ in rows))
    lines = [f"{'Model':<{width}}  Average Accuracy (%)"]
    for name, acc in rows:
        cell = "FAILED" if acc is None else f"{100 * acc:.2f}"
        lines.append(f"{name:<{width}}  {cell}")
    ref = ", ".join(f"{n} {v:.2f}" for n, v in REFERENCE_ACCURACY.items())
    lines.append("")
    lines.append(f"* Published reference accuracies (%), context only, not a target: {ref}")
    return "\n".join(lines) + "\n"


def cmd_compare(cfg: dict) -> int:
    config = train_config_from(cfg)
    specs = [(name, model_spec_from(cfg, kind)) for name, kind in COMPARE_ROWS]
    data = load_split(cfg)
    rows = []
    for name, spec in specs:
        try:
            report = train(build_model(spec, num_features=data.train.x.shape[1]), data, config)
            rows.append((name, report.test_accuracy))
            log.info("%s done in %.1f s", name, report.wall_time)
        except Exception as exc:  # one failed row must not hide the others
            log.error("%s failed: %s", name, exc)
            rows.append((name, None))
    table = format_compare_table(rows)
    out = out_dir(cfg)
    write_atomic(out / "compare.txt", table)
    sys.stdout.write(table)
    return EXIT_RUNTIME if any(acc is None for _, acc in rows) else EXIT_OK


def search_config_from(cfg: dict) -> SearchConfig:
    fields = _section(cfg, "search")
    fields.setdefault("seed", DEFAULT_SEED)
    topo = {}
    if "topology.agents" in cfg:
        topo["agents"] = tuple(tuple(a) for a in cfg["topology.agents"])
    if "topology.interaction" in cfg:
        topo["interaction"] = tuple(tuple(r) for r in cfg["topology.interaction"])
    if topo:
        fields["topology"] = _build("topology", AgentTopology, **topo)
    fields["eval_budget"] = train_config_from(cfg)
    return _build("search", SearchConfig, **fields)


def cmd_search(cfg: dict) -> int:
    config = search_config_from(cfg)
    data = load_split(cfg)
    out = out_dir(cfg)
    generator = None
    if config.generator == "remote":
        generator = RemoteGenerator(config.endpoint, config.topology, config.top_k)
    out.mkdir(parents=True, exist_ok=True)
    partial = out / ".archive.jsonl.partial"

    def progress(c):
        log.info("candidate %d (gen %d) %s fitness %.4f", c.id, c.generation, c.spec.kind.value, c.fitness)

    best, archive = evolve(config, data, generator, archive_path=partial, progress=progress)
    os.replace(partial, out / "archive.jsonl")
    summary = archive.summary()
    summary["search_config"] = {
        k: getattr(config, k) for k in ("population", "generations", "elite_count", "seed", "generator", "endpoint", "top_k")
    }
    write_atomic(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    traj = " -> ".join(f"{f:.4f}" for f in archive.best_per_generation)
    print(f"evaluated {len(archive)} candidates ({archive.training_runs} training runs)")
    print(f"best fitness per generation: {traj}")
    print(f"best candidate {best.id}: {best.spec.canonical()}")
    return EXIT_OK


def _significant_rel(chk, floor: float = 1e-6) -> float:
    # relative error is only meaningful away from zero gradients
    big = np.abs(chk.numeric) > floor
    return float(chk.rel_err[big].max(initial=0.0))


def cmd_gradcheck(cfg: dict, shift: float | None = None, tolerance: float = GRAD_TOLERANCE) -> int:
    spec = model_spec_from(cfg)
    model = build_model(spec)
    rng = np.random.default_rng(spec.seed)
    x = rng.uniform(0.0, math.pi, size=(4, 16))
    y = rng.integers(0, spec.readout_classes, size=4)
    with override_shift(shift) if shift is not None else nullcontext():
        checks = check_model_gradients(model, x, y, epsilon=1e-5, seed=spec.seed)
    print(f"model {spec.kind.value}, {model.num_parameters()} trainable parameters")
    worst_name, worst = None, None
    for name, chk in checks.items():
        print(f"  {name:<28} {chk.count:>6} entries  max abs {chk.max_abs:.3e}  max rel {_significant_rel(chk):.3e}")
        if worst is None or chk.max_abs > worst.max_abs:
            worst_name, worst = name, chk
    max_abs = max(c.max_abs for c in checks.values())
    max_rel = max(_significant_rel(c) for c in checks.values())
    print(f"max absolute deviation {max_abs:.3e}, max relative deviation {max_rel:.3e}")
    if max_abs < tolerance:
        print(f"PASS (tolerance {tolerance:g})")
        return EXIT_OK
    print(f"FAIL: worst parameter index {worst.worst_index} in {worst_name} (deviation {worst.max_abs:.3e} > {tolerance:g})")
    return EXIT_RUNTIME


class _Parser(argparse.ArgumentParser):
    """Bad flags are configuration errors (exit 1), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with flat dotted keys, e.g. {\"train.epochs\": 5}")
    common.add_argument("--seed", type=int, help="seed for the model, training, split and search")
    common.add_argument("--out", help="output directory (default ./qmllab-out)")
    common.add_argument("--profile", help="evaluation budget profile: default or ci")
    common.add_argument("-v", "--verbose", action="store_true")

    data = _Parser(add_help=False)
    data.add_argument("--data", help="digits CSV (default $QMLLAB_DATA)")

    budget = _Parser(add_help=False)
    budget.add_argument("--epochs", type=int)
    budget.add_argument("--batch", type=int)
    budget.add_argument("--lr", type=float)

    arch = _Parser(add_help=False)
    arch.add_argument("--qubits", type=int)
    arch.add_argument("--depth", type=int)

    parser = _Parser(prog="qmllab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common, data, budget, arch], help="train one model")
    p.add_argument("--model", help="QMLP, QFF, QBP, BaselineQNN, ClassicalMLP or ClassicalFF")

    sub.add_parser("compare", parents=[common, data, budget, arch], help="accuracy table for the four quantum families")

    p = sub.add_parser("search", parents=[common, data, budget], help="evolutionary search over model specs")
    p.add_argument("--generator", choices=["scripted", "remote"])
    p.add_argument("--endpoint", help="URL of the remote generator")
    p.add_argument("--population", type=int)
    p.add_argument("--generations", type=int)

    p = sub.add_parser("gradcheck", parents=[common, arch], help="analytic vs finite-difference gradients")
    p.add_argument("--model", help="model kind")
    p.add_argument("--tolerance", type=float, default=GRAD_TOLERANCE)
    p.add_argument("--debug-shift", type=float, metavar="RAD", help="override the parameter-shift constant (negative control)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = merge_config(args)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "compare":
            return cmd_compare(cfg)
        if args.command == "search":
            return cmd_search(cfg)
        return cmd_gradcheck(cfg, args.debug_shift, args.tolerance)
    except (ConfigurationError, ValidationError, ParseError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QmlLabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
