"""JSON model / partition / spec files and canonical report output."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .branching import BirthDeathSpec, TwoTypeSpec
from .chain import Generator
from .errors import ValidationError
from .lumping import Partition


class ParseError(ValidationError):
    """Malformed input document; ``path`` is the offending JSON path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True, eq=False)
class ModelDocument:
    generator: Generator
    rates: tuple
    initial: dict | None = None
    partition: Partition | None = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {
            "states": list(self.generator.states),
            "target": [s for s in self.generator.states if s in self.generator.target],
            "rates": [list(r) for r in self.rates],
        }
        if self.initial is not None:
            doc["initial"] = dict(self.initial)
        if self.partition is not None:
            doc["partition"] = [list(b) for b in self.partition.blocks]
        if self.metadata:
            doc["metadata"] = dict(self.metadata)
        return doc

    def __eq__(self, other):
        return isinstance(other, ModelDocument) and self.to_dict() == other.to_dict()


def _labels(value, path, known=None):
    if not isinstance(value, list):
        raise ParseError(path, "expected an array of strings")
    for i, s in enumerate(value):
        if not isinstance(s, str):
            raise ParseError(f"{path}[{i}]", "expected a string")
        if known is not None and s not in known:
            raise ParseError(f"{path}[{i}]", f"unknown state label {s!r}")
    return value


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(path, "expected a number")
    value = float(value)
    if not math.isfinite(value):
        raise ParseError(path, "expected a finite number")
    return value


def model_from_dict(doc) -> ModelDocument:
    if not isinstance(doc, dict):
        raise ParseError("$", "expected an object")
    for key in ("states", "target", "rates"):
        if key not in doc:
            raise ParseError(f"$.{key}", "missing required field")
    extra = set(doc) - {"states", "target", "rates", "initial", "partition", "metadata"}
    if extra:
        raise ParseError(f"$.{sorted(extra)[0]}", "unknown field")
    states = _labels(doc["states"], "states")
    if not states:
        raise ParseError("states", "no states")
    seen = set()
    for i, s in enumerate(states):
        if s in seen:
            raise ParseError(f"states[{i}]", f"duplicate state {s!r}")
        seen.add(s)
    target = _labels(doc["target"], "target", seen)
    if not target:
        raise ParseError("target", "target set is empty")
    if len(set(target)) == len(seen):
        raise ParseError("target", "target set equals the whole state space")
    if not isinstance(doc["rates"], list):
        raise ParseError("rates", "expected an array of [from, to, rate] triples")
    rates, pairs = [], set()
    for i, tr in enumerate(doc["rates"]):
        p = f"rates[{i}]"
        if not isinstance(tr, list) or len(tr) != 3:
            raise ParseError(p, "expected [from, to, rate]")
        a, b, r = tr
        if not isinstance(a, str) or a not in seen:
            raise ParseError(f"{p}[0]", f"unknown state label {a!r}")
        if not isinstance(b, str) or b not in seen:
            raise ParseError(f"{p}[1]", f"unknown state label {b!r}")
        if a == b:
            raise ParseError(p, f"self-loop on {a!r}")
        r = _number(r, f"{p}[2]")
        if r < 0:
            raise ParseError(f"{p}[2]", "negative rate")
        if (a, b) in pairs:
            raise ParseError(p, f"duplicate rate {a!r}->{b!r}")
        pairs.add((a, b))
        rates.append((a, b, r))
    gen = Generator.from_triples(states, target, rates)
    initial = None
    if doc.get("initial") is not None:
        init = doc["initial"]
        if not isinstance(init, dict):
            raise ParseError("initial", "expected an object state -> probability")
        initial = {}
        for s, p in init.items():
            if s not in seen:
                raise ParseError(f"initial.{s}", f"unknown state label {s!r}")
            if s in gen.target:
                raise ParseError(f"initial.{s}", "initial law charges the target set")
            p = _number(p, f"initial.{s}")
            if p < 0:
                raise ParseError(f"initial.{s}", "negative probability")
            initial[s] = p
        if abs(math.fsum(initial.values()) - 1.0) > 1e-12:
            raise ParseError("initial", "probabilities do not sum to 1")
    partition = None
    if doc.get("partition") is not None:
        partition = partition_from_obj(doc["partition"], gen, "partition")
    meta = doc.get("metadata") or {}
    if not isinstance(meta, dict) or not all(isinstance(v, str) for v in meta.values()):
        raise ParseError("metadata", "expected a map of strings")
    return ModelDocument(gen, tuple(rates), initial, partition, dict(meta))


def partition_from_obj(obj, gen: Generator, path="$") -> Partition:
    if not isinstance(obj, list):
        raise ParseError(path, "expected an array of arrays of state labels")
    blocks = [_labels(b, f"{path}[{k}]", gen.index) for k, b in enumerate(obj)]
    part = Partition.of(blocks)
    try:
        part.check(gen)
    except ValidationError as exc:
        raise ParseError(path, str(exc)) from None
    return part


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError("$", f"invalid JSON: {exc}") from None


def parse_model(path) -> ModelDocument:
    return model_from_dict(_load_json(path))


def parse_partition(path, gen: Generator) -> Partition:
    return partition_from_obj(_load_json(path), gen)


def parse_law(path, labels) -> dict:
    obj = _load_json(path)
    if not isinstance(obj, dict):
        raise ParseError("$", "expected an object state -> probability")
    out = {}
    for s, p in obj.items():
        if s not in labels:
            raise ParseError(f"$.{s}", f"unknown or target state {s!r}")
        out[s] = _number(p, f"$.{s}")
    return out


def birth_death_from_obj(obj) -> BirthDeathSpec:
    if not isinstance(obj, dict) or "lambda" not in obj or "nu" not in obj:
        raise ParseError("$", 'expected {"lambda": ..., "nu": ...}')
    return BirthDeathSpec(_number(obj["lambda"], "lambda"), _number(obj["nu"], "nu"))


def two_type_from_obj(obj) -> TwoTypeSpec:
    if not isinstance(obj, dict) or "offspring" not in obj or "branch_rate" not in obj:
        raise ParseError("$", 'expected {"offspring": [[k1, k2, p], ...], "branch_rate": ...}')
    off = obj["offspring"]
    if not isinstance(off, list):
        raise ParseError("offspring", "expected an array")
    triples = []
    for i, tr in enumerate(off):
        if not isinstance(tr, list) or len(tr) != 3:
            raise ParseError(f"offspring[{i}]", "expected [k1, k2, p]")
        k1, k2, p = (_number(x, f"offspring[{i}][{j}]") for j, x in enumerate(tr))
        if k1 != int(k1) or k2 != int(k2):
            raise ParseError(f"offspring[{i}]", "child counts must be integers")
        triples.append((int(k1), int(k2), p))
    return TwoTypeSpec.of(triples, _number(obj["branch_rate"], "branch_rate"))


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        if math.isnan(obj):
            return None
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    return obj


def canonical_json(obj) -> str:
    """Sorted keys, shortest round-trip floats, trailing newline."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def digest_files(paths) -> str:
    """sha256 over the raw bytes of the given files, in the given order."""
    h = hashlib.sha256()
    for p in paths:
        data = Path(p).read_bytes()
        h.update(len(data).to_bytes(8, "big"))
        h.update(data)
    return h.hexdigest()


@dataclass
class RunReport:
    command: str
    inputs_digest: str
    result: dict
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"command": self.command, "inputs_digest": self.inputs_digest,
                "result": self.result, "warnings": list(self.warnings)}


def emit_report(report: RunReport, path=None) -> str:
    """Write the canonical JSON of ``report`` to ``path`` (or return it only)."""
    text = canonical_json(report.to_dict())
    if path is not None:
        Path(path).write_text(text)
    return text
