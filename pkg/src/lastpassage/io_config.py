"""Experiment configuration and result files.

A configuration is a JSON object with sections ``model``, ``experiment``,
``renewal``, ``binning``, ``seed``, ``workers`` and ``output``.  Parsing is
strict (unknown keys are errors) and reports every violation at once, each
tagged with its dotted path.  The canonical form is the defaults-filled
document dumped with sorted keys and no whitespace.  The config digest
written into every summary is the SHA-256 of that form without ``workers``
and ``output``, which never change the results.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .regeneration import RenewalConfig
from .seeding import derive_seed, replica_rng, rng_from_key  # noqa: F401  (re-exported)
from .weights import ARITHMETIC, NONLATTICE, ModelError, WeightModel, model_from_dict

EXPERIMENT_KINDS = ("pilot", "llt", "lln_clt", "invariance", "audit", "oracle")
RESULT_COLUMNS = ("x", "p_hat", "se", "theory_d", "theory_gauss", "ratio_d", "ratio_gauss")

_num = {"type": "number"}
_pos_int = {"type": "integer", "minimum": 1}
_const = {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "auto"}]}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["model", "experiment"],
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": [ARITHMETIC, NONLATTICE]},
                "neg_inf_prob": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "table": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "array",
                        "prefixItems": [{"type": "integer"}, {"type": "number", "minimum": 0}],
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
                "family": {"enum": ["uniform", "uniform_mixture"]},
                "params": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "lo": _num,
                        "hi": _num,
                        "components": {
                            "type": "array",
                            "minItems": 1,
                            "items": {"type": "array", "items": _num, "minItems": 3, "maxItems": 3},
                        },
                        "shift": _num,
                        "scale": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
                "exp_moment_bound": {"type": "number", "exclusiveMinimum": 0},
                "force": {"type": "boolean"},
            },
        },
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": list(EXPERIMENT_KINDS)},
                "n": {"oneOf": [_pos_int, {"type": "array", "items": _pos_int, "minItems": 1}]},
                "replicas": _pos_int,
                "pilot_windows": _pos_int,
                "pilot_length": {"type": "integer", "minimum": 10},
                "min_cycles": _pos_int,
                "window_length": {"type": "integer", "minimum": 2},
                "paired": _pos_int,
                "max_span": {"type": "integer", "minimum": 1, "maximum": 22},
            },
        },
        "renewal": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "c1": _const,
                "c2": _const,
                "horizon": _pos_int,
                "margin": _pos_int,
                "second": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["c1", "c2"],
                    "properties": {"c1": _const, "c2": _const},
                },
            },
        },
        "binning": {
            "type": "object",
            "additionalProperties": False,
            "required": ["rule"],
            "properties": {
                "rule": {"enum": ["power"]},
                "exponent": {"type": "number", "exclusiveMaximum": 0},
                "scale": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "workers": _pos_int,
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "cycles": {"type": "boolean"}},
        },
    },
}

DEFAULTS = {
    "experiment": {
        "n": 200,
        "replicas": 10_000,
        "pilot_windows": 200,
        "pilot_length": 2000,
        "min_cycles": 1000,
        "window_length": 400,
        "paired": 1000,
        "max_span": 12,
    },
    "renewal": {"c1": "auto", "c2": "auto", "horizon": 40, "margin": 40},
    "seed": 0,
    "workers": 1,
    "output": {"dir": "out", "cycles": False},
}
BINNING_DEFAULTS = {"exponent": -0.25, "scale": 1.0}

SUMMARY_SCHEMA = {
    "type": "object",
    "required": ["config_digest", "a_hat", "sigma_hat", "n", "replicas", "checks"],
    "properties": {
        "config_digest": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "a_hat": {"type": ["number", "null"]},
        "sigma_hat": {"type": ["number", "null"]},
        "n": {"oneOf": [{"type": "integer"}, {"type": "array", "items": {"type": "integer"}}, {"type": "null"}]},
        "replicas": {"type": ["integer", "null"]},
        "checks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["name", "pass", "detail"],
                "properties": {
                    "name": {"type": "string"},
                    "pass": {"type": "boolean"},
                    "detail": {},
                },
            },
        },
    },
}


class ConfigError(ValueError):
    """All violations found in one document, as ``(path, message)`` pairs."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(f"{p}: {m}" for p, m in self.violations))

    @property
    def paths(self) -> list[str]:
        return [p for p, _ in self.violations]


@dataclass(frozen=True)
class Binning:
    rule: str = "power"
    exponent: float = -0.25
    scale: float = 1.0

    def width(self, n: int) -> float:
        return self.scale * n**self.exponent

    def halved(self) -> "Binning":
        return Binning(self.rule, self.exponent, self.scale / 2)


@dataclass(frozen=True)
class ExperimentConfig:
    model: WeightModel
    kind: str
    n: int | tuple[int, ...]
    replicas: int
    renewal: dict
    binning: Binning | None
    master_seed: int
    workers: int
    output_dir: str
    dump_cycles: bool
    pilot_windows: int
    pilot_length: int
    min_cycles: int
    window_length: int
    paired: int
    max_span: int
    force: bool = False
    document: dict = field(default_factory=dict, repr=False)

    @property
    def n_values(self) -> tuple[int, ...]:
        return self.n if isinstance(self.n, tuple) else (self.n,)

    def renewal_config(self, c1: float, c2: float) -> RenewalConfig:
        return RenewalConfig(c1, c2, self.renewal["horizon"], self.renewal["margin"])

    def constants(self, which: str = "first"):
        """``(c1, c2)`` of the first or second pair; ``None`` where ``auto``."""
        src = self.renewal if which == "first" else self.renewal.get("second")
        if src is None:
            return None
        return tuple(None if src[k] == "auto" else float(src[k]) for k in ("c1", "c2"))

    def canonical(self) -> str:
        return canonical_json(self.document)

    @property
    def digest(self) -> str:
        doc = {k: v for k, v in self.document.items() if k not in ("workers", "output")}
        return hashlib.sha256(canonical_json(doc).encode()).hexdigest()

    def with_updates(self, **kw) -> "ExperimentConfig":
        """A copy with top-level document fields replaced (``seed``, ``workers``, ``output_dir``)."""
        doc = copy.deepcopy(self.document)
        if "seed" in kw:
            doc["seed"] = int(kw["seed"])
        if "workers" in kw:
            doc["workers"] = int(kw["workers"])
        if "output_dir" in kw:
            doc["output"]["dir"] = str(kw["output_dir"])
        if "experiment" in kw:
            doc["experiment"].update(kw["experiment"])
        return config_from_document(doc)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _path(err) -> str:
    parts = [str(p) for p in err.absolute_path]
    return ".".join(parts) if parts else "<root>"


def _fill_defaults(doc: dict) -> dict:
    out = copy.deepcopy(doc)
    for section, defaults in DEFAULTS.items():
        if isinstance(defaults, dict):
            merged = dict(defaults)
            merged.update(out.get(section, {}))
            out[section] = merged
        else:
            out.setdefault(section, defaults)
    if "binning" in out:
        merged = dict(BINNING_DEFAULTS)
        merged.update(out["binning"])
        out["binning"] = merged
    out["model"].setdefault("neg_inf_prob", 0.0)
    out["model"].setdefault("exp_moment_bound", 1.0)
    out["model"].setdefault("force", False)
    return out


def _cross_checks(doc: dict) -> list[tuple[str, str]]:
    bad = []
    m, exp, ren = doc["model"], doc["experiment"], doc["renewal"]
    if m["kind"] == ARITHMETIC:
        for k in ("family", "params"):
            if k in m:
                bad.append((f"model.{k}", "not allowed for an arithmetic model"))
        if "table" not in m:
            bad.append(("model.table", "required for an arithmetic model"))
        if "binning" in doc:
            bad.append(("binning", "arithmetic experiments must not specify a binning rule"))
    else:
        if "table" in m:
            bad.append(("model.table", "not allowed for a non-lattice model"))
        if "family" not in m:
            bad.append(("model.family", "required for a non-lattice model"))
        if "binning" not in doc:
            bad.append(("binning", "non-lattice experiments require a binning rule"))
        params = m.get("params", {})
        if m.get("family") == "uniform" and not {"lo", "hi"} <= set(params):
            bad.append(("model.params", "uniform family needs lo and hi"))
        if m.get("family") == "uniform_mixture" and "components" not in params:
            bad.append(("model.params.components", "uniform_mixture needs components"))
    if not bad:
        try:
            model_from_dict(m)
        except ModelError as e:
            bad.append((f"model.{e.field}", str(e)))
        except (ValueError, TypeError) as e:
            bad.append(("model", str(e)))

    for prefix, pair in (("renewal", ren), ("renewal.second", ren.get("second"))):
        if pair is None:
            continue
        c1, c2 = pair["c1"], pair["c2"]
        if isinstance(c1, (int, float)) and isinstance(c2, (int, float)) and c2 > c1:
            bad.append((f"{prefix}.c2", f"c2={c2} exceeds c1={c1}"))
        if (c1 == "auto") != (c2 == "auto"):
            bad.append((f"{prefix}.c1", "c1 and c2 must both be numbers or both 'auto'"))
    if ren["margin"] < ren["horizon"]:
        bad.append(("renewal.margin", f"margin {ren['margin']} is smaller than horizon {ren['horizon']}"))
    if exp["kind"] == "invariance" and "second" not in ren:
        bad.append(("renewal.second", "the invariance experiment needs a second (c1, c2) pair"))
    if exp["pilot_length"] <= 2 * ren["margin"] + 1:
        bad.append(("experiment.pilot_length", "pilot windows must exceed twice the margin"))
    if exp["kind"] == "audit" and exp["window_length"] <= 2 * ren["margin"]:
        bad.append(("experiment.window_length", "audit windows must exceed twice the margin"))
    return bad


def config_from_document(doc: dict) -> ExperimentConfig:
    """Validate an already-parsed JSON object; raises :class:`ConfigError` with every violation."""
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: (_path(e), e.message))
    if errors:
        raise ConfigError([(_path(e), e.message) for e in errors])
    doc = _fill_defaults(doc)
    bad = _cross_checks(doc)
    if bad:
        raise ConfigError(bad)
    exp = doc["experiment"]
    n = exp["n"]
    return ExperimentConfig(
        model=model_from_dict(doc["model"]),
        kind=exp["kind"],
        n=tuple(n) if isinstance(n, list) else n,
        replicas=exp["replicas"],
        renewal=doc["renewal"],
        binning=Binning(**doc["binning"]) if "binning" in doc else None,
        master_seed=doc["seed"],
        workers=doc["workers"],
        output_dir=doc["output"]["dir"],
        dump_cycles=doc["output"]["cycles"],
        pilot_windows=exp["pilot_windows"],
        pilot_length=exp["pilot_length"],
        min_cycles=exp["min_cycles"],
        window_length=exp["window_length"],
        paired=exp["paired"],
        max_span=exp["max_span"],
        force=doc["model"]["force"],
        document=doc,
    )


def parse_config(text: str) -> ExperimentConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([(f"line {e.lineno} column {e.colno}", e.msg)]) from None
    if not isinstance(doc, dict):
        raise ConfigError([("<root>", "configuration must be a JSON object")])
    return config_from_document(doc)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


# -- results -------------------------------------------------------------------


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: object = None

    def to_dict(self) -> dict:
        return {"name": self.name, "pass": bool(self.passed), "detail": _jsonable(self.detail)}


@dataclass
class ResultRecord:
    """Rows keyed by :data:`RESULT_COLUMNS` plus summary metadata and checks."""

    rows: list[dict]
    meta: dict
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item"):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def format_decimal(x) -> str:
    """Shortest round-trip decimal; ``inf``/``-inf``/``nan`` spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def result_csv(rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(RESULT_COLUMNS)
    for r in rows:
        wr.writerow([format_decimal(r[c]) for c in RESULT_COLUMNS])
    return buf.getvalue()


def summary_document(record: ResultRecord, config_digest: str) -> dict:
    meta = _jsonable(record.meta)
    doc = {
        "config_digest": config_digest,
        "a_hat": meta.pop("a_hat", None),
        "sigma_hat": meta.pop("sigma_hat", None),
        "n": meta.pop("n", None),
        "replicas": meta.pop("replicas", None),
        "checks": [c.to_dict() for c in record.checks],
        "pass": record.passed,
    }
    doc["meta"] = meta
    return doc


def atomic_write(path, text: str) -> None:
    """Write to a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e}") from e


def write_results(record: ResultRecord, out_dir, config_digest: str, cycles_csv: str | None = None) -> dict:
    """Emit ``result.csv``, ``summary.json`` and optionally ``cycles.csv``; returns the paths."""
    out = Path(out_dir)
    paths = {"result": out / "result.csv", "summary": out / "summary.json"}
    atomic_write(paths["result"], result_csv(record.rows))
    summary = summary_document(record, config_digest)
    atomic_write(paths["summary"], json.dumps(summary, indent=2, sort_keys=True, allow_nan=False) + "\n")
    if cycles_csv is not None:
        paths["cycles"] = out / "cycles.csv"
        atomic_write(paths["cycles"], cycles_csv)
    return paths


def validate_summary(doc: dict) -> None:
    jsonschema.validate(doc, SUMMARY_SCHEMA)
