"""Edge-weight laws on ``[-inf, inf)``.

Scalar weights are plain ``int``/``float`` values or the :data:`NEG_INF`
sentinel.  Vectorized code (windows, DP tables) stores weights in float64
arrays where the sentinel becomes IEEE ``-inf``; no law produces ``+inf``, so
``-inf + inf`` can never occur there.  Use :func:`to_extended` /
:func:`from_extended` at the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

ARITHMETIC = "arithmetic"
NONLATTICE = "nonlattice"

_NORMALIZATION_TOL = 1e-12


class _NegInf:
    """The value ``-inf`` of the extended weight type.

    Absorbing under addition with finite numbers and the identity for
    :func:`ext_max`.  Adding it to anything but a finite real or itself is a
    type error.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NEG_INF"

    def __str__(self):
        return "-inf"

    def __reduce__(self):
        return (_NegInf, ())

    def __hash__(self):
        return hash("lastpassage.NEG_INF")

    def __eq__(self, other):
        return other is self

    def __ne__(self, other):
        return other is not self

    def __add__(self, other):
        if other is self or _is_finite_real(other):
            return self
        return NotImplemented

    __radd__ = __add__

    def __lt__(self, other):
        if other is self:
            return False
        if _is_finite_real(other):
            return True
        return NotImplemented

    def __le__(self, other):
        if other is self or _is_finite_real(other):
            return True
        return NotImplemented

    def __gt__(self, other):
        if other is self or _is_finite_real(other):
            return False
        return NotImplemented

    def __ge__(self, other):
        if other is self:
            return True
        if _is_finite_real(other):
            return False
        return NotImplemented


NEG_INF = _NegInf()


def _is_finite_real(x) -> bool:
    if isinstance(x, bool) or x is NEG_INF:
        return False
    if isinstance(x, (int, np.integer)):
        return True
    if isinstance(x, (float, np.floating)):
        return math.isfinite(x)
    return False


def is_neg_inf(x) -> bool:
    return x is NEG_INF


def ext_add(x, y):
    """Sum in the extended algebra; either operand ``NEG_INF`` gives ``NEG_INF``."""
    if x is NEG_INF or y is NEG_INF:
        return NEG_INF
    return x + y


def ext_max(*values):
    """Maximum in the extended algebra; the maximum of nothing is ``NEG_INF``."""
    best = NEG_INF
    for v in values:
        if best is NEG_INF or (v is not NEG_INF and v > best):
            best = v
    return best


def to_extended(x):
    """Convert an array-level float (possibly ``-inf``) to a scalar weight."""
    x = float(x)
    if x == -math.inf:
        return NEG_INF
    if not math.isfinite(x):
        raise ValueError(f"weight {x!r} is not representable")
    return x


def from_extended(x) -> float:
    return -math.inf if x is NEG_INF else float(x)


class ModelError(ValueError):
    """A weight model is structurally malformed."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class UnsupportedOperation(TypeError):
    pass


@dataclass(frozen=True)
class UniformComponent:
    lo: float
    hi: float
    weight: float = 1.0


@dataclass(frozen=True)
class WeightModel:
    """Law of one edge weight.

    ``kind`` is ``"arithmetic"`` (integer table) or ``"nonlattice"`` (finite
    mixture of uniforms, optionally shifted and scaled).  Lattice type is
    declared, never inferred.  For the arithmetic kind ``table`` holds
    ``(value, prob)`` pairs for the finite part; for the non-lattice kind the
    finite part is ``shift + scale * U`` with ``U`` drawn from ``components``.
    """

    kind: str
    neg_inf_prob: float
    table: tuple[tuple[int, float], ...] = ()
    family: str | None = None
    components: tuple[UniformComponent, ...] = ()
    shift: float = 0.0
    scale: float = 1.0
    declared_exp_moment_bound: float = 1.0
    _cum: np.ndarray = field(init=False, repr=False, compare=False)
    _values: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self._check_structure()
        if self.kind == ARITHMETIC:
            probs = np.array([p for _, p in self.table], dtype=float)
            values = np.array([v for v, _ in self.table], dtype=float)
        else:
            total = sum(c.weight for c in self.components)
            probs = np.array(
                [(1.0 - self.neg_inf_prob) * c.weight / total for c in self.components]
            )
            values = np.zeros(len(self.components))
        cum = self.neg_inf_prob + np.cumsum(probs)
        cum[-1] = 1.0
        object.__setattr__(self, "_cum", np.concatenate([[self.neg_inf_prob], cum]))
        object.__setattr__(self, "_values", values)

    def _check_structure(self):
        if self.kind not in (ARITHMETIC, NONLATTICE):
            raise ModelError("kind", f"unknown kind {self.kind!r}")
        q = self.neg_inf_prob
        if not (0.0 <= q < 1.0):
            raise ModelError("neg_inf_prob", f"must lie in [0, 1), got {q!r}")
        if not self.declared_exp_moment_bound > 0:
            raise ModelError("declared_exp_moment_bound", "must be positive")
        if self.kind == ARITHMETIC:
            if not self.table:
                raise ModelError("table", "empty support")
            seen = set()
            for v, p in self.table:
                if isinstance(v, bool) or int(v) != v:
                    raise ModelError("table", f"value {v!r} is not an integer")
                if not (0.0 <= p <= 1.0):
                    raise ModelError("table", f"probability {p!r} outside [0, 1]")
                if v in seen:
                    raise ModelError("table", f"duplicate value {v!r}")
                seen.add(v)
            total = q + sum(p for _, p in self.table)
            if abs(total - 1.0) > _NORMALIZATION_TOL:
                raise ModelError("table", f"probabilities sum to {total!r}, not 1")
        else:
            if not self.components:
                raise ModelError("components", "empty support")
            for c in self.components:
                if not (math.isfinite(c.lo) and math.isfinite(c.hi) and c.lo < c.hi):
                    raise ModelError("components", f"bad interval [{c.lo}, {c.hi}]")
                if not c.weight > 0:
                    raise ModelError("components", "component weights must be positive")
            if not (math.isfinite(self.scale) and self.scale > 0):
                raise ModelError("scale", "must be positive and finite")
            if not math.isfinite(self.shift):
                raise ModelError("shift", "must be finite")

    # -- constructors -----------------------------------------------------

    @classmethod
    def arithmetic(cls, table, neg_inf_prob=0.0, **kw):
        items = table.items() if isinstance(table, dict) else table
        # non-integers pass through so that validation can reject them
        pairs = tuple(sorted((int(v) if int(v) == v else v, float(p)) for v, p in items))
        return cls(kind=ARITHMETIC, neg_inf_prob=float(neg_inf_prob), table=pairs, **kw)

    @classmethod
    def uniform(cls, lo, hi, neg_inf_prob=0.0, **kw):
        return cls(
            kind=NONLATTICE,
            neg_inf_prob=float(neg_inf_prob),
            family="uniform",
            components=(UniformComponent(float(lo), float(hi)),),
            **kw,
        )

    @classmethod
    def uniform_mixture(cls, components: Sequence, neg_inf_prob=0.0, **kw):
        comps = tuple(
            c if isinstance(c, UniformComponent) else UniformComponent(*map(float, c))
            for c in components
        )
        return cls(
            kind=NONLATTICE,
            neg_inf_prob=float(neg_inf_prob),
            family="uniform_mixture",
            components=comps,
            **kw,
        )

    # -- law queries -------------------------------------------------------

    @property
    def p(self) -> float:
        """P(v > -inf)."""
        return 1.0 - self.neg_inf_prob

    def _finite_intervals(self):
        """Finite part as (lo, hi, prob) intervals after shift/scale."""
        probs = np.diff(self._cum)
        return [
            (self.shift + self.scale * c.lo, self.shift + self.scale * c.hi, pr)
            for c, pr in zip(self.components, probs)
        ]

    @property
    def p_plus(self) -> float:
        """P(v > 0)."""
        if self.kind == ARITHMETIC:
            return float(sum(p for v, p in self.table if v > 0))
        total = 0.0
        for lo, hi, pr in self._finite_intervals():
            if hi > 0:
                total += pr * (hi - max(lo, 0.0)) / (hi - lo)
        return total

    def ess_inf_plus(self) -> float:
        """Essential infimum of the positive part ``v | v > 0``."""
        if self.kind == ARITHMETIC:
            pos = [v for v, p in self.table if v > 0 and p > 0]
            if not pos:
                raise ModelError("table", "no positive support")
            return float(min(pos))
        lows = [max(lo, 0.0) for lo, hi, pr in self._finite_intervals() if hi > 0 and pr > 0]
        if not lows:
            raise ModelError("components", "no positive support")
        return float(min(lows))

    def ess_sup(self) -> float:
        if self.kind == ARITHMETIC:
            return float(max(v for v, p in self.table if p > 0))
        return float(max(hi for _, hi, pr in self._finite_intervals() if pr > 0))

    def mean_finite(self) -> float:
        """E[v | v > -inf]."""
        if self.kind == ARITHMETIC:
            return sum(v * p for v, p in self.table) / self.p
        return sum(pr * 0.5 * (lo + hi) for lo, hi, pr in self._finite_intervals()) / self.p

    def prob_less(self, t: float) -> float:
        """P(v < t), counting the ``-inf`` atom."""
        if self.kind == ARITHMETIC:
            return self.neg_inf_prob + sum(p for v, p in self.table if v < t)
        total = self.neg_inf_prob
        for lo, hi, pr in self._finite_intervals():
            total += pr * min(max((t - lo) / (hi - lo), 0.0), 1.0)
        return total

    # -- sampling ------------------------------------------------------------

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms on [0, 1) to weights (float64, ``-inf`` for the atom).

        One uniform per draw: the segment of ``u`` picks the atom or table
        entry / mixture component, the position inside the segment is reused
        as the conditional uniform.
        """
        from ._kernels import map_uniforms

        u = np.asarray(u, dtype=float)
        return map_uniforms(u.ravel(), *self.kernel_params()).reshape(u.shape)

    def kernel_params(self) -> tuple:
        if self.kind == ARITHMETIC:
            los = his = np.zeros(len(self._values))
        else:
            los = np.array([c.lo for c in self.components])
            his = np.array([c.hi for c in self.components])
        return (self._cum, self._values, los, his, self.shift, self.scale,
                self.kind == ARITHMETIC)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "neg_inf_prob": self.neg_inf_prob}
        if self.kind == ARITHMETIC:
            d["table"] = [[v, p] for v, p in self.table]
        else:
            d["family"] = self.family or "uniform_mixture"
            if self.family == "uniform" and len(self.components) == 1:
                c = self.components[0]
                d["params"] = {"lo": c.lo, "hi": c.hi}
            else:
                d["params"] = {
                    "components": [[c.lo, c.hi, c.weight] for c in self.components]
                }
            if self.shift != 0.0:
                d["params"]["shift"] = self.shift
            if self.scale != 1.0:
                d["params"]["scale"] = self.scale
        d["exp_moment_bound"] = self.declared_exp_moment_bound
        return d


@dataclass
class Condition:
    name: str
    satisfied: bool
    reason: str


@dataclass
class ValidationReport:
    conditions: list[Condition]
    lattice: str

    @property
    def admissible(self) -> bool:
        return all(c.satisfied for c in self.conditions)

    def violated(self) -> list[str]:
        return [c.name for c in self.conditions if not c.satisfied]

    def to_dict(self) -> dict:
        return {
            "admissible": self.admissible,
            "lattice": self.lattice,
            "conditions": [
                {"name": c.name, "satisfied": c.satisfied, "reason": c.reason}
                for c in self.conditions
            ],
        }


def validate_model(model: WeightModel) -> ValidationReport:
    """Check the standing conditions on the weight law.

    Structural problems were already rejected when the model was built; this
    reports p+ > 0, non-degeneracy of v+, the exponential moment bound and
    the lattice classification.
    """
    conds = []
    pp = model.p_plus
    conds.append(Condition("p_plus_positive", pp > 0, f"P(v>0) = {pp!r}"))

    if model.kind == ARITHMETIC:
        pos = [v for v, p in model.table if v > 0 and p > 0]
        nondeg = len(pos) >= 2
        reason = f"positive support {pos}"
    else:
        # a density component on the positive half-line is never a point mass
        nondeg = any(hi > 0 for hi in (h for _, h, pr in model._finite_intervals() if pr > 0))
        reason = "positive part has a density" if nondeg else "no positive mass"
    conds.append(Condition("v_plus_nondegenerate", nondeg, reason))

    bounded = model.kind == ARITHMETIC or all(
        math.isfinite(hi) for _, hi, _ in model._finite_intervals()
    )
    conds.append(
        Condition(
            "exp_moment",
            bounded,
            f"bounded support, E exp(C v+) finite for C = {model.declared_exp_moment_bound!r}",
        )
    )

    if model.kind == ARITHMETIC:
        pos = [v for v, p in model.table if v > 0 and p > 0]
        g = reduce(math.gcd, pos, 0)
        conds.append(Condition("lattice_Z", g == 1, f"gcd of positive support = {g}"))
        lattice = "Z"
    else:
        conds.append(Condition("lattice_R", True, "finite part has a density component"))
        lattice = "R"
    return ValidationReport(conds, lattice)


def sample_weight(model: WeightModel, rng: np.random.Generator):
    """One draw as a scalar extended weight."""
    x = float(model.from_uniform(np.array([rng.random()]))[0])
    if x == -math.inf:
        return NEG_INF
    return int(x) if model.kind == ARITHMETIC else x


def sample_weights(model: WeightModel, rng: np.random.Generator, size) -> np.ndarray:
    return model.from_uniform(rng.random(size))


def exact_pmf(model: WeightModel, k) -> float:
    """P(v = k) for an arithmetic model; ``k`` may be ``NEG_INF``."""
    if model.kind != ARITHMETIC:
        raise UnsupportedOperation("exact_pmf is defined only for arithmetic models")
    if k is NEG_INF:
        return model.neg_inf_prob
    for v, p in model.table:
        if v == k:
            return p
    return 0.0


def model_from_dict(d: dict) -> WeightModel:
    """Build a model from its JSON section (already schema-checked)."""
    kind = d["kind"]
    q = float(d.get("neg_inf_prob", 0.0))
    bound = float(d.get("exp_moment_bound", 1.0))
    if kind == ARITHMETIC:
        return WeightModel.arithmetic(
            [(v, p) for v, p in d["table"]], q, declared_exp_moment_bound=bound
        )
    family = d["family"]
    params = dict(d.get("params", {}))
    shift = float(params.pop("shift", 0.0))
    scale = float(params.pop("scale", 1.0))
    if family == "uniform":
        return WeightModel.uniform(
            params["lo"], params["hi"], q, shift=shift, scale=scale,
            declared_exp_moment_bound=bound,
        )
    if family == "uniform_mixture":
        return WeightModel.uniform_mixture(
            [tuple(c) for c in params["components"]], q, shift=shift, scale=scale,
            declared_exp_moment_bound=bound,
        )
    raise ModelError("family", f"unsupported family {family!r}")
