"""Skeleton and renewal vertices, regeneration cycles, admissible constants.

The linear-growth events are infinite intersections in theory; here every
index is cut at ``horizon`` and only vertices at least ``margin`` away from
both window ends are examined.  A vertex is a renewal vertex when
``Al(c1) & A0(c2) & Ar(c1)`` holds (``c2 <= c1``), which is what makes every
maximal path between its two sides pass through it.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels as K
from .lpp import WeightWindow, brute_force_max_weight, sample_window
from .weights import WeightModel

DEFAULT_HORIZON = 40


class MarginViolation(ValueError):
    pass


class EstimationFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class RenewalConfig:
    c1: float
    c2: float
    horizon: int = DEFAULT_HORIZON
    margin: int = DEFAULT_HORIZON

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("c1 and c2 must be positive")
        if self.c2 > self.c1:
            raise ValueError(f"need c2 <= c1, got c1={self.c1}, c2={self.c2}")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.margin < self.horizon:
            raise ValueError("margin must be >= horizon")

    def with_constants(self, c1: float, c2: float) -> "RenewalConfig":
        return RenewalConfig(c1, c2, self.horizon, self.margin)


@dataclass(frozen=True)
class EventRecord:
    Al: bool
    A0: bool
    Ar: bool
    Al_plus: bool
    A0_plus: bool
    Ar_plus: bool

    @property
    def renewal(self) -> bool:
        return self.Al and self.A0 and self.Ar

    @property
    def renewal_plus(self) -> bool:
        return self.Al_plus and self.A0_plus and self.Ar_plus


@dataclass
class RegenerationReport:
    skeleton: list[int]
    skeleton_plus: list[int]
    renewal: list[int]
    renewal_plus: list[int]
    truncation_note: dict

    def inclusion_violations(self) -> list[str]:
        """Names of the inclusions R+ <= R <= S and R+ <= S+ <= S that fail."""
        S, Sp = set(self.skeleton), set(self.skeleton_plus)
        R, Rp = set(self.renewal), set(self.renewal_plus)
        bad = []
        for name, a, b in [
            ("R+ <= R", Rp, R),
            ("R <= S", R, S),
            ("R+ <= S+", Rp, Sp),
            ("S+ <= S", Sp, S),
        ]:
            if not a <= b:
                bad.append(name)
        return bad

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class CycleSample:
    tau: int
    marks: tuple[float, ...]
    is_first: bool = False
    start: int | None = None

    @property
    def zeta(self) -> float:
        return self.marks[-1]


# -- detection ---------------------------------------------------------------


def _interior(window: WeightWindow, margin: int) -> range:
    return range(window.lo + margin, window.hi - margin + 1)


def detect_skeleton(window: WeightWindow, margin: int) -> list[int]:
    """Vertices reached from every vertex to their left and reaching every vertex to their right."""
    if margin < 1:
        raise ValueError("margin must be >= 1")
    mask = K.skeleton_mask(window.v, margin, False)
    return [window.lo + int(i) for i in np.flatnonzero(mask)]


def detect_skeleton_plus(window: WeightWindow, margin: int) -> list[int]:
    """As :func:`detect_skeleton` with paths restricted to strictly positive edges."""
    if margin < 1:
        raise ValueError("margin must be >= 1")
    mask = K.skeleton_mask(window.v, margin, True)
    return [window.lo + int(i) for i in np.flatnonzero(mask)]


def check_events(window: WeightWindow, x: int, config: RenewalConfig) -> EventRecord:
    if not (window.lo + config.margin <= x <= window.hi - config.margin):
        raise MarginViolation(
            f"vertex {x} is closer than margin {config.margin} to the window boundary"
        )
    flags = K.event_flags(window.v, x - window.lo, config.horizon, config.c1, config.c2)
    return EventRecord(*map(bool, flags))


def _renewal_masks(window: WeightWindow, config: RenewalConfig):
    if window.size <= 2 * config.margin:
        z = np.zeros(window.size, dtype=bool)
        return z, z
    return K.renewal_masks(window.v, config.margin, config.horizon, config.c1, config.c2)


def detect_renewal(window: WeightWindow, config: RenewalConfig) -> list[int]:
    ren, _ = _renewal_masks(window, config)
    return [window.lo + int(i) for i in np.flatnonzero(ren)]


def detect_renewal_plus(window: WeightWindow, config: RenewalConfig) -> list[int]:
    _, renp = _renewal_masks(window, config)
    return [window.lo + int(i) for i in np.flatnonzero(renp)]


def detect_all(window: WeightWindow, config: RenewalConfig) -> RegenerationReport:
    ren, renp = _renewal_masks(window, config)
    return RegenerationReport(
        skeleton=detect_skeleton(window, config.margin),
        skeleton_plus=detect_skeleton_plus(window, config.margin),
        renewal=[window.lo + int(i) for i in np.flatnonzero(ren)],
        renewal_plus=[window.lo + int(i) for i in np.flatnonzero(renp)],
        truncation_note={"horizon": config.horizon, "margin": config.margin},
    )


# -- cycles ------------------------------------------------------------------


def extract_cycles(window: WeightWindow, renewal_list) -> list[CycleSample]:
    """Cycles between consecutive renewal vertices.

    Marks are ``w_{G, G+i}`` for ``i = 1..tau`` with ``G`` the cycle start.
    The cycle starting at the first listed vertex is flagged ``is_first``.
    """
    pts = list(renewal_list)
    if len(pts) < 2:
        return []
    out = []
    for k, (a, b) in enumerate(zip(pts[:-1], pts[1:])):
        w = K.forward_max(window.v, window.idx(a), window.idx(b), False)
        out.append(CycleSample(b - a, tuple(float(x) for x in w[1:]), k == 0, a))
    return out


def cycles_started_before(cycles, cutoff: int) -> list[CycleSample]:
    """Cycles whose start vertex lies below ``cutoff``.

    Selection by start alone keeps the kept cycles a stopping-time sample of
    the cycle sequence.  Keeping every cycle that completes inside a window
    drops the one straddling the window end, which favours short cycles and
    biases ``sum(zeta) / sum(tau)`` upward when short cycles have larger
    ``zeta / tau``.
    """
    return [c for c in cycles if c.start < cutoff]


def cycles_table(cycles, include_first: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """``(tau, zeta)`` arrays, skipping first cycles unless asked."""
    sel = [c for c in cycles if include_first or not c.is_first]
    tau = np.array([c.tau for c in sel], dtype=float)
    zeta = np.array([c.zeta for c in sel], dtype=float)
    return tau, zeta


def cycles_to_csv(cycles_by_replica) -> str:
    """``replica,k,is_first,tau,zeta,marks`` with marks joined by ``;``."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["replica", "k", "is_first", "tau", "zeta", "marks"])
    for replica, cycles in cycles_by_replica:
        for k, c in enumerate(cycles):
            wr.writerow(
                [replica, k, int(c.is_first), c.tau, repr(c.zeta), ";".join(map(repr, c.marks))]
            )
    return buf.getvalue()


def cycles_from_csv(text: str) -> list[tuple[int, CycleSample]]:
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        marks = tuple(float(x) for x in r["marks"].split(";"))
        out.append((int(r["replica"]), CycleSample(int(r["tau"]), marks, r["is_first"] == "1")))
    return out


# -- admissible constants ------------------------------------------------------


@dataclass
class AdmissibleInterval:
    low: float
    high: float
    se_low: float
    se_high: float
    gamma_plus: float
    V: float
    ess_inf: float
    n_gaps: int
    extra: dict = field(default_factory=dict)

    def default_constants(self) -> tuple[float, float]:
        """``(c1, c2)`` at 60% and 30% of the way from ``low`` to ``high``."""
        span = self.high - self.low
        return self.low + 0.6 * span, self.low + 0.3 * span

    def contains(self, c1: float, c2: float) -> bool:
        return self.low < c2 <= c1 < self.high


def _gap_statistics(window: WeightWindow, margin: int):
    pts = detect_skeleton_plus(window, margin)
    gaps, mins = [], []
    for a, b in zip(pts[:-1], pts[1:]):
        ia, ib = window.idx(a), window.idx(b)
        block = window.v[ia : ib + 1, ia : ib + 1]
        iu = np.triu_indices(ib - ia + 1, k=1)
        vals = block[iu]
        vals = vals[vals > 0]
        gaps.append(b - a)
        mins.append(float(vals.min()))
    return gaps, mins


def estimate_admissible_interval(
    model: WeightModel,
    window: int = 400,
    replicas: int = 50,
    margin: int = 20,
    rngs=None,
    seed: int = 0,
) -> AdmissibleInterval:
    """Monte Carlo estimate of ``(gamma+ essinf v+, gamma+ V)``.

    ``gamma+`` is the reciprocal mean gap between consecutive skeleton-plus
    vertices and ``V`` the mean, over those gaps, of the smallest positive
    edge weight spanned by the gap.  Standard errors treat gaps as i.i.d.
    """
    if rngs is None:
        from .seeding import replica_rng

        rngs = [replica_rng(seed, "interval", r) for r in range(replicas)]
    gaps, mins = [], []
    for rng in rngs:
        w = sample_window(model, 0, window, rng)
        g, m = _gap_statistics(w, margin)
        gaps += g
        mins += m
    if len(gaps) < 2:
        raise EstimationFailure(
            "no skeleton-plus gaps found; p+ may be too small for the window size"
        )
    g = np.array(gaps, dtype=float)
    m = np.array(mins)
    N = len(g)
    ess_inf = model.ess_inf_plus()
    gbar, mbar = g.mean(), m.mean()
    gamma = 1.0 / gbar
    high = mbar / gbar
    se_gamma = gamma**2 * g.std(ddof=1) / math.sqrt(N)
    se_high = np.std(m - high * g, ddof=1) / (gbar * math.sqrt(N))
    return AdmissibleInterval(
        low=float(gamma * ess_inf),
        high=float(high),
        se_low=float(ess_inf * se_gamma),
        se_high=float(se_high),
        gamma_plus=float(gamma),
        V=float(mbar),
        ess_inf=ess_inf,
        n_gaps=N,
    )


# -- oracle check ----------------------------------------------------------------


def verify_renewal_path_inclusion(window: WeightWindow, renewal_list) -> dict:
    """Every brute-force argmax path between the two sides of a renewal vertex visits it."""
    if window.hi - window.lo > 14:
        raise ValueError("window too large for the enumeration oracle (hi - lo <= 14)")
    violations = []
    checked = 0
    for x in renewal_list:
        for a in range(window.lo, x):
            for b in range(x + 1, window.hi + 1):
                weight, paths, _ = brute_force_max_weight(window, a, b)
                checked += 1
                for p in paths:
                    if x not in p.vertices:
                        violations.append({"x": x, "from": a, "to": b, "path": p.vertices})
    return {"pass": not violations, "pairs_checked": checked, "violations": violations}
