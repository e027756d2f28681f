"""Compound renewal process built from regeneration cycles.

Covers cycle moments, cumulant generating functions ``A(lam, mu) = ln E
exp(lam*tau + mu*zeta)``, the rate function ``D``, the two-dimensional
Legendre transform behind the integro-local asymptotics, size-biased star
vectors and forward simulation of the process with its defect functionals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .regeneration import CycleSample, cycles_table

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
ROOT_TOL = 1e-10


class InsufficientData(ValueError):
    pass


class CgfError(ValueError):
    code = "cgf"


class CgfDomainError(CgfError):
    code = "domain"


class CgfEssError(CgfError):
    code = "ess"


class ConvergenceError(RuntimeError):
    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


# -- moments -----------------------------------------------------------------


@dataclass(frozen=True)
class CrpSummary:
    a_hat: float
    sigma2_hat: float
    e_tau: float
    e_zeta: float
    n_cycles: int
    se_a: float
    se_sigma2: float
    se_e_tau: float
    se_e_zeta: float

    @property
    def sigma_hat(self) -> float:
        return math.sqrt(self.sigma2_hat)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _ratio_stats(St, Sz, Stt, Stz, Szz, N):
    a = Sz / St
    s2 = (Szz - 2 * a * Stz + a * a * Stt) / St
    return a, s2


def estimate_moments_arrays(tau, zeta) -> CrpSummary:
    """Moments from paired ``(tau, zeta)`` arrays with leave-one-out jackknife SEs."""
    t = np.asarray(tau, dtype=float)
    z = np.asarray(zeta, dtype=float)
    N = t.size
    if N < 2:
        raise InsufficientData(f"need at least 2 cycles, got {N}")
    St, Sz = t.sum(), z.sum()
    Stt, Stz, Szz = (t * t).sum(), (t * z).sum(), (z * z).sum()
    a, s2 = _ratio_stats(St, Sz, Stt, Stz, Szz, N)
    # leave-one-out replicates from the running sums
    aj, s2j = _ratio_stats(St - t, Sz - z, Stt - t * t, Stz - t * z, Szz - z * z, N - 1)

    def jack(rep):
        return float(math.sqrt((N - 1) / N * np.sum((rep - rep.mean()) ** 2)))

    return CrpSummary(
        a_hat=float(a),
        sigma2_hat=float(max(s2, 0.0)),
        e_tau=float(St / N),
        e_zeta=float(Sz / N),
        n_cycles=N,
        se_a=jack(aj),
        se_sigma2=jack(s2j),
        se_e_tau=float(t.std(ddof=1) / math.sqrt(N)),
        se_e_zeta=float(z.std(ddof=1) / math.sqrt(N)),
    )


def estimate_moments(cycles) -> CrpSummary:
    """Moments of ``(tau, zeta)`` over the non-first cycles."""
    cycles = list(cycles)
    tau, zeta = cycles_table(cycles)
    if cycles and tau.size == 0:
        raise InsufficientData("every cycle is flagged is_first")
    return estimate_moments_arrays(tau, zeta)


# -- cumulant generating functions ---------------------------------------------


Domain = tuple[float, float, float, float]
FULL_DOMAIN: Domain = (-math.inf, math.inf, -math.inf, math.inf)


@dataclass(frozen=True)
class CgfModel:
    """Base class. ``domain = (lam_lo, lam_hi, mu_lo, mu_hi)``, closed."""

    domain: Domain = field(default=FULL_DOMAIN, kw_only=True)

    def check_domain(self, lam, mu):
        l0, l1, m0, m1 = self.domain
        if not (l0 <= lam <= l1 and m0 <= mu <= m1):
            raise CgfDomainError(f"({lam}, {mu}) outside declared domain {self.domain}")

    def __call__(self, lam: float, mu: float) -> float:
        self.check_domain(lam, mu)
        return self._value(lam, mu)

    def _value(self, lam, mu):
        raise NotImplementedError

    def grad(self, lam, mu) -> np.ndarray:
        h1, h2 = 1e-5 * max(1.0, abs(lam)), 1e-5 * max(1.0, abs(mu))
        return np.array(
            [
                (self(lam + h1, mu) - self(lam - h1, mu)) / (2 * h1),
                (self(lam, mu + h2) - self(lam, mu - h2)) / (2 * h2),
            ]
        )

    def hessian(self, lam, mu) -> np.ndarray:
        """Central differences with relative step 1e-4."""
        h1, h2 = 1e-4 * max(1.0, abs(lam)), 1e-4 * max(1.0, abs(mu))
        f = self
        f0 = f(lam, mu)
        a = (f(lam + h1, mu) - 2 * f0 + f(lam - h1, mu)) / h1**2
        c = (f(lam, mu + h2) - 2 * f0 + f(lam, mu - h2)) / h2**2
        b = (
            f(lam + h1, mu + h2) - f(lam + h1, mu - h2) - f(lam - h1, mu + h2) + f(lam - h1, mu - h2)
        ) / (4 * h1 * h2)
        return np.array([[a, b], [b, c]])


@dataclass(frozen=True)
class DegenerateCgf(CgfModel):
    """``(tau, zeta) = (t, c)`` almost surely."""

    t: float = 1.0
    c: float = 1.0

    def _value(self, lam, mu):
        return lam * self.t + mu * self.c

    def grad(self, lam, mu):
        self.check_domain(lam, mu)
        return np.array([self.t, self.c], dtype=float)

    def hessian(self, lam, mu):
        self.check_domain(lam, mu)
        return np.zeros((2, 2))


@dataclass(frozen=True)
class GaussianMarkCgf(CgfModel):
    """``tau = 1`` and ``zeta ~ Normal(m, s^2)``."""

    m: float = 0.0
    s: float = 1.0

    def _value(self, lam, mu):
        return lam + mu * self.m + 0.5 * mu * mu * self.s**2

    def grad(self, lam, mu):
        self.check_domain(lam, mu)
        return np.array([1.0, self.m + mu * self.s**2])

    def hessian(self, lam, mu):
        self.check_domain(lam, mu)
        return np.array([[0.0, 0.0], [0.0, self.s**2]])


@dataclass(frozen=True)
class NormalPairCgf(CgfModel):
    """Independent ``tau ~ N(m1, s1^2)`` and ``zeta ~ N(m2, s2^2)``.

    Not a cycle law (tau is not integer); a closed-form control for the
    two-dimensional transform.
    """

    m1: float = 1.0
    s1: float = 1.0
    m2: float = 0.0
    s2: float = 1.0

    def _value(self, lam, mu):
        return lam * self.m1 + 0.5 * (lam * self.s1) ** 2 + mu * self.m2 + 0.5 * (mu * self.s2) ** 2

    def grad(self, lam, mu):
        self.check_domain(lam, mu)
        return np.array([self.m1 + lam * self.s1**2, self.m2 + mu * self.s2**2])

    def hessian(self, lam, mu):
        self.check_domain(lam, mu)
        return np.diag([self.s1**2, self.s2**2])

    def legendre(self, theta, alpha) -> float:
        return (theta - self.m1) ** 2 / (2 * self.s1**2) + (alpha - self.m2) ** 2 / (2 * self.s2**2)


def _logsumexp_weighted(e, weights):
    m = e.max()
    return m + math.log(float(np.dot(weights, np.exp(e - m))))


@dataclass(frozen=True)
class DiscreteCgf(CgfModel):
    """Exact CGF of a finitely supported ``(tau, zeta)`` law."""

    tau: tuple = ()
    zeta: tuple = ()
    probs: tuple = ()

    def __post_init__(self):
        if not (len(self.tau) == len(self.zeta) == len(self.probs) > 0):
            raise ValueError("tau, zeta and probs must be non-empty and of equal length")
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")

    def _arrays(self):
        return np.asarray(self.tau, float), np.asarray(self.zeta, float), np.asarray(self.probs, float)

    def _value(self, lam, mu):
        t, z, p = self._arrays()
        return _logsumexp_weighted(lam * t + mu * z, p)

    def mean(self) -> tuple[float, float]:
        t, z, p = self._arrays()
        return float(p @ t), float(p @ z)


class EmpiricalCgf(CgfModel):
    """CGF of the empirical law of a cycle sample.

    Repeated ``(tau, zeta)`` pairs are merged with multiplicities, which
    changes nothing numerically but speeds up arithmetic samples a lot.
    Every evaluation checks the effective sample size
    ``(sum w)^2 / sum w^2`` of the tilting weights ``w = exp(lam*tau +
    mu*zeta)`` against ``ess_floor``.
    """

    def __init__(self, tau, zeta, ess_floor: float = 100.0, domain: Domain = FULL_DOMAIN):
        object.__setattr__(self, "domain", domain)
        t = np.asarray(tau, dtype=float)
        z = np.asarray(zeta, dtype=float)
        if t.size == 0 or t.size != z.size:
            raise InsufficientData("need a non-empty sample of paired (tau, zeta)")
        pairs, counts = np.unique(np.column_stack([t, z]), axis=0, return_counts=True)
        self.t = np.ascontiguousarray(pairs[:, 0])
        self.z = np.ascontiguousarray(pairs[:, 1])
        self.counts = counts.astype(float)
        self.n = int(t.size)
        self.ess_floor = float(ess_floor)

    @classmethod
    def from_cycles(cls, cycles, **kw) -> "EmpiricalCgf":
        tau, zeta = cycles_table(list(cycles))
        return cls(tau, zeta, **kw)

    def _weights(self, lam, mu):
        e = lam * self.t + mu * self.z
        w = self.counts * np.exp(e - e.max())
        return e.max(), w

    def ess(self, lam, mu) -> float:
        _, w = self._weights(lam, mu)
        return float(w.sum() ** 2 / (self.counts @ (w / self.counts) ** 2))

    def _value(self, lam, mu):
        m, w = self._weights(lam, mu)
        s = w.sum()
        ess = s * s / float(self.counts @ (w / self.counts) ** 2)
        if ess < self.ess_floor:
            raise CgfEssError(
                f"effective sample size {ess:.1f} below floor {self.ess_floor} at ({lam}, {mu})"
            )
        return m + math.log(s / self.n)

    def grad(self, lam, mu):
        self(lam, mu)
        _, w = self._weights(lam, mu)
        w = w / w.sum()
        return np.array([w @ self.t, w @ self.z])

    def __repr__(self):
        return f"EmpiricalCgf(n={self.n}, distinct={self.t.size}, ess_floor={self.ess_floor})"


def cgf_eval(model: CgfModel, lam: float, mu: float) -> float:
    return model(lam, mu)


# -- rate function --------------------------------------------------------------


@dataclass(frozen=True)
class RatePoint:
    alpha: float
    D: float
    lam: float
    mu: float
    flag: str = "ok"


def root_lambda(model: CgfModel, mu: float, tol: float = ROOT_TOL) -> float:
    """The root in ``lam`` of ``A(lam, mu) = 0`` by bracketed bisection.

    The search starts on the line ``lam = -mu * E zeta / E tau`` through the
    root at ``mu = 0``, which keeps exponential tilts small.  A tangent step
    from there lands right of the root (A is convex); with ``dA/dlam >= 1``
    stepping left by the value found there brackets it.  Brackets that fail
    to straddle the root are doubled outwards.
    """
    g0 = model.grad(0.0, 0.0)
    start = -mu * g0[1] / g0[0] if g0[0] > 0 else 0.0
    fs = model(start, mu)
    if abs(fs) <= tol:
        return start
    slope = float(model.grad(start, mu)[0])
    guess = start - fs / slope if slope > 0 else start
    fg = model(guess, mu)
    if abs(fg) <= tol:
        return guess
    step = max(abs(fg), 1e-12)
    if fg > 0:
        hi, lo = guess, guess - step
        while model(lo, mu) > 0:
            step *= 2
            lo = guess - step
    else:
        lo, hi = guess, guess + step
        while model(hi, mu) < 0:
            step *= 2
            hi = guess + step
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        f = model(mid, mu)
        if abs(f) <= tol:
            return mid
        if f < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
    mid = 0.5 * (lo + hi)
    if abs(model(mid, mu)) > tol:
        raise ConvergenceError(f"bisection stalled at mu={mu}", mid)
    return mid


def rate_function(
    model: CgfModel,
    alpha: float,
    h0: float = 1e-2,
    mu_tol: float = 1e-9,
    mu_max: float = 1e4,
) -> RatePoint:
    """``D(alpha) = sup {lam + mu*alpha : A(lam, mu) <= 0}``.

    Maximizes ``g(mu) = lam0(mu) + mu*alpha`` (concave) by golden section on
    a bracket found by doubling away from ``mu = 0``.  If the search leaves
    the CGF domain the best value seen is returned with flag ``boundary``
    (a lower bound on D); if ``g`` is still increasing at ``|mu| = mu_max``
    the flag is ``unbounded`` and D is ``inf``.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")

    cache: dict[float, float] = {}

    def g(mu):
        if mu not in cache:
            cache[mu] = root_lambda(model, mu) + mu * alpha
        return cache[mu]

    def best_seen(flag):
        mu = max(cache, key=cache.get)
        return RatePoint(alpha, float(cache[mu]), float(cache[mu] - mu * alpha), float(mu), flag)

    g0 = g(0.0)
    try:
        gp, gm = g(h0), g(-h0)
    except CgfError:
        return best_seen("boundary")
    if gp > g0:
        sign = 1.0
    elif gm > g0:
        sign = -1.0
    else:
        sign = 0.0

    if sign == 0.0:
        a, b = -h0, h0
    else:
        pts = [0.0, sign * h0]
        step = sign * h0
        while True:
            if abs(pts[-1]) > mu_max:
                return RatePoint(alpha, math.inf, math.nan, math.nan, "unbounded")
            nxt = pts[-1] + step
            try:
                down = g(nxt) <= g(pts[-1])
            except CgfError:
                # back off towards the last valid point before giving up
                step /= 2
                if abs(step) < 1e-3 * h0:
                    return best_seen("boundary")
                continue
            pts.append(nxt)
            if down:
                break
            step *= 2
        a, b = sorted((pts[-3], pts[-1]))

    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    while b - a > mu_tol * max(1.0, abs(a) + abs(b)):
        if g(x1) < g(x2):
            a, x1 = x1, x2
            x2 = a + GOLDEN * (b - a)
        else:
            b, x2 = x2, x1
            x1 = b - GOLDEN * (b - a)
    mu = 0.5 * (a + b)
    val = g(mu)
    mu_best = max(cache, key=cache.get)
    if cache[mu_best] > val:
        mu, val = mu_best, cache[mu_best]
    return RatePoint(alpha, float(val), float(val - mu * alpha), float(mu))


def rate_table(model: CgfModel, alphas) -> list[RatePoint]:
    return [rate_function(model, float(a)) for a in alphas]


def rate_table_csv(points) -> str:
    lines = ["alpha,D,lambda_star,mu_star,flag"]
    for p in points:
        lines.append(f"{p.alpha!r},{p.D!r},{p.lam!r},{p.mu!r},{p.flag}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class CurvatureReport:
    a_hat: float
    step: float
    D_at_a: float
    D_prime: float
    D_second: float
    sigma2_hat: float
    deviation: float
    flag: str

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def rate_curvature_check(model: CgfModel, summary: CrpSummary, rel_step: float = 0.02) -> CurvatureReport:
    """Finite-difference ``D(a), D'(a), D''(a)`` at ``a_hat`` and ``|D'' * sigma2 - 1|``."""
    a = summary.a_hat
    h = rel_step * a
    pts = [rate_function(model, x) for x in (a - h, a, a + h)]
    flags = {p.flag for p in pts}
    if summary.sigma2_hat <= 1e-14 or any(not math.isfinite(p.D) for p in pts):
        return CurvatureReport(a, h, float(pts[1].D), math.nan, math.inf, summary.sigma2_hat, math.inf, "divergent")
    d1 = (pts[2].D - pts[0].D) / (2 * h)
    d2 = (pts[2].D - 2 * pts[1].D + pts[0].D) / h**2
    flag = "ok" if flags == {"ok"} else "boundary"
    return CurvatureReport(
        a, h, float(pts[1].D), float(d1), float(d2), summary.sigma2_hat, float(abs(d2 * summary.sigma2_hat - 1)), flag
    )


# -- Legendre transform in two variables ------------------------------------------


@dataclass(frozen=True)
class StoneResult:
    Lambda: float
    det_inv: float
    lam: float
    mu: float
    iterations: int


def stone_quantities(
    model: CgfModel, theta: float, alpha: float, tol: float = 1e-10, max_iter: int = 100
) -> StoneResult:
    """``Lambda(theta, alpha) = sup {lam*theta + mu*alpha - A}`` and ``|Lambda''| = 1/det A''``.

    Damped Newton on ``grad A = (theta, alpha)`` with step halving whenever
    the objective fails to increase or the iterate leaves the domain.
    """
    target = np.array([theta, alpha], dtype=float)
    x = np.zeros(2)

    def objective(p):
        return p @ target - model(p[0], p[1])

    f = objective(x)
    for it in range(1, max_iter + 1):
        r = target - model.grad(*x)
        if np.max(np.abs(r)) <= tol:
            H = model.hessian(*x)
            return StoneResult(float(f), float(1.0 / np.linalg.det(H)), float(x[0]), float(x[1]), it - 1)
        H = model.hessian(*x)
        try:
            step = np.linalg.solve(H, r)
        except np.linalg.LinAlgError:
            raise ConvergenceError("singular Hessian", x.copy()) from None
        t = 1.0
        while True:
            cand = x + t * step
            try:
                fc = objective(cand)
                if fc >= f - 1e-14 * max(1.0, abs(f)):
                    break
            except CgfError:
                pass
            t *= 0.5
            if t < 1e-12:
                raise ConvergenceError("line search failed", x.copy())
        x, f = cand, fc
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations", x.copy())


# -- star vector -------------------------------------------------------------------


def _usable(cycles) -> list[CycleSample]:
    sel = [c for c in cycles if not c.is_first]
    if not sel:
        raise InsufficientData("need at least one non-first cycle")
    return sel


def star_law(cycles) -> dict:
    """Exact law of ``(tau*, zeta*)`` under the empirical cycle measure."""
    sel = _usable(cycles)
    Q = sum(c.tau for c in sel)
    law: dict = {}
    for c in sel:
        marks = (0.0,) + tuple(c.marks)
        for i in range(c.tau):
            key = (i, marks[i])
            law[key] = law.get(key, 0.0) + 1.0 / Q
    return law


def sample_star_vector(cycles, rng: np.random.Generator) -> tuple[int, float]:
    """Size-biased cycle, then a uniform slot ``i`` in ``0..tau-1``; returns ``(i, u_i)``, ``u_0 = 0``."""
    sel = _usable(cycles)
    taus = np.array([c.tau for c in sel], dtype=float)
    k = int(rng.choice(len(sel), p=taus / taus.sum()))
    i = int(rng.integers(sel[k].tau))
    return i, 0.0 if i == 0 else float(sel[k].marks[i - 1])


# -- cycle laws and simulation -----------------------------------------------------


@dataclass(frozen=True)
class CycleLaw:
    """Finite law over mark vectors; ``tau`` is the vector length."""

    marks: tuple[tuple[float, ...], ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.marks) != len(self.probs) or not self.marks:
            raise ValueError("marks and probs must be non-empty and of equal length")
        if any(len(m) == 0 for m in self.marks):
            raise ValueError("every mark vector needs tau >= 1")
        if abs(sum(self.probs) - 1.0) > 1e-12 or min(self.probs) < 0:
            raise ValueError("probs must be a probability vector")

    @classmethod
    def from_cycles(cls, cycles) -> "CycleLaw":
        sel = _usable(cycles)
        return cls(tuple(tuple(c.marks) for c in sel), tuple([1.0 / len(sel)] * len(sel)))

    @property
    def taus(self) -> np.ndarray:
        return np.array([len(m) for m in self.marks])

    @property
    def zetas(self) -> np.ndarray:
        return np.array([m[-1] for m in self.marks], dtype=float)

    @property
    def mean_tau(self) -> float:
        return float(np.dot(self.probs, self.taus))

    def star_law(self) -> dict:
        """``P(tau* = i, zeta* = y) = P(tau >= i+1, u_i = y) / E tau``."""
        Q = self.mean_tau
        law: dict = {}
        for m, p in zip(self.marks, self.probs):
            padded = (0.0,) + tuple(m)
            for i in range(len(m)):
                key = (i, padded[i])
                law[key] = law.get(key, 0.0) + p / Q
        return law

    def cgf(self, **kw) -> DiscreteCgf:
        return DiscreteCgf(tuple(self.taus.tolist()), tuple(self.zetas.tolist()), tuple(self.probs), **kw)

    def _packed(self):
        tmax = int(self.taus.max())
        M = np.zeros((len(self.marks), tmax + 1))
        for r, m in enumerate(self.marks):
            M[r, 1 : len(m) + 1] = m
        return np.cumsum(self.probs), self.taus.astype(np.int64), M


def crp_functionals(T, Z, n: int) -> tuple[int, int, float]:
    """``(nu_+(n), gamma_+(n), Z_+(n))`` from partial sums with ``T[0] = 0``.

    ``nu_+(n) = max {k : T_k <= n}`` and ``gamma_+(n) = n - T_{nu_+(n)}`` is
    the time since the last renewal epoch not after ``n``.
    """
    k = int(np.searchsorted(np.asarray(T), n, side="right") - 1)
    return k, int(n - T[k]), float(Z[k])


@dataclass(frozen=True)
class CrpPath:
    """Partial sums ``T_0 = 0, T_1, ...`` until the first ``T_k > n + 1``.

    ``w_term`` is the partial mark ``u_{gamma}`` of the cycle straddling
    ``n`` (0 when a renewal falls on ``n``).
    """

    n: int
    T: np.ndarray
    Z: np.ndarray
    straddle_marks: tuple[float, ...]
    star: tuple[int, float] | None = None

    def nu_plus(self, m: int | None = None) -> int:
        return crp_functionals(self.T, self.Z, self.n if m is None else m)[0]

    def gamma_plus(self, m: int | None = None) -> int:
        return crp_functionals(self.T, self.Z, self.n if m is None else m)[1]

    def z_plus(self, m: int | None = None) -> float:
        return crp_functionals(self.T, self.Z, self.n if m is None else m)[2]

    def nu(self, m: int) -> int:
        """``max {k : T_k < m}``."""
        return int(np.searchsorted(self.T, m, side="left") - 1)

    def gamma(self, m: int) -> int:
        return int(m - self.T[self.nu(m)])

    def z(self, m: int) -> float:
        return float(self.Z[self.nu(m)])

    @property
    def tau1(self) -> int:
        return int(self.T[1] - self.T[0])

    @property
    def w_term(self) -> float:
        g = self.gamma_plus()
        return 0.0 if g == 0 else float(self.straddle_marks[g - 1])


def simulate_crp(law, n: int, variant: str = "plain", rng=None, first_law: CycleLaw | None = None) -> CrpPath:
    """One path of the process driven by ``law`` (a :class:`CycleLaw` or cycle list).

    ``first_law`` governs ``(tau_1, zeta_1)`` (defaults to ``law``); the
    ``star`` variant adds an independent star vector to the first increment.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if variant not in ("plain", "star"):
        raise ValueError(f"unknown variant {variant!r}")
    if not isinstance(law, CycleLaw):
        law = CycleLaw.from_cycles(law)
    first_law = first_law or law
    rng = rng if rng is not None else np.random.default_rng()
    star = None
    if variant == "star":
        keys = list(law.star_law().items())
        j = int(rng.choice(len(keys), p=np.array([p for _, p in keys])))
        star = (int(keys[j][0][0]), float(keys[j][0][1]))
    T, Z = [0], [0.0]
    marks = ()
    k = 0
    while T[-1] <= n + 1:
        src = first_law if k == 0 else law
        m = src.marks[int(rng.choice(len(src.marks), p=np.asarray(src.probs)))]
        dt, dz = len(m), m[-1]
        if k == 0 and star is not None:
            dt, dz = dt + star[0], dz + star[1]
        if T[-1] <= n < T[-1] + dt:
            marks = tuple(m)
        T.append(T[-1] + dt)
        Z.append(Z[-1] + dz)
        k += 1
    return CrpPath(n, np.array(T), np.array(Z), marks, star)


@njit(cache=True)
def _crp_batch(u, n, cum, taus, M, cum1, taus1, M1, star_cum, star_i, star_y, use_star):
    R = u.shape[0]
    out_z = np.empty(R)
    out_w = np.empty(R)
    out_g = np.empty(R, dtype=np.int64)
    out_nu = np.empty(R, dtype=np.int64)
    out_t1 = np.empty(R, dtype=np.int64)
    for r in range(R):
        col = 0
        si, sy = 0, 0.0
        if use_star:
            x = u[r, col]
            col += 1
            j = 0
            while j < star_cum.shape[0] - 1 and star_cum[j] <= x:
                j += 1
            si, sy = star_i[j], star_y[j]
        T, Z = 0, 0.0
        k = 0
        w = 0.0
        while True:
            x = u[r, col]
            col += 1
            if k == 0:
                j = 0
                while j < cum1.shape[0] - 1 and cum1[j] <= x:
                    j += 1
                dt, dz = taus1[j] + si, M1[j, taus1[j]] + sy
                out_t1[r] = dt
            else:
                j = 0
                while j < cum.shape[0] - 1 and cum[j] <= x:
                    j += 1
                dt, dz = taus[j], M[j, taus[j]]
            if T + dt > n:
                g = n - T
                if g > 0:
                    w = M1[j, g] if k == 0 else M[j, g]
                    if k == 0 and use_star:
                        w = np.nan  # the straddling increment is not a plain cycle
                out_g[r] = g
                break
            T += dt
            Z += dz
            k += 1
        out_z[r] = Z
        out_w[r] = w
        out_nu[r] = k
    return out_z, out_w, out_g, out_nu, out_t1


@dataclass(frozen=True)
class CrpBatch:
    z_plus: np.ndarray
    w_term: np.ndarray
    gamma_plus: np.ndarray
    nu_plus: np.ndarray
    tau1: np.ndarray


def simulate_crp_batch(
    law: CycleLaw, n: int, rng: np.random.Generator, size: int, variant: str = "plain",
    first_law: CycleLaw | None = None, chunk: int = 100_000,
) -> CrpBatch:
    """Vectorized :func:`simulate_crp` functionals at ``n`` for ``size`` paths."""
    first_law = first_law or law
    cum, taus, M = law._packed()
    cum1, taus1, M1 = first_law._packed()
    items = sorted(law.star_law().items())
    star_cum = np.cumsum([p for _, p in items])
    star_i = np.array([k[0] for k, _ in items], dtype=np.int64)
    star_y = np.array([k[1] for k, _ in items], dtype=float)
    use_star = variant == "star"
    width = n + 2 + int(use_star)
    parts = []
    for start in range(0, size, chunk):
        m = min(chunk, size - start)
        u = rng.random((m, width))
        parts.append(_crp_batch(u, n, cum, taus, M, cum1, taus1, M1, star_cum, star_i, star_y, use_star))
    cat = [np.concatenate([p[i] for p in parts]) for i in range(5)]
    return CrpBatch(*cat)


def renewal_identity_sides(batch_plain: CrpBatch, batch_star: CrpBatch, n: int, x: float, delta: float, Q: float):
    """Monte Carlo estimates and SEs of both sides of the renewal identity at ``x``.

    Left: ``P(Z_+(n) + w_term in [x, x+delta), tau_1 <= n)``.
    Right: ``Q * P(Z*_+(n) in [x, x+delta), gamma*_+(n) = 0)``.
    """
    s = batch_plain.z_plus + batch_plain.w_term
    left = (s >= x) & (s < x + delta) & (batch_plain.tau1 <= n)
    zs = batch_star.z_plus
    right = (zs >= x) & (zs < x + delta) & (batch_star.gamma_plus == 0)
    pl, pr = left.mean(), right.mean()
    se_l = math.sqrt(pl * (1 - pl) / left.size)
    se_r = Q * math.sqrt(pr * (1 - pr) / right.size)
    return float(pl), se_l, float(Q * pr), se_r


def renewal_identity_exact(law: CycleLaw, n: int, x: int, first_law: CycleLaw | None = None):
    """Both sides of the renewal identity by exact convolution (integer marks, delta = 1)."""
    first_law = first_law or law
    zmax = int(sum(max(m[-1] for m in L.marks) for L in (law, first_law)) * (n + 2)) + 2

    def step(dist, L):
        out = np.zeros_like(dist)
        for m, p in zip(L.marks, L.probs):
            t, z = len(m), int(round(m[-1]))
            out[t:, z:] += p * dist[: n + 1 - t, : zmax - z]
        return out

    def renewals_at(first_dist):
        # P(T_k = t, Z_k = z) summed over k >= 1
        total = np.zeros((n + 1, zmax))
        cur = first_dist
        while cur.any():
            total += cur
            cur = step(cur, law)
        return total

    delta0 = np.zeros((n + 1, zmax))
    delta0[0, 0] = 1.0
    H = renewals_at(step(delta0, first_law))

    left = H[n, x] if 0 <= x < zmax else 0.0
    for m, p in zip(law.marks, law.probs):
        for i in range(1, min(len(m), n + 1)):
            if len(m) >= i + 1:
                y = int(round(m[i - 1]))
                if 0 <= x - y < zmax:
                    left += p * H[n - i, x - y]

    star = np.zeros((n + 1, zmax))
    for (i, y), p in law.star_law().items():
        if i <= n:
            star[i, int(round(y))] += p
    Hs = renewals_at(step(star, first_law))
    right = law.mean_tau * Hs[n, x]
    return float(left), float(right)
