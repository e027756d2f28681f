"""Acceptance criteria 1 to 10 at full scale, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline;
they are printed with capture disabled, so they also appear without ``-s``.
"""

import json
import math
import time

import numpy as np
import pytest

from lastpassage.cli import main
from lastpassage.crp import (
    CycleLaw,
    GaussianMarkCgf,
    rate_curvature_check,
    rate_function,
    renewal_identity_exact,
    renewal_identity_sides,
    simulate_crp_batch,
)
from lastpassage.harness import (
    pilot_phase,
    resolve_renewals,
    run_decomposition_audit,
    run_integro_local,
    run_invariance,
    run_lln_clt,
    run_local_limit,
    run_oracle,
)
from lastpassage.io_config import parse_config

ARITH = {"kind": "arithmetic", "neg_inf_prob": 0.1, "table": [[1, 0.45], [2, 0.45]]}
UNIF = {"kind": "nonlattice", "neg_inf_prob": 0.1, "family": "uniform", "params": {"lo": -0.5, "hi": 1.5}}
ARITH_RENEWAL = {"c1": 1.0085, "c2": 0.9007, "second": {"c1": 1.09, "c2": 1.09}}
UNIF_RENEWAL = {"c1": 0.4, "c2": 0.4}
PILOT = {"pilot_windows": 2000, "pilot_length": 2000}
UNIF_PILOT = {"pilot_windows": 2000, "pilot_length": 2000}

ORACLE_WINDOWS, ORACLE_SPAN, ORACLE_SECONDS = 1000, 12, 60.0
AUDIT_WINDOWS, AUDIT_LENGTH, AUDIT_PAIRED, AUDIT_SECONDS = 10_000, 400, 1000, 300.0
MIN_CYCLES = 100_000
D_MAX, D_PRIME_MAX, CURVATURE_TOL, CLOSED_FORM_TOL = 1e-3, 1e-2, 0.1, 1e-8
LLT_N, LLT_R, CENTER_TOL, CELL_TOL, CELL_FRACTION = 200, 100_000, 0.10, 0.20, 0.90
INVARIANCE_SE = 3.0
CRP_N, CRP_PATHS, CRP_SE, CRP_X = 30, 10**6, 4.0, (37, 39, 41, 43, 45)
CLT_N, CLT_R, KS_MAX, SLOPE_SE = 500, 10_000, 0.02, 3.0


def config(model, renewal, kind, binning=None, **experiment):
    d = {"model": model, "experiment": {"kind": kind, **experiment}, "renewal": dict(renewal)}
    if binning:
        d["binning"] = binning
    return parse_config(json.dumps(d))


def arith_config(kind, **experiment):
    return config(ARITH, ARITH_RENEWAL, kind, **(PILOT | experiment))


def unif_config(kind, **experiment):
    return config(UNIF, UNIF_RENEWAL, kind, {"rule": "power"}, **(UNIF_PILOT | experiment))


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail=""):
        with capsys.disabled():
            print(f"\ncriterion {number:>2} {'PASS' if ok else 'FAIL'}  {title}  {detail}")
        return ok

    return emit


def checks_of(record):
    return {c.name: c for c in record.checks}


@pytest.fixture(scope="module")
def arith_pilots():
    cfg = arith_config("invariance", n=LLT_N, min_cycles=MIN_CYCLES)
    renewals, interval = resolve_renewals(cfg, ("first", "second"))
    return pilot_phase(cfg, renewals, interval)


@pytest.fixture(scope="module")
def unif_pilot():
    return pilot_phase(unif_config("llt"))[0]


class TestOracleEquivalence:
    @pytest.mark.parametrize("model,renewal", [(ARITH, ARITH_RENEWAL), (UNIF, UNIF_RENEWAL)], ids=["arithmetic", "nonlattice"])
    def test_criterion_1(self, report, model, renewal):
        binning = {"rule": "power"} if model is UNIF else None
        cfg = config(model, renewal, "oracle", binning, replicas=ORACLE_WINDOWS, max_span=ORACLE_SPAN)
        t = time.perf_counter()
        rec = run_oracle(cfg)
        elapsed = time.perf_counter() - t
        c = checks_of(rec)
        bad = {k: c[k].detail["mismatches"] for k in ("oracle_w", "oracle_w_plus", "oracle_length")}
        ok = all(v == 0 for v in bad.values()) and elapsed < ORACLE_SECONDS
        report(1, f"oracle equivalence ({model['kind']})", ok,
               f"mismatches={bad} pairs={c['oracle_w'].detail['pairs']} seconds={elapsed:.1f}")
        assert ok


@pytest.fixture(scope="module")
def audits():
    out = {}
    for name, model, renewal in (("arithmetic", ARITH, ARITH_RENEWAL), ("nonlattice", UNIF, UNIF_RENEWAL)):
        binning = {"rule": "power"} if model is UNIF else None
        cfg = config(model, renewal, "audit", binning, replicas=AUDIT_WINDOWS, window_length=AUDIT_LENGTH, paired=AUDIT_PAIRED)
        t = time.perf_counter()
        rec = run_decomposition_audit(cfg)
        out[name] = (rec, time.perf_counter() - t)
    return out


class TestAudit:
    @pytest.mark.parametrize("name", ["arithmetic", "nonlattice"])
    def test_criterion_2(self, report, audits, name):
        rec, elapsed = audits[name]
        c = checks_of(rec)
        d = c["decomposition"].detail
        ok = c["decomposition"].passed and c["crp_decomposition"].passed and d["audited"] > 0 and elapsed < AUDIT_SECONDS
        if name == "arithmetic":
            ok = ok and d["max_error"] == 0.0
        else:
            ok = ok and d["max_error"] <= 1e-9
        report(2, f"decomposition audit ({name})", ok,
               f"violations={d['violations']} audited={d['audited']} max_error={d['max_error']:.2e} seconds={elapsed:.1f}")
        assert ok

    @pytest.mark.parametrize("name", ["arithmetic", "nonlattice"])
    def test_criterion_3(self, report, audits, name):
        c = checks_of(audits[name][0])
        inc, mono = c["inclusion_chain"].detail, c["renewal_monotone"].detail
        ok = c["inclusion_chain"].passed and c["renewal_monotone"].passed and mono["pairs"] >= AUDIT_PAIRED
        report(3, f"inclusion chain and monotonicity ({name})", ok,
               f"inclusion_violations={inc['violations']} windows={inc['windows']} "
               f"monotone_violations={mono['violations']} pairs={mono['pairs']}")
        assert ok


class TestRateFunction:
    def test_criterion_4_cycles(self, report, arith_pilots, unif_pilot):
        ok, parts = True, []
        for name, pilot in (("arithmetic", arith_pilots[0]), ("nonlattice", unif_pilot)):
            rep = rate_curvature_check(pilot.cgf, pilot.summary)
            good = (
                pilot.usable >= MIN_CYCLES
                and rep.flag == "ok"
                and rep.D_at_a <= D_MAX
                and abs(rep.D_prime) <= D_PRIME_MAX
                and rep.deviation <= CURVATURE_TOL
            )
            ok &= good
            parts.append(f"{name}: cycles={pilot.usable} D={rep.D_at_a:.1e} D'={rep.D_prime:.1e} dev={rep.deviation:.4f}")
        report(4, "rate function identities at a_hat", ok, "; ".join(parts))
        assert ok

    def test_criterion_4_closed_form(self, report):
        m, s = 1.3, 0.7
        err = max(abs(rate_function(GaussianMarkCgf(m=m, s=s), x).D - (x - m) ** 2 / (2 * s * s))
                  for x in np.linspace(0.1, 3.0, 30))
        ok = err <= CLOSED_FORM_TOL
        report(4, "Gaussian closed-form control", ok, f"max_error={err:.2e}")
        assert ok


class TestLocalLimits:
    def _band_detail(self, rec):
        c = checks_of(rec)
        ratio = c["center_ratio"].detail["ratio_d"]
        frac = c["cells_within_band"].detail["fraction"]
        cells = c["cells_within_band"].detail["cells"]
        return ratio, frac, cells

    def _cells_fraction(self, rec):
        a, s, n = rec.meta["a_hat"], rec.meta["sigma_hat"], rec.meta["n"]
        width = rec.meta.get("delta", 1.0)
        shift = width / 2 if "delta" in rec.meta else 0.0
        inner = [r for r in rec.rows if abs(r["x"] + shift - a * n) <= 2 * s * math.sqrt(n)]
        return sum(abs(r["ratio_d"] - 1) <= CELL_TOL for r in inner) / len(inner)

    def test_criterion_5(self, report, arith_pilots):
        cfg = arith_config("llt", n=LLT_N, replicas=LLT_R, min_cycles=MIN_CYCLES)
        rec = run_local_limit(cfg, arith_pilots[0])
        ratio, frac, cells = self._band_detail(rec)
        ok = rec.passed and abs(ratio - 1) <= CENTER_TOL and self._cells_fraction(rec) >= CELL_FRACTION
        report(5, "lattice local limit", ok,
               f"center_ratio={ratio:.4f} cells_within={frac:.3f} of {cells} "
               f"failed={[c.name for c in rec.checks if not c.passed]}")
        assert ok

    def test_criterion_6(self, report, unif_pilot):
        cfg = unif_config("llt", n=LLT_N, replicas=LLT_R, min_cycles=MIN_CYCLES)
        rec = run_integro_local(cfg, unif_pilot)
        ratio, frac, cells = self._band_detail(rec)
        ok = (
            rec.passed
            and rec.meta["delta"] == pytest.approx(LLT_N ** -0.25)
            and abs(ratio - 1) <= CENTER_TOL
            and self._cells_fraction(rec) >= CELL_FRACTION
        )
        report(6, "non-lattice integro-local limit", ok,
               f"delta={rec.meta['delta']:.4f} center_ratio={ratio:.4f} cells_within={frac:.3f} of {cells} "
               f"failed={[c.name for c in rec.checks if not c.passed]}")
        assert ok


class TestInvariance:
    def test_criterion_7(self, report, arith_pilots):
        cfg = arith_config("invariance", n=LLT_N, min_cycles=MIN_CYCLES)
        rec = run_invariance(cfg, arith_pilots)
        c = checks_of(rec)
        a, sig, rate = c["a_agrees"].detail, c["sigma_agrees"].detail, c["rate_agrees"].detail
        z_a = abs(a["a1"] - a["a2"]) / a["se"]
        z_s = abs(sig["sigma1"] - sig["sigma2"]) / sig["se"]
        z_d = max(abs(x - y) / e for x, y, e in zip(rate["D1"], rate["D2"], rate["se"]))
        ok = rec.passed and max(z_a, z_s, z_d) <= INVARIANCE_SE
        report(7, "invariance across renewal constants", ok,
               f"z_a={z_a:.2f} z_sigma={z_s:.2f} max_z_D={z_d:.2f} grid={len(rate['alpha'])} "
               f"inside_interval={c['pairs_inside_interval'].passed}")
        assert ok


LAW = CycleLaw(((1,), (2,), (1, 3), (2, 2), (1, 2, 4)), (0.3, 0.2, 0.25, 0.1, 0.15))
FIRST = CycleLaw(((2,), (1, 3)), (0.5, 0.5))


class TestRenewalIdentity:
    def test_criterion_8(self, report):
        rng = np.random.default_rng(20240601)
        plain = simulate_crp_batch(LAW, CRP_N, rng, CRP_PATHS, "plain", FIRST)
        star = simulate_crp_batch(LAW, CRP_N, rng, CRP_PATHS, "star", FIRST)
        zs, ok = [], True
        for x in CRP_X:
            pl, sl, pr, sr = renewal_identity_sides(plain, star, CRP_N, x, 1.0, LAW.mean_tau)
            exact_l, exact_r = renewal_identity_exact(LAW, CRP_N, x, FIRST)
            z = abs(pl - pr) / math.hypot(sl, sr)
            zs.append(z)
            ok &= z <= CRP_SE and pl > 0 and exact_l == pytest.approx(exact_r, rel=1e-12)
        report(8, "compound renewal identity", ok, f"z={[round(z, 2) for z in zs]} x={list(CRP_X)}")
        assert ok


class TestClt:
    def test_criterion_9(self, report, unif_pilot):
        cfg = unif_config("lln_clt", n=CLT_N, replicas=CLT_R)
        rec = run_lln_clt(cfg, unif_pilot)
        c = checks_of(rec)
        sl, ks = c["slope_matches_cycles"].detail, c["ks_standard_normal"].detail["ks"]
        z = abs(sl["slope"] - sl["a_hat"]) / math.hypot(sl["se_slope"], sl["se_a"])
        ok = ks <= KS_MAX and z <= SLOPE_SE
        report(9, "CLT sanity", ok,
               f"ks={ks:.4f} slope={sl['slope']:.5f} a_hat={sl['a_hat']:.5f} z={z:.2f} "
               f"offset={sl['plain_slope'] * CLT_N - sl['a_hat'] * CLT_N:.3f}")
        assert ok


def _small(model, renewal, kind, **experiment):
    exp = {"kind": kind, "n": 60, "replicas": 2000, "pilot_windows": 40, "pilot_length": 600,
           "min_cycles": 100, "window_length": 150, "paired": 30} | experiment
    d = {"model": model, "experiment": exp, "renewal": dict(renewal) | {"horizon": 20, "margin": 20}}
    if model is UNIF:
        d["binning"] = {"rule": "power"}
    return d


class TestDeterminism:
    CASES = [
        ("pilot", ARITH, ARITH_RENEWAL),
        ("llt", ARITH, ARITH_RENEWAL),
        ("llt", UNIF, UNIF_RENEWAL),
        ("clt", UNIF, UNIF_RENEWAL),
        ("invariance", ARITH, ARITH_RENEWAL),
        ("audit", UNIF, UNIF_RENEWAL),
        ("oracle", ARITH, ARITH_RENEWAL),
    ]

    def test_criterion_10(self, report, tmp_path):
        same = []
        for i, (cmd, model, renewal) in enumerate(self.CASES):
            path = tmp_path / f"config{i}.json"
            path.write_text(json.dumps(_small(model, renewal, "oracle")))
            files = []
            for run, workers in (("a", "1"), ("b", "2")):
                out = tmp_path / f"{i}{run}"
                main([cmd, "--config", str(path), "--out", str(out), "--workers", workers])
                files.append({f.name: f.read_bytes() for f in sorted(out.iterdir())})
            same.append(files[0] == files[1] and "result.csv" in files[0])
        ok = all(same)
        report(10, "byte-identical outputs on re-run", ok,
               f"experiments={[c[0] + ':' + c[1]['kind'] for c in self.CASES]} identical={same}")
        assert ok
