"""Acceptance criteria C1-C8 at their stated tolerances.

Each test prints one ``C<n> PASS|FAIL`` line with its key numbers.
"""
import subprocess
import sys
import time

import pytest

from selfcontract.suite import (build_corpus, criterion_closed_form, criterion_lemmas,
                                criterion_main_theorem, criterion_oracle,
                                criterion_proximal, criterion_spiral,
                                criterion_torralba)

SEED = 42


@pytest.fixture(scope="module")
def corpus():
    t0 = time.perf_counter()
    c = build_corpus(SEED)
    return c, time.perf_counter() - t0


def report(capsys, cid, ok, detail):
    with capsys.disabled():
        print(f"\n{cid} {'PASS' if ok else 'FAIL'}: {detail}")


def test_c1_main_theorem_on_corpus(corpus, capsys):
    orbits, build_time = corpus
    t0 = time.perf_counter()
    r = criterion_main_theorem(orbits)
    elapsed = build_time + time.perf_counter() - t0
    ok = r["passed"] and elapsed <= 60
    report(capsys, "C1", ok,
           f"{r['orbits']} orbits, self-contracted failures {r['self_contracted_failures']}, "
           f"bound failures {r['bound_failures']}, max L/gap {r['max_length_over_gap']:.4f}, "
           f"{elapsed:.1f}s")
    assert r["orbits"] >= 200
    assert r["self_contracted_failures"] == 0 and r["bound_failures"] == 0
    assert elapsed <= 60


def test_c2_oracle_agreement(capsys):
    r = criterion_oracle(SEED)
    report(capsys, "C2", r["passed"],
           f"disagreements {r['random_disagreements']}/{r['random']} random, "
           f"{r['adversarial_disagreements']}/{r['adversarial']} adversarial")
    assert r["random"] == 1000 and r["adversarial"] == 100
    assert r["random_disagreements"] == 0 and r["adversarial_disagreements"] == 0


def test_c3_lemma_battery(corpus, capsys):
    r = criterion_lemmas(SEED, corpus[0])
    report(capsys, "C3", r["passed"],
           f"segments {r['segments_tested']} (failures {r['segment_estimate_failures']}), "
           f"annuli {r['annuli']}, vertical/horizontal/annulus failures "
           f"{r['vertical_bound_failures']}/{r['horizontal_bound_failures']}/"
           f"{r['annulus_bound_failures']}")
    assert r["segments_tested"] >= 10_000
    assert r["segment_estimate_failures"] == 0
    assert r["vertical_bound_failures"] == 0 and r["horizontal_bound_failures"] == 0
    assert r["annulus_bound_failures"] == 0


def test_c4_closed_form(capsys):
    r = criterion_closed_form(SEED)
    report(capsys, "C4", r["passed"],
           f"{r['matrices']} matrices, max relative sup error "
           f"{r['max_relative_sup_error']:.2e}")
    assert r["matrices"] == 50
    assert r["max_relative_sup_error"] <= 1e-6


def test_c5_spiral(capsys):
    t0 = time.perf_counter()
    r = criterion_spiral()
    elapsed = time.perf_counter() - t0
    L10, L100, L1000 = r["lengths"]
    ok = r["passed"] and elapsed <= 30
    report(capsys, "C5", ok,
           f"L(10,100,1000) = {L10:.4f}, {L100:.4f}, {L1000:.4f}; winding "
           f"{r['winding_T100']:.3f} turns; truncated self-contracted "
           f"{r['truncated_self_contracted']}; {elapsed:.1f}s")
    assert L10 < L100 < L1000
    assert L1000 - L100 >= 0.5 * (L100 - L10)
    assert r["winding_within_20pct"]
    assert not r["truncated_self_contracted"]
    assert elapsed <= 30


def test_c6_torralba(capsys):
    t0 = time.perf_counter()
    r = criterion_torralba(SEED)
    elapsed = time.perf_counter() - t0
    ok = r["passed"] and elapsed <= 120
    report(capsys, "C6", ok,
           f"theta {r['theta_deg']:.4f} deg, cond-lambda {r['cond_lambda']}, "
           f"min midpoint margin {r['min_midpoint_margin']:.2e} on "
           f"{r['convexity_pairs']} pairs, total turn {r['total_turn_deg']:.3f} deg, "
           f"monotone {r['monotone_winding']}, self-contracted {r['self_contracted']}, "
           f"bound {r['bound_holds']}; {elapsed:.1f}s")
    assert r["cond_lambda"] and r["convex"] and r["convexity_pairs"] >= 100_000
    assert r["monotone_winding"] and r["turn_ok"]
    assert r["self_contracted"] and r["bound_holds"]
    assert elapsed <= 120


def test_c7_proximal_max_affine(capsys):
    r = criterion_proximal(SEED)
    report(capsys, "C7", r["passed"],
           f"{r['instances']} instances, max distance to LP minimizer "
           f"{r['max_distance_to_lp_minimizer']:.2e}, self-contracted failures "
           f"{r['self_contracted_failures']}")
    assert r["max_distance_to_lp_minimizer"] <= 1e-8
    assert r["self_contracted_failures"] == 0


def test_c8_suite_reports_are_byte_identical(tmp_path, capsys):
    outs = []
    for name in ("first", "second"):
        path = tmp_path / f"{name}.json"
        proc = subprocess.run([sys.executable, "-m", "selfcontract", "suite", "--seed",
                               str(SEED), "--output", str(path)],
                              capture_output=True, timeout=600)
        assert proc.returncode in (0, 1), proc.stderr.decode()
        outs.append(path.read_bytes())
    same = outs[0] == outs[1]
    report(capsys, "C8", same, f"two suite runs, {len(outs[0])} bytes each, identical {same}")
    assert same
