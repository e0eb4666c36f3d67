"""The acceptance battery: every property check bundled into one report.

Each criterion returns a plain dict; the report is serialized with sorted
keys and contains no timings, so a fixed seed yields identical bytes.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Sequence

import numpy as np
from scipy.optimize import linprog

from .annulus import (AnnulusParams, annulus_length_estimate, classify_segment,
                      clip_to_annulus, horizontal_bound_check,
                      polygonal_approximation, segment_length_estimate,
                      vertical_bound_check)
from .curve import (LENGTH_BOUND_FACTOR, Polyline, check_main_bound,
                    check_self_contracted, check_self_contracted_bruteforce,
                    diameter)
from .fields import max_affine_field, quadratic_field, sample_disk, spiral_field
from .flow import (FlowConfig, Orbit, closed_form_error, integrate_gradient,
                   integrate_proximal, reference_spiral_length,
                   truncated_lengths, winding_number)
from .foliation import (cond_lambda_holds, foliation_value,
                        torralba_construction, winds_monotonically)

ANNULUS_PARAMS = ((math.pi / 12, 0.5), (math.pi / 8, 0.6), (math.pi / 6, 0.8))
CORPUS_SIZE = 200
# annuli deeper than this fraction of the start radius are left to the core
DEEPEST_ANNULUS = 1e-6


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2 ** 64 - 1), stream]))


def random_spd(rng: np.random.Generator, lo: float = 0.1, hi: float = 10.0) -> np.ndarray:
    """Random rotation of ``diag(w)`` with ``w`` log-uniform in ``[lo, hi]``."""
    w = np.exp(rng.uniform(math.log(lo), math.log(hi), 2))
    a = rng.uniform(0.0, math.pi)
    R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    A = R @ np.diag(w) @ R.T
    return 0.5 * (A + A.T)


def random_unit_disk(rng: np.random.Generator) -> np.ndarray:
    r = math.sqrt(rng.random())
    a = rng.uniform(0.0, 2 * math.pi)
    return np.array([r * math.cos(a), r * math.sin(a)])


@dataclass(frozen=True)
class CorpusOrbit:
    matrix: np.ndarray
    x0: np.ndarray
    orbit: Orbit


CORPUS_CONFIG = FlowConfig(t_max=1e4, rtol=1e-10, atol=1e-14)


def build_corpus(seed: int, size: int = CORPUS_SIZE) -> List[CorpusOrbit]:
    """Orbits of random SPD quadratic flows run until they reach the minimizer."""
    rng = _rng(seed, 1)
    out = []
    for _ in range(size):
        A = random_spd(rng)
        x0 = random_unit_disk(rng)
        out.append(CorpusOrbit(A, x0, integrate_gradient(quadratic_field(A), x0, CORPUS_CONFIG)))
    return out


def criterion_main_theorem(corpus: Sequence[CorpusOrbit]) -> dict:
    sc_fail = bound_fail = 0
    worst_ratio = 0.0
    for c in corpus:
        pl = c.orbit.polyline
        if not check_self_contracted(pl, 1e-8).is_self_contracted:
            sc_fail += 1
        b = check_main_bound(pl)
        bound_fail += not b.holds
        if b.gap > 0:
            worst_ratio = max(worst_ratio, b.length / b.gap)
    return {"orbits": len(corpus), "self_contracted_failures": sc_fail,
            "bound_failures": bound_fail, "max_length_over_gap": worst_ratio,
            "bound_factor": LENGTH_BOUND_FACTOR,
            "passed": len(corpus) >= 200 and sc_fail == 0 and bound_fail == 0}


def _backtrack_polyline(rng: np.random.Generator, n: int = 30) -> Polyline:
    """Nearly collinear approach to the last point with a few tiny backward steps.

    Backward steps are sized at 0.3 to 3 times the checker tolerance, so the
    worst slack sits just on either side of the threshold.
    """
    steps = rng.uniform(0.02, 0.1, n - 1)
    tol = 1e-9 * steps.sum()
    for j in rng.choice(np.arange(0, n - 2), size=rng.integers(1, 4), replace=False):
        steps[j] = -tol * rng.choice([0.3, 0.7, 0.95, 1.05, 1.5, 3.0])
    x = np.concatenate([[0.0], np.cumsum(steps)])
    pts = np.stack([x, rng.normal(0.0, 1e-7, n)], axis=1)
    a = rng.uniform(0, 2 * math.pi)
    R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    return Polyline(pts @ R.T + rng.normal(0, 1, 2), None)


def _random_polyline(rng: np.random.Generator, kind: int, n: int = 30) -> Polyline:
    if kind == 0:
        return Polyline(rng.random((n, 2)), None)
    if kind == 1:
        # subsampled quadratic orbit: usually self-contracted
        A = random_spd(rng)
        ts = np.sort(rng.uniform(0, 5, n))
        w, V = np.linalg.eigh(A)
        x0 = random_unit_disk(rng)
        pts = (np.exp(-np.outer(ts, w)) * (V.T @ x0)) @ V.T
        return Polyline(pts, None)
    # monotone-radius random walk towards the origin: a coin flip
    r = np.sort(rng.uniform(0.1, 1, n))[::-1]
    a = np.cumsum(rng.normal(0, 0.3, n))
    return Polyline(np.stack([r * np.cos(a), r * np.sin(a)], axis=1), None)


def criterion_oracle(seed: int) -> dict:
    rng = _rng(seed, 2)
    disagree = 0
    positives = 0
    for k in range(1000):
        pl = _random_polyline(rng, k % 3)
        a = check_self_contracted(pl)
        b = check_self_contracted_bruteforce(pl)
        disagree += a.is_self_contracted != b.is_self_contracted
        positives += a.is_self_contracted
    adv_disagree = 0
    adv_positive = 0
    for _ in range(100):
        pl = _backtrack_polyline(rng)
        a = check_self_contracted(pl)
        b = check_self_contracted_bruteforce(pl)
        adv_disagree += a.is_self_contracted != b.is_self_contracted
        adv_positive += a.is_self_contracted
    return {"random": 1000, "random_self_contracted": positives,
            "random_disagreements": disagree, "adversarial": 100,
            "adversarial_self_contracted": adv_positive,
            "adversarial_disagreements": adv_disagree,
            "passed": disagree == 0 and adv_disagree == 0}


def random_annulus_segment(rng: np.random.Generator, inner: float = 0.5,
                           outer: float = 1.0):
    """A segment lying entirely in ``U(inner, outer)`` (rejection sampling)."""
    while True:
        r = rng.uniform(inner, outer, 2)
        a = rng.uniform(0, 2 * math.pi, 2)
        p = r[0] * np.array([math.cos(a[0]), math.sin(a[0])])
        q = r[1] * np.array([math.cos(a[1]), math.sin(a[1])])
        d = q - p
        t = min(1.0, max(0.0, -float(p @ d) / float(d @ d)))
        if np.hypot(*(p + t * d)) >= inner:
            return p, q


def _segment_radii(pl: Polyline):
    """Per-segment nearest distance to the origin and farthest endpoint radius."""
    a, b = pl.points[:-1], pl.points[1:]
    d = b - a
    dd = np.einsum("ij,ij->i", d, d)
    t = np.clip(-np.einsum("ij,ij->i", a, d) / np.where(dd > 0, dd, 1.0), 0.0, 1.0)
    near = np.hypot(*(a + t[:, None] * d).T)
    r = np.hypot(*pl.points.T)
    return near, np.maximum(r[:-1], r[1:])


def _window(pl: Polyline, near, far, prm: AnnulusParams) -> Polyline:
    """The smallest sub-polyline holding every segment that meets the annulus."""
    hit = np.flatnonzero((near <= prm.outer_radius * (1 + 1e-9))
                         & (far >= prm.inner_radius * (1 - 1e-9)))
    if len(hit) == 0:
        return pl.sub(0, 1)
    return pl.sub(int(hit[0]), int(hit[-1]) + 2)


def criterion_lemmas(seed: int, corpus: Sequence[CorpusOrbit]) -> dict:
    rng = _rng(seed, 3)
    P = AnnulusParams(math.pi / 12, 0.5, 1.0)
    seg_fail = 0
    tested = 0
    while tested < 10_000:
        p, q = random_annulus_segment(rng)
        seg = classify_segment(p, q, P)
        if abs(seg.theta) > math.pi / 2 - 1e-3:
            continue
        tested += 1
        seg_fail += not segment_length_estimate(seg).holds
    v_fail = h_fail = annulus_fail = 0
    annuli = decomposed = horizontal = 0
    worst = {"vertical": 0.0, "horizontal": 0.0, "annulus": 0.0}
    for alpha, lam in ANNULUS_PARAMS:
        for c in corpus:
            full = c.orbit.polyline
            near, far = _segment_radii(full)
            R0 = float(np.hypot(*full.first))
            R = R0
            while R * lam >= DEEPEST_ANNULUS * R0:
                prm = AnnulusParams(alpha, lam, R)
                pl = _window(full, near, far, prm)
                annuli += 1
                est = annulus_length_estimate(pl, prm)
                annulus_fail += not est.holds
                worst["annulus"] = max(worst["annulus"], est.restricted_length / prm.width)
                piece = clip_to_annulus(pl, prm)
                if piece is not None and len(piece) >= 2:
                    dec = polygonal_approximation(piece, prm)
                    decomposed += 1
                    vb = vertical_bound_check(dec, prm)
                    hb = horizontal_bound_check(dec, prm)
                    v_fail += not vb.holds
                    h_fail += not hb.holds
                    horizontal += int(np.sum(dec.codes != 0))
                    worst["vertical"] = max(worst["vertical"], vb.total / vb.bound)
                    worst["horizontal"] = max(worst["horizontal"], hb.total / hb.bound)
                R *= lam
    return {"segments_tested": tested, "segment_estimate_failures": seg_fail,
            "annuli": annuli, "decomposed": decomposed,
            "horizontal_segments": horizontal,
            "vertical_bound_failures": v_fail, "horizontal_bound_failures": h_fail,
            "annulus_bound_failures": annulus_fail,
            "max_vertical_fraction_of_bound": worst["vertical"],
            "max_horizontal_fraction_of_bound": worst["horizontal"],
            "max_annulus_length_over_width": worst["annulus"],
            "passed": seg_fail == 0 and v_fail == 0 and h_fail == 0 and annulus_fail == 0}


def criterion_closed_form(seed: int) -> dict:
    rng = _rng(seed, 4)
    cfg = FlowConfig(t_max=5.0, stop_gradient_norm=0.0, stop_radius=0.0)
    worst = 0.0
    for _ in range(50):
        A = random_spd(rng)
        x0 = random_unit_disk(rng)
        orb = integrate_gradient(quadratic_field(A), x0, cfg)
        worst = max(worst, closed_form_error(A, x0, orb))
    return {"matrices": 50, "max_relative_sup_error": worst, "threshold": 1e-6,
            "passed": worst <= 1e-6}


SPIRAL_START = 1.0 / (1.5 * math.pi)


def criterion_spiral() -> dict:
    fld = spiral_field()
    orb = integrate_gradient(fld, (SPIRAL_START, 0.0), FlowConfig(t_max=1000.0))
    L10, L100, L1000 = truncated_lengths(orb, (10.0, 100.0, 1000.0))
    ref = [reference_spiral_length(T) for T in (10.0, 100.0, 1000.0)]
    short = integrate_gradient(fld, (SPIRAL_START, 0.0), FlowConfig(t_max=100.0))
    turns = winding_number(short.polyline)
    expected = 100.0 / (2 * math.pi)
    verdict = check_self_contracted(short.polyline)
    long_orbit = integrate_gradient(fld, (SPIRAL_START, 0.0), FlowConfig(t_max=3000.0))
    bound = check_main_bound(long_orbit.polyline)
    increasing = L10 < L100 < L1000
    log_growth = (L1000 - L100) >= 0.5 * (L100 - L10)
    wind_ok = abs(abs(turns) - expected) <= 0.2 * expected
    return {"lengths": [L10, L100, L1000], "reference_lengths": ref,
            "strictly_increasing": increasing, "log_growth": log_growth,
            "winding_T100": turns, "expected_turns": -expected,
            "winding_within_20pct": wind_ok,
            "truncated_self_contracted": verdict.is_self_contracted,
            "witness": None if verdict.witness is None else list(verdict.witness),
            "T3000_length": bound.length, "T3000_bound": bound.bound,
            "T3000_bound_holds": bound.holds,
            "passed": increasing and log_growth and wind_ok and not verdict.is_self_contracted}


def criterion_torralba(seed: int) -> dict:
    res = torralba_construction(periods=5)
    fam = res.family
    cond = cond_lambda_holds(fam)
    rng = _rng(seed, 6)
    n = 100_000
    xs = sample_disk(rng, n, 1.0)
    ys = sample_disk(rng, n, 1.0)
    fx = foliation_value(fam, xs)
    fy = foliation_value(fam, ys)
    fm = foliation_value(fam, 0.5 * (xs + ys))
    span = float(np.ptp(fam.levels.values))
    margin = float((0.5 * (fx + fy) - fm).min())
    convex_ok = margin >= -1e-8 * span
    orb = res.orbit
    M = fam.bodies[0].M
    mono = winds_monotonically(orb, 2 * math.pi / M)
    total_turn = -winding_number(orb.polyline) * 2 * math.pi
    turn_ok = total_turn >= 2 * res.theta
    v = check_self_contracted(orb.polyline, 1e-6 * diameter(orb.points))
    b = check_main_bound(orb.polyline)
    return {"theta_deg": math.degrees(res.theta), "K": fam.levels.K,
            "Ks": list(fam.levels.Ks), "cond_lambda": cond,
            "convexity_pairs": n, "min_midpoint_margin": margin,
            "convex": convex_ok, "monotone_winding": mono,
            "total_turn_deg": math.degrees(total_turn), "turn_ok": turn_ok,
            "self_contracted": v.is_self_contracted, "length": b.length,
            "bound": b.bound, "bound_holds": b.holds,
            "passed": cond and convex_ok and mono and turn_ok
            and v.is_self_contracted and b.holds}


def lp_minimizer(slopes: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Minimizer of ``max_i <a_i, x> + b_i`` via the epigraph LP."""
    k = len(offsets)
    A_ub = np.hstack([slopes, -np.ones((k, 1))])
    res = linprog([0.0, 0.0, 1.0], A_ub=A_ub, b_ub=-np.asarray(offsets),
                  bounds=[(None, None)] * 3, method="highs")
    if res.status != 0:
        raise RuntimeError(f"LP oracle failed: {res.message}")
    return res.x[:2]


def random_max_affine(rng: np.random.Generator):
    """Three pieces whose slopes surround the origin, so the minimum is unique."""
    base = rng.uniform(0, 2 * math.pi)
    ang = base + np.array([0.0, 2 * math.pi / 3, 4 * math.pi / 3]) + rng.uniform(-0.4, 0.4, 3)
    mags = rng.uniform(0.5, 2.0, 3)
    slopes = np.stack([mags * np.cos(ang), mags * np.sin(ang)], axis=1)
    return slopes, rng.uniform(-0.5, 0.5, 3)


def criterion_proximal(seed: int) -> dict:
    rng = _rng(seed, 7)
    worst = 0.0
    sc_fail = 0
    iters = []
    for _ in range(20):
        A, b = random_max_affine(rng)
        fld = max_affine_field(A, b)
        target = lp_minimizer(A, b)
        x0 = target + rng.uniform(-2, 2, 2)
        orb = integrate_proximal(fld, x0, step=float(rng.uniform(0.02, 0.3)), iterations=20_000)
        worst = max(worst, float(np.hypot(*(orb.points[-1] - target))))
        sc_fail += not check_self_contracted(orb.polyline).is_self_contracted
        iters.append(len(orb.polyline) - 1)
    return {"instances": 20, "max_distance_to_lp_minimizer": worst,
            "self_contracted_failures": sc_fail, "max_iterations": max(iters),
            "passed": worst <= 1e-8 and sc_fail == 0}


CRITERIA = (
    ("1", "main theorem on quadratic-flow corpus"),
    ("2", "oracle equivalence"),
    ("3", "lemma battery"),
    ("4", "quadratic closed form"),
    ("5", "spiral counterexample"),
    ("6", "Torralba construction"),
    ("7", "proximal / max-affine"),
)


def run_suite(seed: int = 42, workers: int = 0) -> dict:
    """Run criteria 1-7 and return the report dict.

    Criteria run on a bounded thread pool; results are gathered in a fixed
    order, so scheduling never changes the report.
    """
    corpus = build_corpus(seed)
    jobs: Dict[str, Callable[[], dict]] = {
        "1": lambda: criterion_main_theorem(corpus),
        "2": lambda: criterion_oracle(seed),
        "3": lambda: criterion_lemmas(seed, corpus),
        "4": lambda: criterion_closed_form(seed),
        "5": criterion_spiral,
        "6": lambda: criterion_torralba(seed),
        "7": lambda: criterion_proximal(seed),
    }
    n = workers or min(4, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=n) as pool:
        futures = {k: pool.submit(f) for k, f in jobs.items()}
        results = {k: futures[k].result() for k, _ in CRITERIA}
    report = {"seed": int(seed), "criteria": []}
    for key, title in CRITERIA:
        entry = {"id": key, "title": title}
        entry.update(results[key])
        report["criteria"].append(entry)
    report["all_passed"] = all(c["passed"] for c in report["criteria"])
    return report
