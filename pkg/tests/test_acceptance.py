"""Acceptance criteria; each test prints one ACCEPTANCE line."""

import math
import time

import mpmath
import numpy as np
import pytest

from skewprod.classifier import Flag, classify_system, fixed_point_check
from skewprod.coboundary import (
    CONTINUOUS,
    MEASURABLE,
    NOT_COBOUNDARY,
    DetectorConfig,
    classify,
    coboundary_residual,
    detect_invariant_vector,
)
from skewprod.cocycle import CocycleSpec, random_trig_spec, twisted_law_residual, verify_cocycle
from skewprod.conjugacy import are_cohomologous
from skewprod.crossed import (
    CPElement,
    GNSVector,
    fejer_reconstruction,
    gns_project_invariant,
    masa_offdiagonal_norm,
)
from skewprod.scenario import parse_scenario, read_source
from skewprod.states import check_invariance, expectation_onto_fixed_points, mixture, state_from_report
from skewprod.torus import FourierPoly, RotationNumber, UnitaryFn, unitary_poly

THETA = RotationNumber.silver()
ALPHA = RotationNumber.golden()


@pytest.fixture
def report_line(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {k}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return emit


def bundled(name):
    return parse_scenario(read_source(name)[0])


def test_01_cocycle_law_suite(report_line):
    rng = np.random.default_rng(2024)
    worst_law, worst_twist = 0.0, 0.0
    for i in range(50):
        spec = random_trig_spec(rng, THETA, ALPHA, band=6)
        worst_law = max(worst_law, verify_cocycle(spec, 10, seed=i))
        m, n, g = (int(v) for v in rng.integers(-10, 11, 3))
        worst_twist = max(worst_twist, twisted_law_residual(spec, g, m, n, seed=i))
    ok = worst_law < 1e-11 and worst_twist < 1e-11
    report_line(1, ok, f"cocycle residual {worst_law:.2e}, twisted-law residual {worst_twist:.2e}")
    assert ok


def test_02_solver_round_trip(report_line):
    rng = np.random.default_rng(7)
    worst_coeff, worst_res, tags = 0.0, 0.0, set()
    for _ in range(100):
        w = UnitaryFn.random(rng, int(rng.integers(-3, 4)), int(rng.integers(1, 6)), 0.2)
        u = w.rotate(THETA.float_value).conj() * w
        v = classify(u, THETA)
        tags.add(v.tag)
        if v.tag != CONTINUOUS:
            continue
        a, b = unitary_poly(v.witness), unitary_poly(w)
        lo, hi = min(a.lo, b.lo), max(a.hi, b.hi)
        wa, wb = a.window(lo, hi), b.window(lo, hi)
        z = np.vdot(wa, wb)
        worst_coeff = max(worst_coeff, float(np.max(np.abs(wa * (z / abs(z)) - wb))))
        worst_res = max(worst_res, coboundary_residual(u, v.witness, THETA, points=1024))
    ok = tags == {CONTINUOUS} and worst_coeff < 1e-8 and worst_res < 1e-10
    report_line(2, ok, f"tags {sorted(tags)}, aligned coefficient deviation {worst_coeff:.2e}, residual {worst_res:.2e}")
    assert ok


def test_03_constant_trichotomy(report_line):
    details, ok = [], True
    for m in (1, 2, 5):
        v = classify(UnitaryFn.constant(THETA.frac_times(m)), THETA)
        good = v.tag == CONTINUOUS and v.witness.winding == -m and v.witness.phase.band == 0
        ok &= good
        details.append(f"m={m}:{'chi_%d' % v.witness.winding if v.witness else v.tag}")
    K = 100_000
    cfg = DetectorConfig(iterations=K)
    with mpmath.workdps(40):
        c = mpmath.sqrt(3) - 1
        th = mpmath.sqrt(2) - 1
        u = UnitaryFn.constant(float(c))
        v = classify(u, THETA, cfg)
        ev = detect_invariant_vector(u, THETA, cfg)
        oracle_gap = 0.0
        for m, val in ev.norms.items():
            d = c + m * th
            want = abs(mpmath.sin(mpmath.pi * K * d)) / (K * abs(mpmath.sin(mpmath.pi * d)))
            oracle_gap = max(oracle_gap, abs(val - float(want)))
    bound = 10 / math.sqrt(K)
    ok &= v.tag == NOT_COBOUNDARY and ev.max_norm <= bound and oracle_gap < 1e-12
    details.append(f"c=sqrt3-1:{v.tag}({v.certificate_name}) max {ev.max_norm:.2e} <= {bound:.2e}, oracle gap {oracle_gap:.1e}")
    report_line(3, ok, "; ".join(details))
    assert ok


def test_04_winding_obstruction_and_decay(report_line):
    spec = CocycleSpec.one_dim(THETA, ALPHA, UnitaryFn.character(1))
    rep = classify_system(spec, 12)
    all_winding = all(rep.verdicts[n].certificate_name == "winding_obstruction" for n in rep.levels())
    n = 10_000
    avg = gns_project_invariant(spec, GNSVector({1: FourierPoly.constant(1.0)}, ALPHA), n)
    comp = avg.comps[1]
    # u_g = chi_g e(theta g (g - 1) / 2), so the average has coefficient e(theta g (g - 1) / 2) / n at g
    with mpmath.workdps(50):
        th = mpmath.sqrt(2) - 1
        oracle = np.array([complex(mpmath.expjpi(th * g * (g - 1))) for g in range(n)]) / n
    gap = float(np.max(np.abs(comp.window(0, n - 1) - oracle)))
    norm_gap = abs(avg.norm() - float(np.linalg.norm(oracle)))
    ok = all_winding and len(rep.levels()) == 24 and avg.norm() < 0.05 and gap < 1e-10 and norm_gap < 1e-10
    report_line(4, ok, f"24 levels winding-obstructed={all_winding}, |avg| at 1e4 = {avg.norm():.4f}, oracle gap {gap:.1e}")
    assert ok


@pytest.mark.xfail(strict=True, raises=AssertionError, reason="Fejer weights 1 - |k|/K are below 1 for every k != 0, so the mean is never exact")
def test_05_fejer_reconstruction(report_line):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(5):
        x = CPElement.random(rng, ALPHA, 3, 8)
        for K in (9, 16, 32):
            worst = max(worst, fejer_reconstruction(x, K).distance(x))
    ok = worst < 1e-13
    report_line(5, ok, f"max coefficient deviation {worst:.2e} for windows 9..32 (needs < 1e-13)")
    assert ok


def test_06_ergodicity_flags(report_line):
    triv = CocycleSpec.trivial(THETA, ALPHA)
    rep = classify_system(triv, 12)
    fp = fixed_point_check(triv, rep, samples=4, box=5)
    ok_triv = rep.m0 == 1 and rep.weakly_ergodic == Flag.FALSE and fp < 1e-10

    sh = bundled("liouville-harmonic")
    rh = classify_system(sh.spec, sh.n_max, sh.cfg, depth=sh.depth)
    v1 = rh.verdicts[1]
    ok_harm = v1.tag == MEASURABLE and rh.ue_wrt_fixed_point in (Flag.FALSE, Flag.INCONCLUSIVE)

    sc = bundled("liouville-constant")
    vc = classify(sc.spec.law, sc.spec.theta, sc.cfg, depth=sc.depth)
    # |W_hat(q_k)| = 1 for both +-q_k: partial sum 2 * depth exactly
    lb = vc.certificate["partial_sum_lower_bound"] if vc.certificate else None
    ok_const = vc.certificate_name == "l2_divergence" and lb is not None and abs(lb - 2 * sc.depth) < 1e-9
    ok = ok_triv and ok_harm and ok_const
    report_line(
        6,
        ok,
        f"trivial m0={rep.m0} weak={rep.weakly_ergodic.value} fixed-point residual {fp:.1e}; "
        f"harmonic level 1 {v1.tag} (heuristic={v1.heuristic}) ue_wrt_fixed={rh.ue_wrt_fixed_point.value}; "
        f"constant {vc.certificate_name} lower bound {lb}",
    )
    assert ok


def test_07_invariant_states(report_line):
    sc = bundled("constant-coboundary")
    rep = classify_system(sc.spec, sc.n_max, sc.cfg)
    assert len(sc.measures) == 5
    elements = [(g,) for g in range(-25, 25)]
    states = [state_from_report(rep, mu, sc.alpha) for mu in sc.measures]
    worst = max(check_invariance(st, sc.spec, elements, samples=30, seed=i) for i, st in enumerate(states))

    rng = np.random.default_rng(0)
    d1, dm = states[1], states[2]
    mix = state_from_report(rep, mixture([(0.5, sc.measures[1]), (0.5, sc.measures[2])]), sc.alpha)
    aff = max(abs(mix(x) - 0.5 * d1(x) - 0.5 * dm(x)) for x in (CPElement.random(rng, sc.alpha) for _ in range(20)))

    sep = 0.0
    for a in range(5):
        for b in range(a + 1, 5):
            mu, nu = sc.measures[a], sc.measures[b]
            for k in range(-3, 4):
                x = CPElement.monomial(states[a].witnesses(k), k * rep.n0, sc.alpha)
                diff = abs(mu.moment(k) - nu.moment(k))
                sep = max(sep, abs(abs(states[a](x) - states[b](x)) - diff))
    ok = worst < 1e-9 and aff < 1e-14 and sep < 1e-12
    report_line(7, ok, f"invariance {worst:.1e} (50 elements x 30 samples x 5 measures), affinity {aff:.1e}, separation error {sep:.1e}")
    assert ok


def test_08_conjugacy_suite(report_line):
    rng = np.random.default_rng(8)

    def spec(u):
        return CocycleSpec.one_dim(THETA, ALPHA, u)

    worst, accepted = 0.0, 0
    for i in range(20):
        v = UnitaryFn.random(rng, int(rng.integers(-2, 3)), 3, 0.1)
        if i < 10:
            u = v.times_constant(THETA.frac_times(int(rng.integers(1, 6))))
        else:
            w = UnitaryFn.random(rng, int(rng.integers(-2, 3)), 3, 0.1)
            u = v * w.rotate(THETA.float_value).conj() * w
        r = are_cohomologous(spec(u), spec(v))
        accepted += r.cohomologous == "yes"
        worst = max(worst, r.residual if r.residual is not None else math.inf)

    rejected = 0
    for _ in range(20):
        v = UnitaryFn.random(rng, int(rng.integers(-2, 3)), 3, 0.1)
        u = v * UnitaryFn.character(int(rng.choice([-2, -1, 1, 2])))
        r = are_cohomologous(spec(u), spec(v))
        rejected += r.cohomologous == "no" and r.verdict.certificate_name == "winding_obstruction"

    trans = 0.0
    for _ in range(5):
        z = UnitaryFn.random(rng, 1, 3, 0.1)
        w1, w2 = (UnitaryFn.random(rng, int(rng.integers(-1, 2)), 3, 0.1) for _ in range(2))
        v = z * w2.rotate(THETA.float_value).conj() * w2
        u = v * w1.rotate(THETA.float_value).conj() * w1
        a = are_cohomologous(spec(u), spec(v)).witness
        b = are_cohomologous(spec(v), spec(z)).witness
        trans = max(trans, coboundary_residual(u * z.conj(), a * b, THETA))
    ok = accepted == 20 and worst < 1e-9 and rejected == 20 and trans < 1e-9
    report_line(8, ok, f"{accepted}/20 cohomologous (intertwining {worst:.1e}), {rejected}/20 rejected, transitivity {trans:.1e}")
    assert ok


def test_09_masa_truncation(report_line):
    t0 = time.perf_counter()
    worst, dim = masa_offdiagonal_norm(ALPHA, band=64, n_band=8)
    dt = time.perf_counter() - t0
    ok = worst < 1e-9 and dim == 129 and dt < 300
    report_line(9, ok, f"commutant dimension {dim}, off-zero V-term norm {worst:.1e}, {dt:.1f} s")
    assert ok


def test_10_fixed_point_expectation(report_line):
    details, ok = [], True
    for name, spec in (("trivial", CocycleSpec.trivial(THETA, ALPHA)), ("constant-coboundary", bundled("constant-coboundary").spec)):
        rep = classify_system(spec, 4)
        x = CPElement.random(np.random.default_rng(10), ALPHA, 2, 2)
        fx = expectation_onto_fixed_points(spec, rep, x, 10_000)
        good = fx.stability < 1e-3 and fx.proportionality is not None and fx.proportionality < 1e-6
        ok &= good
        details.append(f"{name}: window gap {fx.stability:.1e}, proportionality {fx.proportionality:.1e}")
    report_line(10, ok, "; ".join(details))
    assert ok
