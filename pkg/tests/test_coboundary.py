from fractions import Fraction

import mpmath
import numpy as np
import pytest

from skewprod.cocycle import CoefficientLaw
from skewprod.coboundary import (
    CONTINUOUS,
    INCONCLUSIVE,
    MEASURABILITY_CONVENTION,
    MEASURABLE,
    NOT_COBOUNDARY,
    DetectorConfig,
    DetectorRefused,
    classify,
    coboundary_residual,
    detect_invariant_vector,
    excludes_measurable,
    geometric_matrix_sum,
    law_terms,
    solve_analytic,
    solve_continuous,
)
from skewprod.torus import FourierPoly, RotationNumber, UnitaryFn, unitary_poly

GOLDEN = RotationNumber.golden()
SILVER = RotationNumber.silver()
LIOUVILLE = RotationNumber.liouville()


def built_coboundary(w: UnitaryFn, theta) -> UnitaryFn:
    return w.rotate(theta.float_value).conj() * w


def test_trivial_unitary():
    v = solve_continuous(UnitaryFn.one(), GOLDEN)
    assert v.tag == CONTINUOUS
    assert v.witness.winding == 0 and v.witness.phase.is_zero()
    assert v.diagnostics["residual"] == 0


def test_constant_theta_has_character_witness():
    u = UnitaryFn.constant(GOLDEN.float_value)
    v = solve_continuous(u, GOLDEN)
    assert v.tag == CONTINUOUS and v.witness.winding == -1
    # substitution: conj(chi_-1(x + t)) chi_-1(x) = e(t)
    x = np.linspace(0, 1, 101)
    lhs = np.conj(v.witness.evaluate(x + GOLDEN.float_value)) * v.witness.evaluate(x)
    assert np.max(np.abs(lhs - np.exp(2j * np.pi * GOLDEN.float_value))) < 1e-13


def test_cosine_phase_divisor():
    u = UnitaryFn(0, FourierPoly.cosine(1, 1.0))
    v = solve_continuous(u, GOLDEN)
    assert v.tag == CONTINUOUS
    with mpmath.workdps(40):
        t = (mpmath.sqrt(5) - 1) / 2
        want = 0.5 / abs(1 - mpmath.expjpi(2 * t))
    assert abs(abs(v.witness.phase.coeff(1)) - float(want)) < 1e-14
    assert v.diagnostics["residual"] < 1e-10


def test_winding_obstruction():
    v = classify(UnitaryFn.character(1), SILVER)
    assert v.tag == NOT_COBOUNDARY and v.certificate_name == "winding_obstruction"


def test_mean_obstruction_against_integer_search():
    c = Fraction(123456, 10**6)
    # exact oracle: no |m| <= 10^4 brings c + m theta within 1e-9 of Z
    with mpmath.workdps(40):
        th = mpmath.sqrt(2) - 1
        best = min(
            abs(mpmath.mpf(c.numerator) / c.denominator + m * th - mpmath.nint(mpmath.mpf(c.numerator) / c.denominator + m * th))
            for m in range(-10_000, 10_001)
        )
    assert best > 1e-9
    v = classify(UnitaryFn.constant(float(c)), SILVER, DetectorConfig(winding_search=10_000))
    assert v.tag == NOT_COBOUNDARY and v.certificate_name == "mean_obstruction"
    assert abs(v.certificate["min_distance"] - float(best)) < 1e-12


def test_detector_constant_one():
    ev = detect_invariant_vector(UnitaryFn.one(), SILVER)
    assert abs(ev.max_norm - 1) < 1e-12 and ev.argmax == 0


def test_detector_geometric_sum_oracle():
    K = 10_000
    cfg = DetectorConfig(iterations=K)
    with mpmath.workdps(40):
        c = mpmath.sqrt(3) - 1
        th = mpmath.sqrt(2) - 1
        ev = detect_invariant_vector(UnitaryFn.constant(float(c)), SILVER, cfg)
        for m, val in ev.norms.items():
            d = c + m * th
            want = abs(mpmath.sin(mpmath.pi * K * d)) / (K * abs(mpmath.sin(mpmath.pi * d)))
            assert abs(val - float(want)) < 1e-12
    assert ev.max_norm < 10 / np.sqrt(K)


def test_detector_eigenvector_for_theta_constant():
    ev = detect_invariant_vector(UnitaryFn.constant(SILVER.float_value), SILVER)
    assert ev.argmax == -1 and ev.max_norm > 1 - 1e-9


def test_detector_sees_built_coboundary():
    rng = np.random.default_rng(3)
    w = UnitaryFn.random(rng, 0, 3, 0.03)
    ev = detect_invariant_vector(built_coboundary(w, SILVER), SILVER, DetectorConfig(band=32))
    assert ev.max_norm > DetectorConfig().existence_threshold
    # the limit projects chi_m onto the invariant line through w
    what = unitary_poly(w)
    assert abs(ev.max_norm - max(abs(what.coeff(m)) for m in range(-8, 9))) < 1e-3


def test_detector_refuses_small_band():
    u = UnitaryFn(0, FourierPoly.cosine(1, 3.0))
    with pytest.raises(DetectorRefused):
        detect_invariant_vector(u, SILVER, DetectorConfig(band=4, battery=2))


def test_detector_monotone_in_iterations():
    u = UnitaryFn.constant(0.3)
    prev = None
    for K in (1000, 4000, 16_000, 64_000):
        m = detect_invariant_vector(u, SILVER, DetectorConfig(iterations=K)).max_norm
        if prev is not None:
            assert m <= prev + 1 / K
        prev = m


def test_geometric_matrix_sum_matches_loop():
    rng = np.random.default_rng(4)
    W = rng.standard_normal((5, 5)) / 3
    for K in (1, 2, 7, 16):
        want = sum(np.linalg.matrix_power(W, j) for j in range(K))
        assert np.allclose(geometric_matrix_sum(W, K), want, atol=1e-12)


@pytest.mark.parametrize("seed", range(8))
def test_round_trip_recovers_witness(seed):
    rng = np.random.default_rng(seed)
    w = UnitaryFn.random(rng, int(rng.integers(-3, 4)), int(rng.integers(1, 6)), 0.2)
    u = built_coboundary(w, GOLDEN)
    v = classify(u, GOLDEN)
    assert v.tag == CONTINUOUS
    assert coboundary_residual(u, v.witness, GOLDEN) < 1e-10
    # equal up to a global phase
    assert v.witness.winding == w.winding
    diff = (v.witness.phase - w.phase).to_dict()
    diff.pop(0, None)
    assert all(abs(c) < 1e-8 for c in diff.values())


def test_solver_convention_and_config():
    assert "l2-summable" in MEASURABILITY_CONVENTION
    with pytest.raises(ValueError):
        DetectorConfig(null_threshold=0.6, existence_threshold=0.5)
    with pytest.raises(ValueError):
        DetectorConfig(band=4, battery=8)
    assert DetectorConfig(iterations=10_000).tau == pytest.approx(0.1)


def test_liouville_harmonic_law_measurable_evidence():
    law = CoefficientLaw("match-divisor", "harmonic")
    terms = law_terms(law, LIOUVILLE, 6)
    # oracle: |W_hat(q_k)| = 1/k exactly
    for t in terms:
        assert abs(t.magnitude - 1 / t.k) < 1e-12
    v = solve_analytic(law, LIOUVILLE, depth=12)
    assert v.tag in (MEASURABLE, INCONCLUSIVE)
    assert v.tag != CONTINUOUS
    ub = v.diagnostics["l2_upper_bound"]
    # 2 * sum 1/k^2 <= pi^2 / 3
    assert ub <= np.pi**2 / 3 + 2 / 12 + 1e-12
    if v.tag == MEASURABLE:
        assert v.heuristic
    assert v.diagnostics["convention"] == MEASURABILITY_CONVENTION


def test_liouville_constant_law_diverges():
    v = classify(CoefficientLaw("match-divisor", "constant"), LIOUVILLE, depth=12)
    assert v.tag == NOT_COBOUNDARY and v.certificate_name == "l2_divergence"
    assert v.certificate["partial_sum_lower_bound"] == pytest.approx(24.0, abs=1e-9)
    assert v.certificate["riemann_lebesgue_violation"]
    assert excludes_measurable(v)


def test_summable_law_is_continuous():
    v = solve_analytic(CoefficientLaw("match-divisor", "geometric:0.5"), LIOUVILLE, depth=8)
    assert v.tag == CONTINUOUS and v.diagnostics["residual"] < 1e-12


def test_empty_law():
    v = solve_analytic(CoefficientLaw(empty=True), LIOUVILLE)
    assert v.tag == CONTINUOUS and v.witness.phase.is_zero()


def test_law_support_mismatch():
    with pytest.raises(ValueError):
        law_terms(CoefficientLaw(), RotationNumber((0, 3, 5)), 4)
    with pytest.raises(TypeError):
        law_terms(CoefficientLaw(), 0.3, 4)


def test_verdict_serialization_is_stable():
    u = UnitaryFn(0, FourierPoly.cosine(2, 0.3))
    a = classify(u, SILVER).to_json()
    b = classify(u, SILVER).to_json()
    assert a == b and a["tag"] == CONTINUOUS
    assert all(len(t) == 3 for t in a["witness"]["phase"])
