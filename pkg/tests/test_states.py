import cmath
import math

import numpy as np
import pytest

from skewprod.classifier import classify_system
from skewprod.cocycle import CocycleSpec
from skewprod.crossed import CPElement, canonical_state, gns_norm
from skewprod.states import (
    MeasureError,
    MeasureSpec,
    MissingWitness,
    T_map,
    WitnessFamily,
    beta_gauge,
    bump_weights,
    check_invariance,
    double_window,
    expectation_n0,
    expectation_onto_fixed_points,
    first_bad_minor,
    mixture,
    state_from_measure,
    state_from_report,
)
from skewprod.torus import FourierPoly, RotationNumber, UnitaryFn, unitary_poly

THETA = RotationNumber.silver()
ALPHA = RotationNumber.golden()


def constant_coboundary_system(m=1):
    spec = CocycleSpec.one_dim(THETA, ALPHA, UnitaryFn.constant(THETA.frac_times(m)))
    return spec, classify_system(spec, 4)


def test_measure_validation():
    MeasureSpec.haar()
    MeasureSpec.dirac(0.25)
    with pytest.raises(MeasureError) as exc:
        MeasureSpec(((0.0, 1.2), (0.5, -0.2)))
    assert exc.value.field == "atoms[1]"
    with pytest.raises(MeasureError):
        MeasureSpec(((0.0, 0.5),))
    with pytest.raises(MeasureError):
        MeasureSpec(((1.0, 1.0),))
    # |c_1| > c_0 cannot come from a positive measure
    with pytest.raises(MeasureError) as exc:
        MeasureSpec.from_moments({0: 1.0, 1: 0.8, 2: -0.9})
    assert exc.value.minor == 3


def test_moments_and_toeplitz():
    mu = mixture([(0.5, MeasureSpec.dirac(0.0)), (0.5, MeasureSpec.dirac(0.5))])
    for k in range(-4, 5):
        assert abs(mu.moment(k) - (1 + (-1) ** k) / 2) < 1e-15
    nu = MeasureSpec.from_moments({0: 1.0, 1: 0.3 + 0.1j})
    assert nu.moment(-1) == pytest.approx(0.3 - 0.1j)
    assert first_bad_minor(nu.toeplitz(3)) is None
    assert first_bad_minor(np.array([[1.0, 2.0], [2.0, 1.0]])) == 2


def test_gauge_and_conditional_expectation():
    rng = np.random.default_rng(0)
    x = CPElement.random(rng, ALPHA, 2, 4)
    e2 = expectation_n0(x, 2)
    assert e2.support == [-4, -2, 0, 2, 4]
    assert expectation_n0(e2, 2).distance(e2) == 0
    avg = CPElement.zero(ALPHA)
    y = x
    for _ in range(3):
        avg = avg + y * (1 / 3)
        y = beta_gauge(y, 3)
    assert avg.distance(expectation_n0(x, 3)) < 1e-14
    with pytest.raises(ValueError):
        beta_gauge(x, 0)


def test_t_map_examples():
    w = UnitaryFn(-1, FourierPoly.cosine(1, 0.1))
    fam = WitnessFamily(w, 1, ALPHA)
    assert T_map(CPElement.one(ALPHA), 1, fam) == [(0, 1)]
    x = CPElement.monomial(unitary_poly(w), 1, ALPHA)
    (k, v), = T_map(x, 1, fam)
    assert k == 1 and abs(v - 1) < 1e-13
    chi = CPElement.monomial(FourierPoly.character(1), 0, ALPHA)
    assert T_map(chi, 1, {0: FourierPoly.constant(1.0)}) == [(0, 0)]
    # off-lattice terms are annihilated
    assert T_map(CPElement.V(ALPHA, 3), 2, {0: FourierPoly.constant(1.0)}) == [(0, 0j)]
    with pytest.raises(MissingWitness):
        T_map(CPElement.V(ALPHA, 2), 2, {0: FourierPoly.constant(1.0)})


def test_haar_state_is_canonical():
    spec, rep = constant_coboundary_system()
    st = state_from_report(rep, MeasureSpec.haar(), ALPHA)
    rng = np.random.default_rng(1)
    for _ in range(10):
        x = CPElement.random(rng, ALPHA, 3, 3)
        assert abs(st(x) - canonical_state(x)) < 1e-12


def test_dirac_state_pairs_with_witnesses():
    spec, rep = constant_coboundary_system()
    st = state_from_report(rep, MeasureSpec.dirac(0.0), ALPHA)
    a = FourierPoly.random(np.random.default_rng(2), 3)
    for k in (-2, 1, 3):
        wk = st.witnesses(k)
        want = np.sum(a.window(-8, 8) * np.conj(wk.window(-8, 8)))
        assert abs(st(CPElement.monomial(a, k, ALPHA)) - want) < 1e-13


def test_affinity_is_exact():
    spec, rep = constant_coboundary_system()
    d1 = state_from_report(rep, MeasureSpec.dirac(0.0), ALPHA)
    dm = state_from_report(rep, MeasureSpec.dirac(0.5), ALPHA)
    mix = state_from_report(rep, mixture([(0.5, MeasureSpec.dirac(0.0)), (0.5, MeasureSpec.dirac(0.5))]), ALPHA)
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = CPElement.random(rng, ALPHA, 3, 3)
        assert abs(mix(x) - 0.5 * d1(x) - 0.5 * dm(x)) < 1e-14


def test_injectivity_on_witness_monomials():
    spec, rep = constant_coboundary_system()
    mu = MeasureSpec.from_moments({0: 1.0, 1: 0.3, 2: 0.1j})
    nu = MeasureSpec.from_moments({0: 1.0, 1: 0.3, 2: -0.1j})
    a, b = state_from_report(rep, mu, ALPHA), state_from_report(rep, nu, ALPHA)
    for k in range(-3, 4):
        x = CPElement.monomial(a.witnesses(k), k, ALPHA)
        assert abs(abs(a(x) - b(x)) - abs(mu.moment(k) - nu.moment(k))) < 1e-13
    x = CPElement.monomial(a.witnesses(2), 2, ALPHA)
    assert abs(a(x) - b(x)) == pytest.approx(0.2)


@pytest.mark.parametrize(
    "mu",
    [
        MeasureSpec.haar(),
        MeasureSpec.dirac(0.0),
        MeasureSpec.dirac(0.5),
        mixture([(0.3, MeasureSpec.dirac(0.1)), (0.7, MeasureSpec.dirac(0.6))]),
        MeasureSpec.from_moments({0: 1.0, 1: 0.4, 2: 0.1 + 0.1j}),
    ],
)
def test_invariance_and_positivity(mu):
    spec, rep = constant_coboundary_system(2)
    st = state_from_report(rep, mu, ALPHA)
    assert check_invariance(st, spec, 4, samples=6) < 1e-10
    assert st.positivity_gap(ALPHA, samples=10) > -1e-10


def test_non_invariant_functional_is_flagged():
    spec, rep = constant_coboundary_system()
    # the trivial witness family does not solve u = e(theta)
    st = state_from_measure(MeasureSpec.dirac(0.0), 1, {k: FourierPoly.constant(1.0) for k in range(-3, 4)})
    assert check_invariance(st, spec, 2, samples=3) > 1e-3


def test_report_without_coboundary_levels():
    spec = CocycleSpec.one_dim(THETA, ALPHA, UnitaryFn.character(1))
    rep = classify_system(spec, 2)
    assert state_from_report(rep, MeasureSpec.haar(), ALPHA) is None


def test_bump_weights():
    w = bump_weights(100)
    assert abs(w.sum() - 1) < 1e-14 and np.all(w > 0)
    assert abs(w[0] - w[-1]) < 1e-18


def test_double_window_matches_direct_average():
    from skewprod.crossed import cesaro_average

    spec = CocycleSpec.one_dim(THETA, ALPHA, UnitaryFn(1, FourierPoly.cosine(1, 0.05)))
    x = CPElement.random(np.random.default_rng(4), ALPHA, 2, 1)
    avg = cesaro_average(spec, x, 16)
    assert double_window(spec, avg, 16).distance(cesaro_average(spec, x, 32)) < 1e-13


def test_fixed_point_expectation_trivial_system():
    spec = CocycleSpec.trivial(THETA, ALPHA)
    rep = classify_system(spec, 3)
    x = CPElement.random(np.random.default_rng(5), ALPHA, 2, 2)
    fx = expectation_onto_fixed_points(spec, rep, x, 2000)
    assert fx.stability < 1e-2
    assert fx.proportionality < 1e-6
    # the limit is sum_n haar(a_n) V^n
    for n in range(-2, 3):
        assert abs(fx.coefficients[n] - x.coeff(n).coeff(0)) < 1e-9


def test_fixed_point_expectation_weakly_ergodic():
    spec = CocycleSpec.one_dim(THETA, ALPHA, UnitaryFn.character(1))
    rep = classify_system(spec, 2)
    x = CPElement({0: FourierPoly.cosine(1, 1.0) + 0.5}, ALPHA)
    fx = expectation_onto_fixed_points(spec, rep, x, 500)
    assert abs(fx.coefficients[0] - 0.5) < 1e-9 and fx.proportionality < 1e-6
    assert gns_norm(fx.limit) == pytest.approx(0.5, abs=1e-9)
    assert math.isfinite(fx.stability)
    assert cmath.isclose(fx.to_json()["witness_coefficients"]["0"][0], 0.5, abs_tol=1e-9)
