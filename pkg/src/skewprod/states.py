"""Invariant states Psi(mu) = phi_mu o T and the fixed-point expectation."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .classifier import ClassificationReport, witness_extend
from .cocycle import CocycleSpec, as_element
from .crossed import (
    CPElement,
    TwistCache,
    _Accumulator,
    apply_skew,
    box,
    canonical_state,
    cesaro_average,
    gns_norm,
)
from .torus import Angle, FourierPoly, UnitaryFn, unitary_poly

PSD_TOL = 1e-10


class MeasureError(ValueError):
    """Invalid probability measure data; ``field`` names the offending part."""

    def __init__(self, message: str, field: str = "", minor: int | None = None):
        super().__init__(message)
        self.field = field
        self.minor = minor


class MissingWitness(KeyError):
    pass


@dataclass(frozen=True)
class MeasureSpec:
    """Atoms (angle t in [0,1), weight) plus stored density moments c_k, k >= 0.

    The density part's total mass is its c_0; moments beyond the stored order
    are taken to be zero.
    """

    atoms: tuple[tuple[float, float], ...] = ()
    density_moments: Mapping[int, complex] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple((float(t), float(w)) for t, w in self.atoms))
        object.__setattr__(self, "density_moments", {int(k): complex(v) for k, v in dict(self.density_moments).items()})
        self.validate()

    # -- constructors -----------------------------------------------------
    @classmethod
    def haar(cls) -> MeasureSpec:
        return cls((), {0: 1.0}, name="haar")

    @classmethod
    def dirac(cls, t: float) -> MeasureSpec:
        return cls(((t, 1.0),), name=f"delta({t})")

    @classmethod
    def from_moments(cls, moments: Mapping[int, complex], name: str = "") -> MeasureSpec:
        return cls((), moments, name=name)

    # -- data -------------------------------------------------------------
    @property
    def order(self) -> int:
        return max((abs(k) for k in self.density_moments), default=0)

    def moment(self, k: int) -> complex:
        """c_k = int z^k dmu."""
        c = sum(w * cmath.exp(2j * math.pi * k * t) for t, w in self.atoms)
        if k >= 0:
            c += self.density_moments.get(k, 0.0)
        else:
            c += self.density_moments.get(-k, 0.0).conjugate()
        return complex(c)

    def toeplitz(self, order: int | None = None) -> np.ndarray:
        r = (self.order if order is None else order) + 1
        c = [self.moment(k) for k in range(-(r - 1), r)]
        return np.array([[c[i - j + r - 1] for j in range(r)] for i in range(r)])

    def validate(self) -> None:
        for i, (t, w) in enumerate(self.atoms):
            if w < 0:
                raise MeasureError(f"positivity violation: atom {i} has negative weight {w}", f"atoms[{i}]")
            if not 0.0 <= t < 1.0:
                raise MeasureError(f"atom {i} angle {t} outside [0, 1)", f"atoms[{i}]")
        if any(k < 0 for k in self.density_moments):
            raise MeasureError("density moments are stored for k >= 0 only", "moments")
        c0 = self.density_moments.get(0, 0.0)
        if abs(c0.imag) > 1e-12 or c0.real < -1e-12:
            raise MeasureError("density mass c_0 must be real and nonnegative", "moments")
        total = sum(w for _, w in self.atoms) + c0.real
        if abs(total - 1.0) > 1e-12:
            raise MeasureError(f"total mass {total} != 1", "atoms")
        minor = first_bad_minor(self._density_toeplitz())
        if minor is not None:
            raise MeasureError(f"moment sequence fails the Toeplitz test at minor {minor}", "moments", minor)

    def _density_toeplitz(self) -> np.ndarray:
        r = self.order + 1
        d = self.density_moments
        c = {k: d.get(k, 0.0) for k in range(r)}
        return np.array([[c[i - j] if i >= j else c[j - i].conjugate() for j in range(r)] for i in range(r)])

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "atoms": [list(a) for a in self.atoms],
            "moments": [[k, v.real, v.imag] for k, v in sorted(self.density_moments.items())],
        }


def first_bad_minor(T: np.ndarray, tol: float = PSD_TOL) -> int | None:
    """Size of the first leading principal minor with a negative determinant or eigenvalue."""
    for r in range(1, T.shape[0] + 1):
        sub = T[:r, :r]
        if np.linalg.det(sub).real < -tol or np.min(np.linalg.eigvalsh(sub)) < -tol:
            return r
    return None


def mixture(parts: Iterable[tuple[float, MeasureSpec]], name: str = "") -> MeasureSpec:
    atoms, dens = [], {}
    for p, mu in parts:
        atoms += [(t, p * w) for t, w in mu.atoms]
        for k, v in mu.density_moments.items():
            dens[k] = dens.get(k, 0.0) + p * v
    return MeasureSpec(tuple(atoms), dens, name=name)


# ---------------------------------------------------------------------------
# gauge averaging and T


def beta_gauge(x: CPElement, n0: int) -> CPElement:
    """a_n -> e^{2 pi i n / n0} a_n."""
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    return x._like({n: a * cmath.exp(2j * math.pi * (n % n0) / n0) for n, a in x.terms.items()})


def expectation_n0(x: CPElement, n0: int) -> CPElement:
    """(1/n0) sum_k beta^k: keeps the terms with n in n0 Z."""
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    return x._like({n: a for n, a in x.terms.items() if n % n0 == 0})


def haar_pairing(a: FourierPoly, w: FourierPoly) -> complex:
    """omega_0(a w*) = sum_m a_hat(m) conj(w_hat(m))."""
    lo, hi = max(a.lo, w.lo), min(a.hi, w.hi)
    if lo > hi:
        return 0j
    return complex(np.vdot(w.window(lo, hi), a.window(lo, hi)))


class WitnessFamily:
    """w_{k n0} generated from w_{n0} by the V^{n0}-power rule, expanded lazily."""

    def __init__(self, w: UnitaryFn | Mapping[int, FourierPoly | UnitaryFn], n0: int, alpha: Angle | None = None):
        self.n0 = n0
        self.alpha = alpha
        self._base = w if isinstance(w, UnitaryFn) else None
        self._polys: dict[int, FourierPoly] = {}
        if self._base is None:
            for k, v in dict(w).items():
                self._polys[int(k)] = unitary_poly(v) if isinstance(v, UnitaryFn) else v
        self._polys.setdefault(0, FourierPoly.constant(1.0))

    def __call__(self, k: int) -> FourierPoly:
        p = self._polys.get(k)
        if p is None:
            if self._base is None:
                raise MissingWitness(f"no witness for level {k * self.n0}")
            p = self._polys[k] = unitary_poly(witness_extend(self._base, self.n0, k, self.alpha))
        return p


def T_map(x: CPElement, n0: int, witnesses: WitnessFamily | Mapping[int, FourierPoly]) -> list[tuple[int, complex]]:
    """Coefficients of T(x) on {V^{k n0}}: omega_0(a_{k n0} w_{k n0}*)."""
    if not isinstance(witnesses, WitnessFamily):
        witnesses = WitnessFamily(witnesses, n0)
    out = []
    for n, a in expectation_n0(x, n0).terms.items():
        k = n // n0
        out.append((k, haar_pairing(a, witnesses(k))))
    return out or [(0, 0j)]


@dataclass
class StateFunctional:
    """Psi(mu)(x) = sum_k c_k omega_0(a_{k n0} w_{k n0}*)."""

    n0: int
    witnesses: WitnessFamily
    moment: Callable[[int], complex]
    measure: MeasureSpec | None = None

    def __call__(self, x: CPElement) -> complex:
        return sum((self.moment(k) * v for k, v in T_map(x, self.n0, self.witnesses)), 0j)

    def positivity_gap(self, alpha: Angle, samples: int = 20, seed: int = 0) -> float:
        """min Re psi(x* x) over random band-3 elements (should be >= -1e-10)."""
        rng = np.random.default_rng(seed)
        worst = math.inf
        for _ in range(samples):
            x = CPElement.random(rng, alpha, band=3, support=3)
            worst = min(worst, self(x.adjoint() * x).real)
        return worst


def state_from_measure(mu: MeasureSpec, n0: int, witnesses, alpha: Angle | None = None) -> StateFunctional:
    mu.validate()
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    if not isinstance(witnesses, WitnessFamily):
        witnesses = WitnessFamily(witnesses, n0, alpha)
    return StateFunctional(n0, witnesses, mu.moment, mu)


def state_from_report(report: ClassificationReport, mu: MeasureSpec, alpha: Angle) -> StateFunctional | None:
    """Psi(mu) built from the report's level-n0 witness; None when only omega is invariant."""
    if not report.n0:
        return None
    w = report.witness_table.get(report.n0)
    if not isinstance(w, UnitaryFn):
        raise TypeError(f"level {report.n0} has no trigonometric witness")
    return state_from_measure(mu, report.n0, w, alpha)


def _group_elements(spec: CocycleSpec, elements) -> list[tuple[int, ...]]:
    if isinstance(elements, int):
        half = elements
        return [tuple(int(v) - half for v in g) for g in np.ndindex(*([2 * half + 1] * spec.dim))]
    return [as_element(g, spec.dim) for g in elements]


def check_invariance(
    state: StateFunctional,
    spec: CocycleSpec,
    elements=3,
    samples: int = 10,
    seed: int = 0,
    support: int = 3,
) -> float:
    """max |psi(Phi_g x) - psi(x)| over group elements and random band-3 x.

    ``elements`` is a half-width of a centred box or an explicit list.
    """
    rng = np.random.default_rng(seed)
    gs = _group_elements(spec, elements)
    cache = TwistCache(spec)
    worst = 0.0
    for _ in range(samples):
        x = CPElement.random(rng, spec.alpha_angle, band=3, support=support)
        base = state(x)
        for g in gs:
            worst = max(worst, abs(state(apply_skew(spec, g, x, cache)) - base))
    return worst


# ---------------------------------------------------------------------------
# conditional expectation onto the fixed points


def bump_weights(N: int) -> np.ndarray:
    """exp(-1/(t(1-t))) at t = (g+1)/(N+1), normalised; smooth weighted averages
    converge much faster than flat ones for Diophantine rotations."""
    t = (np.arange(N) + 1.0) / (N + 1.0)
    w = np.exp(-1.0 / (t * (1.0 - t)))
    return w / w.sum()


def weighted_average(spec: CocycleSpec, x: CPElement, window: int) -> CPElement:
    """sum_g b(g) Phi_g(x) with product bump weights over the box."""
    weights = bump_weights(window)
    acc = _Accumulator(x.caps.m)
    cache = TwistCache(spec, x.caps.m)
    for g in box(window, spec.dim):
        wt = float(np.prod([weights[i] for i in g]))
        shift = spec.shift_fraction(g)
        for n, a in x.terms.items():
            acc.add(n, a.rotate(shift) * cache.poly(g, n) * wt)
    return x._like(acc.result(1.0))


def double_window(spec: CocycleSpec, avg: CPElement, window: int) -> CPElement:
    """M_{2w} from M_w: the doubled box is the union of 2^d translates."""
    out = CPElement.zero(avg.alpha)
    cache = TwistCache(spec, avg.caps.m)
    for h in np.ndindex(*([2] * spec.dim)):
        out = out + apply_skew(spec, tuple(window * v for v in h), avg, cache)
    return out * (1.0 / 2**spec.dim)


@dataclass
class FixedPointExpectation:
    average: CPElement
    stability: float
    limit: CPElement
    limit_shift: float
    proportionality: float | None
    coefficients: dict[int, complex]

    def to_json(self) -> dict:
        return {
            "average": self.average.to_json(),
            "stability": self.stability,
            "limit_estimate": self.limit.to_json(),
            "limit_vs_average": self.limit_shift,
            "proportionality_residual": self.proportionality,
            "witness_coefficients": {str(k): [v.real, v.imag] for k, v in self.coefficients.items()},
        }


def expectation_onto_fixed_points(
    spec: CocycleSpec,
    report: ClassificationReport,
    x: CPElement,
    window: int,
) -> FixedPointExpectation:
    """Cesaro average M_w(x) with the stability gap ||M_2w - M_w||, a bump-weighted
    limit estimate, and its deviation from span{w_{k m0} V^{k m0}}."""
    avg = cesaro_average(spec, x, window)
    stability = gns_norm(double_window(spec, avg, window) - avg)
    limit = weighted_average(spec, x, window)
    prop = None
    coeffs: dict[int, complex] = {}
    m0 = report.m0
    w = report.fixed_point_generator[0] if report.fixed_point_generator else None
    if m0 and isinstance(w, UnitaryFn):
        fam = WitnessFamily(w, m0, spec.alpha_angle)
        resid = 0.0
        for n, a in limit.terms.items():
            if n % m0:
                resid += a.l2_norm() ** 2
                continue
            wk = fam(n // m0)
            c = haar_pairing(a, wk) / haar_pairing(wk, wk)
            coeffs[n // m0] = c
            resid += (a - wk * c).l2_norm() ** 2
        prop = math.sqrt(resid)
    elif not m0:
        # weakly ergodic: the limit should be a scalar
        prop = math.sqrt(max(0.0, gns_norm(limit) ** 2 - abs(canonical_state(limit)) ** 2))
        coeffs[0] = canonical_state(limit)
    return FixedPointExpectation(avg, stability, limit, gns_norm(limit - avg), prop, coeffs)
