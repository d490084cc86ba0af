"""Finite elements of the crossed product C(T) x_alpha Z.

An element is a finite sum sum_n a_n V^n with a_n trigonometric polynomials
and V a V* = alpha(a), where (alpha f)(x) = f(x + alpha_angle).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .cocycle import CocycleSpec, as_element, twisted_family
from .torus import (
    Angle,
    BandOverflow,
    FourierPoly,
    UnitaryFn,
    angle_value,
    frac_times,
    unitary_poly,
)

M_CAP = 512
N_CAP = 64
# vectors in L^2 are cheap to store, and Cesaro averages of winding cocycles
# spread mass over as many frequencies as the window is long
GNS_M_CAP = 1 << 15


@dataclass(frozen=True)
class Caps:
    m: int = M_CAP
    n: int = N_CAP

    def check(self, terms: dict[int, FourierPoly]) -> None:
        for n, a in terms.items():
            if abs(n) > self.n:
                raise BandOverflow(f"V-power {n} exceeds cap {self.n}")
            if a.band > self.m:
                raise BandOverflow(f"frequency {a.band} in V^{n} term exceeds cap {self.m}")


DEFAULT_CAPS = Caps()


def same_angle(a: Angle, b: Angle) -> bool:
    if a is b or a == b:
        return True
    return abs(angle_value(a) - angle_value(b)) < 1e-15


class CPElement:
    """sum_n terms[n] V^n; zero terms are dropped."""

    __slots__ = ("terms", "alpha", "caps")

    def __init__(self, terms: dict[int, FourierPoly], alpha: Angle, caps: Caps = DEFAULT_CAPS):
        clean = {int(n): a for n, a in terms.items() if not a.is_zero()}
        caps.check(clean)
        self.terms = dict(sorted(clean.items()))
        self.alpha = alpha
        self.caps = caps

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, alpha: Angle) -> CPElement:
        return cls({}, alpha)

    @classmethod
    def one(cls, alpha: Angle) -> CPElement:
        return cls({0: FourierPoly.constant(1.0)}, alpha)

    @classmethod
    def monomial(cls, a: FourierPoly | complex, n: int, alpha: Angle) -> CPElement:
        if not isinstance(a, FourierPoly):
            a = FourierPoly.constant(a)
        return cls({n: a}, alpha)

    @classmethod
    def V(cls, alpha: Angle, n: int = 1) -> CPElement:
        return cls.monomial(1.0, n, alpha)

    @classmethod
    def random(cls, rng: np.random.Generator, alpha: Angle, band: int = 3, support: int = 3) -> CPElement:
        return cls({n: FourierPoly.random(rng, band) for n in range(-support, support + 1)}, alpha)

    # -- access -------------------------------------------------------------
    def coeff(self, n: int) -> FourierPoly:
        return self.terms.get(n, FourierPoly.zero())

    @property
    def support(self) -> list[int]:
        return list(self.terms)

    @property
    def band(self) -> int:
        return max((a.band for a in self.terms.values()), default=0)

    def _like(self, terms: dict[int, FourierPoly]) -> CPElement:
        return CPElement(terms, self.alpha, self.caps)

    def _check(self, other: CPElement) -> None:
        if not same_angle(self.alpha, other.alpha):
            raise ValueError("crossed-product elements over different alpha angles")

    # -- algebra ----------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, CPElement):
            other = CPElement.monomial(other, 0, self.alpha)
        self._check(other)
        out = dict(self.terms)
        for n, b in other.terms.items():
            out[n] = out[n] + b if n in out else b
        return self._like(out)

    __radd__ = __add__

    def __neg__(self):
        return self._like({n: -a for n, a in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, CPElement):
            return multiply(self, other)
        return self._like({n: a * other for n, a in self.terms.items()})

    def __rmul__(self, other):
        return self._like({n: a * other for n, a in self.terms.items()})

    def adjoint(self) -> CPElement:
        return adjoint(self)

    def distance(self, other: CPElement) -> float:
        """Largest coefficient deviation."""
        d = self - other
        return max((float(np.max(np.abs(a.c))) for a in d.terms.values()), default=0.0)

    def to_json(self) -> list[dict]:
        return [{"n": n, "coeffs": a.to_triples()} for n, a in self.terms.items()]

    @classmethod
    def from_json(cls, data: Iterable[dict], alpha: Angle) -> CPElement:
        return cls({int(d["n"]): FourierPoly.from_triples(d["coeffs"]) for d in data}, alpha)

    def __repr__(self):
        return f"CPElement(support={self.support}, band={self.band})"


def multiply(x: CPElement, y: CPElement) -> CPElement:
    """(a V^m)(b V^n) = a alpha^m(b) V^{m+n}."""
    x._check(y)
    out: dict[int, FourierPoly] = {}
    for m, a in x.terms.items():
        shift = frac_times(x.alpha, m)
        for n, b in y.terms.items():
            t = a * b.rotate(shift)
            out[m + n] = out[m + n] + t if m + n in out else t
    return x._like(out)


def adjoint(x: CPElement) -> CPElement:
    """(a V^n)* = alpha^{-n}(conj a) V^{-n}."""
    return x._like({-n: a.conj().rotate(frac_times(x.alpha, -n)) for n, a in x.terms.items()})


def expectation(x: CPElement) -> FourierPoly:
    return x.coeff(0)


def canonical_state(x: CPElement) -> complex:
    """omega(a V^k) = haar(a) delta_{k,0}."""
    return x.coeff(0).coeff(0)


def gauge(x: CPElement, z: complex) -> CPElement:
    if abs(abs(z) - 1.0) > 1e-12:
        raise ValueError("gauge parameter must be unimodular")
    return x._like({n: a * (z**n) for n, a in x.terms.items()})


def gns_norm(x: CPElement) -> float:
    """omega(x* x)^{1/2} = (sum_n ||a_n||_2^2)^{1/2}."""
    return math.sqrt(sum(a.l2_norm() ** 2 for a in x.terms.values()))


# ---------------------------------------------------------------------------
# skew automorphisms


class TwistCache:
    """Memoized Fourier polynomials of u_g^(n) for one spec."""

    def __init__(self, spec: CocycleSpec, cap: int = M_CAP):
        if spec.is_analytic:
            raise TypeError("skew automorphisms need a trigonometric cocycle")
        self.spec = spec
        self.cap = cap
        self._polys: dict[tuple, FourierPoly] = {}

    def unitary(self, g, n: int) -> UnitaryFn:
        return twisted_family(self.spec, g, n)

    def poly(self, g, n: int) -> FourierPoly:
        key = (as_element(g, self.spec.dim), n)
        p = self._polys.get(key)
        if p is None:
            p = FourierPoly.constant(1.0) if n == 0 else unitary_poly(self.unitary(g, n), self.cap)
            if len(self._polys) < 4096:
                self._polys[key] = p
        return p


def _check_spec(spec: CocycleSpec, alpha: Angle) -> None:
    if not same_angle(spec.alpha_angle, alpha):
        raise ValueError("cocycle spec and element use different alpha angles")


def apply_skew(spec: CocycleSpec, g, x: CPElement, cache: TwistCache | None = None) -> CPElement:
    """Phi_g(a_n V^n) = theta_g(a_n) u_g^(n) V^n."""
    _check_spec(spec, x.alpha)
    g = as_element(g, spec.dim)
    cache = cache or TwistCache(spec, x.caps.m)
    shift = spec.shift_fraction(g)
    return x._like({n: a.rotate(shift) * cache.poly(g, n) for n, a in x.terms.items()})


def box(n: int, dim: int) -> Iterable[tuple[int, ...]]:
    """Folner box {0..n-1}^dim in lexicographic order."""
    return itertools.product(range(n), repeat=dim)


class _Accumulator:
    """Dense per-V-power buffers over frequencies [-cap, cap]."""

    def __init__(self, cap: int):
        self.cap = cap
        self.buf: dict[int, np.ndarray] = {}

    def add(self, n: int, p: FourierPoly) -> None:
        if p.is_zero():
            return
        if p.band > self.cap:
            raise BandOverflow(f"frequency {p.band} exceeds cap {self.cap}")
        b = self.buf.get(n)
        if b is None:
            b = self.buf[n] = np.zeros(2 * self.cap + 1, dtype=np.complex128)
        i = p.lo + self.cap
        b[i:i + len(p.c)] += p.c

    def result(self, scale: float) -> dict[int, FourierPoly]:
        return {n: FourierPoly(-self.cap, b * scale) for n, b in self.buf.items()}


def cesaro_average(spec: CocycleSpec, x: CPElement, window: int) -> CPElement:
    """M_n(x) = n^{-d} sum_{g in box} Phi_g(x), summed in ascending g."""
    if window < 1:
        raise ValueError("window must be >= 1")
    _check_spec(spec, x.alpha)
    acc = _Accumulator(x.caps.m)
    cache = TwistCache(spec, x.caps.m)
    for g in box(window, spec.dim):
        shift = spec.shift_fraction(g)
        for n, a in x.terms.items():
            acc.add(n, a.rotate(shift) * cache.poly(g, n))
    return x._like(acc.result(1.0 / window**spec.dim))


# ---------------------------------------------------------------------------
# GNS space of the canonical state


class GNSVector:
    """Vector sum_k [xi_k V^k] in H_omega = (+)_k H_k with H_0 = L^2(T).

    The component xi_k stands for the class of the element xi_k V^k, so the
    unitary implementing Phi_g acts exactly like ``apply_skew`` on monomials.
    """

    __slots__ = ("comps", "alpha")

    def __init__(self, comps: dict[int, FourierPoly], alpha: Angle):
        self.comps = dict(sorted((int(k), c) for k, c in comps.items() if not c.is_zero()))
        self.alpha = alpha

    @classmethod
    def vacuum(cls, alpha: Angle) -> GNSVector:
        return cls({0: FourierPoly.constant(1.0)}, alpha)

    @classmethod
    def of(cls, x: CPElement) -> GNSVector:
        return cls(dict(x.terms), x.alpha)

    def norm(self) -> float:
        return math.sqrt(sum(c.l2_norm() ** 2 for c in self.comps.values()))

    def __sub__(self, other: GNSVector) -> GNSVector:
        out = dict(self.comps)
        for k, c in other.comps.items():
            out[k] = out[k] - c if k in out else -c
        return GNSVector(out, self.alpha)

    def to_json(self) -> list[dict]:
        return [{"n": k, "coeffs": c.to_triples()} for k, c in self.comps.items()]


def gns_unitary(spec: CocycleSpec, g, v: GNSVector, cache: TwistCache | None = None) -> GNSVector:
    _check_spec(spec, v.alpha)
    g = as_element(g, spec.dim)
    cache = cache or TwistCache(spec, GNS_M_CAP)
    shift = spec.shift_fraction(g)
    return GNSVector({k: c.rotate(shift) * cache.poly(g, k) for k, c in v.comps.items()}, v.alpha)


def gns_project_invariant(spec: CocycleSpec, v: GNSVector, window: int, cap: int = GNS_M_CAP) -> GNSVector:
    """Average of V_g^omega v over the box of side ``window``."""
    if window < 1:
        raise ValueError("window must be >= 1")
    _check_spec(spec, v.alpha)
    acc = _Accumulator(cap)
    cache = TwistCache(spec, cap)
    for g in box(window, spec.dim):
        shift = spec.shift_fraction(g)
        for k, c in v.comps.items():
            acc.add(k, c.rotate(shift) * cache.poly(g, k))
    return GNSVector(acc.result(1.0 / window**spec.dim), v.alpha)


# ---------------------------------------------------------------------------
# Fourier reconstruction and the MASA test


def fourier_component(x: CPElement, k: int) -> CPElement:
    """V^k E(V^{-k} x), computed through the algebra."""
    vk = CPElement.V(x.alpha, -k)
    return CPElement.V(x.alpha, k) * CPElement.monomial(expectation(vk * x), 0, x.alpha)


def fejer_reconstruction(x: CPElement, K: int) -> CPElement:
    """sum_{|k| <= K} (1 - |k|/K) V^k E(V^{-k} x)."""
    if K < 1:
        raise ValueError("K must be >= 1")
    out = CPElement.zero(x.alpha)
    for k in range(-K, K + 1):
        w = 1.0 - abs(k) / K
        if w > 0:
            out = out + fourier_component(x, k) * w
    return out


def vallee_poussin_reconstruction(x: CPElement, K: int) -> CPElement:
    """Weights 1 for |k| <= K, tapering linearly to 0 at 2K.

    Equals twice the Fejer mean at 2K minus the Fejer mean at K, so it is still
    a Cesaro-type summation but reproduces every element supported in [-K, K].
    """
    return fejer_reconstruction(x, 2 * K) * 2.0 - fejer_reconstruction(x, K)


def commutant_basis(alpha: Angle, band: int, n_band: int, generators: Iterable[int] = (1, 2)):
    """Null space of x -> ([chi_j, x])_j on sum_{|n|<=n_band, |m|<=band} a_n(m) chi_m V^n.

    Returns (basis, index) where basis columns are coefficient vectors and
    index[i] = (n, m) labels the unknowns.
    """
    from scipy.linalg import null_space

    ns = range(-n_band, n_band + 1)
    ms = range(-band, band + 1)
    index = [(n, m) for n in ns for m in ms]
    gens = list(generators)
    jmax = max(abs(j) for j in gens)
    out_ms = 2 * (band + jmax) + 1
    rows = len(gens) * len(ns) * out_ms
    A = np.zeros((rows, len(index)), dtype=np.complex128)
    for col, (n, m) in enumerate(index):
        for gi, j in enumerate(gens):
            # chi_j a V^n - a V^n chi_j = a chi_j (1 - e(j n alpha)) V^n
            c = 1.0 - np.exp(2j * math.pi * frac_times(alpha, j * n))
            row = (gi * len(ns) + (n + n_band)) * out_ms + (m + j + band + jmax)
            A[row, col] = c
    return null_space(A), index


def masa_offdiagonal_norm(alpha: Angle, band: int = 64, n_band: int = 8) -> tuple[float, int]:
    """Largest norm of the n != 0 part over an orthonormal basis of the commutant."""
    basis, index = commutant_basis(alpha, band, n_band)
    off = np.array([n != 0 for n, _ in index])
    if basis.shape[1] == 0:
        return 0.0, 0
    worst = float(np.max(np.linalg.norm(basis[off, :], axis=0)))
    return worst, basis.shape[1]
