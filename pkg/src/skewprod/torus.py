"""Trigonometric polynomials on the circle, rotation numbers and circle unitaries.

Frequencies are integers, the circle is parametrised by x in [0, 1) and the
character of frequency m is chi_m(x) = exp(2 pi i m x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Iterable, NamedTuple, Sequence, Union

import numpy as np

PRUNE_FLOOR = 1e-15
GRID_BUDGET = 1 << 20

TWO_PI = 2.0 * math.pi


class ResolutionError(ValueError):
    """A sampling grid would exceed the resolution budget."""


class RuleExhausted(ValueError):
    """A continued fraction has no more terms to offer."""


def _next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


class FourierPoly:
    """Finitely supported Fourier series sum_m c[m] chi_m.

    Coefficients are stored densely from frequency ``lo`` upward.  Entries with
    modulus below ``floor`` are set to exactly zero and the ends are trimmed, so
    the zero polynomial has an empty coefficient array.
    """

    __slots__ = ("lo", "c")

    def __init__(self, lo: int, coeffs, floor: float = PRUNE_FLOOR):
        c = np.array(coeffs, dtype=np.complex128).ravel()
        if c.size:
            small = np.abs(c) < floor
            if small.any():
                c[small] = 0.0
            nz = np.flatnonzero(c)
            if nz.size == 0:
                c = c[:0]
                lo = 0
            else:
                lo = int(lo) + int(nz[0])
                c = c[nz[0]:nz[-1] + 1]
        else:
            lo = 0
        c.flags.writeable = False
        self.lo = int(lo)
        self.c = c

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls) -> FourierPoly:
        return cls(0, [])

    @classmethod
    def constant(cls, value: complex) -> FourierPoly:
        return cls(0, [value])

    @classmethod
    def character(cls, m: int, coeff: complex = 1.0) -> FourierPoly:
        return cls(m, [coeff])

    @classmethod
    def cosine(cls, m: int = 1, amplitude: float = 1.0) -> FourierPoly:
        """amplitude * cos(2 pi m x)."""
        return cls.from_dict({m: amplitude / 2, -m: amplitude / 2})

    @classmethod
    def from_dict(cls, coeffs: dict[int, complex], floor: float = PRUNE_FLOOR) -> FourierPoly:
        if not coeffs:
            return cls.zero()
        lo, hi = min(coeffs), max(coeffs)
        c = np.zeros(hi - lo + 1, dtype=np.complex128)
        for m, v in coeffs.items():
            c[m - lo] += v
        return cls(lo, c, floor)

    @classmethod
    def from_triples(cls, triples: Iterable[Sequence[float]]) -> FourierPoly:
        acc: dict[int, complex] = {}
        for m, re, im in triples:
            if int(m) != m:
                raise ValueError(f"frequency {m!r} is not an integer")
            acc[int(m)] = acc.get(int(m), 0) + complex(re, im)
        return cls.from_dict(acc)

    @classmethod
    def real_random(cls, rng: np.random.Generator, band: int, scale: float = 1.0) -> FourierPoly:
        """Random real-valued polynomial of the given band (test helper)."""
        pos = scale * (rng.normal(size=band) + 1j * rng.normal(size=band)) / 2
        c = np.concatenate([np.conj(pos[::-1]), [scale * rng.normal()], pos])
        return cls(-band, c)

    @classmethod
    def random(cls, rng: np.random.Generator, band: int, scale: float = 1.0) -> FourierPoly:
        n = 2 * band + 1
        return cls(-band, scale * (rng.normal(size=n) + 1j * rng.normal(size=n)) / math.sqrt(2))

    # -- views --------------------------------------------------------------
    @property
    def hi(self) -> int:
        return self.lo + len(self.c) - 1

    @property
    def band(self) -> int:
        if not len(self.c):
            return 0
        return max(abs(self.lo), abs(self.hi))

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.lo, self.lo + len(self.c))

    def is_zero(self) -> bool:
        return len(self.c) == 0

    def coeff(self, m: int) -> complex:
        i = m - self.lo
        if 0 <= i < len(self.c):
            return complex(self.c[i])
        return 0j

    def mean(self) -> complex:
        return self.coeff(0)

    def items(self) -> list[tuple[int, complex]]:
        return [(self.lo + i, complex(v)) for i, v in enumerate(self.c) if v != 0]

    def to_dict(self) -> dict[int, complex]:
        return dict(self.items())

    def to_triples(self) -> list[list]:
        return [[m, v.real, v.imag] for m, v in self.items()]

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Dense coefficient vector for frequencies lo..hi inclusive."""
        out = np.zeros(hi - lo + 1, dtype=np.complex128)
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a <= b:
            out[a - lo:b - lo + 1] = self.c[a - self.lo:b - self.lo + 1]
        return out

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.c) ** 2)))

    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.c)))

    def is_real(self, tol: float = 1e-12) -> bool:
        if not len(self.c):
            return True
        b = self.band
        w = self.window(-b, b)
        return bool(np.max(np.abs(w - np.conj(w[::-1]))) <= tol)

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, FourierPoly):
            other = FourierPoly.constant(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        return FourierPoly(lo, self.window(lo, hi) + other.window(lo, hi))

    __radd__ = __add__

    def __neg__(self):
        return FourierPoly(self.lo, -self.c)

    def __sub__(self, other):
        if not isinstance(other, FourierPoly):
            other = FourierPoly.constant(other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, FourierPoly):
            return multiply(self, other)
        return FourierPoly(self.lo, self.c * complex(other))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return FourierPoly(self.lo, self.c / complex(scalar))

    def conj(self) -> FourierPoly:
        """Pointwise complex conjugate: c(m) -> conj(c(-m))."""
        return FourierPoly(-self.hi, np.conj(self.c[::-1]))

    def shift(self, k: int) -> FourierPoly:
        """Multiply by chi_k."""
        return FourierPoly(self.lo + k, self.c)

    def rotate(self, t: float) -> FourierPoly:
        return rotate(self, t)

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.is_zero():
            return np.zeros(x.shape, dtype=np.complex128)
        m = self.frequencies.astype(float)
        arg = np.mod(np.multiply.outer(x, m), 1.0)
        return np.exp(1j * TWO_PI * arg) @ self.c

    def __eq__(self, other):
        if not isinstance(other, FourierPoly):
            return NotImplemented
        return self.lo == other.lo and np.array_equal(self.c, other.c)

    def __hash__(self):
        return hash((self.lo, self.c.tobytes()))

    def distance(self, other: FourierPoly) -> float:
        """Max coefficient deviation."""
        d = self - other
        return float(np.max(np.abs(d.c))) if len(d.c) else 0.0

    def __repr__(self):
        if len(self.c) > 6:
            return f"FourierPoly(lo={self.lo}, hi={self.hi}, l2={self.l2_norm():.3g})"
        return f"FourierPoly({self.to_dict()!r})"


def rotate(f: FourierPoly, t: float) -> FourierPoly:
    """(rotate f by t)(x) = f(x + t): coefficient m picks up exp(2 pi i m t)."""
    if f.is_zero():
        return f
    t = math.fmod(float(t), 1.0)
    arg = np.mod(f.frequencies * t, 1.0)
    return FourierPoly(f.lo, f.c * np.exp(1j * TWO_PI * arg))


def multiply(f: FourierPoly, g: FourierPoly) -> FourierPoly:
    """Pointwise product, i.e. convolution of coefficients."""
    if f.is_zero() or g.is_zero():
        return FourierPoly.zero()
    return FourierPoly(f.lo + g.lo, np.convolve(f.c, g.c))


# ---------------------------------------------------------------------------
# Rotation numbers


def _liouville(k: int) -> int:
    return 10 ** (2 ** (k - 1))


CF_RULES: dict[str, Callable[[int], int]] = {
    "liouville": _liouville,
    "ones": lambda k: 1,
    "twos": lambda k: 2,
}


@dataclass(frozen=True)
class RotationNumber:
    """Angle in (0, 1) given by a continued fraction [a0; a1, a2, ...].

    ``tail`` is None for a finite expansion, ``"periodic"`` when the terms after
    ``a0`` repeat cyclically, or ``"rule:<name>"`` to take a_k = rule(k) for
    every k past the listed prefix.
    """

    cf: tuple[int, ...]
    tail: str | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        cf = tuple(int(a) for a in self.cf)
        object.__setattr__(self, "cf", cf)
        if not cf:
            raise ValueError("empty continued fraction")
        if any(a <= 0 for a in cf[1:]):
            raise ValueError("partial quotients after a0 must be positive")
        if self.tail == "periodic" and len(cf) < 2:
            raise ValueError("periodic tail needs at least one term after a0")
        if self.tail is not None and self.tail != "periodic":
            if not self.tail.startswith("rule:") or self.tail[5:] not in CF_RULES:
                raise ValueError(f"unknown continued-fraction tail {self.tail!r}")

    # -- named constructors --------------------------------------------------
    @classmethod
    def golden(cls) -> RotationNumber:
        return cls((0, 1), "periodic", name="golden")

    @classmethod
    def silver(cls) -> RotationNumber:
        """sqrt(2) - 1."""
        return cls((0, 2), "periodic", name="sqrt2-1")

    @classmethod
    def sqrt3_minus_1(cls) -> RotationNumber:
        return cls((0, 1, 2), "periodic", name="sqrt3-1")

    @classmethod
    def liouville(cls) -> RotationNumber:
        """[0; 10, 100, 10^4, 10^8, ...]."""
        return cls((0,), "rule:liouville", name="liouville")

    @classmethod
    def from_float(cls, x: float) -> RotationNumber:
        """Exact (finite) expansion of the double ``x``."""
        fr = Fraction(x)
        terms = []
        while True:
            a = math.floor(fr)
            terms.append(a)
            fr -= a
            if fr == 0:
                break
            fr = 1 / fr
        return cls(tuple(terms), None)

    # -- terms ---------------------------------------------------------------
    @property
    def finite(self) -> bool:
        return self.tail is None

    def term(self, k: int) -> int:
        if k < len(self.cf):
            return self.cf[k]
        if self.tail is None:
            raise RuleExhausted(f"finite expansion has only {len(self.cf)} terms")
        if self.tail == "periodic":
            period = self.cf[1:]
            return period[(k - 1) % len(period)]
        return CF_RULES[self.tail[5:]](k)

    def n_terms(self) -> int | None:
        return len(self.cf) if self.finite else None

    def convergents(self, count: int) -> list[tuple[int, int]]:
        return convergents_of(self, count)

    def rational(self, min_q: int = 10**40) -> tuple[int, int]:
        """A convergent p/q with q >= min_q (or the exact value if finite)."""
        cache = self.__dict__.setdefault("_rational_cache", {})
        if min_q in cache:
            return cache[min_q]
        p0, q0, p1, q1 = 1, 0, self.term(0), 1
        k = 1
        while q1 < min_q:
            try:
                a = self.term(k)
            except RuleExhausted:
                break
            p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
            k += 1
        cache[min_q] = (p1, q1)
        return p1, q1

    @cached_property
    def float_value(self) -> float:
        p, q = self.rational(10**20)
        return p / q

    def frac_times(self, n: int) -> float:
        """Fractional part of n * value, exact up to 1/q^2 of the stored approximant."""
        p, q = self.rational()
        return (int(n) * p % q) / q

    def to_json(self) -> dict:
        return {"cf": list(self.cf), "tail": self.tail, "decimal": self.float_value}

    @classmethod
    def from_json(cls, d: dict) -> RotationNumber:
        return cls(tuple(d["cf"]), d.get("tail"), name=d.get("name", ""))

    def __float__(self):
        return self.float_value

    def __repr__(self):
        label = self.name or f"cf={list(self.cf)}, tail={self.tail!r}"
        return f"RotationNumber({label})"


Angle = Union[RotationNumber, float]


@dataclass(frozen=True)
class ScaledAngle:
    """The angle n * base with exact integer multiples."""

    base: RotationNumber
    n: int

    def frac_times(self, k: int) -> float:
        return self.base.frac_times(self.n * int(k))

    @property
    def float_value(self) -> float:
        return self.frac_times(1)

    def __float__(self):
        return self.float_value


def scaled(angle: Angle, n: int) -> Angle:
    if n == 1:
        return angle
    if isinstance(angle, (RotationNumber, ScaledAngle)):
        base, m = (angle, 1) if isinstance(angle, RotationNumber) else (angle.base, angle.n)
        return ScaledAngle(base, m * n)
    return frac_times(angle, n)


def frac_times(angle: Angle, n: int) -> float:
    """frac(n * angle) without the cancellation of float multiplication."""
    if isinstance(angle, (RotationNumber, ScaledAngle)):
        return angle.frac_times(n)
    fr = Fraction(float(angle)) * int(n)
    return float(fr - math.floor(fr))


def angle_value(angle: Angle) -> float:
    return angle.float_value if isinstance(angle, (RotationNumber, ScaledAngle)) else float(angle)


def convergents_of(r: RotationNumber, count: int) -> list[tuple[int, int]]:
    """First ``count`` convergents (p_k, q_k), k = 0..count-1."""
    if count < 1:
        raise ValueError("count must be >= 1")
    out = []
    p0, q0, p1, q1 = 1, 0, r.term(0), 1
    out.append((p1, q1))
    for k in range(1, count):
        a = r.term(k)
        p0, q0, p1, q1 = p1, q1, a * p1 + p0, a * q1 + q0
        out.append((p1, q1))
    return out


# ---------------------------------------------------------------------------
# Circle unitaries


@dataclass(frozen=True)
class UnitaryFn:
    """u(x) = exp(2 pi i (winding * x + phase(x))) with real trigonometric phase."""

    winding: int
    phase: FourierPoly

    def __post_init__(self):
        ph = self.phase
        if not isinstance(ph, FourierPoly):
            ph = FourierPoly.from_dict(dict(ph))
        if not ph.is_real(1e-10 * max(1.0, ph.l1_norm())):
            raise ValueError("phase of a UnitaryFn must be real-valued")
        b = ph.band
        w = ph.window(-b, b)
        w = 0.5 * (w + np.conj(w[::-1]))
        w[b] = math.fmod(w[b].real, 1.0) % 1.0
        object.__setattr__(self, "phase", FourierPoly(-b, w))
        object.__setattr__(self, "winding", int(self.winding))

    @classmethod
    def one(cls) -> UnitaryFn:
        return cls(0, FourierPoly.zero())

    @classmethod
    def constant(cls, c: float) -> UnitaryFn:
        """The constant exp(2 pi i c)."""
        return cls(0, FourierPoly.constant(float(c)))

    @classmethod
    def character(cls, k: int) -> UnitaryFn:
        return cls(k, FourierPoly.zero())

    def __mul__(self, other: UnitaryFn) -> UnitaryFn:
        return UnitaryFn(self.winding + other.winding, self.phase + other.phase)

    def conj(self) -> UnitaryFn:
        return UnitaryFn(-self.winding, -self.phase)

    def rotate(self, t: float) -> UnitaryFn:
        """x -> u(x + t)."""
        t = math.fmod(float(t), 1.0)
        ph = rotate(self.phase, t) + (self.winding * t) % 1.0
        return UnitaryFn(self.winding, ph)

    def times_constant(self, c: float) -> UnitaryFn:
        return UnitaryFn(self.winding, self.phase + float(c))

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ph = self.phase.evaluate(x).real
        return np.exp(1j * TWO_PI * np.mod(self.winding * x + ph, 1.0))

    def is_constant(self) -> bool:
        return self.winding == 0 and self.phase.band == 0

    @property
    def mean_phase(self) -> float:
        return self.phase.mean().real

    def to_json(self) -> dict:
        return {"winding": self.winding, "phase": self.phase.to_triples()}

    @classmethod
    def from_json(cls, d: dict) -> UnitaryFn:
        return cls(int(d["winding"]), FourierPoly.from_triples(d.get("phase", [])))

    @classmethod
    def random(cls, rng: np.random.Generator, winding: int, band: int, scale: float = 0.1) -> UnitaryFn:
        return cls(winding, FourierPoly.real_random(rng, band, scale))


class Expansion(NamedTuple):
    poly: FourierPoly
    aliasing: float
    grid: int


def _phase_grid_size(phase: FourierPoly, minimum: int) -> int:
    b = phase.band
    if b == 0:
        return _next_pow2(max(minimum, 1))
    spread = phase.l1_norm() - abs(phase.mean())
    effective = b * (1 + math.ceil(TWO_PI * spread))
    return _next_pow2(max(minimum, 8 * effective, 16))


def _exp_phase_on_grid(phase: FourierPoly, L: int) -> np.ndarray:
    """Fourier coefficients (fft order) of exp(2 pi i phase) from L samples."""
    buf = np.zeros(L, dtype=np.complex128)
    m = phase.frequencies
    buf[np.mod(m, L)] = phase.c
    values = np.fft.ifft(buf) * L
    samples = np.exp(1j * TWO_PI * np.mod(values.real, 1.0))
    return np.fft.fft(samples) / L


def _resolved_exp(phase: FourierPoly, minimum: int) -> tuple[np.ndarray, int]:
    if phase.band >= GRID_BUDGET // 8:
        raise ResolutionError(f"phase band {phase.band} exceeds grid budget {GRID_BUDGET}")
    L = _phase_grid_size(phase, minimum)
    while True:
        if L > GRID_BUDGET:
            raise ResolutionError(f"exp(2 pi i phase) not resolved within {GRID_BUDGET} grid points")
        coeffs = _exp_phase_on_grid(phase, L)
        quarter = L // 4
        top = np.max(np.abs(coeffs[quarter:L - quarter]))
        if top < PRUNE_FLOOR or phase.band == 0:
            return coeffs, L
        L *= 2


def _centered(coeffs: np.ndarray, L: int, band: int) -> np.ndarray:
    m = np.arange(-band, band + 1)
    return coeffs[np.mod(m, L)]


def expand_unitary(u: UnitaryFn, band: int) -> Expansion:
    """Band-``band`` truncation of the Fourier series of ``u``.

    The grid has at least the next power of two >= 8*band points and is
    doubled until the spectrum of exp(2 pi i phase) is resolved.  ``aliasing``
    is the l1 mass of the grid spectrum that falls outside the band.
    """
    if band < 1:
        raise ValueError("band must be >= 1")
    coeffs, L = _resolved_exp(u.phase, 8 * band)
    half = L // 2
    full = _centered(coeffs, L, half - 1)  # frequencies -(half-1) .. half-1 of exp(phase)
    freqs = np.arange(-(half - 1), half) + u.winding
    keep = np.abs(freqs) <= band
    out = np.zeros(2 * band + 1, dtype=np.complex128)
    out[freqs[keep] + band] = full[keep]
    aliasing = float(np.sum(np.abs(full[~keep])) + abs(coeffs[half]))
    return Expansion(FourierPoly(-band, out), aliasing, L)


def unitary_poly(u: UnitaryFn, cap: int | None = None, floor: float = PRUNE_FLOOR) -> FourierPoly:
    """Fourier polynomial of ``u`` accurate to the pruning floor.

    Raises ``BandOverflow`` if the result reaches frequencies beyond ``cap``.
    """
    if u.phase.band == 0:
        poly = FourierPoly(u.winding, [np.exp(1j * TWO_PI * u.mean_phase)])
    else:
        coeffs, L = _resolved_exp(u.phase, 16)
        half = L // 4
        poly = FourierPoly(-half, _centered(coeffs, L, half), floor).shift(u.winding)
    if cap is not None and poly.band > cap:
        raise BandOverflow(f"unitary expansion reaches frequency {poly.band} > cap {cap}")
    return poly


class BandOverflow(ValueError):
    """A result would exceed the configured frequency/V-power caps."""


def birkhoff_product(u: UnitaryFn, angle: Angle, n: int) -> UnitaryFn:
    """prod_{j<n} u(x + j*angle) for n >= 0 and the cocycle extension for n < 0.

    For n < 0 this is prod_{j=n}^{-1} conj(u(x + j*angle)), so that
    n -> birkhoff_product(u, angle, n) is a Z-cocycle over the rotation.
    """
    n = int(n)
    if n == 0:
        return UnitaryFn.one()
    if n < 0:
        pos = birkhoff_product(u, angle, -n)
        return pos.conj().rotate(frac_times(angle, n))
    k = u.winding
    ph = u.phase
    coeffs = ph.to_dict()
    if coeffs:
        freqs = np.array(sorted(coeffs))
        sums = _geometric_sums(freqs, angle, n)
        coeffs = {int(m): coeffs[int(m)] * s for m, s in zip(freqs, sums)}
    # mean term: n*mean + k*angle*n(n-1)/2, reduced mod 1
    const = (n * ph.mean().real) % 1.0
    if k:
        const += frac_times(angle, k * (n * (n - 1) // 2))
    coeffs[0] = const
    phase = FourierPoly.from_dict(coeffs)
    return UnitaryFn(n * k, phase)


def _geometric_sums(freqs: np.ndarray, angle: Angle, n: int) -> np.ndarray:
    """sum_{j<n} exp(2 pi i j m angle) for each frequency m."""
    out = np.empty(len(freqs), dtype=np.complex128)
    for i, m in enumerate(freqs):
        m = int(m)
        if m == 0:
            out[i] = n
            continue
        t = frac_times(angle, m)
        s = math.sin(math.pi * t)
        if abs(s) > 1e-6:
            tn = frac_times(angle, m * n)
            out[i] = (1 - np.exp(1j * TWO_PI * tn)) / (1 - np.exp(1j * TWO_PI * t))
        else:
            j = np.arange(n)
            tj = np.array([frac_times(angle, m * jj) for jj in j]) if n < 4096 else np.mod(j * t, 1.0)
            out[i] = np.sum(np.exp(1j * TWO_PI * tj))
    return out
