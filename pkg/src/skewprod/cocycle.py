"""1-cocycles of Z^d over commuting circle rotations and their alpha-twisted family.

Conventions: the group element g acts on functions by
(theta_g f)(x) = f(x + g . theta) and alpha acts by (alpha f)(x) = f(x + a).
A cocycle satisfies u_{g+h} = theta_g(u_h) u_g.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .torus import (
    FourierPoly,
    RotationNumber,
    UnitaryFn,
    birkhoff_product,
    frac_times,
)


GroupElement = tuple[int, ...]


def as_element(g, dim: int = 1) -> GroupElement:
    if isinstance(g, (int, np.integer)):
        g = (int(g),)
    g = tuple(int(v) for v in g)
    if len(g) != dim:
        raise ValueError(f"group element {g} does not have dimension {dim}")
    return g


# ---------------------------------------------------------------------------
# Coefficient laws (infinite lacunary phases)


@dataclass(frozen=True)
class NamedSequence:
    """A named positive sequence s_k (k >= 1) with analytic tail information.

    ``sq_tail(D)`` bounds sum_{k>D} s_k^2 and ``abs_tail(D)`` bounds
    sum_{k>D} s_k from above; either returns None when the series diverges.
    ``floor`` is a lower bound on every s_k (0 when the terms decay).
    """

    name: str
    value: Callable[[int], float]
    sq_tail: Callable[[int], float | None]
    abs_tail: Callable[[int], float | None]
    floor: float = 0.0


def _power_tail(D: int, p: float) -> float | None:
    # sum_{k>D} k^-p <= int_D^inf x^-p dx
    if p <= 1:
        return None
    return D ** (1 - p) / (p - 1)


def named_sequence(spec: str) -> NamedSequence:
    """Parse ``harmonic``, ``constant[:c]``, ``power:p`` or ``geometric:r``."""
    kind, _, arg = spec.partition(":")
    if kind == "harmonic":
        return NamedSequence("harmonic", lambda k: 1.0 / k, lambda D: 1.0 / D, lambda D: None)
    if kind == "constant":
        c = float(arg) if arg else 1.0
        return NamedSequence(spec, lambda k: c, lambda D: None, lambda D: None, floor=abs(c))
    if kind == "power":
        p = float(arg)
        if p <= 0:
            raise ValueError("power sequence needs p > 0")
        return NamedSequence(
            spec, lambda k: k**-p, lambda D: _power_tail(D, 2 * p), lambda D: _power_tail(D, p)
        )
    if kind == "geometric":
        r = float(arg)
        if not 0 < r < 1:
            raise ValueError("geometric ratio must lie in (0, 1)")
        return NamedSequence(
            spec,
            lambda k: r**k,
            lambda D: r ** (2 * (D + 1)) / (1 - r * r),
            lambda D: r ** (D + 1) / (1 - r),
        )
    raise ValueError(f"unknown sequence {spec!r}")


@dataclass(frozen=True)
class CoefficientLaw:
    """Phase phi = sum_k phi_hat(q_k) chi_{q_k} + conjugate, q_k the convergent denominators.

    ``amplitude`` is ``"match-divisor"`` (phi_hat(q_k) = 2 sin(pi q_k theta) s_k)
    or ``"power"`` (phi_hat(q_k) = c * s_k).  ``first`` is the first convergent
    index carrying mass.  ``empty`` laws describe phi = 0.
    """

    amplitude: str = "match-divisor"
    sequence: str = "harmonic"
    scale: float = 1.0
    first: int = 1
    symmetric: bool = True
    empty: bool = False

    def __post_init__(self):
        if self.amplitude not in ("match-divisor", "power"):
            raise ValueError(f"unknown amplitude rule {self.amplitude!r}")
        if self.first < 1:
            raise ValueError("law support starts at convergent index >= 1")
        named_sequence(self.sequence)

    @property
    def seq(self) -> NamedSequence:
        return named_sequence(self.sequence)

    def to_json(self) -> dict:
        return {
            "amplitude": self.amplitude,
            "sequence": self.sequence,
            "scale": self.scale,
            "first": self.first,
            "symmetric": self.symmetric,
            "empty": self.empty,
        }


# ---------------------------------------------------------------------------
# Cocycle specifications


@dataclass(frozen=True)
class CocycleSpec:
    """Generator data for a cocycle of Z^d.

    ``generators[i]`` is u at the i-th unit vector.  Law-driven specs (d = 1
    only) carry the lacunary phase in ``law`` and a placeholder generator.
    """

    base_angles: tuple[RotationNumber, ...]
    alpha_angle: RotationNumber
    generators: tuple[UnitaryFn, ...]
    law: CoefficientLaw | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "base_angles", tuple(self.base_angles))
        object.__setattr__(self, "generators", tuple(self.generators))
        if len(self.base_angles) != len(self.generators):
            raise ValueError("need one generator per base angle")
        if not self.base_angles:
            raise ValueError("dimension must be >= 1")
        if self.law is not None and self.dim != 1:
            raise ValueError("coefficient laws are only supported for d = 1")
        if self.dim > 1:
            res = compatibility_residual(self)
            if res > 1e-12:
                raise ValueError(f"generators are not compatible (residual {res:.3g})")

    @property
    def dim(self) -> int:
        return len(self.base_angles)

    @property
    def theta(self) -> RotationNumber:
        return self.base_angles[0]

    @property
    def is_analytic(self) -> bool:
        return self.law is not None and not self.law.empty

    @classmethod
    def one_dim(cls, theta: RotationNumber, alpha: RotationNumber, u: UnitaryFn, name: str = "") -> CocycleSpec:
        return cls((theta,), alpha, (u,), name=name)

    @classmethod
    def trivial(cls, theta: RotationNumber, alpha: RotationNumber) -> CocycleSpec:
        return cls.one_dim(theta, alpha, UnitaryFn.one(), name="trivial")

    def with_generator(self, u: UnitaryFn) -> CocycleSpec:
        return CocycleSpec((self.theta,), self.alpha_angle, (u,), name=self.name)

    def shift_fraction(self, g: GroupElement) -> float:
        """frac(g . theta)."""
        return math.fmod(sum(frac_times(a, gi) for a, gi in zip(self.base_angles, g)), 1.0)


def compatibility_residual(spec: CocycleSpec, points: int = 64) -> float:
    """max |theta_i(u_j) u_i - theta_j(u_i) u_j| over pairs of generators."""
    x = (np.arange(points) + 0.5) / points
    worst = 0.0
    for i in range(spec.dim):
        for j in range(i + 1, spec.dim):
            ui, uj = spec.generators[i], spec.generators[j]
            ti, tj = spec.base_angles[i].float_value, spec.base_angles[j].float_value
            lhs = uj.evaluate(x + ti) * ui.evaluate(x)
            rhs = ui.evaluate(x + tj) * uj.evaluate(x)
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def cocycle_at(spec: CocycleSpec, g) -> UnitaryFn:
    """u_g assembled from the generators via u_{a+b} = theta_a(u_b) u_a.

    The walk goes along the coordinate axes in order; each axis segment is a
    Birkhoff product over the corresponding rotation.
    """
    if spec.is_analytic:
        raise TypeError("law-driven cocycles have no trigonometric-polynomial form; use law_at_level")
    g = as_element(g, spec.dim)
    acc = UnitaryFn.one()
    offset = 0.0
    for gi, u, angle in zip(g, spec.generators, spec.base_angles):
        if gi:
            acc = acc * birkhoff_product(u, angle, gi).rotate(offset)
            offset = math.fmod(offset + frac_times(angle, gi), 1.0)
    return acc


def twisted_family(spec: CocycleSpec, g, n: int) -> UnitaryFn:
    """u_g^(n) = u_g alpha(u_g) ... alpha^{n-1}(u_g) (and the n < 0 branch)."""
    return birkhoff_product(cocycle_at(spec, g), spec.alpha_angle, n)


def verify_cocycle(
    spec: CocycleSpec,
    trials: int,
    *,
    box: int = 6,
    points: int = 128,
    seed: int = 0,
    cocycle: Callable[[GroupElement], UnitaryFn] | None = None,
) -> float:
    """Max of |u_{g+h}(x) - u_h(x + g.theta) u_g(x)| over random g, h in [-box, box]^d."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    cocycle = cocycle or (lambda g: cocycle_at(spec, g))
    rng = np.random.default_rng(seed)
    x = rng.random(points)
    worst = 0.0
    for _ in range(trials):
        g = tuple(int(v) for v in rng.integers(-box, box + 1, spec.dim))
        h = tuple(int(v) for v in rng.integers(-box, box + 1, spec.dim))
        gh = tuple(a + b for a, b in zip(g, h))
        shift = spec.shift_fraction(g)
        lhs = cocycle(gh).evaluate(x)
        rhs = cocycle(h).evaluate(x + shift) * cocycle(g).evaluate(x)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def twisted_law_residual(spec: CocycleSpec, g, m: int, n: int, points: int = 128, seed: int = 0) -> float:
    """Residual of u_g^(m+n) = u_g^(m) alpha^m(u_g^(n)) on random points."""
    x = np.random.default_rng(seed).random(points)
    a = frac_times(spec.alpha_angle, m)
    lhs = twisted_family(spec, g, m + n).evaluate(x)
    rhs = twisted_family(spec, g, m).evaluate(x) * twisted_family(spec, g, n).evaluate(x + a)
    return float(np.max(np.abs(lhs - rhs)))


def random_trig_spec(
    rng: np.random.Generator,
    theta: RotationNumber,
    alpha: RotationNumber,
    band: int = 6,
    max_winding: int = 2,
    scale: float = 0.2,
) -> CocycleSpec:
    k = int(rng.integers(-max_winding, max_winding + 1))
    u = UnitaryFn.random(rng, k, int(rng.integers(1, band + 1)), scale)
    return CocycleSpec.one_dim(theta, alpha, u)


def spec_from_block(block: dict, theta: RotationNumber, alpha: RotationNumber) -> CocycleSpec:
    """Build a 1-d spec from a serialized cocycle block.

    ``kind`` is one of character / trigpoly / constant / lacunary.  ``lambda``
    for constants is the angle c of exp(2 pi i c), or {"theta_multiple": m}.
    """
    kind = block["kind"]
    if kind == "character":
        u = UnitaryFn.character(int(block.get("winding", 1)))
    elif kind == "trigpoly":
        u = UnitaryFn(int(block.get("winding", 0)), FourierPoly.from_triples(block.get("phase_coeffs", [])))
    elif kind == "constant":
        lam = block.get("lambda", 0.0)
        if isinstance(lam, dict):
            c = frac_times(theta, int(lam["theta_multiple"]))
        else:
            c = float(lam)
        u = UnitaryFn.constant(c)
    elif kind == "lacunary":
        law = CoefficientLaw(**block.get("law", {}))
        return CocycleSpec((theta,), alpha, (UnitaryFn.one(),), law=law, name=block.get("name", ""))
    else:
        raise ValueError(f"unknown cocycle kind {kind!r}")
    return CocycleSpec.one_dim(theta, alpha, u, name=block.get("name", kind))
