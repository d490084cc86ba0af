"""Cohomology of two cocycles and the intertwining automorphism V -> wV."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .coboundary import (
    CONTINUOUS,
    INCONCLUSIVE,
    DetectorConfig,
    Verdict,
    classify,
    coboundary_residual,
)
from .cocycle import CocycleSpec, as_element
from .crossed import CPElement, TwistCache, apply_skew, gns_norm, same_angle
from .torus import Angle, FourierPoly, UnitaryFn, birkhoff_product, unitary_poly


@dataclass
class CohomologyResult:
    verdict: Verdict
    witness: UnitaryFn | None = None
    residual: float | None = None
    mode: str = "C*"
    diagnostics: dict = field(default_factory=dict)

    @property
    def cohomologous(self) -> str:
        if self.verdict.tag == CONTINUOUS:
            return "yes"
        if self.verdict.tag == INCONCLUSIVE:
            return "inconclusive"
        return "no"

    def to_json(self) -> dict:
        return {
            "cohomologous": self.cohomologous,
            "mode": self.mode,
            "verdict": self.verdict.to_json(),
            "witness": self.witness.to_json() if self.witness is not None else None,
            "residual": self.residual,
        }


def _check_bases(u: CocycleSpec, v: CocycleSpec) -> None:
    if u.dim != v.dim or not all(same_angle(a, b) for a, b in zip(u.base_angles, v.base_angles)):
        raise ValueError("cocycles live over different base rotations")
    if not same_angle(u.alpha_angle, v.alpha_angle):
        raise ValueError("cocycles use different alpha angles")
    if u.is_analytic or v.is_analytic:
        raise TypeError("cohomology is decided for trigonometric cocycles")


def quotient(u: CocycleSpec, v: CocycleSpec) -> CocycleSpec:
    """The cocycle u v* (windings and phases subtract)."""
    _check_bases(u, v)
    gens = tuple(a * b.conj() for a, b in zip(u.generators, v.generators))
    return CocycleSpec(u.base_angles, u.alpha_angle, gens, name=f"{u.name}/{v.name}")


def are_cohomologous(u: CocycleSpec, v: CocycleSpec, cfg: DetectorConfig | None = None) -> CohomologyResult:
    """Decide whether u v* = theta(w*) w; on success verify the intertwiner."""
    cfg = cfg or DetectorConfig()
    q = quotient(u, v)
    verdict = classify(q.generators[0], q.theta, cfg)
    w = verdict.witness if verdict.tag == CONTINUOUS else None
    if w is not None and q.dim > 1:
        worst = max(coboundary_residual(q.generators[i], w, q.base_angles[i]) for i in range(1, q.dim))
        if worst > 10 * cfg.tol:
            verdict = Verdict(INCONCLUSIVE, diagnostics={"other_generators_residual": worst})
            w = None
    res = None
    if w is not None:
        res = verify_intertwining(build_intertwiner(w, u.alpha_angle), u, v)
    return CohomologyResult(verdict, w, res)


class Intertwiner:
    """Psi(a V^n) = a w^(n) V^n with w^(n) the alpha-twisted product of w."""

    def __init__(self, w: UnitaryFn, alpha: Angle, cap: int | None = None):
        self.w = w
        self.alpha = alpha
        self.cap = cap
        self._polys: dict[int, FourierPoly] = {}

    def power(self, n: int) -> FourierPoly:
        p = self._polys.get(n)
        if p is None:
            p = self._polys[n] = unitary_poly(birkhoff_product(self.w, self.alpha, n), self.cap)
        return p

    def __call__(self, x: CPElement) -> CPElement:
        if not same_angle(x.alpha, self.alpha):
            raise ValueError("element and intertwiner use different alpha angles")
        return x._like({n: a * self.power(n) for n, a in x.terms.items()})

    def inverse(self) -> Intertwiner:
        return Intertwiner(self.w.conj(), self.alpha, self.cap)


def build_intertwiner(w: UnitaryFn, alpha: Angle, cap: int | None = None) -> Intertwiner:
    return Intertwiner(w, alpha, cap)


def verify_intertwining(
    psi: Intertwiner,
    u: CocycleSpec,
    v: CocycleSpec,
    box: int = 3,
    samples: int = 6,
    seed: int = 0,
) -> float:
    """max || Psi(Phi^v_g x) - Phi^u_g(Psi x) ||_omega over a centred box and sampled monomials."""
    rng = np.random.default_rng(seed)
    alpha = u.alpha_angle
    cu, cv = TwistCache(u), TwistCache(v)
    monomials = [CPElement.V(alpha, 1)]
    for _ in range(samples - 1):
        n = int(rng.integers(-3, 4))
        monomials.append(CPElement.monomial(FourierPoly.random(rng, 3), n, alpha))
    worst = 0.0
    for g in np.ndindex(*([2 * box + 1] * u.dim)):
        g = as_element(tuple(int(c) - box for c in g), u.dim)
        for x in monomials:
            lhs = psi(apply_skew(v, g, x, cv))
            rhs = apply_skew(u, g, psi(x), cu)
            worst = max(worst, gns_norm(lhs - rhs))
    return worst
