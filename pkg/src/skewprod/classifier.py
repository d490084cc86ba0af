"""Per-level coboundary verdicts assembled into the ergodicity hierarchy."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .coboundary import (
    CONTINUOUS,
    INCONCLUSIVE,
    MEASURABLE,
    NOT_COBOUNDARY,
    DetectorConfig,
    Verdict,
    classify,
    coboundary_residual,
    excludes_measurable,
)
from .cocycle import CocycleSpec, twisted_family
from .crossed import CPElement, TwistCache, apply_skew, gns_norm
from .torus import Angle, UnitaryFn, birkhoff_product, scaled, unitary_poly


class Flag(str, Enum):
    TRUE = "true"
    FALSE = "false"
    INCONCLUSIVE = "inconclusive"

    @classmethod
    def of(cls, value: bool | None) -> Flag:
        return cls.INCONCLUSIVE if value is None else (cls.TRUE if value else cls.FALSE)


class WitnessError(ValueError):
    """An extended witness fails the equation it should solve."""


def _unit(spec: CocycleSpec, i: int) -> tuple[int, ...]:
    return tuple(int(j == i) for j in range(spec.dim))


def level_target(spec: CocycleSpec, n: int, generator: int = 0):
    """u_g^(n) for the ``generator``-th unit vector g, or the law itself."""
    if spec.is_analytic:
        return spec.law
    return twisted_family(spec, _unit(spec, generator), n)


def classify_level(
    spec: CocycleSpec,
    n: int,
    cfg: DetectorConfig | None = None,
    *,
    generator: int = 0,
    depth: int = 12,
    measurable_evidence: bool = True,
) -> Verdict:
    """Verdict on theta_g(a) u_g^(n) = a having a unimodular solution."""
    if n == 0:
        raise ValueError("level must be nonzero")
    cfg = cfg or DetectorConfig()
    target = level_target(spec, n, generator)
    v = classify(
        target,
        spec.base_angles[generator],
        cfg,
        level=n,
        alpha=spec.alpha_angle,
        depth=depth,
        measurable_evidence=measurable_evidence,
    )
    if spec.dim > 1 and v.tag == CONTINUOUS and v.witness is not None:
        # the same witness has to work for every generator
        worst = 0.0
        for i in range(1, spec.dim):
            ui = twisted_family(spec, _unit(spec, i), n)
            worst = max(worst, coboundary_residual(ui, v.witness, spec.base_angles[i]))
        v.diagnostics["other_generators_residual"] = worst
        if worst > cfg.tol * 10:
            return Verdict(
                NOT_COBOUNDARY,
                certificate={"name": "generator_mismatch", "residual": worst},
                diagnostics=v.diagnostics,
            )
    return v


@dataclass
class ClassificationReport:
    n_max: int
    verdicts: dict[int, Verdict]
    Z_u_window: list[int]
    m0: int
    n0: int
    weakly_ergodic: Flag
    uniquely_ergodic: Flag
    ue_wrt_fixed_point: Flag
    fixed_point_generator: tuple[UnitaryFn | list, int] | None
    witness_table: dict[int, Any] = field(default_factory=dict)

    def levels(self) -> list[int]:
        return sorted(self.verdicts, key=lambda n: (abs(n), n))

    def validate(self) -> list[str]:
        """Structural checks; returns a list of violated invariants."""
        problems = []
        if self.m0 and any(n % self.m0 for n in self.Z_u_window):
            problems.append("Z_u_window not contained in m0 Z")
        zs = set(self.Z_u_window)
        for a in zs:
            if -a not in zs and -a in self.verdicts:
                problems.append(f"Z_u_window not symmetric at {a}")
            for b in zs:
                if a + b in self.verdicts and a + b not in zs and self.verdicts[a + b].tag != INCONCLUSIVE:
                    problems.append(f"Z_u_window not closed under {a} + {b}")
        if self.uniquely_ergodic == Flag.TRUE and self.ue_wrt_fixed_point != Flag.TRUE:
            problems.append("uniquely_ergodic true but ue_wrt_fixed_point not true")
        if self.weakly_ergodic == Flag.TRUE and self.m0:
            problems.append("weakly_ergodic true with nontrivial Z_u")
        if self.uniquely_ergodic == Flag.TRUE and self.weakly_ergodic == Flag.FALSE:
            problems.append("uniquely_ergodic true but not weakly ergodic")
        return problems

    def summary(self) -> dict:
        gen = None
        if self.fixed_point_generator is not None:
            w, m = self.fixed_point_generator
            gen = {"m0": m, "witness": w.to_json() if isinstance(w, UnitaryFn) else _table_json(w)}
        return {
            "n_max": self.n_max,
            "Z_u_window": self.Z_u_window,
            "m0": self.m0,
            "n0": self.n0,
            "weakly_ergodic": self.weakly_ergodic.value,
            "uniquely_ergodic": self.uniquely_ergodic.value,
            "ue_wrt_fixed_point": self.ue_wrt_fixed_point.value,
            "fixed_point_generator": gen,
        }

    def to_json(self) -> dict:
        return {
            "levels": [{"level": n, **self.verdicts[n].to_json()} for n in self.levels()],
            "summary": self.summary(),
        }


def _table_json(table) -> list:
    return [[m, c.real, c.imag] for m, c in table]


def _flags(verdicts: dict[int, Verdict], zs: list[int]) -> tuple[Flag, Flag, Flag]:
    vs = list(verdicts.values())
    any_inconclusive = any(v.tag == INCONCLUSIVE for v in vs)

    if zs:
        weak = Flag.FALSE
    else:
        weak = Flag.INCONCLUSIVE if any_inconclusive else Flag.TRUE

    if any(v.is_coboundary() for v in vs):
        unique = Flag.FALSE
    elif all(v.tag == NOT_COBOUNDARY and excludes_measurable(v) for v in vs):
        unique = Flag.TRUE
    else:
        unique = Flag.INCONCLUSIVE

    measurable = [v for v in vs if v.tag == MEASURABLE]
    if any(not v.heuristic for v in measurable):
        ue_fix = Flag.FALSE
    elif measurable or any_inconclusive:
        ue_fix = Flag.INCONCLUSIVE
    elif all(v.tag == CONTINUOUS or excludes_measurable(v) for v in vs):
        ue_fix = Flag.TRUE
    else:
        ue_fix = Flag.INCONCLUSIVE
    return weak, unique, ue_fix


def classify_system(
    spec: CocycleSpec,
    n_max: int = 12,
    cfg: DetectorConfig | None = None,
    *,
    depth: int = 12,
    threads: int = 1,
    measurable_evidence: bool = True,
) -> ClassificationReport:
    """Scan levels 1 <= |n| <= n_max and derive m0, n0 and the three flags."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    cfg = cfg or DetectorConfig()
    levels = [s * n for n in range(1, n_max + 1) for s in (1, -1)]

    def run(n):
        return classify_level(spec, n, cfg, depth=depth, measurable_evidence=measurable_evidence)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(run, levels))
    else:
        results = [run(n) for n in levels]
    verdicts = dict(zip(levels, results))

    zs = sorted(n for n, v in verdicts.items() if v.tag == CONTINUOUS)
    m0 = min((n for n in zs if n > 0), default=0)
    n0 = min((n for n, v in verdicts.items() if n > 0 and v.is_coboundary()), default=0)
    table: dict[int, Any] = {}
    for n, v in verdicts.items():
        if v.witness is not None:
            table[n] = v.witness
        elif v.witness_table is not None:
            table[n] = v.witness_table
    gen = None
    if m0:
        gen = (table.get(m0), m0)
    weak, unique, ue_fix = _flags(verdicts, zs)
    return ClassificationReport(n_max, verdicts, zs, m0, n0, weak, unique, ue_fix, gen, table)


def witness_extend(
    w: UnitaryFn,
    n0: int,
    k: int,
    alpha: Angle,
    *,
    spec: CocycleSpec | None = None,
    tol: float = 1e-9,
) -> UnitaryFn:
    """w_{k n0} = w alpha^{n0}(w) ... alpha^{(k-1) n0}(w), the V^{n0}-power rule.

    With ``spec`` given, the result is checked against the level k*n0 equation.
    """
    out = birkhoff_product(w, scaled(alpha, n0), k)
    if spec is not None and k != 0:
        u = twisted_family(spec, _unit(spec, 0), k * n0)
        res = coboundary_residual(u, out, spec.theta)
        if res > tol:
            raise WitnessError(f"extended witness misses level {k * n0} by {res:.3g}")
    return out


def fixed_point_element(report: ClassificationReport, alpha: Angle) -> CPElement:
    """w_{m0} V^{m0}."""
    if report.fixed_point_generator is None:
        raise ValueError("no fixed-point generator (m0 = 0)")
    w, m0 = report.fixed_point_generator
    if not isinstance(w, UnitaryFn):
        raise TypeError("fixed-point generator has no trigonometric witness")
    return CPElement.monomial(unitary_poly(w), m0, alpha)


def fixed_point_check(
    spec: CocycleSpec,
    report: ClassificationReport,
    samples: int = 4,
    box: int = 5,
    generator: CPElement | None = None,
) -> float:
    """max_{g, j <= samples} || Phi_g(y^j) - y^j ||_omega with y = w_{m0} V^{m0}."""
    if not report.m0:
        raise ValueError("report has m0 = 0")
    y = generator if generator is not None else fixed_point_element(report, spec.alpha_angle)
    cache = TwistCache(spec)
    worst = 0.0
    power = y
    gs = [g for g in np.ndindex(*([2 * box + 1] * spec.dim))]
    for _ in range(samples):
        for g in gs:
            g = tuple(int(v) - box for v in g)
            worst = max(worst, gns_norm(apply_skew(spec, g, power, cache) - power))
        power = power * y
    return worst
