"""Coboundary decisions over an irrational rotation.

The equation solved is u(x) = conj(w(x + theta)) w(x).  Writing
w = chi_{m_w} exp(2 pi i W) turns it into the additive small-divisor problem
phi_hat(m) = W_hat(m) (1 - exp(2 pi i m theta)) for m != 0, while the mean of
the phase must equal -m_w theta modulo 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Union

import mpmath
import numpy as np

from .cocycle import CoefficientLaw
from .torus import (
    TWO_PI,
    Angle,
    FourierPoly,
    RotationNumber,
    UnitaryFn,
    angle_value,
    birkhoff_product,
    expand_unitary,
    frac_times,
    unitary_poly,
)

CONTINUOUS = "ContinuousCoboundary"
MEASURABLE = "MeasurableCoboundary"
NOT_COBOUNDARY = "NotCoboundary"
INCONCLUSIVE = "Inconclusive"

MEASURABILITY_CONVENTION = (
    "measurable means: l2-summable formal solution W with unimodular exp(2 pi i W)"
)


class DetectorRefused(ValueError):
    """The detector band is too small to represent the unitary faithfully."""


@dataclass(frozen=True)
class DetectorConfig:
    band: int = 16
    iterations: int = 100_000
    battery: int = 8
    null_threshold: float | None = None
    existence_threshold: float = 0.5
    tol: float = 1e-9
    winding_search: int = 10_000
    shift_iterations: int = 1024
    cauchy_threshold: float = 0.5
    max_band: int = 256

    def __post_init__(self):
        if self.battery > self.band:
            raise ValueError("battery size cannot exceed the band")
        if not self.tau < self.existence_threshold:
            raise ValueError("null threshold must lie below the existence threshold")

    @property
    def tau(self) -> float:
        if self.null_threshold is not None:
            return self.null_threshold
        return 10.0 / math.sqrt(self.iterations)

    def to_json(self) -> dict:
        return {
            "band": self.band,
            "iterations": self.iterations,
            "battery": self.battery,
            "null_threshold": self.tau,
            "existence_threshold": self.existence_threshold,
            "tol": self.tol,
            "winding_search": self.winding_search,
            "shift_iterations": self.shift_iterations,
            "cauchy_threshold": self.cauchy_threshold,
        }


@dataclass
class Verdict:
    tag: str
    witness: UnitaryFn | None = None
    witness_table: list[tuple[int, complex]] | None = None
    certificate: dict | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)
    heuristic: bool = False

    @property
    def certificate_name(self) -> str | None:
        return self.certificate["name"] if self.certificate else None

    def is_coboundary(self) -> bool:
        return self.tag in (CONTINUOUS, MEASURABLE)

    def to_json(self) -> dict:
        out: dict[str, Any] = {
            "tag": self.tag,
            "certificate": self.certificate,
            "heuristic": self.heuristic,
            "diagnostics": _jsonable(self.diagnostics),
        }
        if self.witness is not None:
            out["witness"] = self.witness.to_json()
        if self.witness_table is not None:
            out["witness_phase_table"] = [[m, c.real, c.imag] for m, c in self.witness_table]
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, mpmath.mpf)):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def coboundary_residual(u: UnitaryFn, w: UnitaryFn, theta: Angle, points: int = 1024) -> float:
    """max_x |u(x) - conj(w(x + theta)) w(x)| on a uniform grid."""
    x = np.arange(points) / points
    t = frac_times(theta, 1)
    return float(np.max(np.abs(u.evaluate(x) - np.conj(w.evaluate(x + t)) * w.evaluate(x))))


# ---------------------------------------------------------------------------
# Invariant-vector detector


@dataclass
class DetectorEvidence:
    max_norm: float
    argmax: int
    norms: dict[int, float]
    band: int
    iterations: int
    aliasing: float
    mode: str
    vector: FourierPoly | None = None

    def to_json(self) -> dict:
        return {
            "max_norm": self.max_norm,
            "argmax": self.argmax,
            "band": self.band,
            "iterations": self.iterations,
            "aliasing": self.aliasing,
            "mode": self.mode,
        }


def twisted_matrix(u: UnitaryFn, theta: Angle, band: int) -> tuple[np.ndarray, float]:
    """Matrix of (W f)(x) = u(x) f(x + theta) on frequencies -band..band."""
    exp = expand_unitary(u, 2 * band)
    uhat = exp.poly.window(-2 * band, 2 * band)
    m = np.arange(-band, band + 1)
    rot = np.exp(1j * TWO_PI * np.array([frac_times(theta, int(k)) for k in m]))
    toeplitz = uhat[(m[:, None] - m[None, :]) + 2 * band]
    return toeplitz * rot[None, :], exp.aliasing


def geometric_matrix_sum(W: np.ndarray, K: int) -> np.ndarray:
    """sum_{j<K} W^j by binary doubling."""
    n = W.shape[0]
    S = np.zeros_like(W)
    P = np.eye(n, dtype=W.dtype)  # W^k for the current partial count k
    for bit in bin(K)[2:]:
        # double: S_{2k} = S_k + W^k S_k
        S = S + P @ S
        P = P @ P
        if bit == "1":
            S = S + P
            P = P @ W
    return S


def detect_invariant_vector(u: UnitaryFn, theta: Angle, cfg: DetectorConfig | None = None) -> DetectorEvidence:
    """Cesaro averages (1/K) sum_{j<K} W^j chi_m of the twisted operator.

    For winding 0 the operator is truncated to the detector band.  A nonzero
    winding shifts the spectrum at every step, so the averages are instead
    accumulated without truncation over ``cfg.shift_iterations`` steps.
    """
    cfg = cfg or DetectorConfig()
    if u.winding != 0:
        return _detect_shift_mode(u, theta, cfg)
    N, K, M = cfg.band, cfg.iterations, cfg.battery
    W, aliasing = twisted_matrix(u, theta, N)
    if aliasing > 10 * cfg.tol:
        raise DetectorRefused(f"aliasing estimate {aliasing:.3g} at band {N}; increase the band")
    S = geometric_matrix_sum(W, K) / K
    cols = np.arange(-M, M + 1) + N
    norms_arr = np.linalg.norm(S[:, cols], axis=0)
    i = int(np.argmax(norms_arr))
    norms = {int(m): float(v) for m, v in zip(range(-M, M + 1), norms_arr)}
    vec = FourierPoly(-N, S[:, cols[i]])
    return DetectorEvidence(float(norms_arr[i]), i - M, norms, N, K, aliasing, "banded", vec)


def _detect_shift_mode(u: UnitaryFn, theta: Angle, cfg: DetectorConfig) -> DetectorEvidence:
    K, M = cfg.shift_iterations, cfg.battery
    polys = [unitary_poly(birkhoff_product(u, theta, j)) for j in range(K)]
    reach = 2 * max(p.hi - p.lo + 1 for p in polys)
    # Gram entries <U_j, U_{j+d}> vanish once the supports separate
    gram: dict[int, np.ndarray] = {}
    for d in range(0, K):
        row = np.zeros(K - d, dtype=np.complex128)
        any_overlap = False
        for j in range(K - d):
            a, b = polys[j], polys[j + d]
            lo, hi = max(a.lo, b.lo), min(a.hi, b.hi)
            if lo <= hi:
                any_overlap = True
                row[j] = np.vdot(b.window(lo, hi), a.window(lo, hi))
        if not any_overlap and d > reach:
            break
        gram[d] = row
    norms = {}
    j = np.arange(K)
    for m in range(-M, M + 1):
        ph = np.exp(1j * TWO_PI * np.array([frac_times(theta, m * jj) for jj in j]))
        total = 0.0
        for d, row in gram.items():
            term = np.sum(ph[: K - d] * np.conj(ph[d:]) * row)
            total += term.real if d == 0 else 2 * term.real
        norms[m] = math.sqrt(max(total, 0.0)) / K
    m_star = max(norms, key=norms.get)
    return DetectorEvidence(norms[m_star], m_star, norms, 0, K, 0.0, "shift")


# ---------------------------------------------------------------------------
# Trigonometric-polynomial solver


def _winding_search(c: float, theta: Angle, bound: int, tol: float) -> tuple[int | None, float]:
    """Smallest |m| <= bound with c + m*theta within tol of an integer."""
    t = angle_value(theta)
    m = np.arange(-bound, bound + 1)
    frac = np.mod(c + m * t, 1.0)
    dist = np.minimum(frac, 1.0 - frac)
    order = np.argsort(np.abs(m), kind="stable")
    best = float(np.min(dist))
    for i in order:
        if dist[i] <= max(tol, 1e-6):
            mi = int(m[i])
            f = (c + frac_times(theta, mi)) % 1.0
            d = min(f, 1.0 - f)
            if d <= tol:
                return mi, d
    return None, best


def solve_continuous(
    u: UnitaryFn,
    theta: Angle,
    tol: float = 1e-9,
    cfg: DetectorConfig | None = None,
) -> Verdict:
    """Decide whether u = conj(w(. + theta)) w for a trigonometric-type w."""
    cfg = cfg or DetectorConfig(tol=tol)
    if u.winding != 0:
        return Verdict(
            NOT_COBOUNDARY,
            certificate={"name": "winding_obstruction", "winding": u.winding},
            diagnostics={"winding": u.winding},
        )
    c = u.mean_phase
    m_w, dist = _winding_search(c, theta, cfg.winding_search, tol)
    if m_w is None:
        diag: dict[str, Any] = {"min_distance": dist, "search_bound": cfg.winding_search}
        try:
            ev = _detect_with_growth(u, theta, cfg)
        except DetectorRefused as exc:
            diag["detector_error"] = str(exc)
            return Verdict(INCONCLUSIVE, diagnostics=diag)
        diag["detector"] = ev.to_json()
        diag["null_threshold"] = cfg.tau
        if ev.max_norm < cfg.tau:
            return Verdict(
                NOT_COBOUNDARY,
                certificate={"name": "mean_obstruction", "search_bound": cfg.winding_search, "min_distance": dist},
                diagnostics=diag,
            )
        return Verdict(INCONCLUSIVE, diagnostics=diag)

    coeffs = {}
    min_div = math.inf
    for m, val in u.phase.items():
        if m == 0:
            continue
        t = frac_times(theta, m)
        div = 1 - np.exp(1j * TWO_PI * t)
        min_div = min(min_div, abs(div))
        if abs(div) < 1e-14:
            return Verdict(INCONCLUSIVE, diagnostics={"small_divisor_frequency": m, "divisor": abs(div)})
        coeffs[m] = val / div
    w = UnitaryFn(m_w, FourierPoly.from_dict(coeffs))
    res = coboundary_residual(u, w, theta)
    diag = {"residual": res, "character_shift": m_w, "mean_distance": dist, "min_divisor": min_div}
    if res > tol:
        return Verdict(INCONCLUSIVE, witness=w, diagnostics=diag)
    return Verdict(CONTINUOUS, witness=w, diagnostics=diag)


def _detect_with_growth(u: UnitaryFn, theta: Angle, cfg: DetectorConfig) -> DetectorEvidence:
    band = cfg.band
    while True:
        try:
            return detect_invariant_vector(u, theta, _with_band(cfg, band))
        except DetectorRefused:
            if 2 * band > cfg.max_band:
                raise
            band *= 2


def _with_band(cfg: DetectorConfig, band: int) -> DetectorConfig:
    if band == cfg.band:
        return cfg
    d = cfg.to_json()
    d["band"] = band
    d["null_threshold"] = cfg.null_threshold
    d["max_band"] = cfg.max_band
    return DetectorConfig(**d)


# ---------------------------------------------------------------------------
# Lacunary laws


@dataclass
class LawTerm:
    k: int
    q: int
    phi: complex  # phase coefficient at +q (level-adjusted)
    divisor: float  # |1 - exp(2 pi i q theta)|
    magnitude: float  # |W_hat(q)|
    W: complex | None


def law_terms(
    law: CoefficientLaw,
    theta: RotationNumber,
    depth: int,
    level: int = 1,
    alpha: RotationNumber | None = None,
) -> list[LawTerm]:
    """Phase coefficients of the level-``level`` twisted law and the formal solution."""
    if not isinstance(theta, RotationNumber):
        raise TypeError("law-driven solving needs theta as a continued fraction")
    last = law.first + depth
    if theta.finite and last + 1 >= len(theta.cf):
        raise ValueError("law support exceeds the (finite) continued fraction of theta")
    convs = theta.convergents(last + 2)
    q_next = convs[last + 1][1]
    need = q_next * q_next * 10**30
    P, Q = theta.rational(need)
    if level != 1:
        if alpha is None:
            raise ValueError("twisted levels need the alpha angle")
        A, B = alpha.rational(need * abs(level))
    terms = []
    seq = law.seq
    with mpmath.workdps(40):
        for k in range(law.first, law.first + depth):
            q = convs[k][1]
            fl, r = divmod(q * P, Q)
            delta = mpmath.mpf(r) / Q  # frac(q theta)
            s_pi = mpmath.sin(mpmath.pi * delta)
            sin_q = -s_pi if fl % 2 else s_pi  # sin(pi q theta)
            if law.amplitude == "match-divisor":
                phi = 2 * sin_q * law.scale * seq.value(k)
            else:
                phi = mpmath.mpf(law.scale * seq.value(k))
            phi = mpmath.mpc(phi)
            if level != 1:
                n = abs(level)
                _, ra = divmod(q * A, B)
                _, rna = divmod(n * q * A, B)
                t = mpmath.mpf(ra) / B
                tn = mpmath.mpf(rna) / B
                # (1 - e(tn)) / (1 - e(t)) without cancellation for tiny t
                if t != 0:
                    geo = mpmath.expjpi(tn - t) * mpmath.sin(mpmath.pi * tn) / mpmath.sin(mpmath.pi * t)
                else:
                    geo = mpmath.mpf(n)
                if level < 0:
                    # u^(-n) = alpha^{-n}(conj(u^(n))): the real phase flips sign and rotates by -n*alpha
                    geo = -geo * mpmath.expjpi(-2 * tn)
                phi = phi * geo
            # 1 - e(delta) = -2i sin(pi delta) e(delta / 2)
            div = -2j * mpmath.sin(mpmath.pi * delta) * mpmath.expjpi(delta)
            mag = abs(phi) / abs(div)
            W = phi / div
            terms.append(LawTerm(k, q, complex(phi), float(abs(div)), float(mag), complex(W) if mag < 1e300 else None))
    return terms


def _tail_certificates(law: CoefficientLaw, theta: RotationNumber, alpha, level: int, last_k: int) -> dict:
    """Analytic bounds on the tail k > last_k of |W_hat(q_k)|."""
    seq = law.seq
    n = abs(level)
    out: dict[str, Any] = {"sq_tail_upper": None, "abs_tail_upper": None, "term_floor": 0.0}
    if law.amplitude == "match-divisor":
        st = seq.sq_tail(last_k)
        if st is not None:
            # |S_n| <= n, both +q and -q contribute
            out["sq_tail_upper"] = 2 * n * n * law.scale**2 * st
        # lower bound on |S_n(q_k alpha)| for k > last_k
        if n == 1:
            geo_floor = 1.0
        elif alpha is not None and alpha == theta:
            q_next = theta.convergents(last_k + 2)[-1][1]
            q_f = float(q_next) if q_next.bit_length() < 1000 else 1e300  # still a lower bound
            geo_floor = max(0.0, n * (1 - math.pi * (n - 1) / q_f))
        else:
            geo_floor = 0.0
        out["term_floor"] = abs(law.scale) * seq.floor * geo_floor
        abs_tail = seq.abs_tail(last_k)
        out["abs_tail_upper"] = None if abs_tail is None else 2 * n * abs(law.scale) * abs_tail
    else:
        # |W_hat(q_k)| >= scale s_k |S_n| q_{k+1} / (2 pi) and q_{k+1} >= q_{D+1} 2^{floor((k-D)/2)}
        if n == 1:
            q_next = theta.convergents(last_k + 2)[-1][1]
            q_f = float(q_next) if q_next.bit_length() < 1000 else 1e300  # still a lower bound
            floor = math.inf
            for k in range(last_k + 1, last_k + 400):
                growth = 2.0 ** ((k - last_k) // 2)
                floor = min(floor, abs(law.scale) * seq.value(k) * growth * q_f / TWO_PI)
            out["term_floor"] = floor
    return out


def _fejer_cauchy(terms: list[LawTerm], cfg: DetectorConfig, samples: int = 4096, seed: int = 0) -> dict:
    """Lower bounds on sup-norm gaps between Fejer means of W at late cutoffs.

    Cutoffs sit between consecutive support frequencies; evaluation points
    are rationals r / P so that every phase frac(q r / P) is exact.
    """
    usable = [t for t in terms if t.W is not None]
    if len(usable) < 3:
        return {"tested": False}
    qs = [t.q for t in usable]
    cut = [math.isqrt(a * b) for a, b in zip(qs, qs[1:])]
    rng = np.random.default_rng(seed)
    Pm = (1 << 61) - 1
    r = [int(v) for v in rng.integers(1, Pm, samples)]
    phases = np.array([[(t.q * ri) % Pm for ri in r] for t in usable], dtype=float) / Pm
    W = np.array([t.W for t in usable])

    def fejer_weight(q, N):
        return 0.0 if q >= N else 1.0 - q / N

    gaps = []
    start = len(cut) // 2
    b = len(cut) - 1
    for a in range(start, b):
        wts = np.array([fejer_weight(q, cut[b]) - fejer_weight(q, cut[a]) for q in qs])
        # W real: 2 Re(W_hat e(qx))
        vals = 2 * np.real((wts * W)[:, None] * np.exp(1j * TWO_PI * phases))
        gaps.append(float(np.max(np.abs(vals.sum(axis=0)))))
    worst = max(gaps) if gaps else 0.0
    return {
        "tested": True,
        "gap_lower_bounds": gaps,
        "max_gap": worst,
        "threshold": cfg.cauchy_threshold,
        "fails": worst > cfg.cauchy_threshold,
        "heuristic": True,
    }


def _lacunary_residual(terms: list[LawTerm], theta: RotationNumber, samples: int = 256) -> float:
    """Residual of the truncated equation at random exact-rational points."""
    P, Q = theta.rational(terms[-1].q ** 2 * 10**30)
    Pm = (1 << 61) - 1
    rng = np.random.default_rng(1)
    worst = 0.0
    for ri in rng.integers(1, Pm, samples):
        ri = int(ri)
        phi = 0.0
        diff = 0.0
        for t in terms:
            e_x = np.exp(1j * TWO_PI * ((t.q * ri) % Pm) / Pm)
            e_th = np.exp(1j * TWO_PI * (((t.q * P) % Q) / Q))
            phi += 2 * (t.phi * e_x).real
            diff += 2 * (t.W * e_x * (1 - e_th)).real
        worst = max(worst, abs(1 - np.exp(1j * TWO_PI * (diff - phi))))
    return worst


def solve_analytic(
    law: CoefficientLaw,
    theta: RotationNumber,
    depth: int = 12,
    *,
    level: int = 1,
    alpha: RotationNumber | None = None,
    cfg: DetectorConfig | None = None,
) -> Verdict:
    """Classify the lacunary cocycle exp(2 pi i phi) described by ``law``."""
    cfg = cfg or DetectorConfig()
    if law.empty:
        return Verdict(CONTINUOUS, witness=UnitaryFn.one(), diagnostics={"residual": 0.0, "law": "empty"})
    terms = law_terms(law, theta, depth, level, alpha)
    last_k = terms[-1].k
    mags = np.array([t.magnitude for t in terms])
    partial = float(2 * np.sum(mags**2))
    partials = list(2 * np.cumsum(mags**2))
    tail = _tail_certificates(law, theta, alpha, level, last_k)
    diag: dict[str, Any] = {
        "level": level,
        "depth": depth,
        "support": [t.q for t in terms],
        "magnitudes": [float(m) for m in mags],
        "l2_partial_sums": [float(p) for p in partials],
        "min_divisor": min(t.divisor for t in terms),
        "tail": tail,
        "convention": MEASURABILITY_CONVENTION,
    }
    diag["riemann_lebesgue_violation"] = bool(tail["term_floor"] > 0)
    table = [(t.q, t.W) for t in terms if t.W is not None]
    table += [(-q, W.conjugate()) for q, W in table]

    if tail["term_floor"] > 0:
        return Verdict(
            NOT_COBOUNDARY,
            certificate={
                "name": "l2_divergence",
                "partial_sum_lower_bound": partial,
                "tail_term_lower_bound": tail["term_floor"],
                "riemann_lebesgue_violation": True,
            },
            diagnostics=diag,
        )
    if tail["sq_tail_upper"] is None:
        return Verdict(INCONCLUSIVE, diagnostics=diag)

    diag["l2_upper_bound"] = partial + tail["sq_tail_upper"]
    if tail["abs_tail_upper"] is not None:
        # absolutely summable Fourier series: W, hence w, is continuous
        diag["residual"] = _lacunary_residual(terms, theta)
        diag["truncation_phase_bound"] = 4 * tail["abs_tail_upper"]
        diag["continuity"] = "absolutely summable formal solution"
        return Verdict(CONTINUOUS, witness_table=table, diagnostics=diag)
    fejer = _fejer_cauchy(terms, cfg)
    diag["fejer"] = fejer
    if fejer.get("fails"):
        diag["non_continuity"] = "fejer_uniform_cauchy_failure"
        return Verdict(MEASURABLE, witness_table=table, diagnostics=diag, heuristic=True)
    return Verdict(INCONCLUSIVE, witness_table=table, diagnostics=diag)


# ---------------------------------------------------------------------------


Target = Union[UnitaryFn, CoefficientLaw]


def classify(
    target: Target,
    theta: Angle,
    cfg: DetectorConfig | None = None,
    *,
    level: int = 1,
    alpha: RotationNumber | None = None,
    depth: int = 12,
    measurable_evidence: bool = False,
) -> Verdict:
    """One verdict for a unitary or a lacunary law over the rotation by theta."""
    cfg = cfg or DetectorConfig()
    if isinstance(target, CoefficientLaw):
        return solve_analytic(target, theta, depth, level=level, alpha=alpha, cfg=cfg)
    v = solve_continuous(target, theta, cfg.tol, cfg)
    if v.tag == INCONCLUSIVE and "small_divisor_frequency" in v.diagnostics:
        try:
            ev = _detect_with_growth(target, theta, cfg)
        except DetectorRefused as exc:
            v.diagnostics["detector_error"] = str(exc)
            return v
        v.diagnostics["detector"] = ev.to_json()
        if ev.max_norm < cfg.tau:
            return Verdict(
                NOT_COBOUNDARY,
                certificate={"name": "detector_null", "max_norm": ev.max_norm, "band": ev.band, "iterations": ev.iterations},
                diagnostics=v.diagnostics,
                heuristic=True,
            )
        return v
    if measurable_evidence and v.certificate_name == "winding_obstruction":
        ev = detect_invariant_vector(target, theta, cfg)
        v.diagnostics["detector"] = ev.to_json()
        v.diagnostics["null_threshold"] = 10.0 / math.sqrt(ev.iterations)
    return v


def excludes_measurable(v: Verdict) -> bool | None:
    """Whether a NotCoboundary verdict also rules out a measurable solution.

    True for rigorous or detector-backed exclusions, None when no such
    evidence was collected.
    """
    if v.tag != NOT_COBOUNDARY:
        return False
    name = v.certificate_name
    if name in ("l2_divergence", "detector_null"):
        return True
    det = v.diagnostics.get("detector")
    if det is not None:
        thr = v.diagnostics.get("null_threshold", 10.0 / math.sqrt(det["iterations"]))
        return det["max_norm"] < thr
    return None
