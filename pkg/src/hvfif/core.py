"""Univariate hidden-variable IFS: data, interval maps, coefficient functions.

The vector map on interval ``i`` is::

    F_i(x, y, z) = S_i(x) @ (y, z) + (q_i(x), q~_i(x))

where ``S_i(x)`` holds the four factors evaluated at ``L_i(x)`` and the
offsets are assembled from the Lagrange lines ``g, g'`` (global) and
``h_i, h~_i`` (per interval).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import factors as fx
from .factors import FactorExpr, Interval

EXACT_TOL = 1e-9


class ConstructionError(ValueError):
    pass


class NotContractiveError(ConstructionError):
    def __init__(self, interval: int, value: float):
        super().__init__(f"S >= 1 at interval {interval} (S = {value:.6g})")
        self.interval = interval
        self.value = value


class FactorBoundError(ConstructionError):
    def __init__(self, interval: int, name: str, bound: float):
        super().__init__(f"factor sup >= 1: {name} on interval {interval} (bound {bound:.6g})")
        self.interval = interval
        self.name = name
        self.bound = bound


@dataclass(frozen=True)
class ExtendedDataSet:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        z = np.asarray(self.z, dtype=float)
        if not (x.ndim == y.ndim == z.ndim == 1 and len(x) == len(y) == len(z)):
            raise ConstructionError("x, y, z must be 1-D arrays of equal length")
        if len(x) < 3:
            raise ConstructionError("need at least three nodes (n >= 2)")
        if not np.all(np.isfinite(np.concatenate([x, y, z]))):
            raise ConstructionError("data must be finite")
        if np.any(np.diff(x) <= 0):
            raise ConstructionError("abscissae must be strictly increasing")
        for name, arr in (("x", x), ("y", y), ("z", z)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return len(self.x) - 1

    @property
    def span(self) -> Interval:
        return Interval(float(self.x[0]), float(self.x[-1]))

    def subinterval(self, i: int) -> Interval:
        return Interval(float(self.x[i - 1]), float(self.x[i]))

    def is_uniform(self, rtol: float = 1e-12) -> bool:
        d = np.diff(self.x)
        return bool(np.all(np.abs(d - d.mean()) <= rtol * abs(self.x[-1] - self.x[0])))

    def replace(self, x=None, y=None, z=None) -> "ExtendedDataSet":
        return ExtendedDataSet(
            self.x if x is None else x, self.y if y is None else y, self.z if z is None else z
        )


@dataclass(frozen=True)
class IntervalMap:
    """Affine similarity ``L_i`` from ``source`` onto ``target``."""

    index: int
    source: Interval
    target: Interval
    reversed: bool = False

    @property
    def scale(self) -> float:
        """Signed slope of the affine map."""
        s = self.target.width / self.source.width
        return -s if self.reversed else s

    @property
    def contraction(self) -> float:
        return self.target.width / self.source.width

    @property
    def shift(self) -> float:
        start = self.target.hi if self.reversed else self.target.lo
        return start - self.scale * self.source.lo

    def __call__(self, u):
        if self.reversed:
            return self.target.hi - self.contraction * (u - self.source.lo)
        return self.target.lo + self.contraction * (u - self.source.lo)

    def inverse(self, x):
        if self.reversed:
            return self.source.lo + (self.target.hi - x) / self.contraction
        return self.source.lo + (x - self.target.lo) / self.contraction


@dataclass(frozen=True)
class FactorQuad:
    s: FactorExpr
    s_prime: FactorExpr
    s_tilde: FactorExpr
    s_tilde_prime: FactorExpr

    NAMES = ("s", "s_prime", "s_tilde", "s_tilde_prime")

    @classmethod
    def of(cls, s, s_prime, s_tilde, s_tilde_prime) -> "FactorQuad":
        return cls(*(fx.as_expr(v) for v in (s, s_prime, s_tilde, s_tilde_prime)))

    @classmethod
    def constant(cls, c: float) -> "FactorQuad":
        return cls.of(c, c, c, c)

    def items(self):
        return [(name, getattr(self, name)) for name in self.NAMES]

    def compose(self, mapping: dict) -> "FactorQuad":
        return FactorQuad(*(fx.substitute(e, mapping) for _, e in self.items()))


class Coefficients(NamedTuple):
    """Everything ``F_i`` needs at a batch of source points."""

    s: np.ndarray
    s_prime: np.ndarray
    s_tilde: np.ndarray
    s_tilde_prime: np.ndarray
    g: np.ndarray
    g_prime: np.ndarray
    h: np.ndarray
    h_tilde: np.ndarray


def apply_map(c: Coefficients, f1, f2):
    """The shared evaluation kernel: ``F_i`` on precomputed coefficients."""
    dy = f1 - c.g
    dz = f2 - c.g_prime
    return (c.s * dy + c.s_prime * dz + c.h, c.s_tilde * dy + c.s_tilde_prime * dz + c.h_tilde)


@dataclass(frozen=True)
class ContractionReport:
    S: float
    c_L: float
    L_S: float
    kappa: float
    L_Q: float
    theta_max: float
    c_at_half_theta: float
    box: tuple  # ((y_lo, y_hi), (z_lo, z_hi))
    box_verified: bool
    per_interval: list = field(default_factory=list)

    @property
    def contractive(self) -> bool:
        return self.S < 1.0

    def to_dict(self) -> dict:
        return {
            "S": self.S,
            "c_L": self.c_L,
            "L_S": self.L_S,
            "kappa": self.kappa,
            "L_Q": self.L_Q,
            "theta_max": self.theta_max,
            "c_at_half_theta": self.c_at_half_theta,
            "contractive": self.contractive,
            "box": [list(self.box[0]), list(self.box[1])],
            "box_verified": self.box_verified,
            "per_interval": self.per_interval,
        }


def theta_bound(c_L: float, L_S: float, kappa: float, L_Q: float) -> float:
    """Largest admissible metric weight; ``inf`` when the map has no x-coupling."""
    denom = L_S * kappa + L_Q
    if denom <= 0:
        return math.inf
    return (1.0 - c_L) / denom


def contraction_factor(theta: float, c_L: float, L_S: float, kappa: float, L_Q: float, S: float) -> float:
    if math.isinf(theta):
        return max(c_L, S)
    return max(c_L + theta * (L_S * kappa + L_Q), S)


def _line_expr(x0: float, x1: float, v0: float, v1: float) -> FactorExpr:
    # (x - x0)/(x1 - x0)*v1 + (x - x1)/(x0 - x1)*v0
    X = fx.Var("x")
    return fx.add(
        fx.mul(fx.const(v1 / (x1 - x0)), fx.sub(X, fx.const(x0))),
        fx.mul(fx.const(v0 / (x0 - x1)), fx.sub(X, fx.const(x1))),
    )


class Hvfif:
    """A validated hidden-variable IFS with function contractivity factors.

    Build instances with :func:`build_univariate`.
    """

    def __init__(self, data: ExtendedDataSet, maps: list, factors: list):
        self.data = data
        self.maps = maps
        self.factors = factors
        x, y, z = data.x, data.y, data.z
        self.g_expr = _line_expr(x[0], x[-1], y[0], y[-1])
        self.g_prime_expr = _line_expr(x[0], x[-1], z[0], z[-1])
        self.h_exprs = [_line_expr(x[i - 1], x[i], y[i - 1], y[i]) for i in range(1, data.n + 1)]
        self.h_tilde_exprs = [_line_expr(x[i - 1], x[i], z[i - 1], z[i]) for i in range(1, data.n + 1)]
        self.q_exprs = []
        self.q_tilde_exprs = []
        for i in range(1, data.n + 1):
            L = self.maps[i - 1]
            sub = {"x": fx.affine(L.scale, L.shift)}
            fq = self.factors[i - 1].compose(sub)
            h_of_L = fx.substitute(self.h_exprs[i - 1], sub)
            ht_of_L = fx.substitute(self.h_tilde_exprs[i - 1], sub)
            self.q_exprs.append(
                fx.add(
                    fx.sub(fx.Neg(fx.mul(fq.s, self.g_expr)), fx.mul(fq.s_prime, self.g_prime_expr)),
                    h_of_L,
                )
            )
            self.q_tilde_exprs.append(
                fx.add(
                    fx.sub(fx.Neg(fx.mul(fq.s_tilde, self.g_expr)), fx.mul(fq.s_tilde_prime, self.g_prime_expr)),
                    ht_of_L,
                )
            )
        self.violations: list = []
        self.contraction: Optional[ContractionReport] = None

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def S(self) -> float:
        return self.contraction.S

    def owner(self, x) -> np.ndarray:
        """Interval index (1-based) owning each x; intervals are [x_{i-1}, x_i)."""
        j = np.searchsorted(self.data.x, x, side="right")
        return np.clip(j, 1, self.n)

    def g(self, x):
        return self.g_expr(x)

    def g_prime(self, x):
        return self.g_prime_expr(x)

    def q(self, i: int, x):
        return self.q_exprs[i - 1](x)

    def q_tilde(self, i: int, x):
        return self.q_tilde_exprs[i - 1](x)

    def coefficients(self, i: int, xi) -> Coefficients:
        """Coefficients of ``F_i`` at source points ``xi`` (factors read at ``L_i(xi)``)."""
        self._check_index(i)
        xi = np.asarray(xi, dtype=float)
        X = self.maps[i - 1](xi)
        fq = self.factors[i - 1]
        return Coefficients(
            fq.s(X), fq.s_prime(X), fq.s_tilde(X), fq.s_tilde_prime(X),
            self.g_expr(xi), self.g_prime_expr(xi),
            self.h_exprs[i - 1](X), self.h_tilde_exprs[i - 1](X),
        )

    def rhs_recursion(self, i: int, xi, f1_xi, f2_xi):
        """``(F_i^1, F_i^2)`` at ``(xi, f1, f2)``: the values assigned at ``L_i(xi)``."""
        c = self.coefficients(i, xi)
        a, b = apply_map(c, f1_xi, f2_xi)
        if np.ndim(a) == 0:
            return float(a), float(b)
        return a, b

    def _check_index(self, i: int):
        if not 1 <= i <= self.n:
            raise IndexError(f"interval index {i} out of range 1..{self.n}")

    def refine(self, x: np.ndarray, f1: np.ndarray, f2: np.ndarray):
        """One Hutchinson step on a sorted attractor sample spanning [x_0, x_n].

        Node ``x_i`` (0 < i < n) is taken from block ``i+1``.
        """
        xs, a1, a2 = [], [], []
        for i in range(1, self.n + 1):
            L = self.maps[i - 1]
            X = L(x)
            F1, F2 = apply_map(self.coefficients(i, x), f1, f2)
            if L.reversed:
                X, F1, F2 = X[::-1], F1[::-1], F2[::-1]
            if i < self.n:
                X, F1, F2 = X[:-1], F1[:-1], F2[:-1]
            # snap the shared node exactly
            X = X.copy()
            X[0] = self.data.x[i - 1]
            xs.append(X)
            a1.append(F1)
            a2.append(F2)
        xs[-1][-1] = self.data.x[-1]
        return np.concatenate(xs), np.concatenate(a1), np.concatenate(a2)


def make_maps(data: ExtendedDataSet, orientation: Optional[Sequence] = None) -> list:
    orientation = orientation or ["forward"] * data.n
    if len(orientation) != data.n:
        raise ConstructionError(f"expected {data.n} orientation flags, found {len(orientation)}")
    maps = []
    for i, o in enumerate(orientation, start=1):
        if o not in ("forward", "reversed"):
            raise ConstructionError(f"orientation must be 'forward' or 'reversed', got {o!r}")
        maps.append(IntervalMap(i, data.span, data.subinterval(i), reversed=(o == "reversed")))
    return maps


def _inflate(lo: float, hi: float, frac: float = 0.1):
    ext = hi - lo
    pad = frac * ext if ext > 0 else frac * max(abs(lo), 1.0)
    return (lo - pad, hi + pad)


def _kappa(box) -> float:
    (ylo, yhi), (zlo, zhi) = box
    return max(abs(ylo), abs(yhi)) + max(abs(zlo), abs(zhi))


def _inside(box, f1, f2) -> bool:
    (ylo, yhi), (zlo, zhi) = box
    return bool(np.all((f1 >= ylo) & (f1 <= yhi) & (f2 >= zlo) & (f2 <= zhi)))


def _probe_depth(n: int) -> int:
    return max(1, int(math.log(2e4) / math.log(n + 0.5)) - 1)


def _attractor_probe(h: Hvfif, depth: int):
    x, f1, f2 = h.data.x.copy(), h.data.y.copy(), h.data.z.copy()
    for _ in range(depth):
        x, f1, f2 = h.refine(x, f1, f2)
    return f1, f2


def contraction_report(h: Hvfif) -> ContractionReport:
    """Constants of the contraction certificate for ``h``."""
    data = h.data
    per = []
    S = c_L = L_S = L_Q = 0.0
    for i in range(1, h.n + 1):
        I_i = data.subinterval(i)
        fq = h.factors[i - 1]
        sup = {k: fx.sup_abs_bound(e, I_i) for k, e in fq.items()}
        lip = {k: fx.lipschitz_bound(e, I_i) for k, e in fq.items()}
        c_i = h.maps[i - 1].contraction
        S_i = max(sup["s"] + sup["s_tilde"], sup["s_prime"] + sup["s_tilde_prime"])
        LS_i = max(lip["s"] * c_i + lip["s_tilde"] * c_i, lip["s_prime"] * c_i + lip["s_tilde_prime"] * c_i)
        Lq = fx.lipschitz_bound(h.q_exprs[i - 1], data.span)
        Lqt = fx.lipschitz_bound(h.q_tilde_exprs[i - 1], data.span)
        per.append({"interval": i, "S_i": S_i, "c_L": c_i, "L_S": LS_i, "L_q": Lq, "L_q_tilde": Lqt,
                    "sup": sup, "lipschitz": lip})
        S, c_L, L_S, L_Q = max(S, S_i), max(c_L, c_i), max(L_S, LS_i), max(L_Q, Lq + Lqt)

    box = (_inflate(data.y.min(), data.y.max()), _inflate(data.z.min(), data.z.max()))
    depth = _probe_depth(h.n)
    f1, f2 = _attractor_probe(h, depth)
    verified = _inside(box, f1, f2)
    if not verified and np.all(np.isfinite(f1)) and np.all(np.isfinite(f2)):
        box = (
            _inflate(min(data.y.min(), f1.min()), max(data.y.max(), f1.max())),
            _inflate(min(data.z.min(), f2.min()), max(data.z.max(), f2.max())),
        )
        f1, f2 = _attractor_probe(h, depth + 1)
        verified = _inside(box, f1, f2)
    kappa = _kappa(box)
    theta = theta_bound(c_L, L_S, kappa, L_Q)
    c_half = contraction_factor(theta / 2, c_L, L_S, kappa, L_Q, S)
    return ContractionReport(S, c_L, L_S, kappa, L_Q, theta, c_half, box, verified, per)


def build_univariate(
    data: ExtendedDataSet,
    factors: Sequence[FactorQuad],
    orientation: Optional[Sequence[str]] = None,
    strict: bool = True,
) -> Hvfif:
    """Construct and validate the IFS for ``data`` with one FactorQuad per interval.

    With ``strict=False`` hypothesis violations (factor sup >= 1, S >= 1) are
    recorded in ``h.violations`` instead of raised.
    """
    factors = list(factors)
    if len(factors) != data.n:
        raise ConstructionError(f"expected {data.n} factor quadruples, found {len(factors)}")
    for i, fq in enumerate(factors, start=1):
        for name, e in fq.items():
            if "y" in e.variables:
                raise ConstructionError(f"factor {name} on interval {i} uses variable y")
    h = Hvfif(data, make_maps(data, orientation), factors)

    violations = []
    for i, fq in enumerate(factors, start=1):
        for name, e in fq.items():
            b = fx.sup_abs_bound(e, data.subinterval(i))
            if b >= 1.0:
                violations.append(FactorBoundError(i, name, b))
    report = contraction_report(h)
    for row in report.per_interval:
        if row["S_i"] >= 1.0:
            violations.append(NotContractiveError(row["interval"], row["S_i"]))
    if strict and violations:
        raise violations[0]
    h.violations = violations
    h.contraction = report
    _check_endpoints(h)
    return h


def _check_endpoints(h: Hvfif):
    for i in range(1, h.n + 1):
        for alpha in (0, h.n):
            xa = h.data.x[alpha]
            target = h.maps[i - 1](xa)
            a = i - 1 if abs(target - h.data.x[i - 1]) <= abs(target - h.data.x[i]) else i
            f1, f2 = h.rhs_recursion(i, xa, h.data.y[alpha], h.data.z[alpha])
            scale = 1.0 + max(abs(h.data.y[a]), abs(h.data.z[a]))
            if abs(f1 - h.data.y[a]) > EXACT_TOL * scale or abs(f2 - h.data.z[a]) > EXACT_TOL * scale:
                raise ConstructionError(f"endpoint matching failed on interval {i} at x = {xa!r}")
