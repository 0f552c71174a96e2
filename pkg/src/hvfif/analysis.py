"""Box-counting dimension, smoothness constants and stability bounds."""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import factors as fx
from .core import ExtendedDataSet, FactorQuad, Hvfif, build_univariate
from .evaluate import SampleSet, evaluate_points, subdivide

MIN_COLUMN_SAMPLES = 8
DELTA_ONE_BAND = 1e-12
HOLDER_ALPHA = 0.5
SUP_INFLATION = 1.05


class UndersampledError(ValueError):
    def __init__(self, index, count):
        super().__init__(f"column {index} holds {count} samples (need {MIN_COLUMN_SAMPLES})")
        self.index = index


class MisalignedScaleError(ValueError):
    pass


class HypothesisError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Box counting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoxCountRecord:
    epsilon: float
    count: int


@dataclass
class EmpiricalDimension:
    records: list
    slope: float
    stderr: float

    def to_dict(self) -> dict:
        return {"records": [asdict(r) for r in self.records], "slope": self.slope, "stderr": self.stderr}


def _scale_index(span: float, epsilon: float, n: int) -> int:
    k = math.log(span / epsilon) / math.log(n)
    kr = round(k)
    if kr < 1 or abs(k - kr) > 1e-9:
        raise MisalignedScaleError(f"epsilon {epsilon!r} is not |I| * {n}^-k for integer k >= 1")
    return kr


def column_ranges(x: np.ndarray, f: np.ndarray, x0: float, width: float, columns: int):
    """Per-column (min, max, count) with closed columns sharing boundary samples."""
    t = (x - x0) / width
    r = np.rint(t)
    on_edge = np.abs(t - r) <= 1e-9 * np.maximum(1.0, np.abs(t))
    col = np.where(on_edge, r, np.floor(t)).astype(np.int64)
    # a sample on an inner edge also belongs to the column on its left
    left = col - 1
    extra = on_edge & (left >= 0)
    cols = np.concatenate([col, left[extra]])
    vals = np.concatenate([f, f[extra]])
    ok = (cols >= 0) & (cols < columns)
    cols, vals = cols[ok], vals[ok]
    lo = np.full(columns, np.inf)
    hi = np.full(columns, -np.inf)
    np.minimum.at(lo, cols, vals)
    np.maximum.at(hi, cols, vals)
    cnt = np.bincount(cols, minlength=columns)
    return lo, hi, cnt


def box_count(samples: SampleSet, epsilon: float, n: Optional[int] = None) -> BoxCountRecord:
    """Number of epsilon-mesh squares met by the sampled graph of f1.

    Mesh origin is ``(x_0, 0)``. Each column is closed, so the range counted
    in a column spans the graph over the whole closed column.
    """
    x, f = samples.x, samples.f1
    x0, span = float(x[0]), float(x[-1] - x[0])
    n = n if n is not None else samples.n_intervals
    if n is not None:
        _scale_index(span, epsilon, n)
    columns = int(round(span / epsilon))
    lo, hi, cnt = column_ranges(x, f, x0, epsilon, columns)
    bad = np.nonzero(cnt < MIN_COLUMN_SAMPLES)[0]
    if len(bad):
        raise UndersampledError(int(bad[0]), int(cnt[bad[0]]))
    per_col = np.floor(hi / epsilon) - np.floor(lo / epsilon) + 1
    return BoxCountRecord(float(epsilon), int(per_col.sum()))


def fit_dimension(records: Sequence[BoxCountRecord]) -> EmpiricalDimension:
    """Least-squares slope of log N against -log epsilon."""
    if len(records) < 2:
        raise ValueError("need at least two scales")
    u = -np.log([r.epsilon for r in records])
    v = np.log([r.count for r in records])
    fit = stats.linregress(u, v)
    stderr = float(fit.stderr) if len(records) > 2 else 0.0
    if not math.isfinite(stderr):
        stderr = 0.0
    return EmpiricalDimension(list(records), float(fit.slope), stderr)


def estimate_dimension(h: Hvfif, scales: Sequence[int] = (1, 2, 3, 4, 5, 6),
                       samples: Optional[SampleSet] = None) -> EmpiricalDimension:
    """Empirical box dimension of the graph of f1 at mesh sizes ``|I| n^-k``.

    The coarsest scale ``k = 1`` is dropped from the regression.
    """
    ks = sorted(k for k in set(scales) if k >= 2)
    if len(ks) < 4:
        raise ValueError("need at least four scales with k >= 2")
    if samples is None:
        samples = subdivide(h, max(ks) + 2)
    span = h.data.x[-1] - h.data.x[0]
    records = [box_count(samples, span * float(h.n) ** -k, h.n) for k in ks]
    return fit_dimension(records)


# ---------------------------------------------------------------------------
# Bounds on the box dimension from the factor extremes
# ---------------------------------------------------------------------------


@dataclass
class HypothesisCheck:
    uniform_nodes: bool
    sign_condition: bool
    triple: Optional[tuple]
    y_noncollinear: bool
    z_noncollinear: bool
    yz_comonotone: bool
    H: float
    h: float

    @property
    def all_hold(self) -> bool:
        return (self.uniform_nodes and self.sign_condition and self.triple is not None
                and self.y_noncollinear and self.z_noncollinear and self.yz_comonotone)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["triple"] = list(self.triple) if self.triple is not None else None
        d["all_hold"] = self.all_hold
        return d


@dataclass
class DimensionReport:
    lambda_low: float
    lambda_up: float
    bound_low: float
    bound_up: float
    case: str  # "a" | "b" | "inconclusive"
    hypothesis: HypothesisCheck
    omega_low: list = field(default_factory=list)
    omega_up: list = field(default_factory=list)
    omega_tilde_low: list = field(default_factory=list)
    omega_tilde_up: list = field(default_factory=list)
    empirical: Optional[EmpiricalDimension] = None

    def to_dict(self) -> dict:
        return {
            "lambda_low": self.lambda_low,
            "lambda_up": self.lambda_up,
            "bound_low": self.bound_low,
            "bound_up": self.bound_up,
            "case": self.case,
            "hypothesis": self.hypothesis.to_dict(),
            "omega_low": self.omega_low,
            "omega_up": self.omega_up,
            "omega_tilde_low": self.omega_tilde_low,
            "omega_tilde_up": self.omega_tilde_up,
            "empirical": None if self.empirical is None else self.empirical.to_dict(),
        }


def omega_bounds(fq: FactorQuad, domain):
    """(omega_low, omega_up, omega_tilde_low, omega_tilde_up) of one factor quadruple."""
    lo = min(fx.inf_abs_bound(fq.s, domain), fx.inf_abs_bound(fq.s_prime, domain))
    up = max(fx.sup_abs_bound(fq.s, domain), fx.sup_abs_bound(fq.s_prime, domain))
    tlo = min(fx.inf_abs_bound(fq.s_tilde, domain), fx.inf_abs_bound(fq.s_tilde_prime, domain))
    tup = max(fx.sup_abs_bound(fq.s_tilde, domain), fx.sup_abs_bound(fq.s_tilde_prime, domain))
    return lo, up, tlo, tup


def _vertical_gap(xs, vs) -> float:
    """Ordinate distance from the middle point to the chord through the outer two."""
    (xa, xb, xc), (va, vb, vc) = xs, vs
    chord = va + (vc - va) * (xb - xa) / (xc - xa)
    return abs(vb - chord)


def find_triple(x, y, z, rel_tol: float = 1e-12):
    """Search all index triples for a non-collinear, co-monotone configuration.

    Returns the best triple (largest H*h) with flags; when no triple meets
    every condition the flags report whether each condition holds for some triple.
    """
    best = None
    any_y = any_z = any_co = False
    scale_y = 1.0 + float(np.ptp(y))
    scale_z = 1.0 + float(np.ptp(z))
    for a, b, c in itertools.combinations(range(len(x)), 3):
        xs = (x[a], x[b], x[c])
        H = float(_vertical_gap(xs, (y[a], y[b], y[c])))
        hh = float(_vertical_gap(xs, (z[a], z[b], z[c])))
        ync = H > rel_tol * scale_y
        znc = hh > rel_tol * scale_z
        co = bool(all((y[i] - y[j]) * (z[i] - z[j]) > 0 for i, j in ((a, b), (a, c), (b, c))))
        any_y, any_z, any_co = any_y or ync, any_z or znc, any_co or co
        if ync and znc and co and (best is None or H * hh > best[1] * best[2]):
            best = ((a, b, c), H, hh)
    if best is None:
        return None, any_y, any_z, any_co, 0.0, 0.0
    return best[0], True, True, True, best[1], best[2]


def dimension_bounds(h: Hvfif) -> DimensionReport:
    """Lower/upper bounds on dim_B of the graph of f1 from the factor bounds."""
    data = h.data
    lows, ups, tlows, tups = [], [], [], []
    sign_ok = True
    for i in range(1, h.n + 1):
        dom = data.subinterval(i)
        fq = h.factors[i - 1]
        lo, up, tlo, tup = omega_bounds(fq, dom)
        lows.append(lo), ups.append(up), tlows.append(tlo), tups.append(tup)
        sign_ok = sign_ok and fx.same_sign_on(fq.s, fq.s_prime, dom) and fx.same_sign_on(
            fq.s_tilde, fq.s_tilde_prime, dom)
    lam_low = float(sum(lows) + sum(tlows))
    lam_up = float(sum(ups) + sum(tups))
    triple, yn, zn, co, H, hh = find_triple(data.x, data.y, data.z)
    hyp = HypothesisCheck(data.is_uniform(), sign_ok, triple, yn, zn, co, H, hh)
    n = h.n
    if lam_low > 1:
        case = "a"
        b_lo = 1 + math.log(lam_low, n)
        b_up = min(2.0, 1 + math.log(lam_up, n))
    elif lam_up < 1:
        case, b_lo, b_up = "b", 1.0, 1.0
    else:
        case = "inconclusive"
        b_lo = 1.0
        b_up = min(2.0, 1 + math.log(lam_up, n)) if lam_up > 0 else 1.0
    return DimensionReport(lam_low, lam_up, b_lo, b_up, case, hyp, lows, ups, tlows, tups)


def pf_matrix(weights: Sequence[float]) -> np.ndarray:
    """diag(weights) @ ones((n, n))."""
    w = np.asarray(weights, dtype=float)
    return w[:, None] * np.ones((len(w), len(w)))


def power_iteration(A: np.ndarray, tol: float = 1e-14, max_iter: int = 10000, seed: int = 0):
    """Dominant eigenvalue and unit eigenvector of a nonnegative matrix."""
    rng = np.random.default_rng(seed)
    v = rng.uniform(0.5, 1.5, A.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = A @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return 0.0, v
        w /= norm
        new = float(w @ A @ w)
        if abs(new - lam) <= tol * max(1.0, abs(new)) and np.linalg.norm(w - v) <= 1e-12:
            return new, w
        v, lam = w, new
    return lam, v


# ---------------------------------------------------------------------------
# Smoothness
# ---------------------------------------------------------------------------


@dataclass
class SmoothnessConstants:
    M_k: list
    M_tilde_k: list
    M_f2_k: list
    M: float
    delta: float
    D: float
    case: str  # delta_lt_1 | delta_eq_1 | delta_gt_1
    L1: float
    tau1: float
    L2: float
    tau2: float
    alpha: Optional[float]
    sup_f1: float
    sup_f2: float
    omega: float
    omega_tilde: float
    L_q: float
    L_q_tilde: float
    tau_clamped: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def _smoothness_hypothesis(h: Hvfif):
    widths = np.diff(h.data.x) / (h.data.x[-1] - h.data.x[0])
    ups = []
    tups = []
    for i in range(1, h.n + 1):
        _, up, _, tup = omega_bounds(h.factors[i - 1], h.data.subinterval(i))
        ups.append(up)
        tups.append(tup)
    omega, omega_t = max(ups), max(tups)
    limit = widths.min() / (2 * widths.max())
    return omega, omega_t, limit, ups, tups, widths


def smoothness_hypothesis_holds(h: Hvfif) -> bool:
    omega, omega_t, limit, *_ = _smoothness_hypothesis(h)
    return max(omega, omega_t) < limit


def smoothness_constants(h: Hvfif, samples: SampleSet) -> SmoothnessConstants:
    """Hoelder constants (L1, tau1) for f1 and (L2, tau2) for f2.

    Lengths are measured in the normalised coordinate ``(x - x_0)/|I|``; L1 and
    L2 are converted back to the original abscissa at the end.
    """
    omega, omega_t, limit, ups, tups, widths = _smoothness_hypothesis(h)
    if max(omega, omega_t) >= limit:
        raise HypothesisError(
            f"max(omega, omega_tilde) = {max(omega, omega_t):.6g} is not below |I_min|/(2|I_max|) = {limit:.6g}"
        )
    span = h.data.x[-1] - h.data.x[0]
    sup1 = SUP_INFLATION * float(np.max(np.abs(samples.f1)))
    sup2 = SUP_INFLATION * float(np.max(np.abs(samples.f2)))
    Mk, Mtk, M2k, Lqs, Lqts = [], [], [], [], []
    for i in range(1, h.n + 1):
        dom = h.data.subinterval(i)
        fq = h.factors[i - 1]
        # Lipschitz constants in the normalised coordinate scale by |I|
        L = {k: fx.lipschitz_bound(e, dom) * span for k, e in fq.items()}
        Lq = fx.lipschitz_bound(h.q_exprs[i - 1], h.data.span) * span
        Lqt = fx.lipschitz_bound(h.q_tilde_exprs[i - 1], h.data.span) * span
        w = widths[i - 1]
        Mk.append(L["s"] * sup1 + L["s_prime"] * sup2 + Lq / w)
        Mtk.append(L["s_prime"] * sup1 + L["s"] * sup2 + Lq / w)
        M2k.append(L["s_tilde"] * sup1 + L["s_tilde_prime"] * sup2 + Lqt / w)
        Lqs.append(Lq / span)
        Lqts.append(Lqt / span)
    M = max(Mk + Mtk + M2k)
    delta = max(2 * max(u, t) / w for u, t, w in zip(ups, tups, widths))
    D = max(M, 2 * (sup1 + sup2) / widths.min() ** 2)
    I_max = widths.max()
    alpha = None
    clamped = False
    if abs(delta - 1) <= DELTA_ONE_BAND:
        case = "delta_eq_1"
        alpha = HOLDER_ALPHA
        L1 = D * (1 + 1 / (alpha * math.e * abs(math.log(I_max))))
        tau = 1 - alpha
    elif delta < 1:
        case = "delta_lt_1"
        L1 = D / (1 - delta)
        tau = 1.0
    else:
        case = "delta_gt_1"
        L1 = D / (delta - 1)
        tau = math.log(delta) / math.log(I_max) + 1
        if tau > 1:
            tau, clamped = 1.0, True
        elif tau <= 0:
            tau, clamped = 1e-6, True
    # back to the original abscissa: |u - u'|^tau = |x - x'|^tau / |I|^tau
    L1 = L1 / span ** tau
    return SmoothnessConstants(
        Mk, Mtk, M2k, M, delta, D, case, L1, tau, L1, tau, alpha, sup1, sup2,
        omega, omega_t, max(Lqs), max(Lqts), clamped,
    )


@dataclass
class HolderEstimate:
    tau: float
    stderr: float
    degenerate: bool
    widths: list
    oscillations: list

    def to_dict(self) -> dict:
        return asdict(self)


def empirical_holder(samples: SampleSet, j_min: int = 2, min_window_samples: int = 64) -> HolderEstimate:
    """Slope of log(max window oscillation of f1) against log(window width).

    Windows are closed, aligned at x_0, with widths ``|I| 2^-j``.
    """
    x, f = samples.x, samples.f1
    x0, span = float(x[0]), float(x[-1] - x[0])
    if np.ptp(f) == 0:
        return HolderEstimate(1.0, 0.0, True, [], [])
    j_max = int(math.floor(math.log2((len(x) - 1) / min_window_samples)))
    if j_max - j_min < 2:
        raise ValueError("too few samples for the oscillation regression")
    widths, osc = [], []
    for j in range(j_min, j_max + 1):
        w = span * 2.0 ** -j
        lo, hi, _ = column_ranges(x, f, x0, w, 2 ** j)
        widths.append(w)
        osc.append(float(np.max(hi - lo)))
    fit = stats.linregress(np.log(widths), np.log(osc))
    return HolderEstimate(float(fit.slope), float(fit.stderr), False, widths, osc)


# ---------------------------------------------------------------------------
# Stability
# ---------------------------------------------------------------------------


def stability_prefactor(omega: float, omega_t: float) -> float:
    return (1 + 2 * omega - omega_t) / (1 - omega - omega_t)


def stability_formula(which: str, omega: float, omega_t: float, dx: float = 0.0, dy: float = 0.0,
                      dz: float = 0.0, L1: float = 0.0, L2: float = 0.0, L_q: float = 0.0,
                      L_q_tilde: float = 0.0, tau: float = 1.0) -> float:
    """Closed-form sup-norm perturbation bounds for f1."""
    if omega + omega_t >= 1:
        raise HypothesisError("omega + omega_tilde must be below 1")
    denom = 1 - omega - omega_t
    x_term = ((1 - omega_t) * (L1 + L_q) + omega * (L2 + L_q_tilde)) * (dx ** tau if dx > 0 else 0.0)
    if which == "x":
        return x_term / denom
    if which == "y":
        return stability_prefactor(omega, omega_t) * dy
    if which == "z":
        return stability_prefactor(omega, omega_t) * dz
    if which == "all":
        return (x_term + (1 + 2 * omega - omega_t) * (dy + dz)) / denom
    raise ValueError(f"unknown perturbation kind {which!r}")


@dataclass
class StabilityReport:
    which: str
    max_dx: float
    max_dy: float
    max_dz: float
    omega: float
    omega_tilde: float
    bound: float
    measured_sup_diff: float
    satisfied: bool
    trial: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def _check_stability_hypothesis(h: Hvfif):
    omega, omega_t, limit, *_ = _smoothness_hypothesis(h)
    if omega + omega_t >= 1:
        raise HypothesisError(f"omega + omega_tilde = {omega + omega_t:.6g} is not below 1")
    if max(omega, omega_t) >= limit:
        raise HypothesisError(
            f"max(omega, omega_tilde) = {max(omega, omega_t):.6g} is not below {limit:.6g}")
    return omega, omega_t


def stability_bound(which: str, h: Hvfif, dx: float = 0.0, dy: float = 0.0, dz: float = 0.0,
                    smoothness: Optional[SmoothnessConstants] = None) -> float:
    omega, omega_t = _check_stability_hypothesis(h)
    if which in ("x", "all"):
        if smoothness is None:
            smoothness = smoothness_constants(h, subdivide(h, min(8, depth_for_budget(h.n, 2 ** 18))))
        sc = smoothness
        tau = max(sc.tau1, sc.tau2)
        return stability_formula(which, omega, omega_t, dx, dy, dz, sc.L1, sc.L2, sc.L_q, sc.L_q_tilde, tau)
    return stability_formula(which, omega, omega_t, dx, dy, dz)


def depth_for_budget(n: int, budget: int) -> int:
    return max(1, int(math.log(budget) / math.log(n)) - 1)


def remap_factors(h: Hvfif, x_star) -> list:
    """Factors of the starred system: each s_i composed with R^-1 restricted to I_i*."""
    x = h.data.x
    out = []
    for i in range(1, h.n + 1):
        a = (x[i] - x[i - 1]) / (x_star[i] - x_star[i - 1])
        b = x[i - 1] - a * x_star[i - 1]
        out.append(h.factors[i - 1].compose({"x": fx.affine(a, b)}))
    return out


def perturbed_system(h: Hvfif, data_star: ExtendedDataSet) -> Hvfif:
    if not (data_star.x[0] == h.data.x[0] and data_star.x[-1] == h.data.x[-1]):
        raise HypothesisError("perturbed abscissae must keep both endpoints fixed")
    orientation = ["reversed" if m.reversed else "forward" for m in h.maps]
    factors = h.factors if np.array_equal(data_star.x, h.data.x) else remap_factors(h, data_star.x)
    return build_univariate(data_star, factors, orientation, strict=False)


def measure_sup_diff(h: Hvfif, hs: Hvfif, depth: Optional[int] = None) -> float:
    """Estimate of ||f1 - f1*||_inf on a dense common abscissa set."""
    depth = depth if depth is not None else depth_for_budget(h.n, 4096)
    base = subdivide(h, depth)
    if np.array_equal(h.data.x, hs.data.x):
        other = subdivide(hs, depth)
        return float(np.max(np.abs(base.f1 - other.f1)))
    rate = max(hs.S, 1e-3)
    steps = 200 if rate >= 1 else int(min(200, math.ceil(math.log(1e-13) / math.log(rate))))
    xs = np.union1d(base.x, hs.data.x)
    a1, _, _ = evaluate_points(h, xs, steps)
    b1, _, _ = evaluate_points(hs, xs, steps)
    return float(np.max(np.abs(a1 - b1)))


def stability_experiment(h: Hvfif, data_star: ExtendedDataSet, which: str,
                         smoothness: Optional[SmoothnessConstants] = None, trial: int = 0) -> StabilityReport:
    """Build the perturbed system, measure sup|f1 - f1*| and compare with the bound."""
    omega, omega_t = _check_stability_hypothesis(h)
    dx = float(np.max(np.abs(data_star.x - h.data.x)))
    dy = float(np.max(np.abs(data_star.y - h.data.y)))
    dz = float(np.max(np.abs(data_star.z - h.data.z)))
    if which == "y" and (dx or dz):
        raise ValueError("a y-experiment may only perturb y")
    if which == "z" and (dx or dy):
        raise ValueError("a z-experiment may only perturb z")
    if which == "x" and (dy or dz):
        raise ValueError("an x-experiment may only perturb x")
    bound = stability_bound(which, h, dx, dy, dz, smoothness)
    hs = perturbed_system(h, data_star)
    measured = measure_sup_diff(h, hs)
    bound = float(bound)
    return StabilityReport(which, dx, dy, dz, float(omega), float(omega_t), bound, measured,
                           bool(measured <= bound + 1e-9), trial)


def random_perturbation(data: ExtendedDataSet, which: str, magnitude: float,
                        rng: np.random.Generator) -> ExtendedDataSet:
    """Uniform perturbations in [-magnitude, magnitude]; x keeps its endpoints and order."""
    n1 = len(data.x)
    x, y, z = data.x.copy(), data.y.copy(), data.z.copy()
    if which in ("x", "all"):
        gaps = np.diff(data.x)
        if magnitude >= gaps.min() / 2:
            raise ValueError("x magnitude must stay below half the smallest gap")
        x[1:-1] += rng.uniform(-magnitude, magnitude, n1 - 2)
    if which in ("y", "all"):
        y += rng.uniform(-magnitude, magnitude, n1)
    if which in ("z", "all"):
        z += rng.uniform(-magnitude, magnitude, n1)
    return ExtendedDataSet(x, y, z)


def stability_suite(h: Hvfif, kinds: Sequence[str] = ("y", "z", "all"), trials: int = 20,
                    magnitude: float = 0.1, seed: int = 0, x_magnitude: Optional[float] = None,
                    rng: Optional[np.random.Generator] = None) -> list:
    """Seeded random perturbation experiments, ``trials`` per kind, in the order given."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    sc = None
    if any(k in ("x", "all") for k in kinds):
        sc = smoothness_constants(h, subdivide(h, min(8, depth_for_budget(h.n, 2 ** 18))))
    reports = []
    for kind in kinds:
        mag = x_magnitude if (kind == "x" and x_magnitude is not None) else magnitude
        for t in range(trials):
            star = random_perturbation(h.data, kind, mag, rng)
            reports.append(stability_experiment(h, star, kind, sc, trial=t))
    return reports
