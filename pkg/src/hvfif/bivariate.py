"""Hidden-variable fractal surfaces on rectangular grids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import factors as fx
from .analysis import (
    BoxCountRecord,
    EmpiricalDimension,
    MIN_COLUMN_SAMPLES,
    DimensionReport,
    MisalignedScaleError,
    fit_dimension,
    find_triple,
    omega_bounds,
)
from .core import (
    EXACT_TOL,
    Coefficients,
    ConstructionError,
    FactorBoundError,
    NotContractiveError,
    apply_map,
)
from .evaluate import PointBudgetError
from .factors import Interval


class UndersampledCellError(ValueError):
    def __init__(self, cell, count):
        super().__init__(f"cell {cell} holds {count} samples (need {MIN_COLUMN_SAMPLES})")
        self.cell = cell


def _is_uniform(v: np.ndarray, rtol: float = 1e-12) -> bool:
    d = np.diff(v)
    return bool(np.all(np.abs(d - d[0]) <= rtol * abs(d[0])))


@dataclass(frozen=True)
class GridDataSet:
    """Nodes ``x`` (n+1), ``y`` (m+1) and value grids ``z``, ``t`` indexed ``[i, j]``."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        z = np.asarray(self.z, dtype=float)
        t = np.asarray(self.t, dtype=float)
        if x.ndim != 1 or y.ndim != 1 or len(x) < 3 or len(y) < 3:
            raise ConstructionError("x and y nodes must be 1-D with at least three entries")
        if z.shape != (len(x), len(y)) or t.shape != z.shape:
            raise ConstructionError(f"z and t must have shape {(len(x), len(y))}")
        if not np.all(np.isfinite(np.concatenate([x, y, z.ravel(), t.ravel()]))):
            raise ConstructionError("grid data must be finite")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise ConstructionError("nodes must be strictly increasing")
        if not (_is_uniform(x) and _is_uniform(y)):
            raise ConstructionError("grid nodes must be uniform")
        for name, arr in (("x", x), ("y", y), ("z", z), ("t", t)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def nx(self) -> int:
        return len(self.x) - 1

    @property
    def ny(self) -> int:
        return len(self.y) - 1

    @property
    def square(self) -> bool:
        return self.nx == self.ny

    def cell(self, i: int, j: int):
        return Interval(self.x[i - 1], self.x[i]), Interval(self.y[j - 1], self.y[j])

    @property
    def domain(self):
        return Interval(self.x[0], self.x[-1]), Interval(self.y[0], self.y[-1])


def _bilinear(x0, x1, y0, y1, v00, v10, v01, v11):
    """Bilinear interpolant of corner values ``v[ab]`` at (x_a, y_b)."""

    def f(x, y):
        u = (np.asarray(x, dtype=float) - x0) / (x1 - x0)
        w = (np.asarray(y, dtype=float) - y0) / (y1 - y0)
        return (1 - u) * (1 - w) * v00 + u * (1 - w) * v10 + (1 - u) * w * v01 + u * w * v11

    return f


def _eval_on(e: fx.FactorExpr, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(e(X, Y), dtype=float), np.broadcast(X, Y).shape)


class Hvbfif:
    """A validated bivariate hidden-variable IFS. Build with :func:`build_bivariate`."""

    def __init__(self, data: GridDataSet, factors: dict):
        self.data = data
        self.factors = factors  # (i, j) -> FactorQuad, 1-based
        x, y, z, t = data.x, data.y, data.z, data.t
        self.g = _bilinear(x[0], x[-1], y[0], y[-1], z[0, 0], z[-1, 0], z[0, -1], z[-1, -1])
        self.g_prime = _bilinear(x[0], x[-1], y[0], y[-1], t[0, 0], t[-1, 0], t[0, -1], t[-1, -1])
        self.h = {}
        self.h_tilde = {}
        for i in range(1, data.nx + 1):
            for j in range(1, data.ny + 1):
                box = (x[i - 1], x[i], y[j - 1], y[j])
                self.h[i, j] = _bilinear(*box, z[i - 1, j - 1], z[i, j - 1], z[i - 1, j], z[i, j])
                self.h_tilde[i, j] = _bilinear(*box, t[i - 1, j - 1], t[i, j - 1], t[i - 1, j], t[i, j])
        self.S = 0.0
        self.per_cell: list = []
        self.sign_condition = True
        self.violations: list = []

    def map_x(self, i: int, u):
        x = self.data.x
        return x[i - 1] + (x[i] - x[i - 1]) * (np.asarray(u, dtype=float) - x[0]) / (x[-1] - x[0])

    def map_y(self, j: int, v):
        y = self.data.y
        return y[j - 1] + (y[j] - y[j - 1]) * (np.asarray(v, dtype=float) - y[0]) / (y[-1] - y[0])

    def inverse(self, i: int, j: int, X, Y):
        x, y = self.data.x, self.data.y
        u = x[0] + (np.asarray(X, dtype=float) - x[i - 1]) * (x[-1] - x[0]) / (x[i] - x[i - 1])
        v = y[0] + (np.asarray(Y, dtype=float) - y[j - 1]) * (y[-1] - y[0]) / (y[j] - y[j - 1])
        return u, v

    def coefficients(self, i: int, j: int, u, v, X=None, Y=None) -> Coefficients:
        """Coefficients of the cell map at source points (factors read at the image)."""
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        X = self.map_x(i, u) if X is None else X
        Y = self.map_y(j, v) if Y is None else Y
        fq = self.factors[i, j]
        return Coefficients(
            _eval_on(fq.s, X, Y), _eval_on(fq.s_prime, X, Y),
            _eval_on(fq.s_tilde, X, Y), _eval_on(fq.s_tilde_prime, X, Y),
            self.g(u, v), self.g_prime(u, v), self.h[i, j](X, Y), self.h_tilde[i, j](X, Y),
        )

    def q(self, i: int, j: int, u, v):
        c = self.coefficients(i, j, u, v)
        return -c.s * c.g - c.s_prime * c.g_prime + c.h

    def q_tilde(self, i: int, j: int, u, v):
        c = self.coefficients(i, j, u, v)
        return -c.s_tilde * c.g - c.s_tilde_prime * c.g_prime + c.h_tilde

    def rhs_recursion(self, i: int, j: int, u, v, f1, f2):
        return apply_map(self.coefficients(i, j, u, v), f1, f2)


def build_bivariate(data: GridDataSet, factors, strict: bool = True) -> Hvbfif:
    """Construct the surface IFS; ``factors`` maps ``(i, j)`` or is a row-major list of quadruples."""
    nx, ny = data.nx, data.ny
    if not isinstance(factors, dict):
        factors = list(factors)
        if len(factors) != nx * ny:
            raise ConstructionError(f"expected {nx * ny} factor quadruples, found {len(factors)}")
        factors = {(i, j): factors[(i - 1) * ny + (j - 1)] for i in range(1, nx + 1) for j in range(1, ny + 1)}
    elif len(factors) != nx * ny:
        raise ConstructionError(f"expected {nx * ny} factor quadruples, found {len(factors)}")
    h = Hvbfif(data, factors)
    violations = []
    S = 0.0
    per = []
    for (i, j), fq in sorted(factors.items()):
        dom = data.cell(i, j)
        sups = {name: fx.sup_abs_bound(e, dom) for name, e in fq.items()}
        for name, b in sups.items():
            if b >= 1.0:
                violations.append(FactorBoundError((i, j), name, b))
        S_ij = max(sups["s"] + sups["s_tilde"], sups["s_prime"] + sups["s_tilde_prime"])
        S = max(S, S_ij)
        sign = fx.same_sign_on(fq.s, fq.s_prime, dom) and fx.same_sign_on(fq.s_tilde, fq.s_tilde_prime, dom)
        h.sign_condition = h.sign_condition and sign
        per.append({"cell": [i, j], "S_ij": S_ij, "sign_condition": sign, **{f"sup_{k}": v for k, v in sups.items()}})
        if S_ij >= 1.0:
            violations.append(NotContractiveError((i, j), S_ij))
    if strict and violations:
        raise violations[0]
    h.S, h.per_cell, h.violations = S, per, violations
    _check_corners(h)
    return h


def _check_corners(h: Hvbfif):
    d = h.data
    cu = np.array([d.x[0], d.x[-1], d.x[0], d.x[-1]])
    cv = np.array([d.y[0], d.y[0], d.y[-1], d.y[-1]])
    ca = [0, d.nx, 0, d.nx]
    cb = [0, 0, d.ny, d.ny]
    z1 = np.array([d.z[a, b] for a, b in zip(ca, cb)])
    t1 = np.array([d.t[a, b] for a, b in zip(ca, cb)])
    for (i, j) in h.factors:
        F1, F2 = h.rhs_recursion(i, j, cu, cv, z1, t1)
        for k in range(4):
            a = i - 1 + (1 if ca[k] else 0)
            b = j - 1 + (1 if cb[k] else 0)
            scale = 1.0 + max(abs(d.z[a, b]), abs(d.t[a, b]))
            if abs(F1[k] - d.z[a, b]) > EXACT_TOL * scale or abs(F2[k] - d.t[a, b]) > EXACT_TOL * scale:
                raise ConstructionError(f"corner matching failed on cell {(i, j)}")


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SurfaceSamples:
    """Samples on a tensor grid: ``f1[a, b]`` is the value at ``(x[a], y[b])``."""

    x: np.ndarray
    y: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    method: str
    depth: int
    n: Optional[int] = None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write("x,y,f1,f2\n")
            xs, ys = self.x.tolist(), self.y.tolist()
            for a, xv in enumerate(xs):
                r1, r2 = self.f1[a].tolist(), self.f2[a].tolist()
                for b, yv in enumerate(ys):
                    fh.write(f"{xv:.17g},{yv:.17g},{r1[b]:.17g},{r2[b]:.17g}\n")


def _level_nodes(lo: float, hi: float, count: int) -> np.ndarray:
    k = np.arange(count + 1)
    out = lo + (hi - lo) * k / count
    out[-1] = hi
    return out


def subdivide_surface(h: Hvbfif, depth: int) -> SurfaceSamples:
    """Exact surface samples after ``depth`` refinement levels.

    Cells are written in increasing index order, so a point on an edge shared by
    two cells takes its value from the cell with the larger index.
    """
    d = h.data
    nx, ny = d.nx, d.ny
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if depth * math.log2(nx * ny) > 24:
        raise PointBudgetError(f"depth {depth} with {nx}x{ny} cells exceeds the 2^24 point budget")
    f1, f2 = d.z.copy(), d.t.copy()
    Nx, Ny = nx, ny
    for _ in range(depth):
        u = _level_nodes(d.x[0], d.x[-1], Nx)
        v = _level_nodes(d.y[0], d.y[-1], Ny)
        U, V = np.meshgrid(u, v, indexing="ij")
        Mx, My = Nx * nx, Ny * ny
        X = _level_nodes(d.x[0], d.x[-1], Mx)
        Y = _level_nodes(d.y[0], d.y[-1], My)
        n1 = np.empty((Mx + 1, My + 1))
        n2 = np.empty_like(n1)
        for i in range(1, nx + 1):
            sx = slice((i - 1) * Nx, i * Nx + 1)
            for j in range(1, ny + 1):
                sy = slice((j - 1) * Ny, j * Ny + 1)
                XX, YY = np.meshgrid(X[sx], Y[sy], indexing="ij")
                c = h.coefficients(i, j, U, V, XX, YY)
                n1[sx, sy], n2[sx, sy] = apply_map(c, f1, f2)
        f1, f2, Nx, Ny = n1, n2, Mx, My
    x = _level_nodes(d.x[0], d.x[-1], Nx)
    y = _level_nodes(d.y[0], d.y[-1], Ny)
    return SurfaceSamples(x, y, f1, f2, "subdivision", depth, nx if d.square else None)


# ---------------------------------------------------------------------------
# Dimension
# ---------------------------------------------------------------------------


@dataclass
class SurfaceHypothesisCheck:
    uniform_nodes: bool
    square_grid: bool
    sign_condition: bool
    slice: Optional[str]
    triple: Optional[tuple]
    z_noncollinear: bool
    t_noncollinear: bool
    zt_comonotone: bool
    H: float
    h: float

    @property
    def all_hold(self) -> bool:
        return (self.uniform_nodes and self.square_grid and self.sign_condition and self.triple is not None
                and self.z_noncollinear and self.t_noncollinear and self.zt_comonotone)

    def to_dict(self) -> dict:
        return {
            "uniform_nodes": self.uniform_nodes,
            "square_grid": self.square_grid,
            "sign_condition": self.sign_condition,
            "slice": self.slice,
            "triple": list(self.triple) if self.triple is not None else None,
            "z_noncollinear": self.z_noncollinear,
            "t_noncollinear": self.t_noncollinear,
            "zt_comonotone": self.zt_comonotone,
            "H": self.H,
            "h": self.h,
            "all_hold": self.all_hold,
        }


def _slice_search(d: GridDataSet):
    best = None
    flags = [False, False, False]
    for a in range(d.nx + 1):
        res = find_triple(d.y, d.z[a, :], d.t[a, :])
        flags = [f or r for f, r in zip(flags, res[1:4])]
        if res[0] is not None and (best is None or res[4] * res[5] > best[2] * best[3]):
            best = (f"x={a}", res[0], res[4], res[5])
    for b in range(d.ny + 1):
        res = find_triple(d.x, d.z[:, b], d.t[:, b])
        flags = [f or r for f, r in zip(flags, res[1:4])]
        if res[0] is not None and (best is None or res[4] * res[5] > best[2] * best[3]):
            best = (f"y={b}", res[0], res[4], res[5])
    if best is None:
        return None, None, flags, 0.0, 0.0
    return best[0], best[1], [True, True, True], best[2], best[3]


def dimension_bounds_surface(h: Hvbfif) -> DimensionReport:
    """Bounds on dim_B of the surface graph from the per-cell factor bounds."""
    d = h.data
    lows, ups, tlows, tups = [], [], [], []
    for (i, j) in sorted(h.factors):
        lo, up, tlo, tup = omega_bounds(h.factors[i, j], d.cell(i, j))
        lows.append(lo), ups.append(up), tlows.append(tlo), tups.append(tup)
    lam_low = float(sum(lows) + sum(tlows))
    lam_up = float(sum(ups) + sum(tups))
    sl, triple, flags, H, hh = _slice_search(d)
    hyp = SurfaceHypothesisCheck(True, d.square, h.sign_condition, sl, triple, *flags, float(H), float(hh))
    n = d.nx
    if not d.square:
        case, b_lo, b_up = "inconclusive", 2.0, 3.0
    elif lam_low > n:
        case = "a"
        b_lo = 1 + math.log(lam_low, n)
        b_up = min(3.0, 1 + math.log(lam_up, n))
    elif lam_up <= n:
        case, b_lo, b_up = "b", 2.0, 2.0
    else:
        case = "inconclusive"
        b_lo = 2.0
        b_up = min(3.0, 1 + math.log(lam_up, n))
    return DimensionReport(lam_low, lam_up, b_lo, b_up, case, hyp, lows, ups, tlows, tups)


def _block_reduce(a: np.ndarray, b: int, op) -> np.ndarray:
    """Reduce closed windows ``[c*b, (c+1)*b]`` along axis 0."""
    C = (a.shape[0] - 1) // b
    inner = op(a[:-1].reshape(C, b, *a.shape[1:]), axis=1)
    return op(np.stack([inner, a[b::b]]), axis=0)


def box_count_surface(samples: SurfaceSamples, epsilon: float) -> BoxCountRecord:
    """Column count over closed epsilon x epsilon cells using the range of f1."""
    x, y = samples.x, samples.y
    cols_x = (x[-1] - x[0]) / epsilon
    cols_y = (y[-1] - y[0]) / epsilon
    for c in (cols_x, cols_y):
        if abs(c - round(c)) > 1e-9 * max(1.0, c) or round(c) < 1:
            raise MisalignedScaleError(f"epsilon {epsilon!r} does not tile the grid domain")
    cx, cy = int(round(cols_x)), int(round(cols_y))
    Nx, Ny = len(x) - 1, len(y) - 1
    if Nx % cx or Ny % cy:
        raise MisalignedScaleError(f"epsilon {epsilon!r} is not aligned with the sample grid")
    bx, by = Nx // cx, Ny // cy
    if (bx + 1) * (by + 1) < MIN_COLUMN_SAMPLES:
        raise UndersampledCellError((1, 1), (bx + 1) * (by + 1))
    hi = _block_reduce(_block_reduce(samples.f1, bx, np.max).T, by, np.max)
    lo = _block_reduce(_block_reduce(samples.f1, bx, np.min).T, by, np.min)
    count = np.floor(hi / epsilon) - np.floor(lo / epsilon) + 1
    return BoxCountRecord(float(epsilon), int(count.sum()))


def estimate_dimension_surface(samples: SurfaceSamples, scales: Sequence[int],
                               n: Optional[int] = None) -> EmpiricalDimension:
    """Regression of log N on -log epsilon at ``epsilon = |I_x| n^-k``, k = 1 dropped."""
    n = n if n is not None else samples.n
    if n is None:
        raise ValueError("mesh base n is required for non-square grids")
    ks = sorted(k for k in set(scales) if k >= 2)
    if len(ks) < 2:
        raise ValueError("need at least two scales with k >= 2")
    span = samples.x[-1] - samples.x[0]
    return fit_dimension([box_count_surface(samples, span * float(n) ** -k) for k in ks])
