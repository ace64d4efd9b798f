"""Product-structured metrics: constructors, identities, and factorization.

A ProductSpec assembles a block-diagonal metric on a product chart from
factor metrics and twist functions,

    g = sum_i rho_i^2 * (pullback of factor metric i),

optionally followed by a global conformal scale phi^2. Kind tags impose
syntactic constraints on the twists (checked via free variables):

    product       all rho_i constant 1
    warped        rho_0 = 1, rho_i a function of block-0 coordinates
    quasi_warped  rho_0 = 1, rho_i a function of blocks 0 and i
    twisted       no constraint beyond positivity

The module also provides the connection identity relating the twisted and
product Levi-Civita connections, multiplicative-separability residuals, the
constructive conformal factorization of CWP metrics, and the three-way
spherical-factor equivalence check.

Factorization gauge: per block, rho_i(x) = (det G_i(x) / det G_i(base))
^(1/(2 d_i)) is the unique twist normalized to 1 at the base point whose
quotient G_i / rho_i^2 is block-local. phi = rho_0, warpings come from line
integrals of d log(rho_i/rho_0) along axis-parallel paths from the base, and
path-order independence of those integrals is the numerical surrogate for
the gradient condition that the analysis guarantees.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .chart_calculus import (
    MetricField,
    cov_deriv,
    det_expr,
    eval_vector,
    grad_field,
    hessian_lc,
    metric_at,
)
from .errors import (
    ConstraintError,
    EvalDomainError,
    PathInconsistencyError,
    NotApplicableError,
)
from .nets import OrthogonalNet, classify_net
from .sampling import SamplePlan, grid_axes
from .scalar_fields import (
    Chart,
    Expr,
    ONE,
    ZERO,
    const,
    diff,
    div,
    evaluate,
    free_vars,
    is_const_one,
    log,
    mul,
    powc,
    substitute,
)

__all__ = [
    "FactorSpec",
    "ProductSpec",
    "Factorization",
    "CpSection",
    "SphericalSection",
    "SphericalCheck",
    "build_metric",
    "conformal_scale",
    "verify_connection_identity",
    "separability_residual",
    "factorize_cwp",
    "spherical_factor_check",
]

KINDS = ("product", "warped", "quasi_warped", "twisted")

PATH_ORDER_TOL = 1e-7
QUAD_TOL = 1e-10
_POSITIVITY_GRID = 5


@dataclass(frozen=True)
class FactorSpec:
    """A factor manifold: local chart plus metric in factor coordinates."""

    chart: Chart
    metric: tuple

    def __post_init__(self):
        d = self.chart.dim
        rows = tuple(tuple(r) for r in self.metric)
        object.__setattr__(self, "metric", rows)
        if len(rows) != d or any(len(r) != d for r in rows):
            raise ConstraintError("factor metric must be dim x dim")
        for a in range(d):
            for b in range(d):
                bad = [v for v in free_vars(rows[a][b]) if v >= d]
                if bad:
                    raise ConstraintError(
                        f"factor metric entry ({a},{b}) uses variable index "
                        f"{max(bad)}, outside the factor chart"
                    )


@dataclass(frozen=True)
class ProductSpec:
    """Product chart + twists; `kind` fixes which twists are allowed."""

    kind: str
    factors: tuple
    twists: tuple
    conformal_factor: Expr | None = None

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        object.__setattr__(self, "twists", tuple(self.twists))
        if self.kind not in KINDS:
            raise ConstraintError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if len(self.twists) != len(self.factors):
            raise ConstraintError("one twist per factor required")
        names = [n for f in self.factors for n in f.chart.names]
        if len(set(names)) != len(names):
            raise ConstraintError("factor coordinate names collide across factors")
        blocks = self.blocks
        allowed_all = set(range(sum(f.chart.dim for f in self.factors)))
        for i, rho in enumerate(self.twists):
            fv = free_vars(rho)
            if not fv <= allowed_all:
                raise ConstraintError(f"twist {i} uses out-of-chart variables")
            if self.kind == "product" and not is_const_one(rho):
                raise ConstraintError("product kind requires all twists identically 1")
            if self.kind in ("warped", "quasi_warped"):
                if i == 0:
                    if not is_const_one(rho):
                        raise ConstraintError(f"{self.kind} requires twist 0 identically 1")
                else:
                    allowed = set(blocks[0])
                    if self.kind == "quasi_warped":
                        allowed |= set(blocks[i])
                    if not fv <= allowed:
                        raise ConstraintError(
                            f"{self.kind} twist {i} may only use coordinates of "
                            f"block 0{'' if self.kind == 'warped' else f' and block {i}'}"
                        )

    @property
    def blocks(self) -> tuple:
        out = []
        off = 0
        for f in self.factors:
            out.append(tuple(range(off, off + f.chart.dim)))
            off += f.chart.dim
        return tuple(out)

    @property
    def chart(self) -> Chart:
        cached = self.__dict__.get("_chart")
        if cached is None:
            domain = [iv for f in self.factors for iv in f.chart.domain]
            names = tuple(n for f in self.factors for n in f.chart.names)
            cached = Chart.box(domain, names=names, blocks=self.blocks)
            self.__dict__["_chart"] = cached
        return cached


def _check_positive(e: Expr, chart: Chart, label: str):
    axes = grid_axes(chart, _POSITIVITY_GRID)
    for pt in itertools.product(*axes):
        try:
            v = evaluate(e, pt)
        except EvalDomainError as exc:
            raise ConstraintError(f"{label} not evaluable at {pt}: {exc}") from exc
        if v <= 0.0:
            raise ConstraintError(f"{label} is {v:.6g} <= 0 at {pt}")


def build_metric(spec: ProductSpec) -> MetricField:
    """Assemble the block-diagonal metric of the spec on its product chart."""
    cached = spec.__dict__.get("_metric")
    if cached is not None:
        return cached
    chart = spec.chart
    n = chart.dim
    entries = [[ZERO] * n for _ in range(n)]
    off = 0
    for i, f in enumerate(spec.factors):
        rho = spec.twists[i]
        if not is_const_one(rho):
            _check_positive(rho, chart, f"twist {i}")
        remap = {j: _gvar(off + j) for j in range(f.chart.dim)}
        rho2 = mul(rho, rho)
        for a in range(f.chart.dim):
            for b in range(a, f.chart.dim):
                e = substitute(f.metric[a][b], remap)
                entries[off + a][off + b] = mul(rho2, e)
        off += f.chart.dim
    if spec.conformal_factor is not None:
        phi = spec.conformal_factor
        _check_positive(phi, chart, "conformal factor")
        phi2 = mul(phi, phi)
        entries = [
            [mul(phi2, e) if e is not ZERO else ZERO for e in row] for row in entries
        ]
    g = MetricField(chart, entries)
    g.provenance = spec
    spec.__dict__["_metric"] = g
    return g


def _gvar(i: int) -> Expr:
    from .scalar_fields import var

    return var(i)


def conformal_scale(g: MetricField, phi: Expr) -> MetricField:
    """phi^2 * g with a sampled positivity gate on phi."""
    _check_positive(phi, g.chart, "conformal factor")
    phi2 = mul(phi, phi)
    n = g.dim
    entries = [[mul(phi2, g.entries[a][b]) for b in range(n)] for a in range(n)]
    out = MetricField(g.chart, entries)
    prov = getattr(g, "provenance", None)
    if isinstance(prov, ProductSpec):
        combined = phi if prov.conformal_factor is None else mul(prov.conformal_factor, phi)
        out.provenance = dataclasses.replace(prov, conformal_factor=combined)
    return out


def verify_connection_identity(spec: ProductSpec, X, Y, p) -> float:
    """Residual of the twisted-vs-product connection identity at p.

    LHS is the Levi-Civita derivative of Y along X for the twisted metric;
    RHS adds to the product-metric derivative the twist correction
    sum_i (<X^i, Y^i> U_i - <X, U_i> Y^i - <Y, U_i> X^i) with
    U_i = -grad log rho_i taken in the twisted metric. Inner products and
    norms use the twisted metric; the residual is normalized by
    ||X|| ||Y|| (1 + sum ||U_i||).
    """
    if spec.conformal_factor is not None:
        raise ConstraintError("connection identity applies to unscaled twisted specs")
    g = build_metric(spec)
    key = "_product_metric"
    gt = spec.__dict__.get(key)
    if gt is None:
        gt = build_metric(
            dataclasses.replace(
                spec, kind="product", twists=(ONE,) * len(spec.twists)
            )
        )
        spec.__dict__[key] = gt
    p = tuple(float(x) for x in p)
    cache: dict = {}
    G, _ = metric_at(g, p, cache)
    lhs = cov_deriv(g, X, Y, p, cache)
    rhs = cov_deriv(gt, X, Y, p)
    Xv = eval_vector(X, p, cache)
    Yv = eval_vector(Y, p, cache)
    unorm_sum = 0.0
    for i, rho in enumerate(spec.twists):
        if is_const_one(rho):
            continue
        rv = evaluate(rho, p, cache)
        if rv <= 0.0:
            raise ConstraintError(f"twist {i} is {rv:.6g} <= 0 at {p}")
        U = -grad_field(g, log(rho), p, cache)
        blk = spec.blocks[i]
        Xi = np.zeros_like(Xv)
        Yi = np.zeros_like(Yv)
        Xi[list(blk)] = Xv[list(blk)]
        Yi[list(blk)] = Yv[list(blk)]
        rhs = rhs + float(Xi @ G @ Yi) * U - float(Xv @ G @ U) * Yi - float(Yv @ G @ U) * Xi
        unorm_sum += math.sqrt(max(U @ G @ U, 0.0))
    diff_v = lhs - rhs
    nx = math.sqrt(max(Xv @ G @ Xv, 0.0))
    ny = math.sqrt(max(Yv @ G @ Yv, 0.0))
    denom = max(nx * ny * (1.0 + unorm_sum), 1e-30)
    return float(math.sqrt(max(diff_v @ G @ diff_v, 0.0)) / denom)


def separability_residual(rho: Expr, block_a, block_b, p) -> float:
    """max |d^2 log rho / dx_a dx_b| over a in block_a, b in block_b at p."""
    lr = log(rho)
    p = tuple(float(x) for x in p)
    worst = 0.0
    cache: dict = {}
    for a in block_a:
        da = diff(lr, a)
        for b in block_b:
            worst = max(worst, abs(evaluate(diff(da, b), p, cache)))
    return worst


# --- quadrature ---------------------------------------------------------------


def _segment_quad(f, t0: float, t1: float) -> float:
    """Composite trapezoid with Richardson refinement to QUAD_TOL."""
    if t0 == t1:
        return 0.0
    n = 8
    h = (t1 - t0) / n
    vals = [f(t0 + j * h) for j in range(n + 1)]
    trap = h * (0.5 * vals[0] + sum(vals[1:-1]) + 0.5 * vals[-1])
    prev_rich = None
    for _ in range(16):
        mid = [f(t0 + (j + 0.5) * h) for j in range(n)]
        trap2 = 0.5 * trap + 0.5 * h * sum(mid)
        rich = (4.0 * trap2 - trap) / 3.0
        if prev_rich is not None and abs(rich - prev_rich) < QUAD_TOL:
            return rich
        prev_rich = rich
        trap = trap2
        n *= 2
        h *= 0.5
    return prev_rich


def _corner_path_segments(dexprs, base, target, order):
    """Per-axis line integrals along the axis-parallel path from base to
    target that fixes axes in the given visiting order."""
    cur = list(base)
    out = []
    for ax in order:
        t0, t1 = cur[ax], float(target[ax])
        if t0 != t1:
            fixed = tuple(cur)

            def f(t, _ax=ax, _fixed=fixed):
                pt = list(_fixed)
                pt[_ax] = t
                return evaluate(dexprs[_ax], tuple(pt))

            out.append((ax, _segment_quad(f, t0, t1)))
            cur[ax] = t1
        else:
            out.append((ax, 0.0))
    return out


# --- factorization --------------------------------------------------------------


@dataclass
class CpSection:
    constants: dict
    fit_residual: float
    phi: np.ndarray
    base_factor: np.ndarray | None
    fiber_factors: dict


@dataclass
class SphericalSection:
    kind: str
    phi0: np.ndarray
    phis: dict
    residual: float


@dataclass
class Factorization:
    base: tuple
    axes: tuple
    blocks: tuple
    phi: np.ndarray
    phi_expr: Expr | None
    base_factor: np.ndarray | None
    warpings: dict
    fiber_factors: dict
    reconstruction_residual: float
    path_order_residual: float
    cp: CpSection | None
    spherical: SphericalSection | None
    report: object

    def to_dict(self) -> dict:
        out = {
            "base": [float(x) for x in self.base],
            "axes": [[float(x) for x in ax] for ax in self.axes],
            "blocks": [list(b) for b in self.blocks],
            "phi": self.phi.tolist(),
            "reconstruction_residual": float(self.reconstruction_residual),
            "path_order_residual": float(self.path_order_residual),
            "warpings": {str(i): w.tolist() for i, w in self.warpings.items()},
            "base_factor": None
            if self.base_factor is None
            else self.base_factor.tolist(),
            "fiber_factors": {str(i): m.tolist() for i, m in self.fiber_factors.items()},
        }
        if self.phi_expr is not None:
            from .scalar_fields import format_expr

            chart = getattr(self, "_chart", None)
            out["phi_expr"] = format_expr(
                self.phi_expr, getattr(chart, "names", None)
            )
        if self.cp is not None:
            out["cp"] = {
                "constants": {str(i): float(a) for i, a in self.cp.constants.items()},
                "fit_residual": float(self.cp.fit_residual),
                "phi": self.cp.phi.tolist(),
            }
        if self.spherical is not None:
            out["spherical"] = {
                "kind": self.spherical.kind,
                "phi0": self.spherical.phi0.tolist(),
                "phis": {str(i): v.tolist() for i, v in self.spherical.phis.items()},
                "residual": float(self.spherical.residual),
            }
        return out


def _blk_det_expr(g: MetricField, blk) -> Expr:
    sub = [[g.entries[a][b] for b in blk] for a in blk]
    return det_expr(sub)


def factorize_cwp(
    g: MetricField,
    net: OrthogonalNet | None = None,
    base=None,
    tol: float = 1e-8,
    plan: SamplePlan | None = None,
    grid: int = 9,
) -> Factorization:
    """Factor a CWP metric as phi^2 * (warped product) constructively.

    Requires a coordinate-block net and a block-diagonal metric; classifies
    first and refuses anything whose CWP flag does not pass. Returns grids
    for phi, the recovered warpings, and the factor metrics, a reconstruction
    residual over a `grid`-per-axis box, and the path-order residual of the
    defining line integrals. Adds a conformal-to-product section when CP
    passes and a separable-sum section for 1/phi when sphericity holds.
    """
    chart = g.chart
    n = chart.dim
    if net is None:
        net = OrthogonalNet.coordinate(chart)
    if not net.is_coordinate:
        raise NotApplicableError("factorization supports coordinate-block nets only")
    blocks = net.blocks
    k = len(blocks) - 1

    report = classify_net(g, net, plan or SamplePlan(), tol)
    if report.flags["CWP"].status != "pass":
        raise ConstraintError(
            f"CWP precondition fails: flag {report.flags['CWP'].status} "
            f"with residual {report.flags['CWP'].residual:.3e}"
        )

    if base is None:
        base = chart.center()
    base = tuple(float(x) for x in base)
    if not chart.contains(base):
        raise ConstraintError(f"base point {base} outside the chart domain")

    # block-diagonality gate
    probe_axes = grid_axes(chart, 3)
    for pt in itertools.product(*probe_axes):
        cache: dict = {}
        for bi, bj in itertools.combinations(range(k + 1), 2):
            for a in blocks[bi]:
                for b in blocks[bj]:
                    if abs(evaluate(g.entries[a][b], pt, cache)) > 1e-12:
                        raise ConstraintError(
                            f"metric has off-block entry ({a},{b}) at {pt}"
                        )

    axes = grid_axes(chart, grid)
    dets = [_blk_det_expr(g, blk) if blk else None for blk in blocks]
    det_base = [evaluate(d, base) if d is not None else 1.0 for d in dets]
    dims = [len(blk) for blk in blocks]

    def rho_bar(i: int, pt, cache=None) -> float:
        if dets[i] is None:
            return 1.0
        dv = evaluate(dets[i], pt, cache)
        if dv <= 0.0:
            raise ConstraintError(f"block {i} determinant {dv:.6g} <= 0 at {pt}")
        return (dv / det_base[i]) ** (1.0 / (2.0 * dims[i]))

    # d log(rho_i / rho_0) per axis, symbolic
    dL = {}
    for i in range(1, k + 1):
        L = mul(const(1.0 / (2.0 * dims[i])), log(dets[i]))
        if dets[0] is not None:
            L = L - mul(const(1.0 / (2.0 * dims[0])), log(dets[0]))
        dL[i] = [diff(L, ax) for ax in range(n)]

    b0 = blocks[0]
    shape0 = tuple(grid for _ in b0)
    axgrids0 = [axes[a] for a in b0]

    def slice_point(blk, target_vals):
        pt = list(base)
        for a, v in zip(blk, target_vals):
            pt[a] = float(v)
        return tuple(pt)

    # warpings psi_i on the block-0 subgrid
    warpings = {}
    for i in range(1, k + 1):
        vals = np.zeros(shape0) if shape0 else np.zeros(())
        for idx in np.ndindex(*shape0) if shape0 else [()]:
            tgt = slice_point(b0, [axgrids0[j][idx[j]] for j in range(len(b0))])
            segs = _corner_path_segments(dL[i], base, tgt, list(b0))
            vals[idx] = math.exp(sum(v for _, v in segs))
        warpings[i] = vals

    # base factor on the block-0 subgrid
    base_factor = None
    if b0:
        d0 = dims[0]
        base_factor = np.zeros(shape0 + (d0, d0))
        for idx in np.ndindex(*shape0):
            pt = slice_point(b0, [axgrids0[j][idx[j]] for j in range(len(b0))])
            cache = {}
            r2 = rho_bar(0, pt, cache) ** 2
            for a in range(d0):
                for b in range(d0):
                    base_factor[idx + (a, b)] = (
                        evaluate(g.entries[b0[a]][b0[b]], pt, cache) / r2
                    )

    # fiber factors on block-i subgrids
    fiber_factors = {}
    for i in range(1, k + 1):
        blk = blocks[i]
        di = dims[i]
        shape_i = tuple(grid for _ in blk)
        axgrids = [axes[a] for a in blk]
        mat = np.zeros(shape_i + (di, di))
        for idx in np.ndindex(*shape_i):
            pt = slice_point(blk, [axgrids[j][idx[j]] for j in range(di)])
            segs = _corner_path_segments(dL[i], base, pt, list(blk))
            beta = sum(v for _, v in segs)
            cache = {}
            r2 = rho_bar(i, pt, cache) ** 2
            scale = math.exp(2.0 * beta) / r2
            for a in range(di):
                for b in range(di):
                    mat[idx + (a, b)] = scale * evaluate(
                        g.entries[blk[a]][blk[b]], pt, cache
                    )
        fiber_factors[i] = mat

    # phi on the full grid + reconstruction residual
    phi_grid = np.zeros((grid,) * n)
    worst = 0.0
    for idx in np.ndindex(*phi_grid.shape):
        pt = tuple(axes[a][idx[a]] for a in range(n))
        cache = {}
        r0 = rho_bar(0, pt, cache)
        phi_grid[idx] = r0
        idx0 = tuple(idx[a] for a in b0)
        G = np.zeros((n, n))
        R = np.zeros((n, n))
        for a in range(n):
            for b in range(a, n):
                G[a, b] = G[b, a] = evaluate(g.entries[a][b], pt, cache)
        if base_factor is not None:
            for a in range(dims[0]):
                for b in range(dims[0]):
                    R[b0[a], b0[b]] = r0 * r0 * base_factor[idx0 + (a, b)]
        for i in range(1, k + 1):
            blk = blocks[i]
            idxi = tuple(idx[a] for a in blk)
            psi = float(warpings[i][idx0])
            for a in range(dims[i]):
                for b in range(dims[i]):
                    R[blk[a], blk[b]] = (
                        r0 * r0 * psi * psi * fiber_factors[i][idxi + (a, b)]
                    )
        worst = max(worst, np.linalg.norm(R - G) / max(np.linalg.norm(G), 1e-300))

    # path-order residual over box corners + center (full paths, both orders)
    corner_axes = [(chart.domain[a][0], chart.domain[a][1]) for a in range(n)]
    targets = list(itertools.product(*corner_axes)) + [base, chart.center()]
    path_worst = 0.0
    order_f = list(range(n))
    order_r = list(reversed(order_f))
    for i in range(1, k + 1):
        in_block = set(blocks[i])
        in_base = set(b0)
        for tgt in targets:
            segs_f = _corner_path_segments(dL[i], base, tgt, order_f)
            segs_r = _corner_path_segments(dL[i], base, tgt, order_r)

            def class_sums(segs):
                alpha = sum(v for ax, v in segs if ax in in_base)
                beta = sum(v for ax, v in segs if ax in in_block)
                gamma = sum(
                    abs(v) for ax, v in segs if ax not in in_base and ax not in in_block
                )
                return alpha, beta, gamma

            af, bf, gf = class_sums(segs_f)
            ar, br, gr = class_sums(segs_r)
            path_worst = max(path_worst, abs(af - ar), abs(bf - br), gf, gr)
    if path_worst > PATH_ORDER_TOL:
        raise PathInconsistencyError(
            f"axis-order dependence {path_worst:.3e} exceeds {PATH_ORDER_TOL:.1e}; "
            "the twist logs are not numerically gradient-consistent"
        )

    # conformal-to-product section
    cp = None
    if report.flags["CP"].status == "pass" and k >= 1:
        logpsi = {i: np.log(warpings[i]) for i in warpings}
        constants = {1: 1.0}
        fit = 0.0
        for i in range(2, k + 1):
            d = logpsi[i] - logpsi[1]
            la = float(np.mean(d))
            constants[i] = math.exp(la)
            fit = max(fit, float(np.max(np.abs(d - la))) if d.size else 0.0)
        psi1_full = np.zeros_like(phi_grid)
        for idx in np.ndindex(*phi_grid.shape):
            psi1_full[idx] = warpings[1][tuple(idx[a] for a in b0)]
        cp_base = None
        if base_factor is not None:
            cp_base = base_factor.copy()
            for idx in np.ndindex(*shape0):
                cp_base[idx] /= float(warpings[1][idx]) ** 2
        cp_fibers = {1: fiber_factors[1]}
        for i in range(2, k + 1):
            cp_fibers[i] = constants[i] ** 2 * fiber_factors[i]
        cp = CpSection(
            constants=constants,
            fit_residual=fit,
            phi=phi_grid * psi1_full,
            base_factor=cp_base,
            fiber_factors=cp_fibers,
        )

    # separable-sum section for 1/phi under sphericity
    spherical = None
    sph_ok = all(
        max(row[i].sphericity, row[i].sphericity_perp) <= tol
        for row in report.table
        for i in range(1, k + 1)
    )
    if sph_ok and k >= 1:
        kind = "warped"
        if cp is not None and all(
            row[0].sphericity_perp <= tol for row in report.table
        ):
            kind = "product"
        Kb = 1.0
        phi0 = np.zeros(shape0) if shape0 else np.array(1.0)
        for idx in np.ndindex(*shape0) if shape0 else [()]:
            pt = slice_point(b0, [axgrids0[j][idx[j]] for j in range(len(b0))])
            phi0[idx] = 1.0 / rho_bar(0, pt)
        phis = {}
        for i in range(1, k + 1):
            blk = blocks[i]
            shape_i = tuple(grid for _ in blk)
            axg = [axes[a] for a in blk]
            vals = np.zeros(shape_i)
            for idx in np.ndindex(*shape_i):
                pt = slice_point(blk, [axg[j][idx[j]] for j in range(dims[i])])
                vals[idx] = 1.0 / rho_bar(0, pt) - Kb
            phis[i] = vals
        sph_worst = 0.0
        for idx in np.ndindex(*phi_grid.shape):
            Kv = 1.0 / phi_grid[idx]
            idx0 = tuple(idx[a] for a in b0)
            rebuilt = float(phi0[idx0]) if b0 else 1.0
            for i in range(1, k + 1):
                idxi = tuple(idx[a] for a in blocks[i])
                rebuilt += float(warpings[i][idx0]) * float(phis[i][idxi])
            sph_worst = max(sph_worst, abs(Kv - rebuilt) / (1.0 + abs(Kv)))
        spherical = SphericalSection(kind=kind, phi0=phi0, phis=phis, residual=sph_worst)

    # closed-form conformal factor when provenance provides one that matches
    phi_expr = None
    prov = getattr(g, "provenance", None)
    if isinstance(prov, ProductSpec):
        cand = prov.conformal_factor
        if cand is None and prov.kind in ("product", "warped"):
            cand = ONE
        if cand is not None:
            cand = div(cand, const(evaluate(cand, base)))
            ok = True
            for idx in np.ndindex(*phi_grid.shape):
                pt = tuple(axes[a][idx[a]] for a in range(n))
                if abs(evaluate(cand, pt) - phi_grid[idx]) > 1e-8 * (
                    1.0 + abs(phi_grid[idx])
                ):
                    ok = False
                    break
            if ok:
                phi_expr = cand

    out = Factorization(
        base=base,
        axes=tuple(axes),
        blocks=blocks,
        phi=phi_grid,
        phi_expr=phi_expr,
        base_factor=base_factor,
        warpings=warpings,
        fiber_factors=fiber_factors,
        reconstruction_residual=float(worst),
        path_order_residual=float(path_worst),
        cp=cp,
        spherical=spherical,
        report=report,
    )
    out._chart = chart
    return out


# --- spherical-factor equivalence ----------------------------------------------


@dataclass
class SphericalCheck:
    residual_ii: float
    residual_iii: float
    residual_v: float

    def to_dict(self) -> dict:
        return {
            "residual_ii": self.residual_ii,
            "residual_iii": self.residual_iii,
            "residual_v": self.residual_v,
        }


def spherical_factor_check(spec: ProductSpec, phi: Expr, i: int, p) -> SphericalCheck:
    """Three equivalent sphericity tests for block i of phi^2 * spec at p.

    residual_ii checks <nabla_Z W, X> = <Z, W><X, W> for W = -grad log phi;
    residual_iii checks the covariant Hessian of phi across the block split;
    residual_v checks that (1/rho_i) * d(1/phi)/dx_a is independent of the
    non-block coordinates. All derivatives use the scaled metric except the
    purely symbolic residual_v.
    """
    if spec.kind not in ("product", "warped"):
        raise ConstraintError("spherical factor check expects a product or warped spec")
    if spec.conformal_factor is not None:
        raise ConstraintError("pass phi separately; spec must be unscaled")
    if not 1 <= i <= len(spec.factors) - 1:
        raise ConstraintError(f"block index {i} out of range for the spec")
    g = conformal_scale(build_metric(spec), phi)
    chart = g.chart
    n = chart.dim
    p = tuple(float(x) for x in p)
    blk = spec.blocks[i]
    other = [a for a in range(n) if a not in blk]

    cache: dict = {}
    G, _ = metric_at(g, p, cache)
    W = tuple(mul(const(-1.0), w) for w in _grad_exprs_cached(g, log(phi)))
    Wv = eval_vector(W, p, cache)
    basis = np.eye(n)
    norms = [math.sqrt(G[a, a]) for a in range(n)]

    r2 = 0.0
    r3 = 0.0
    for c in other:
        ec = tuple(ONE if j == c else ZERO for j in range(n))
        dW = cov_deriv(g, ec, W, p, cache)
        for a in blk:
            scale = max(norms[a] * norms[c], 1e-300)
            lhs = float(basis[a] @ G @ dW) / scale
            rhs = float(basis[c] @ G @ Wv) * float(basis[a] @ G @ Wv) / scale
            r2 = max(r2, abs(lhs - rhs))
            ea = tuple(ONE if j == a else ZERO for j in range(n))
            r3 = max(r3, abs(hessian_lc(g, phi, ea, ec, p, cache)) / scale)

    rho = spec.twists[i]
    inv_phi = powc(phi, -1.0)
    r5 = 0.0
    for a in blk:
        q = div(diff(inv_phi, a), rho)
        for b in other:
            r5 = max(r5, abs(evaluate(diff(q, b), p, cache)))
    return SphericalCheck(residual_ii=r2, residual_iii=r3, residual_v=r5)


def _grad_exprs_cached(g: MetricField, f: Expr):
    from .chart_calculus import grad_exprs

    cache = getattr(g, "_pm_cache", None)
    if cache is None:
        cache = {}
        g._pm_cache = cache
    hit = cache.get(id(f))
    if hit is None:
        hit = (grad_exprs(g, f), f)
        cache[id(f)] = hit
    return hit[0]
