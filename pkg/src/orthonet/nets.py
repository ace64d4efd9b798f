"""Orthogonal nets of distributions and their classification.

A net splits a frame of vector fields into mutually orthogonal blocks; each
block spans a distribution E_i with complement E_i^perp spanned by the other
blocks. For every block the module computes second-fundamental-form data
symbolically (so the mean curvature normal is itself a differentiable field),
then evaluates residuals at sample points:

    umbilicity     ||(nabla_X Y)^perp - <X, Y> H||      over block pairs
    sphericity     |<nabla_X H, Z>|                     block X, complement Z
    geodesy        umbilicity + ||H||
    integrability  ||[X, Y]^perp||                      over block pairs

Flag vocabulary over the residuals, for blocks i >= 1 unless stated:

    TP    every E_i umbilical and every E_i^perp integrable (all i)
    WP    E_i spherical, E_i^perp totally geodesic
    QW    E_i umbilical, E_i^perp totally geodesic
    CQW   E_i and E_i^perp umbilical
    CQW0  CQW and E_0^perp umbilical
    CWP   CQW and the mixed mean-curvature exchange identity
    CP    CWP and E_0^perp umbilical

The exchange identity (cwp_residual) compares <nabla_Z eta_i, X> with
<nabla_X H_i, Z> for X in the block and Z in the complement, where H_i and
eta_i are the mean curvature normals of E_i and E_i^perp. It is evaluated
only where both umbilicity preconditions hold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chart_calculus import (
    MetricField,
    cov_deriv_exprs,
    eval_vector,
    inner_exprs,
    lie_bracket_exprs,
    metric_at,
)
from .errors import (
    ConstraintError,
    DegenerateFrameError,
    InconsistencyError,
    NotApplicableError,
)
from .sampling import SamplePlan, sample_points
from .scalar_fields import Chart, Const, ONE, ZERO, add, const, div, mul, sub

__all__ = [
    "OrthogonalNet",
    "DistributionGeometry",
    "Flag",
    "NetReport",
    "project",
    "distribution_geometry",
    "cwp_residual",
    "classify_net",
]

FLAG_NAMES = ("TP", "WP", "QW", "CQW", "CQW0", "CWP", "CP")

_GRAM_COND_FLOOR = 1e-12
_ORTHO_TOL = 1e-8


class OrthogonalNet:
    """A frame of expression vector fields partitioned into blocks.

    Blocks index into the frame. Block 0 may be empty (no base block); all
    later blocks must be nonempty. A coordinate net uses the standard basis
    as its frame, with blocks over coordinate indices.
    """

    def __init__(self, chart: Chart, frame, blocks):
        self.chart = chart
        self.frame = tuple(tuple(f) for f in frame)
        self.blocks = tuple(tuple(b) for b in blocks)
        if len(self.frame) != chart.dim:
            raise ConstraintError("frame must have dim fields")
        for f in self.frame:
            if len(f) != chart.dim:
                raise ConstraintError("each frame field needs dim components")
        flat = sorted(i for b in self.blocks for i in b)
        if flat != list(range(chart.dim)):
            raise ConstraintError("blocks must partition the frame indices")
        for b in self.blocks[1:]:
            if not b:
                raise ConstraintError("only block 0 may be empty")
        if len(self.blocks) < 2:
            raise ConstraintError("a net needs at least two blocks")

    @staticmethod
    def coordinate(chart: Chart, blocks=None) -> "OrthogonalNet":
        if blocks is None:
            blocks = chart.blocks
        if blocks is None:
            raise ConstraintError("chart has no blocks and none were given")
        n = chart.dim
        frame = [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]
        return OrthogonalNet(chart, frame, blocks)

    @property
    def is_coordinate(self) -> bool:
        n = self.chart.dim
        for i, f in enumerate(self.frame):
            for j, e in enumerate(f):
                want = 1.0 if i == j else 0.0
                if not (isinstance(e, Const) and e.value == want):
                    return False
        return True

    def complement(self, i: int) -> tuple[int, ...]:
        return tuple(
            k for j, b in enumerate(self.blocks) if j != i for k in b
        )


# --- cached symbolic geometry of a sub-frame ---------------------------------


class _SpanFields:
    """Symbolic second-fundamental data of the span of a frame subset."""

    def __init__(self, g: MetricField, net: OrthogonalNet, indices):
        self.indices = tuple(indices)
        r = len(self.indices)
        self.rank = r
        n = g.dim
        fields = [net.frame[a] for a in self.indices]
        others = [k for k in range(n) if k not in self.indices]
        self.other_indices = tuple(others)

        if r == 0:
            self.H = tuple([ZERO] * n)
            self.covH = ()
            self.umb_defects = ()
            self.bracket_perp = ()
            return

        gram = [[inner_exprs(g, fields[a], fields[b]) for b in range(r)] for a in range(r)]
        from .chart_calculus import inverse_exprs

        gram_inv = inverse_exprs(gram)

        def proj(v):
            # g-orthogonal projection onto the span
            comps = []
            for a in range(r):
                coeff = ZERO
                for b in range(r):
                    coeff = add(coeff, mul(gram_inv[a][b], inner_exprs(g, v, fields[b])))
                comps.append(coeff)
            out = [ZERO] * n
            for a in range(r):
                for k in range(n):
                    out[k] = add(out[k], mul(comps[a], fields[a][k]))
            return tuple(out)

        covs = {}
        sperp = {}
        for a in range(r):
            for b in range(r):
                cv = cov_deriv_exprs(g, fields[a], fields[b])
                covs[(a, b)] = cv
                pv = proj(cv)
                sperp[(a, b)] = tuple(sub(cv[k], pv[k]) for k in range(n))

        H = [ZERO] * n
        for a in range(r):
            for b in range(r):
                for k in range(n):
                    H[k] = add(H[k], mul(gram_inv[a][b], sperp[(a, b)][k]))
        self.H = tuple(div(h, const(float(r))) for h in H)

        self.gram = gram
        self.fields = fields
        # umbilicity defect per ordered pair a <= b
        defects = []
        for a in range(r):
            for b in range(a, r):
                defects.append(
                    (
                        a,
                        b,
                        tuple(
                            sub(sperp[(a, b)][k], mul(gram[a][b], self.H[k]))
                            for k in range(n)
                        ),
                    )
                )
        self.umb_defects = tuple(defects)

        self.covH = tuple(cov_deriv_exprs(g, fields[a], self.H) for a in range(r))

        brackets = []
        for a in range(r):
            for b in range(a + 1, r):
                lb = lie_bracket_exprs(fields[a], fields[b], n)
                pv = proj(lb)
                brackets.append((a, b, tuple(sub(lb[k], pv[k]) for k in range(n))))
        self.bracket_perp = tuple(brackets)


def _span_fields(g: MetricField, net: OrthogonalNet, indices) -> _SpanFields:
    key = (net, frozenset(indices))
    cache = getattr(g, "_span_cache", None)
    if cache is None:
        cache = {}
        g._span_cache = cache
    out = cache.get(key)
    if out is None:
        out = _SpanFields(g, net, indices)
        cache[key] = out
    return out


# --- pointwise evaluation -----------------------------------------------------


class _PointData:
    """Frame values, metric and norms at one point, shared eval cache."""

    def __init__(self, g: MetricField, net: OrthogonalNet, p):
        self.cache: dict = {}
        self.G, self.Ginv = metric_at(g, p, self.cache)
        self.F = np.array(
            [eval_vector(f, p, self.cache) for f in net.frame]
        )
        self.norms = np.array(
            [np.sqrt(max(v @ self.G @ v, 0.0)) for v in self.F]
        )
        self.p = p

    def gnorm(self, v) -> float:
        return float(np.sqrt(max(v @ self.G @ v, 0.0)))

    def ginner(self, v, w) -> float:
        return float(v @ self.G @ w)


def _validate_net(g: MetricField, net: OrthogonalNet, pd: _PointData):
    idx_groups = [b for b in net.blocks if b]
    M = pd.F @ pd.G @ pd.F.T
    ev = np.linalg.eigvalsh(M)
    if ev[0] <= _GRAM_COND_FLOOR * max(ev[-1], 1e-300):
        raise DegenerateFrameError(
            f"frame degenerate at {tuple(pd.p)}: Gram eigenvalue ratio "
            f"{ev[0]:.3e}/{ev[-1]:.3e}"
        )
    for bi in range(len(idx_groups)):
        for bj in range(bi + 1, len(idx_groups)):
            for a in idx_groups[bi]:
                for c in idx_groups[bj]:
                    ip = abs(float(pd.F[a] @ pd.G @ pd.F[c]))
                    scale = max(pd.norms[a] * pd.norms[c], 1e-300)
                    if ip / scale > _ORTHO_TOL:
                        raise ConstraintError(
                            f"blocks not orthogonal at {tuple(pd.p)}: "
                            f"|<X_{a}, X_{c}>| = {ip:.3e}"
                        )


def project(g: MetricField, net: OrthogonalNet, block, v, p) -> np.ndarray:
    """g-orthogonal projection of the numeric vector v onto the span of the
    frame fields indexed by `block` at p. Idempotent; the residual v - Pv is
    g-orthogonal to the span."""
    indices = tuple(block)
    if not indices:
        return np.zeros(g.dim)
    cache: dict = {}
    G, _ = metric_at(g, p, cache)
    F = np.array([eval_vector(net.frame[a], p, cache) for a in indices])
    M = F @ G @ F.T
    ev = np.linalg.eigvalsh(M)
    if ev[0] <= _GRAM_COND_FLOOR * max(ev[-1], 1e-300):
        raise DegenerateFrameError(f"frame block degenerate at {tuple(p)}")
    v = np.asarray(v, dtype=float)
    coeff = np.linalg.solve(M, F @ G @ v)
    return coeff @ F


# --- distribution geometry ------------------------------------------------------


@dataclass
class DistributionGeometry:
    """Residuals of one block and of its complement at one point."""

    block: int
    H: np.ndarray
    eta: np.ndarray
    umbilicity: float
    umbilicity_perp: float
    sphericity: float
    sphericity_perp: float
    geodesy: float
    geodesy_perp: float
    integrability: float
    integrability_perp: float

    def to_dict(self) -> dict:
        return {
            "block": self.block,
            "H": [float(x) for x in self.H],
            "eta": [float(x) for x in self.eta],
            "umbilicity": self.umbilicity,
            "umbilicity_perp": self.umbilicity_perp,
            "sphericity": self.sphericity,
            "sphericity_perp": self.sphericity_perp,
            "geodesy": self.geodesy,
            "geodesy_perp": self.geodesy_perp,
            "integrability": self.integrability,
            "integrability_perp": self.integrability_perp,
        }


def _side_residuals(sf: _SpanFields, other_idx, pd: _PointData):
    """(H value, umbilicity, sphericity, geodesy, integrability) for one span."""
    n = pd.F.shape[1]
    if sf.rank == 0:
        z = np.zeros(n)
        return z, 0.0, 0.0, 0.0, 0.0
    Hv = eval_vector(sf.H, pd.p, pd.cache)
    umb = 0.0
    if sf.rank > 1:
        for a, b, defect in sf.umb_defects:
            dv = eval_vector(defect, pd.p, pd.cache)
            na = pd.norms[sf.indices[a]]
            nb = pd.norms[sf.indices[b]]
            umb = max(umb, pd.gnorm(dv) / max(na * nb, 1e-300))
    sph = 0.0
    for a in range(sf.rank):
        cv = eval_vector(sf.covH[a], pd.p, pd.cache)
        na = pd.norms[sf.indices[a]]
        for c in other_idx:
            val = abs(pd.ginner(cv, pd.F[c]))
            sph = max(sph, val / max(na * pd.norms[c], 1e-300))
    geo = umb + pd.gnorm(Hv)
    integ = 0.0
    for a, b, perp in sf.bracket_perp:
        bv = eval_vector(perp, pd.p, pd.cache)
        na = pd.norms[sf.indices[a]]
        nb = pd.norms[sf.indices[b]]
        integ = max(integ, pd.gnorm(bv) / max(na * nb, 1e-300))
    return Hv, umb, sph, geo, integ


def _geometry_at(g, net, i, pd: _PointData) -> DistributionGeometry:
    blk = net.blocks[i]
    comp = net.complement(i)
    bf = _span_fields(g, net, blk)
    cf = _span_fields(g, net, comp)
    Hv, umb, sph, geo, integ = _side_residuals(bf, comp, pd)
    Ev, umb_p, sph_p, geo_p, integ_p = _side_residuals(cf, blk, pd)
    return DistributionGeometry(
        block=i,
        H=Hv,
        eta=Ev,
        umbilicity=umb,
        umbilicity_perp=umb_p,
        sphericity=sph,
        sphericity_perp=sph_p,
        geodesy=geo,
        geodesy_perp=geo_p,
        integrability=integ,
        integrability_perp=integ_p,
    )


def distribution_geometry(g: MetricField, net: OrthogonalNet, i: int, p) -> DistributionGeometry:
    """Second-fundamental residuals of block i and its complement at p."""
    if not 0 <= i < len(net.blocks):
        raise ConstraintError(f"no block {i} in a {len(net.blocks)}-block net")
    pd = _PointData(g, net, p)
    _validate_net(g, net, pd)
    return _geometry_at(g, net, i, pd)


def _exchange_residual(g, net, i, pd: _PointData) -> float:
    """|<nabla_Z eta_i, X> - <nabla_X H_i, Z>| over normalized block pairs."""
    blk = net.blocks[i]
    comp = net.complement(i)
    bf = _span_fields(g, net, blk)
    cf = _span_fields(g, net, comp)
    worst = 0.0
    for ia, a in enumerate(blk):
        cva = eval_vector(bf.covH[ia], pd.p, pd.cache)
        for ic, c in enumerate(comp):
            cvc = eval_vector(cf.covH[ic], pd.p, pd.cache)
            scale = max(pd.norms[a] * pd.norms[c], 1e-300)
            d1 = pd.ginner(cvc, pd.F[a]) / scale
            d2 = pd.ginner(cva, pd.F[c]) / scale
            worst = max(worst, abs(d1 - d2) / (1.0 + abs(d1) + abs(d2)))
    return worst


def cwp_residual(g: MetricField, net: OrthogonalNet, i: int, p, tol: float = 1e-8) -> float:
    """Mean-curvature exchange residual for block i at p. Raises
    NotApplicableError when the umbilicity preconditions fail at p, so the
    caller never mistakes an unevaluable identity for a zero residual."""
    pd = _PointData(g, net, p)
    _validate_net(g, net, pd)
    geom = _geometry_at(g, net, i, pd)
    if geom.umbilicity > tol or geom.umbilicity_perp > tol:
        raise NotApplicableError(
            f"umbilicity preconditions fail at {tuple(p)}: "
            f"block {geom.umbilicity:.3e}, complement {geom.umbilicity_perp:.3e}"
        )
    return _exchange_residual(g, net, i, pd)


# --- classification -------------------------------------------------------------


@dataclass
class Flag:
    status: str
    residual: float

    def to_dict(self) -> dict:
        return {"status": self.status, "residual": self.residual}


@dataclass
class NetReport:
    flags: dict
    h0_sum_residual: float
    cp_hs0_residual: float | None
    n_samples: int
    table: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "flags": {k: f.to_dict() for k, f in self.flags.items()},
            "h0_sum_residual": self.h0_sum_residual,
            "cp_hs0_residual": self.cp_hs0_residual,
            "n_samples": self.n_samples,
        }


def _status(max_resid: float, tol: float) -> str:
    if max_resid <= tol:
        return "pass"
    if max_resid > 10.0 * tol:
        return "fail"
    return "inconclusive"


def classify_net(
    g: MetricField,
    net: OrthogonalNet,
    plan: SamplePlan | None = None,
    tol: float = 1e-8,
) -> NetReport:
    """Evaluate all residuals over the sample plan and assemble the flags.

    A flag passes when its residual stays within tol at every sample, fails
    when it exceeds 10 tol somewhere, and is inconclusive in between. The
    exchange identity contributes to CWP only at samples where both of its
    umbilicity preconditions hold; if no sample admits it and umbilicity
    stays in the indeterminate band, CWP reports not_applicable.
    """
    plan = plan or SamplePlan()
    pts = sample_points(g.chart, plan)
    nblocks = len(net.blocks)
    if nblocks < 2:
        raise ConstraintError("classification needs at least two blocks")

    maxes = {name: 0.0 for name in FLAG_NAMES}
    eq_evaluated = False
    eq0_evaluated = False
    cp_hs0_max = 0.0
    h0_max = 0.0
    table = []

    for p in pts:
        p = tuple(float(x) for x in p)
        pd = _PointData(g, net, p)
        _validate_net(g, net, pd)
        geoms = [_geometry_at(g, net, i, pd) for i in range(nblocks)]
        table.append(geoms)

        tp = max(
            max(gm.umbilicity, gm.integrability_perp) for gm in geoms
        )
        rest = geoms[1:]
        wp = max(
            (max(gm.umbilicity, gm.sphericity, gm.geodesy_perp) for gm in rest),
            default=0.0,
        )
        qw = max(
            (max(gm.umbilicity, gm.geodesy_perp) for gm in rest), default=0.0
        )
        cqw = max(
            (max(gm.umbilicity, gm.umbilicity_perp) for gm in rest), default=0.0
        )
        cqw0 = max(cqw, geoms[0].umbilicity_perp)

        cwp = cqw
        for i in range(1, nblocks):
            gm = geoms[i]
            if gm.umbilicity <= tol and gm.umbilicity_perp <= tol:
                cwp = max(cwp, _exchange_residual(g, net, i, pd))
                eq_evaluated = True
        cp = max(cwp, geoms[0].umbilicity_perp)
        if (
            geoms[0].umbilicity <= tol
            and geoms[0].umbilicity_perp <= tol
            and net.blocks[0]
        ):
            cp_hs0_max = max(cp_hs0_max, _exchange_residual(g, net, 0, pd))
            eq0_evaluated = True

        hsum = geoms[0].H - sum(gm.eta for gm in rest)
        hscale = 1.0 + pd.gnorm(geoms[0].H) + sum(pd.gnorm(gm.eta) for gm in rest)
        h0_max = max(h0_max, pd.gnorm(hsum) / hscale)

        for name, val in (
            ("TP", tp),
            ("WP", wp),
            ("QW", qw),
            ("CQW", cqw),
            ("CQW0", cqw0),
            ("CWP", cwp),
            ("CP", cp),
        ):
            maxes[name] = max(maxes[name], val)

    flags = {name: Flag(_status(maxes[name], tol), maxes[name]) for name in FLAG_NAMES}
    if not eq_evaluated and flags["CWP"].status == "inconclusive":
        flags["CWP"] = Flag("not_applicable", maxes["CWP"])
        flags["CP"] = Flag("not_applicable", maxes["CP"])

    if flags["CP"].status == "pass" and eq0_evaluated and cp_hs0_max > 10.0 * tol:
        raise InconsistencyError(
            "CP flags pass but the exchange identity fails on the base block "
            f"(residual {cp_hs0_max:.3e}); this should be analytically impossible"
        )

    return NetReport(
        flags=flags,
        h0_sum_residual=h0_max,
        cp_hs0_residual=cp_hs0_max if eq0_evaluated else None,
        n_samples=len(pts),
        table=table,
    )
