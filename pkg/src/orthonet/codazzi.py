"""Codazzi tensors with exactly two eigenvalue clusters.

A symmetric (1,1)-tensor field Phi is a Codazzi tensor when the covariant
derivative is symmetric in its two slots: (nabla_X Phi)Y = (nabla_Y Phi)X for
all X, Y. When such a tensor has exactly two distinct eigenvalues lambda and
mu everywhere, the two eigenbundles form an orthogonal net whose geometry is
governed by a handful of scalar identities in lambda, mu and their covariant
Hessians. This module evaluates the defining residual, extracts the
eigenstructure both pointwise and as closed-form scalar fields, scores the
identities, classifies the pair (metric, tensor), and builds the two
canonical model pairs that realize the classification.

Residual vocabulary (all residuals are normalized to be scale-free):

* codazzi: antisymmetry defect of nabla Phi over coordinate pairs.
* mean_curvature: the eigenbundle of lambda is umbilical with mean curvature
  normal eta solving (lambda I - Phi) eta = (grad lambda) restricted to the
  orthogonal complement; this scores that identity with eta computed
  geometrically by the nets machinery.
* conformal_product: the criterion, in terms of alpha = (lambda + mu)/2 and
  beta = (mu - lambda)/(mu + lambda), for the eigen-net to be conformal to a
  product net. Not applicable where lambda + mu vanishes.
* mu_spherical / lambda_spherical: the second-order criteria equivalent to
  sphericity of the mu (resp. lambda) eigenbundle. When either holds, both
  holding is equivalent to a conformal product structure whose reciprocal
  conformal factor splits as a sum of one function per factor.
* eta_two_path / zeta_two_path: the same scalar <nabla_X eta, Y> computed two
  independent ways, geometrically and by a closed formula in the eigenvalue
  fields; agreement cross-validates the calculus, net and eigen layers.

When the eigenvalues satisfy lambda = h(mu) for a supplied one-variable
function h and mu is constant along its eigenbundle, the classifier lands in
one of two cases: "constant_product" (both eigenvalue fields constant, the
net is a metric product and Phi is a constant multiple of each projector) or
"warped_rank_one" (the lambda bundle has rank one and the metric is a warped
product over it, with the warping tied to mu by a first-order ODE). Anything
else is reported as "outside_hypotheses".
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .chart_calculus import (
    MetricField,
    cov_deriv,
    det_expr,
    eval_matrix,
    eval_vector,
    hessian_lc,
    inner,
    metric_at,
)
from .errors import (
    CoalescenceError,
    ConstraintError,
    InconsistencyError,
    NotCodazziError,
)
from .nets import Flag, NetReport, OrthogonalNet, _span_fields, _status, classify_net
from .product_metrics import (
    FactorSpec,
    ProductSpec,
    _check_positive,
    build_metric,
    conformal_scale,
)
from .sampling import SamplePlan, grid_axes, sample_points
from .scalar_fields import (
    Chart,
    Expr,
    ONE,
    ZERO,
    add,
    const,
    diff,
    div,
    evaluate,
    free_vars,
    mul,
    powc,
    sub,
    substitute,
    var,
)

__all__ = [
    "GAP_MIN",
    "SymTensorField",
    "EigenPair",
    "CriteriaRecord",
    "CodazziReport",
    "CodazziCandidate",
    "self_adjoint_defect",
    "codazzi_residual",
    "eigen_two",
    "criteria_residuals",
    "classify_codazzi",
    "build_codazzi_candidate",
]

GAP_MIN = 1e-6

# alignment threshold for deciding that an eigenvector is a coordinate axis
_AXIS_TOL = 1e-8


class SymTensorField:
    """A (1,1)-tensor field as a dim x dim matrix of component expressions.

    The optional metric reference records which metric the tensor is
    self-adjoint against; when given, self-adjointness is spot-checked at the
    chart center so a transposed or mis-indexed component matrix fails fast.
    """

    def __init__(self, chart: Chart, components, metric: MetricField | None = None,
                 tol: float = 1e-8):
        self.chart = chart
        self.components = tuple(tuple(row) for row in components)
        n = chart.dim
        if len(self.components) != n or any(len(r) != n for r in self.components):
            raise ConstraintError("components must form a dim x dim matrix")
        for row in self.components:
            for e in row:
                bad = [v for v in free_vars(e) if v >= n]
                if bad:
                    raise ConstraintError(
                        f"component uses variable index {max(bad)}, outside the chart"
                    )
        self.metric = metric
        if metric is not None:
            if metric.dim != n:
                raise ConstraintError("metric and tensor dimensions differ")
            defect = self_adjoint_defect(metric, self, chart.center())
            if defect > tol:
                raise ConstraintError(
                    f"tensor is not self-adjoint at the chart center: defect {defect:.3e}"
                )

    @property
    def dim(self) -> int:
        return self.chart.dim

    @staticmethod
    def diagonal(chart: Chart, diag_entries, metric: MetricField | None = None) -> "SymTensorField":
        n = chart.dim
        diag_entries = tuple(diag_entries)
        if len(diag_entries) != n:
            raise ConstraintError("need one diagonal entry per dimension")
        comp = [[diag_entries[i] if i == j else ZERO for j in range(n)] for i in range(n)]
        return SymTensorField(chart, comp, metric)

    def matrix(self, p, cache: dict | None = None) -> np.ndarray:
        return eval_matrix(self.components, p, {} if cache is None else cache)


def self_adjoint_defect(g: MetricField, phi: SymTensorField, p, cache: dict | None = None) -> float:
    """Relative asymmetry of g Phi at p; zero iff Phi is g-self-adjoint there."""
    if cache is None:
        cache = {}
    G, _ = metric_at(g, p, cache)
    P = eval_matrix(phi.components, p, cache)
    S = G @ P
    return float(np.linalg.norm(S - S.T) / (1.0 + np.linalg.norm(S)))


# --- Codazzi residual ---------------------------------------------------------


def _codazzi_pair_exprs(g: MetricField, phi: SymTensorField):
    """Components of (nabla_i Phi)e_j - (nabla_j Phi)e_i for i < j, cached."""
    cache = getattr(g, "_codazzi_cache", None)
    if cache is None:
        cache = {}
        g._codazzi_cache = cache
    hit = cache.get(id(phi))
    if hit is not None:
        return hit[0]
    n = g.dim
    gamma = g.christoffel_entries()
    comp = phi.components

    def nabla(i, j, k):
        # (nabla_i Phi)^k_j = d_i Phi^k_j + Gamma^k_il Phi^l_j - Phi^k_l Gamma^l_ij
        acc = diff(comp[k][j], i)
        for l in range(n):
            acc = add(acc, mul(gamma[k][i][l], comp[l][j]))
            acc = sub(acc, mul(comp[k][l], gamma[l][i][j]))
        return acc

    pairs = []
    for i in range(n):
        for j in range(i + 1, n):
            vec = tuple(sub(nabla(i, j, k), nabla(j, i, k)) for k in range(n))
            pairs.append((i, j, vec))
    pairs = tuple(pairs)
    cache[id(phi)] = (pairs, phi)
    return pairs


def codazzi_residual(g: MetricField, phi: SymTensorField, p, tol: float = 1e-8) -> float:
    """Max over coordinate pairs of the antisymmetry defect of nabla Phi at p,
    measured in the metric norm and normalized by the coordinate norms."""
    cache: dict = {}
    defect = self_adjoint_defect(g, phi, p, cache)
    if defect > tol:
        raise ConstraintError(
            f"tensor is not self-adjoint at {tuple(p)}: defect {defect:.3e}"
        )
    G, _ = metric_at(g, p, cache)
    norms = np.sqrt(np.maximum(np.diag(G), 0.0))
    worst = 0.0
    for i, j, vec in _codazzi_pair_exprs(g, phi):
        v = eval_vector(vec, p, cache)
        val = float(np.sqrt(max(v @ G @ v, 0.0)))
        worst = max(worst, val / max(norms[i] * norms[j], 1e-300))
    return worst


# --- pointwise eigenstructure ---------------------------------------------------


@dataclass
class EigenPair:
    """Two eigenvalue clusters of a g-self-adjoint operator at one point.

    The bases are g-orthonormal. lam is the cluster whose eigenspace carries
    the direction with the largest component along the lowest-index
    coordinate, which keeps the labeling stable across nearby points.
    """

    lam: float
    mu: float
    basis_lambda: tuple
    basis_mu: tuple
    gap: float
    invariance_residual: float

    @property
    def rank_lambda(self) -> int:
        return len(self.basis_lambda)

    @property
    def rank_mu(self) -> int:
        return len(self.basis_mu)


def eigen_two(g: MetricField, phi: SymTensorField, p, gap_min: float = GAP_MIN,
              tol: float = 1e-8) -> EigenPair:
    """Eigenvalues of Phi at p, required to split into exactly two clusters
    separated by at least gap_min."""
    cache: dict = {}
    defect = self_adjoint_defect(g, phi, p, cache)
    if defect > tol:
        raise ConstraintError(
            f"tensor is not self-adjoint at {tuple(p)}: defect {defect:.3e}"
        )
    G, _ = metric_at(g, p, cache)
    P = eval_matrix(phi.components, p, cache)
    S = G @ P
    S = 0.5 * (S + S.T)
    w, V = scipy.linalg.eigh(S, G)
    n = len(w)
    if n < 2 or w[-1] - w[0] < gap_min:
        raise CoalescenceError(
            f"eigenvalues coalesce at {tuple(p)}: spread {w[-1] - w[0]:.3e}"
        )
    k = int(np.argmax(np.diff(w))) + 1
    gap = float(w[k] - w[k - 1])
    spread_low = float(w[k - 1] - w[0])
    spread_high = float(w[-1] - w[k])
    if gap < gap_min or max(spread_low, spread_high) >= gap_min:
        raise CoalescenceError(
            f"eigenvalues do not form two clusters at {tuple(p)}: "
            f"gap {gap:.3e}, cluster spreads {spread_low:.3e}/{spread_high:.3e}"
        )
    low_val = float(np.mean(w[:k]))
    high_val = float(np.mean(w[k:]))
    # label lambda by weight of the lowest-index coordinate in each eigenspace
    score_low = float(np.sum(V[0, :k] ** 2))
    score_high = float(np.sum(V[0, k:] ** 2))
    if score_high > score_low:
        lam_val, mu_val = high_val, low_val
        lam_cols, mu_cols = range(k, n), range(k)
    else:
        lam_val, mu_val = low_val, high_val
        lam_cols, mu_cols = range(k), range(k, n)
    basis_lambda = tuple(V[:, c].copy() for c in lam_cols)
    basis_mu = tuple(V[:, c].copy() for c in mu_cols)
    scale = 1.0 + float(np.max(np.abs(w)))
    inv = 0.0
    for val, basis in ((lam_val, basis_lambda), (mu_val, basis_mu)):
        for v in basis:
            r = P @ v - val * v
            inv = max(inv, float(np.sqrt(max(r @ G @ r, 0.0))) / scale)
    return EigenPair(
        lam=lam_val,
        mu=mu_val,
        basis_lambda=basis_lambda,
        basis_mu=basis_mu,
        gap=gap,
        invariance_residual=inv,
    )


# --- closed-form eigen fields ---------------------------------------------------


class _EigenModel:
    """Eigenvalue fields, derivative fields and the eigen-net of (g, Phi),
    anchored at one sample point.

    With two eigenvalues of constant ranks p and q the trace invariants
    t1 = tr Phi and t2 = tr Phi^2 determine both eigenvalue fields in closed
    form up to a global sign, which the anchor point fixes. The eigen-net
    frame is read off the spectral projector (Phi - mu I)/(lambda - mu),
    taking the columns that pivoted QR selects at the anchor.
    """

    def __init__(self, g: MetricField, phi: SymTensorField, p0, gap_min: float,
                 tol: float):
        self.g = g
        self.phi = phi
        self.anchor = tuple(float(x) for x in p0)
        pair = eigen_two(g, phi, self.anchor, gap_min=gap_min, tol=tol)
        self.pair0 = pair
        n = g.dim
        pr, qr = pair.rank_lambda, pair.rank_mu
        self.rank_lambda, self.rank_mu = pr, qr

        comp = phi.components
        t1 = ZERO
        for i in range(n):
            t1 = add(t1, comp[i][i])
        t2 = ZERO
        for i in range(n):
            for j in range(n):
                t2 = add(t2, mul(comp[i][j], comp[j][i]))
        disc = mul(const(float(pr * qr)), sub(mul(const(float(n)), t2), mul(t1, t1)))
        root = powc(disc, 0.5)
        best = None
        for s in (1.0, -1.0):
            lam_e = div(add(mul(const(float(pr)), t1), mul(const(s), root)),
                        const(float(pr * n)))
            mu_e = div(sub(mul(const(float(qr)), t1), mul(const(s), root)),
                       const(float(qr * n)))
            err = abs(evaluate(lam_e, self.anchor) - pair.lam) + abs(
                evaluate(mu_e, self.anchor) - pair.mu
            )
            if best is None or err < best[0]:
                best = (err, lam_e, mu_e)
        scale = 1.0 + abs(pair.lam) + abs(pair.mu)
        if best[0] > 1e-6 * scale:
            raise InconsistencyError(
                "closed-form eigenvalue fields disagree with the pointwise "
                f"decomposition at {self.anchor}: error {best[0]:.3e}"
            )
        self.lam_expr, self.mu_expr = best[1], best[2]
        self.dlam = tuple(diff(self.lam_expr, i) for i in range(n))
        self.dmu = tuple(diff(self.mu_expr, i) for i in range(n))
        self.alpha = mul(const(0.5), add(self.lam_expr, self.mu_expr))
        self.beta = div(sub(self.mu_expr, self.lam_expr),
                        add(self.mu_expr, self.lam_expr))
        self.dalpha = tuple(diff(self.alpha, i) for i in range(n))
        self.dbeta = tuple(diff(self.beta, i) for i in range(n))

        gap_e = sub(self.lam_expr, self.mu_expr)

        def projector_cols(shift: Expr, rank: int):
            mat = [
                [
                    div(sub(comp[i][j], shift) if i == j else comp[i][j], gap_e)
                    for j in range(n)
                ]
                for i in range(n)
            ]
            vals = eval_matrix(mat, self.anchor, {})
            _, _, piv = scipy.linalg.qr(vals, pivoting=True)
            cols = sorted(int(c) for c in piv[:rank])
            return [tuple(mat[i][c] for i in range(n)) for c in cols]

        lam_frame = projector_cols(self.mu_expr, pr)
        # the mu projector is (Phi - lam I)/(mu - lam); reuse gap_e with a sign
        mu_mat_cols = projector_cols(self.lam_expr, qr)
        mu_frame = [tuple(mul(const(-1.0), e) for e in col) for col in mu_mat_cols]
        blocks = (tuple(range(pr)), tuple(range(pr, n)))
        self.net = OrthogonalNet(g.chart, lam_frame + mu_frame, blocks)
        self.sf_lam = _span_fields(g, self.net, self.net.blocks[0])
        self.sf_mu = _span_fields(g, self.net, self.net.blocks[1])


@dataclass
class CriteriaRecord:
    """Identity residuals of one point, together with the eigenvalues there.

    conformal_product is None where lambda + mu is too small to divide by.
    """

    lam: float
    mu: float
    mean_curvature: float
    conformal_product: float | None
    mu_spherical: float
    lambda_spherical: float
    eta_two_path: float
    zeta_two_path: float

    def to_dict(self) -> dict:
        return {
            "lam": self.lam,
            "mu": self.mu,
            "mean_curvature": self.mean_curvature,
            "conformal_product": self.conformal_product,
            "mu_spherical": self.mu_spherical,
            "lambda_spherical": self.lambda_spherical,
            "eta_two_path": self.eta_two_path,
            "zeta_two_path": self.zeta_two_path,
        }


def _aligned_pair(model: _EigenModel, p, gap_min: float, tol: float) -> EigenPair:
    """eigen_two at p with the labeling matched to the closed-form fields."""
    pair = eigen_two(model.g, model.phi, p, gap_min=gap_min, tol=tol)
    lam_val = evaluate(model.lam_expr, p)
    if abs(pair.lam - lam_val) > abs(pair.mu - lam_val):
        pair = EigenPair(
            lam=pair.mu,
            mu=pair.lam,
            basis_lambda=pair.basis_mu,
            basis_mu=pair.basis_lambda,
            gap=pair.gap,
            invariance_residual=pair.invariance_residual,
        )
    if pair.rank_lambda != model.rank_lambda:
        raise CoalescenceError(
            f"eigenvalue ranks change at {tuple(p)}: "
            f"{pair.rank_lambda} vs {model.rank_lambda} at the anchor"
        )
    return pair


def _criteria_at(model: _EigenModel, p, gap_min: float, tol: float):
    """(CriteriaRecord, EigenPair, shared eval cache) at one point."""
    g, phi = model.g, model.phi
    pair = _aligned_pair(model, p, gap_min, tol)
    lam, mu = pair.lam, pair.mu
    cache: dict = {}
    G, Ginv = metric_at(g, p, cache)
    n = g.dim

    def gn(v):
        return float(np.sqrt(max(v @ G @ v, 0.0)))

    dlam_v = np.array([evaluate(d, p, cache) for d in model.dlam])
    dmu_v = np.array([evaluate(d, p, cache) for d in model.dmu])
    P = eval_matrix(phi.components, p, cache)
    eta_v = eval_vector(model.sf_lam.H, p, cache)
    zeta_v = eval_vector(model.sf_mu.H, p, cache)

    # mean curvature identity: (lam I - Phi) eta = (grad lam) on the mu side
    grad_lam = Ginv @ dlam_v
    lhs = (lam * np.eye(n) - P) @ eta_v
    rhs = np.zeros(n)
    for Y in pair.basis_mu:
        rhs += float(grad_lam @ G @ Y) * Y
    mcn = gn(lhs - rhs) / (1.0 + gn(lhs) + gn(rhs))

    cp_ok = abs(lam + mu) > gap_min * (1.0 + abs(lam) + abs(mu))
    if cp_ok:
        dalpha_v = np.array([evaluate(d, p, cache) for d in model.dalpha])
        dbeta_v = np.array([evaluate(d, p, cache) for d in model.dbeta])
        alpha = 0.5 * (lam + mu)
        beta = (mu - lam) / (mu + lam)

    cp_max = 0.0
    m1_max = m2_max = s1_max = s2_max = 0.0
    inv_gap2 = 1.0 / (lam - mu) ** 2
    for X in pair.basis_lambda:
        Xc = tuple(const(float(x)) for x in X)
        Xlam = float(X @ dlam_v)
        Xmu = float(X @ dmu_v)
        cov_eta = cov_deriv(g, Xc, model.sf_lam.H, p, cache)
        for Y in pair.basis_mu:
            Yc = tuple(const(float(y)) for y in Y)
            Ylam = float(Y @ dlam_v)
            Ymu = float(Y @ dmu_v)
            hess_lam = hessian_lc(g, model.lam_expr, Xc, Yc, p, cache)
            hess_mu = hessian_lc(g, model.mu_expr, Xc, Yc, p, cache)

            u1 = 2.0 * Xmu * Ymu
            u2 = -Xmu * Ylam
            u3 = (lam - mu) * hess_mu
            m1_max = max(
                m1_max, abs(u1 + u2 + u3) / (1.0 + abs(u1) + abs(u2) + abs(u3))
            )

            v1 = 2.0 * Xlam * Ylam
            v2 = -Xmu * Ylam
            v3 = -(lam - mu) * hess_lam
            m2_max = max(
                m2_max, abs(v1 + v2 + v3) / (1.0 + abs(v1) + abs(v2) + abs(v3))
            )

            d1 = inner(g, cov_eta, Y, p, cache)
            f1 = -inv_gap2 * (v1 + v2 + v3)
            s1_max = max(s1_max, abs(d1 - f1) / (1.0 + abs(d1) + abs(f1)))

            cov_zeta = cov_deriv(g, Yc, model.sf_mu.H, p, cache)
            d2 = inner(g, cov_zeta, X, p, cache)
            f2 = -inv_gap2 * (u1 + u2 + u3)
            s2_max = max(s2_max, abs(d2 - f2) / (1.0 + abs(d2) + abs(f2)))

            if cp_ok:
                Xa = float(X @ dalpha_v)
                Ya = float(Y @ dalpha_v)
                Xb = float(X @ dbeta_v)
                Yb = float(Y @ dbeta_v)
                hess_a = hessian_lc(g, model.alpha, Xc, Yc, p, cache)
                c1 = 2.0 * beta * Xa * Ya
                c2 = alpha * Xa * Yb
                c3 = alpha * Ya * Xb
                c4 = -alpha * beta * hess_a
                cp_max = max(
                    cp_max,
                    abs(c1 + c2 + c3 + c4)
                    / (1.0 + abs(c1) + abs(c2) + abs(c3) + abs(c4)),
                )

    record = CriteriaRecord(
        lam=lam,
        mu=mu,
        mean_curvature=mcn,
        conformal_product=cp_max if cp_ok else None,
        mu_spherical=m1_max,
        lambda_spherical=m2_max,
        eta_two_path=s1_max,
        zeta_two_path=s2_max,
    )
    return record, pair, cache


def criteria_residuals(g: MetricField, phi: SymTensorField, p,
                       gap_min: float = GAP_MIN, tol: float = 1e-8) -> CriteriaRecord:
    """Evaluate all eigenvalue identities at one point, anchoring the
    closed-form fields at that same point."""
    p = tuple(float(x) for x in p)
    model = _EigenModel(g, phi, p, gap_min, tol)
    record, _, _ = _criteria_at(model, p, gap_min, tol)
    return record


# --- classification -------------------------------------------------------------


@dataclass
class CodazziReport:
    """Grid-level summary of a two-eigenvalue Codazzi analysis."""

    codazzi_residual: float
    rank_lambda: int
    rank_mu: int
    residuals: dict
    flags: dict
    eigen_samples: list
    net_report: NetReport
    relation_case: str | None
    constants: tuple | None
    warping_ode_residual: float | None
    warping_axis: int | None
    warping_samples: list | None
    base_point: tuple | None
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "codazzi_residual": self.codazzi_residual,
            "rank_lambda": self.rank_lambda,
            "rank_mu": self.rank_mu,
            "residuals": dict(self.residuals),
            "flags": {k: f.to_dict() for k, f in self.flags.items()},
            "eigen_samples": [dict(s) for s in self.eigen_samples],
            "net_flags": {
                k: f.to_dict() for k, f in self.net_report.flags.items()
            },
            "relation_case": self.relation_case,
            "constants": list(self.constants) if self.constants else None,
            "warping_ode_residual": self.warping_ode_residual,
            "warping_axis": self.warping_axis,
            "warping_samples": (
                [dict(s) for s in self.warping_samples]
                if self.warping_samples is not None
                else None
            ),
            "base_point": list(self.base_point) if self.base_point else None,
            "n_samples": self.n_samples,
        }


def _h_of_mu(h: Expr, mu_expr: Expr) -> Expr:
    fv = free_vars(h)
    if len(fv) > 1:
        raise ConstraintError("h must be a function of a single variable")
    return substitute(h, {i: mu_expr for i in fv})


def classify_codazzi(
    g: MetricField,
    phi: SymTensorField,
    h: Expr | None = None,
    plan: SamplePlan | None = None,
    tol: float = 1e-8,
    gap_min: float = GAP_MIN,
) -> CodazziReport:
    """Verify the Codazzi equation on the sample plan, extract the
    eigenstructure, score every identity, classify the eigen-net, and, when a
    one-variable relation lambda = h(mu) is supplied, decide which canonical
    construction the pair belongs to.

    Raises NotCodazziError when the defining equation fails, CoalescenceError
    when the two-cluster eigenstructure degenerates, and InconsistencyError
    when numerics contradict something the two-eigenvalue theory forces (a
    rank >= 2 eigenvalue varying along its own eigenbundle, or a detected
    case whose net flags do not match).
    """
    plan = plan or SamplePlan()
    pts = [tuple(float(x) for x in p) for p in sample_points(g.chart, plan)]

    worst = 0.0
    worst_at = pts[0]
    for p in pts:
        r = codazzi_residual(g, phi, p, tol=tol)
        if r > worst:
            worst, worst_at = r, p
    if worst > tol:
        err = NotCodazziError(
            f"Codazzi residual {worst:.3e} exceeds tol {tol:.1e} at {worst_at}"
        )
        err.residual = worst
        raise err

    model = _EigenModel(g, phi, pts[0], gap_min, tol)
    n = g.dim
    h_expr = _h_of_mu(h, model.mu_expr) if h is not None else None

    maxes = {
        "mean_curvature": 0.0,
        "conformal_product": 0.0,
        "mu_spherical": 0.0,
        "lambda_spherical": 0.0,
        "eta_two_path": 0.0,
        "zeta_two_path": 0.0,
    }
    cp_evaluated = False
    eigen_samples = []
    lam_vals = []
    mu_vals = []
    lam_along_max = 0.0
    mu_along_max = 0.0
    rel_max = 0.0
    ode_max = 0.0
    axis_candidates: set | None = set(range(n))

    for p in pts:
        record, pair, cache = _criteria_at(model, p, gap_min, tol)
        G, Ginv = metric_at(g, p, cache)

        def gn(v):
            return float(np.sqrt(max(v @ G @ v, 0.0)))

        eigen_samples.append({"point": list(p), "lam": record.lam, "mu": record.mu})
        lam_vals.append(record.lam)
        mu_vals.append(record.mu)
        for key in ("mean_curvature", "mu_spherical", "lambda_spherical",
                    "eta_two_path", "zeta_two_path"):
            maxes[key] = max(maxes[key], getattr(record, key))
        if record.conformal_product is not None:
            cp_evaluated = True
            maxes["conformal_product"] = max(
                maxes["conformal_product"], record.conformal_product
            )

        # constancy of each eigenvalue along its own eigenbundle
        dlam_v = np.array([evaluate(d, p, cache) for d in model.dlam])
        dmu_v = np.array([evaluate(d, p, cache) for d in model.dmu])
        grad_lam = Ginv @ dlam_v
        grad_mu = Ginv @ dmu_v
        along_lam = np.zeros(n)
        for X in pair.basis_lambda:
            along_lam += float(grad_lam @ G @ X) * X
        along_mu = np.zeros(n)
        for Y in pair.basis_mu:
            along_mu += float(grad_mu @ G @ Y) * Y
        lam_along_max = max(lam_along_max, gn(along_lam) / (1.0 + gn(grad_lam)))
        mu_along_max = max(mu_along_max, gn(along_mu) / (1.0 + gn(grad_mu)))

        if h_expr is not None:
            hval = evaluate(h_expr, p, cache)
            rel_max = max(rel_max, abs(record.lam - hval) / (1.0 + abs(record.lam)))
            if model.rank_lambda == 1:
                # differentiated warping relation along the rank-one direction:
                # X(mu) = (h(mu) - mu) X(log sigma) with X(log sigma) = -<zeta, X>
                xhat = pair.basis_lambda[0]
                zeta_v = eval_vector(model.sf_mu.H, p, cache)
                mu_prime = float(xhat @ dmu_v)
                logsig_prime = -inner(g, zeta_v, xhat, p, cache)
                ode_max = max(
                    ode_max, abs(mu_prime - (hval - record.mu) * logsig_prime)
                )
                if axis_candidates:
                    comp = np.abs(xhat)
                    a = int(np.argmax(comp))
                    others = max(
                        (comp[i] for i in range(n) if i != a), default=0.0
                    )
                    good = {a} if others <= _AXIS_TOL * comp[a] else set()
                    axis_candidates &= good

    if model.rank_lambda >= 2 and lam_along_max > tol:
        raise InconsistencyError(
            "a rank >= 2 eigenvalue must be constant along its eigenbundle, "
            f"but the lambda field varies by {lam_along_max:.3e}"
        )
    if model.rank_mu >= 2 and mu_along_max > tol:
        raise InconsistencyError(
            "a rank >= 2 eigenvalue must be constant along its eigenbundle, "
            f"but the mu field varies by {mu_along_max:.3e}"
        )

    residuals: dict = dict(maxes)
    flags = {
        "conformal_product": Flag(
            _status(maxes["conformal_product"], tol) if cp_evaluated else "not_applicable",
            maxes["conformal_product"],
        ),
        "spherical_eigenbundles": Flag(
            _status(max(maxes["mu_spherical"], maxes["lambda_spherical"]), tol),
            max(maxes["mu_spherical"], maxes["lambda_spherical"]),
        ),
    }
    if not cp_evaluated:
        residuals["conformal_product"] = None

    net_report = classify_net(g, model.net, plan, tol)

    relation_case = None
    constants = None
    ode_out = None
    axis_out = None
    warping_samples = None
    base_point = None
    if h is not None:
        lam0, mu0 = lam_vals[0], mu_vals[0]
        lam_spread = max(abs(v - lam0) for v in lam_vals)
        mu_spread = max(abs(v - mu0) for v in mu_vals)
        hyp_ok = rel_max <= tol and mu_along_max <= tol
        if not hyp_ok:
            relation_case = "outside_hypotheses"
        elif (
            lam_spread <= tol * (1.0 + abs(lam0))
            and mu_spread <= tol * (1.0 + abs(mu0))
        ):
            relation_case = "constant_product"
            constants = (float(np.mean(lam_vals)), float(np.mean(mu_vals)))
            geod = max(
                max(gm.geodesy for gm in geoms) for geoms in net_report.table
            )
            if geod > tol:
                raise InconsistencyError(
                    "constant eigenvalues force a metric product, but a block "
                    f"has geodesy residual {geod:.3e}"
                )
        elif model.rank_lambda == 1:
            relation_case = "warped_rank_one"
            if net_report.flags["WP"].status == "fail":
                raise InconsistencyError(
                    "a rank-one relation case must produce a warped product "
                    "net, but the WP flag fails with residual "
                    f"{net_report.flags['WP'].residual:.3e}"
                )
            ode_out = ode_max
            if axis_candidates:
                axis_out = min(axis_candidates)
                warping_samples, base_point = _warping_profile(
                    g, model, axis_out, plan, pts
                )
        else:
            relation_case = "outside_hypotheses"

    return CodazziReport(
        codazzi_residual=worst,
        rank_lambda=model.rank_lambda,
        rank_mu=model.rank_mu,
        residuals=residuals,
        flags=flags,
        eigen_samples=eigen_samples,
        net_report=net_report,
        relation_case=relation_case,
        constants=constants,
        warping_ode_residual=ode_out,
        warping_axis=axis_out,
        warping_samples=warping_samples,
        base_point=base_point,
        n_samples=len(pts),
    )


def _warping_profile(g: MetricField, model: _EigenModel, axis: int,
                     plan: SamplePlan, pts):
    """Sample (t, mu, relative sigma) along the rank-one coordinate axis.

    Only meaningful when the chart is adapted: the metric must be block
    diagonal between the axis and the remaining coordinates. The warping is
    recovered from determinant ratios of the complementary block, so it is
    normalized to 1 at the chart center.
    """
    n = g.dim
    others = [i for i in range(n) if i != axis]
    for p in pts:
        G, _ = metric_at(g, p, {})
        for j in others:
            off = abs(G[axis, j]) / max(
                np.sqrt(max(G[axis, axis] * G[j, j], 0.0)), 1e-300
            )
            if off > _AXIS_TOL:
                return None, None
    sub_det = det_expr([[g.entries[i][j] for j in others] for i in others])
    base = tuple(g.chart.center())
    base_det = evaluate(sub_det, base)
    ts = grid_axes(g.chart, plan.grid, plan.margin)[axis]
    power = 1.0 / (2.0 * model.rank_mu)
    out = []
    for t in ts:
        pt = tuple(t if i == axis else base[i] for i in range(n))
        ratio = (evaluate(sub_det, pt) / base_det) ** power
        out.append(
            {
                "t": float(t),
                "mu_tilde": evaluate(model.mu_expr, pt),
                "sigma_ratio": float(ratio),
            }
        )
    return out, base


# --- canonical constructions -----------------------------------------------------


@dataclass
class CodazziCandidate:
    """A built (metric, tensor) pair plus its verified Codazzi residual."""

    metric: MetricField
    tensor: SymTensorField
    codazzi_residual: float


_COARSE_PLAN = SamplePlan(grid=3, margin=0.1, random=4, seed=7)


def _coarse_codazzi(g: MetricField, phi: SymTensorField) -> float:
    return max(
        codazzi_residual(g, phi, tuple(float(x) for x in p))
        for p in sample_points(g.chart, _COARSE_PLAN)
    )


def build_codazzi_candidate(kind: str, **params) -> CodazziCandidate:
    """Build one of the two canonical (metric, tensor) pairs.

    kind "conformal_product": params factors=(FactorSpec, FactorSpec),
    phi0, phi1 (each an Expr in the matching factor's local coordinates).
    The metric is (phi0 + phi1)^{-2} times the product metric and the tensor
    is phi1 on the first block and -phi0 on the second, so each eigenvalue is
    constant along its own eigenbundle by construction.

    kind "warped_rank_one": params base (1-dim Chart), fiber (FactorSpec),
    h (Expr in one variable), sigma, mu (Exprs in the base coordinate). The
    metric is the warped product dt^2 + sigma(t)^2 g_fiber and the tensor is
    h(mu(t)) on the base direction and mu(t) on the fiber block. The supplied
    triple must satisfy the differentiated warping relation
    mu' = (h(mu) - mu) (log sigma)', otherwise it is rejected.

    The Codazzi residual is verified on a coarse grid and attached; it is
    reported, never assumed.
    """
    if kind == "conformal_product":
        factors = params.pop("factors")
        phi0 = params.pop("phi0")
        phi1 = params.pop("phi1")
        tol = params.pop("tol", 1e-8)
        if params:
            raise ConstraintError(f"unexpected parameters {sorted(params)}")
        factors = tuple(factors)
        if len(factors) != 2:
            raise ConstraintError("conformal_product takes exactly two factors")
        spec = ProductSpec("product", factors, twists=(ONE, ONE))
        chart = spec.chart
        d0 = factors[0].chart.dim
        bad0 = [v for v in free_vars(phi0) if v >= d0]
        bad1 = [v for v in free_vars(phi1) if v >= factors[1].chart.dim]
        if bad0 or bad1:
            raise ConstraintError(
                "phi0 and phi1 must use only their own factor's coordinates"
            )
        phi1_joint = substitute(phi1, {j: var(d0 + j) for j in free_vars(phi1)})
        recip = add(phi0, phi1_joint)
        _check_positive(recip, chart, "reciprocal conformal factor")
        g = conformal_scale(build_metric(spec), div(ONE, recip))
        diag = [phi1_joint] * d0 + [mul(const(-1.0), phi0)] * factors[1].chart.dim
        tensor = SymTensorField.diagonal(chart, diag, metric=g)
        return CodazziCandidate(g, tensor, _coarse_codazzi(g, tensor))

    if kind == "warped_rank_one":
        base = params.pop("base")
        fiber = params.pop("fiber")
        h = params.pop("h")
        sigma = params.pop("sigma")
        mu = params.pop("mu")
        tol = params.pop("tol", 1e-8)
        if params:
            raise ConstraintError(f"unexpected parameters {sorted(params)}")
        if base.dim != 1:
            raise ConstraintError("the base of a warped_rank_one pair is an interval")
        for label, e in (("sigma", sigma), ("mu", mu)):
            bad = [v for v in free_vars(e) if v >= 1]
            if bad:
                raise ConstraintError(f"{label} must depend only on the base coordinate")
        h_mu = _h_of_mu(h, mu)
        # differentiated warping relation on a base grid, rejected when violated
        dmu = diff(mu, 0)
        dsig = diff(sigma, 0)
        worst = 0.0
        for t in grid_axes(base, 9)[0]:
            pt = (float(t),)
            lhs = evaluate(dmu, pt)
            rhs = (evaluate(h_mu, pt) - evaluate(mu, pt)) * (
                evaluate(dsig, pt) / evaluate(sigma, pt)
            )
            worst = max(worst, abs(lhs - rhs))
        if worst > tol:
            raise ConstraintError(
                f"(h, sigma, mu) violate the warping relation: residual {worst:.3e}"
            )
        base_factor = FactorSpec(base, ((ONE,),))
        spec = ProductSpec("warped", (base_factor, fiber), twists=(ONE, sigma))
        g = build_metric(spec)
        diag = [h_mu] + [mu] * fiber.chart.dim
        tensor = SymTensorField.diagonal(spec.chart, diag, metric=g)
        return CodazziCandidate(g, tensor, _coarse_codazzi(g, tensor))

    raise ConstraintError(
        f"unknown kind {kind!r}; expected 'conformal_product' or 'warped_rank_one'"
    )
