"""Chart-level analysis of structured Riemannian metrics.

The package answers three families of questions about a metric given by
closed-form components on a coordinate box:

* does a given orthogonal splitting of the tangent bundle make the metric a
  product, warped product, quasi-warped product, twisted product, or a
  conformal rescaling of one of those (``nets.classify_net``);
* can the factors, twists, and conformal scale actually be reconstructed
  from point evaluations alone (``product_metrics.factorize_cwp``);
* when a symmetric tensor field satisfies the Codazzi equation and has two
  eigenvalues, what product structure do the eigenbundles force
  (``codazzi.classify_codazzi``).

Everything reduces to residuals of closed-form identities sampled over the
chart, so every verdict comes with the number that earned it.
"""

from .chart_calculus import (
    MetricField,
    christoffel,
    cov_deriv,
    grad_field,
    hessian_lc,
    inner,
    lc_axiom_residuals,
    lie_bracket,
    metric_at,
    norm,
)
from .codazzi import (
    CodazziReport,
    SymTensorField,
    build_codazzi_candidate,
    classify_codazzi,
    codazzi_residual,
    criteria_residuals,
    eigen_two,
)
from .errors import (
    CoalescenceError,
    ConditionNumberWarning,
    ConstraintError,
    DegenerateFrameError,
    EvalDomainError,
    InconsistencyError,
    ManifestError,
    NotApplicableError,
    NotCodazziError,
    NotSPDError,
    OrthonetError,
    ParseError,
    PathInconsistencyError,
)
from .nets import NetReport, OrthogonalNet, classify_net, distribution_geometry
from .product_metrics import (
    FactorSpec,
    Factorization,
    ProductSpec,
    build_metric,
    conformal_scale,
    factorize_cwp,
    separability_residual,
    spherical_factor_check,
    verify_connection_identity,
)
from .sampling import SamplePlan, sample_points
from .scalar_fields import (
    Chart,
    Expr,
    diff,
    eval_jet2,
    evaluate,
    fd_oracle,
    format_expr,
    free_vars,
    parse_expr,
    substitute,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Chart",
    "Expr",
    "parse_expr",
    "format_expr",
    "evaluate",
    "diff",
    "free_vars",
    "substitute",
    "eval_jet2",
    "fd_oracle",
    "MetricField",
    "metric_at",
    "christoffel",
    "cov_deriv",
    "grad_field",
    "hessian_lc",
    "lie_bracket",
    "inner",
    "norm",
    "lc_axiom_residuals",
    "SamplePlan",
    "sample_points",
    "OrthogonalNet",
    "NetReport",
    "classify_net",
    "distribution_geometry",
    "FactorSpec",
    "ProductSpec",
    "build_metric",
    "conformal_scale",
    "verify_connection_identity",
    "separability_residual",
    "factorize_cwp",
    "Factorization",
    "spherical_factor_check",
    "SymTensorField",
    "codazzi_residual",
    "eigen_two",
    "criteria_residuals",
    "classify_codazzi",
    "CodazziReport",
    "build_codazzi_candidate",
    "OrthonetError",
    "ParseError",
    "EvalDomainError",
    "NotSPDError",
    "DegenerateFrameError",
    "CoalescenceError",
    "NotApplicableError",
    "ConstraintError",
    "InconsistencyError",
    "PathInconsistencyError",
    "NotCodazziError",
    "ManifestError",
    "ConditionNumberWarning",
]
