"""End-to-end acceptance battery.

One test per guarantee, each printable as a single pass/fail line under
pytest -v. Tolerances are pinned here on purpose: loosening one is an API
break, not a test tweak.
"""

import time

import numpy as np
import pytest

from conftest import (
    random_expr,
    random_point,
    random_positive_scale,
    random_twisted_spec,
)
from orthonet.chart_calculus import lc_axiom_residuals
from orthonet.cli import emit, run
from orthonet.codazzi import classify_codazzi, eigen_two
from orthonet.fixtures import (
    conformal_product_pair,
    cqw_three,
    euclidean,
    exp_sum_conformal,
    polar,
    polar_cone,
    polar_spec,
    qw_three,
    sum_reciprocal,
    torus,
    twisted_flat,
    warped_three,
)
from orthonet.nets import OrthogonalNet, classify_net
from orthonet.product_metrics import (
    FactorSpec,
    ProductSpec,
    build_metric,
    conformal_scale,
    factorize_cwp,
    spherical_factor_check,
    verify_connection_identity,
)
from orthonet.sampling import SamplePlan, sample_points
from orthonet.scalar_fields import (
    Chart,
    ONE,
    const,
    eval_jet2,
    fd_oracle,
    parse_expr,
)

PLAN = SamplePlan()


def flag_pattern(g, blocks=None, tol=1e-8):
    net = OrthogonalNet.coordinate(g.chart, blocks)
    rep = classify_net(g, net, PLAN, tol)
    return {k: f.status for k, f in rep.flags.items()}, rep


def test_01_derivative_engine_fd_convergence():
    # central differences are second order: halving h divides the error by 4
    rng = np.random.default_rng(11)
    t0 = time.perf_counter()
    errors = {1e-3: 0.0, 5e-4: 0.0}
    for _ in range(200):
        dim = int(rng.integers(1, 4))
        chart = Chart.box([(0.0, 1.0)] * dim)
        e = random_expr(rng, dim)
        p = random_point(rng, chart, margin=0.1)
        jet = eval_jet2(e, p)
        for h in errors:
            grad, hess = fd_oracle(e, p, h)
            errors[h] += float(
                np.abs(grad - jet.grad).sum() + np.abs(hess - jet.hess).sum()
            )
    elapsed = time.perf_counter() - t0
    assert errors[5e-4] > 0.0
    ratio = errors[1e-3] / errors[5e-4]
    assert 3.5 <= ratio <= 4.5, f"shrink factor {ratio:.3f} outside [3.5, 4.5]"
    assert elapsed < 5.0, f"200 pairs took {elapsed:.2f}s"


def test_02_connection_axioms_on_fixture_metrics():
    metrics = [euclidean(2), polar(), torus()[0], exp_sum_conformal()]
    worst = 0.0
    for g in metrics:
        for p in sample_points(g.chart, PLAN):
            compat, torsion = lc_axiom_residuals(g, tuple(float(x) for x in p))
            worst = max(worst, compat, torsion)
    assert worst <= 1e-10, f"connection axiom residual {worst:.3e}"


def test_03_twisted_connection_identity():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(25):
        spec = random_twisted_spec(rng)
        chart = spec.chart
        for _ in range(20):
            X = tuple(const(float(v)) for v in rng.uniform(-1.0, 1.0, chart.dim))
            Y = tuple(const(float(v)) for v in rng.uniform(-1.0, 1.0, chart.dim))
            p = random_point(rng, chart, margin=0.1)
            worst = max(worst, verify_connection_identity(spec, X, Y, p))
    assert worst <= 1e-9, f"connection identity residual {worst:.3e}"


def test_04_classification_round_trip():
    f0 = FactorSpec(Chart.box([(0.0, 1.0)], names=("x0",)), ((ONE,),))
    f1 = FactorSpec(Chart.box([(0.0, 1.0)], names=("x1",)), ((ONE,),))
    flat = build_metric(ProductSpec("product", (f0, f1), twists=(ONE, ONE)))
    all_pass = {k: "pass" for k in ("TP", "WP", "QW", "CQW", "CQW0", "CWP", "CP")}

    expected = [
        (flat, all_pass),
        (polar(), all_pass),
        (warped_three(), dict(all_pass, CQW0="fail", CP="fail")),
        (qw_three(), dict(all_pass, WP="fail", CQW0="fail", CWP="fail", CP="fail")),
        (twisted_flat(), dict(all_pass, WP="fail", CWP="fail", CP="fail")),
    ]
    for g, want in expected:
        got, _ = flag_pattern(g)
        assert got == want, f"{got} != {want}"

    _, rep = flag_pattern(twisted_flat())
    assert rep.flags["CWP"].status == "fail"
    assert rep.flags["CWP"].residual > 1e-3


def test_05_conformal_invariance_of_cwp_and_cp():
    fixtures = [polar(), twisted_flat(), warped_three(), qw_three()]
    for g in fixtures:
        net = OrthogonalNet.coordinate(g.chart)
        base = classify_net(g, net, PLAN, 1e-8)
        rng = np.random.default_rng(17)
        for _ in range(10):
            phi = random_positive_scale(rng, g.chart)
            rep = classify_net(conformal_scale(g, phi), net, PLAN, 1e-8)
            for flag in ("CWP", "CP"):
                assert rep.flags[flag].status == base.flags[flag].status, (
                    flag,
                    rep.flags[flag].residual,
                )


def test_06_spherical_factor_criteria_agree():
    spec, phi_sum, phi_control = sum_reciprocal()
    pts = [tuple(float(x) for x in p) for p in sample_points(spec.chart, PLAN)]

    def worst_check(phi):
        hi = np.zeros(3)
        for p in pts:
            chk = spherical_factor_check(spec, phi, 1, p)
            hi = np.maximum(
                hi, [chk.residual_ii, chk.residual_iii, chk.residual_v]
            )
        return hi

    passing = worst_check(phi_sum)
    assert np.all(passing <= 1e-9), f"split-factor residuals {passing}"
    failing = worst_check(phi_control)
    assert np.all(failing > 1e-3), f"control residuals {failing}"


def test_07_factorization_round_trip():
    g = conformal_scale(
        build_metric(polar_spec()), parse_expr("exp(t + theta)", polar_spec().chart)
    )
    fac = factorize_cwp(g)
    assert fac.reconstruction_residual <= 1e-6, (
        f"reconstruction {fac.reconstruction_residual:.3e}"
    )
    assert fac.path_order_residual <= 1e-7, (
        f"path order {fac.path_order_residual:.3e}"
    )


def test_08_torus_codazzi_suite():
    g, phi = torus()
    rep = classify_codazzi(g, phi, h=const(1.0), plan=PLAN)
    assert rep.codazzi_residual <= 1e-10

    pair = eigen_two(g, phi, (np.pi / 3, 0.0))
    assert abs(pair.lam - 1.0) <= 1e-10
    assert abs(pair.mu - 0.2) <= 1e-10

    assert rep.residuals["conformal_product"] <= 1e-9
    assert rep.residuals["mean_curvature"] <= 1e-9

    assert rep.relation_case == "warped_rank_one"
    assert rep.warping_ode_residual <= 1e-9
    sig0 = 2.0 + np.cos(rep.base_point[rep.warping_axis])
    worst = max(
        abs(s["mu_tilde"] - (1.0 - 2.0 / (s["sigma_ratio"] * sig0)))
        for s in rep.warping_samples
    )
    assert worst <= 1e-9, f"recovered warping relation residual {worst:.3e}"


def test_09_two_path_identities():
    cases = [torus(), polar_cone()]
    cand = conformal_product_pair()
    cases.append((cand.metric, cand.tensor))
    for g, phi in cases:
        rep = classify_codazzi(g, phi, plan=PLAN)
        assert rep.residuals["eta_two_path"] <= 1e-9
        assert rep.residuals["zeta_two_path"] <= 1e-9


def test_10_base_mean_curvature_sum_on_three_blocks():
    g = cqw_three()
    assert g.dim == 3 and len(g.chart.blocks) == 3
    net = OrthogonalNet.coordinate(g.chart)
    rep = classify_net(g, net, PLAN, 1e-8)
    assert rep.h0_sum_residual <= 1e-9, f"h0 sum residual {rep.h0_sum_residual:.3e}"


def test_11_selftest_determinism():
    report1, code1 = run("selftest", None)
    report2, code2 = run("selftest", None)
    assert code1 == 0 and code2 == 0
    assert emit(report1, "json").encode() == emit(report2, "json").encode()
