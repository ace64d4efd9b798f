"""Orthogonal nets: flag classification, span geometry, invariances."""

import numpy as np
import pytest

from conftest import random_positive_scale
from orthonet import fixtures
from orthonet.chart_calculus import MetricField
from orthonet.errors import (
    ConstraintError,
    DegenerateFrameError,
    NotApplicableError,
)
from orthonet.nets import (
    NetReport,
    OrthogonalNet,
    classify_net,
    cwp_residual,
    distribution_geometry,
    project,
)
from orthonet.product_metrics import conformal_scale
from orthonet.sampling import SamplePlan
from orthonet.scalar_fields import Chart, ONE, ZERO, const, mul, parse_expr

PLAN = SamplePlan(grid=4, margin=0.1, random=6, seed=1)


def _statuses(report: NetReport) -> dict:
    return {k: f.status for k, f in report.flags.items()}


def _coordinate(g) -> OrthogonalNet:
    return OrthogonalNet.coordinate(g.chart)


def test_net_construction_validation():
    ch = Chart.box([(0.0, 1.0)] * 2, blocks=((0,), (1,)))
    frame = [(ONE, ZERO), (ZERO, ONE)]
    with pytest.raises(ConstraintError):
        OrthogonalNet(ch, frame, ((0,),))  # fewer than two blocks
    with pytest.raises(ConstraintError):
        OrthogonalNet(ch, frame, ((0,), (1, 1)))  # not a partition
    with pytest.raises(ConstraintError):
        OrthogonalNet(ch, frame, ((0, 1), ()))  # only block 0 may be empty
    net = OrthogonalNet(ch, frame, ((), (0, 1)))
    assert net.blocks[0] == ()


def test_flag_set_polar():
    rep = classify_net(fixtures.polar(), _coordinate(fixtures.polar()), PLAN)
    assert _statuses(rep) == {k: "pass" for k in ("TP", "WP", "QW", "CQW", "CQW0", "CWP", "CP")}


def test_flag_set_twisted_control():
    g = fixtures.twisted_flat()
    rep = classify_net(g, _coordinate(g), PLAN)
    st = _statuses(rep)
    assert st == {
        "TP": "pass",
        "WP": "fail",
        "QW": "pass",
        "CQW": "pass",
        "CQW0": "pass",
        "CWP": "fail",
        "CP": "fail",
    }
    # the twist is genuinely non-separable, far outside tolerance
    assert rep.flags["CWP"].residual > 1e-3


def test_flag_set_warped_three():
    g = fixtures.warped_three()
    rep = classify_net(g, _coordinate(g), PLAN)
    st = _statuses(rep)
    assert st == {
        "TP": "pass",
        "WP": "pass",
        "QW": "pass",
        "CQW": "pass",
        "CQW0": "fail",
        "CWP": "pass",
        "CP": "fail",
    }
    assert 0.4 < rep.flags["CQW0"].residual < 0.6


def test_flag_set_quasi_warped_three():
    g = fixtures.qw_three()
    rep = classify_net(g, _coordinate(g), PLAN)
    st = _statuses(rep)
    assert st["TP"] == "pass"
    assert st["QW"] == "pass"
    assert st["CQW"] == "pass"
    assert st["WP"] == "fail"
    assert st["CWP"] == "fail"
    assert st["CP"] == "fail"


def test_flag_set_conformally_flat_sum():
    g = fixtures.exp_sum_conformal()
    rep = classify_net(g, _coordinate(g), PLAN)
    st = _statuses(rep)
    assert st == {
        "TP": "pass",
        "WP": "fail",
        "QW": "fail",
        "CQW": "pass",
        "CQW0": "pass",
        "CWP": "pass",
        "CP": "pass",
    }


def test_three_block_mean_curvature_sum():
    # H of the base block equals the sum of the complements' normals
    g = fixtures.cqw_three()
    rep = classify_net(g, _coordinate(g), PLAN)
    assert rep.flags["CQW"].status == "pass"
    assert rep.h0_sum_residual <= 1e-9


def test_h0_sum_residual_small_on_all_fixtures():
    for g in (
        fixtures.polar(),
        fixtures.twisted_flat(),
        fixtures.warped_three(),
        fixtures.exp_sum_conformal(),
        fixtures.cqw_three(),
    ):
        rep = classify_net(g, _coordinate(g), PLAN)
        assert rep.h0_sum_residual <= 1e-9


def test_flags_invariant_under_frame_change_within_blocks():
    ch = Chart.box([(0.0, 1.0)] * 3, blocks=((0,), (1, 2)))
    rho2 = parse_expr("exp(2*x0)", ch)
    g = MetricField.diagonal(ch, [ONE, rho2, rho2])
    rep_coord = classify_net(g, OrthogonalNet.coordinate(ch), PLAN)
    skew = OrthogonalNet(
        ch,
        [
            (ONE, ZERO, ZERO),
            (ZERO, ONE, ONE),
            (ZERO, const(-0.5), ONE),
        ],
        ((0,), (1, 2)),
    )
    rep_skew = classify_net(g, skew, PLAN)
    assert _statuses(rep_coord) == _statuses(rep_skew)
    assert rep_coord.flags["WP"].status == "pass"


def test_flags_invariant_under_constant_scaling():
    g = fixtures.twisted_flat()
    scaled = MetricField(
        g.chart,
        [[mul(const(3.7), e) for e in row] for row in g.entries],
    )
    a = _statuses(classify_net(g, _coordinate(g), PLAN))
    b = _statuses(classify_net(scaled, _coordinate(scaled), PLAN))
    assert a == b


def test_cwp_cp_statuses_conformally_invariant_seeded():
    for g in (fixtures.polar(), fixtures.twisted_flat()):
        base = classify_net(g, _coordinate(g), PLAN)
        for seed in range(3):
            rng = np.random.default_rng(seed)
            phi = random_positive_scale(rng, g.chart)
            gs = conformal_scale(g, phi)
            rep = classify_net(gs, _coordinate(gs), PLAN)
            assert rep.flags["CWP"].status == base.flags["CWP"].status
            assert rep.flags["CP"].status == base.flags["CP"].status


def test_cross_block_orthogonality_enforced():
    ch = Chart.box([(0.0, 1.0)] * 2, blocks=((0,), (1,)))
    g = MetricField(ch, [[ONE, const(0.3)], [const(0.3), ONE]])
    with pytest.raises(ConstraintError):
        classify_net(g, OrthogonalNet.coordinate(ch), PLAN)


def test_degenerate_frame_rejected():
    g = fixtures.polar()
    net = OrthogonalNet(
        g.chart, [(ONE, ZERO), (const(2.0), ZERO)], ((0,), (1,))
    )
    with pytest.raises(DegenerateFrameError):
        classify_net(g, net, PLAN)


def test_cwp_residual_requires_umbilicity():
    # block (1, 2) of the warped three-factor metric has two distinct
    # normal curvatures, so the exchange identity must refuse to evaluate
    g = fixtures.warped_three()
    net = OrthogonalNet.coordinate(g.chart, ((1, 2), (0,)))
    with pytest.raises(NotApplicableError):
        cwp_residual(g, net, 0, (0.5, 0.5, 0.5))
    # on the correct split it evaluates to a small number
    r = cwp_residual(g, _coordinate(g), 1, (0.5, 0.5, 0.5))
    assert r <= 1e-9


def test_distribution_geometry_polar_closed_form():
    g = fixtures.polar()
    net = _coordinate(g)
    t = 1.5
    geom = distribution_geometry(g, net, 1, (t, 0.8))
    assert np.allclose(geom.H, [-1.0 / t, 0.0], atol=1e-12)
    assert geom.umbilicity == 0.0  # rank one is vacuously umbilical
    assert geom.sphericity <= 1e-12
    geom0 = distribution_geometry(g, net, 0, (t, 0.8))
    assert np.allclose(geom0.eta, geom.H, atol=1e-12)
    assert geom0.geodesy <= 1e-12


def test_project_splits_vectors():
    g = fixtures.exp_sum_conformal()
    net = _coordinate(g)
    p = (0.4, 0.7)
    v = np.array([0.8, -0.3])
    v0 = project(g, net, net.blocks[0], v, p)
    v1 = project(g, net, net.blocks[1], v, p)
    assert np.allclose(v0 + v1, v, atol=1e-12)


def test_report_serialization_shape():
    g = fixtures.polar()
    rep = classify_net(g, _coordinate(g), PLAN)
    d = rep.to_dict()
    assert set(d) == {"flags", "h0_sum_residual", "cp_hs0_residual", "n_samples"}
    assert set(d["flags"]) == {"TP", "WP", "QW", "CQW", "CQW0", "CWP", "CP"}
    assert d["n_samples"] == rep.n_samples
    assert len(rep.table) == rep.n_samples
