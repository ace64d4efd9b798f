"""Expression engine: parsing, evaluation, differentiation, jets."""

import math

import numpy as np
import pytest

from conftest import random_expr, random_point
from orthonet.errors import EvalDomainError, ParseError
from orthonet.scalar_fields import (
    Chart,
    ONE,
    ZERO,
    add,
    apply_unary,
    const,
    diff,
    div,
    eval_jet2,
    evaluate,
    fd_oracle,
    format_expr,
    free_vars,
    log,
    mul,
    parse_expr,
    powc,
    substitute,
    var,
)


def test_chart_box_basics():
    ch = Chart.box([(0.0, 1.0), (-1.0, 3.0)], names=("a", "b"), blocks=((0,), (1,)))
    assert ch.dim == 2
    assert ch.names == ("a", "b")
    assert ch.center() == (0.5, 1.0)
    assert ch.index_of("b") == 1
    assert ch.contains((0.2, 0.0))
    assert not ch.contains((1.2, 0.0))
    with pytest.raises(KeyError):
        ch.index_of("c")


def test_chart_validation():
    with pytest.raises(ValueError):
        Chart.box([(1.0, 1.0)])
    with pytest.raises(ValueError):
        Chart.box([(0.0, 1.0)] * 2, names=("a", "a"))
    with pytest.raises(ValueError):
        Chart.box([(0.0, 1.0)] * 2, blocks=((0,),))


def test_parse_format_round_trip():
    ch = Chart.box([(0.1, 2.0)] * 2, names=("x0", "x1"))
    texts = [
        "x0 + x1",
        "x0^2 * sin(x1)",
        "exp(x0) / (1 + x1)",
        "1/(x0*x1)",
        "(2 + cos(x0))^2",
        "-x0 + x1^-2",
        "sqrt(x0) * log(1 + x1)",
    ]
    for text in texts:
        e = parse_expr(text, ch)
        back = parse_expr(format_expr(e, ch.names), ch)
        for seed in range(5):
            rng = np.random.default_rng(seed)
            p = random_point(rng, ch)
            assert math.isclose(evaluate(e, p), evaluate(back, p), rel_tol=1e-12)


def test_parse_named_functions():
    ch = Chart.box([(0.2, 1.0)], names=("t",))
    aux = Chart.box([(-10.0, 10.0)], names=("s",))
    h = parse_expr("1 - 2/s", aux)
    e = parse_expr("h(t^2) + 1", ch, functions={"h": h})
    t = 0.5
    assert math.isclose(evaluate(e, (t,)), (1.0 - 2.0 / t**2) + 1.0, rel_tol=1e-14)
    # chain rule through the call node
    d = diff(e, 0)
    assert math.isclose(evaluate(d, (t,)), (2.0 / t**4) * 2.0 * t, rel_tol=1e-12)


def test_parse_errors_carry_position():
    ch = Chart.box([(0.0, 1.0)], names=("x0",))
    for text in ("x0 +", "x0 ** 2", "nope(x0)", "x0 @ 1", "(x0", "x0^x0"):
        with pytest.raises(ParseError) as ei:
            parse_expr(text, ch)
        assert isinstance(ei.value.position, int)
        assert "position" in str(ei.value)


def test_unknown_coordinate_is_parse_error():
    ch = Chart.box([(0.0, 1.0)], names=("u",))
    with pytest.raises(ParseError):
        parse_expr("u + v", ch)


def test_constant_folding_and_identities():
    x = var(1)
    assert add(const(2.0), const(3.0)).value == 5.0
    assert mul(ONE, x) is x
    assert mul(x, ONE) is x
    assert mul(ZERO, x) is ZERO
    assert add(ZERO, x) is x
    assert powc(x, 1.0) is x
    assert powc(const(2.0), 3.0).value == 8.0
    assert apply_unary("exp", ZERO).value == 1.0


def test_free_vars_and_substitute():
    ch = Chart.box([(0.1, 1.0)] * 3)
    e = parse_expr("x0 * sin(x2) + 1", ch)
    assert free_vars(e) == {0, 2}
    swapped = substitute(e, {0: var(1), 2: var(0)})
    assert free_vars(swapped) == {0, 1}
    p = (0.3, 0.7, 0.9)
    assert math.isclose(
        evaluate(swapped, p), p[1] * math.sin(p[0]) + 1.0, rel_tol=1e-14
    )


def test_diff_is_memoized_per_node():
    ch = Chart.box([(0.1, 1.0)] * 2)
    e = parse_expr("exp(x0 * x1)", ch)
    assert diff(e, 0) is diff(e, 0)
    assert diff(e, 0) is not diff(e, 1)


def test_derivatives_match_fd_seeded():
    ch = Chart.box([(0.3, 1.1)] * 3)
    for seed in range(40):
        rng = np.random.default_rng(seed)
        e = random_expr(rng, 3)
        p = random_point(rng, ch, margin=0.1)
        jet = eval_jet2(e, p)
        gfd, hfd = fd_oracle(e, p, 1e-4, chart=ch)
        scale = 1.0 + float(np.abs(jet.grad).max()) + float(np.abs(jet.hess).max())
        assert float(np.abs(jet.grad - gfd).max()) / scale < 5e-7
        assert float(np.abs(jet.hess - hfd).max()) / scale < 5e-6


def test_jet_hessian_exactly_symmetric():
    ch = Chart.box([(0.3, 1.1)] * 4)
    rng = np.random.default_rng(11)
    for _ in range(10):
        e = random_expr(rng, 4)
        p = random_point(rng, ch)
        jet = eval_jet2(e, p)
        assert np.array_equal(jet.hess, jet.hess.T)


def test_eval_domain_errors():
    with pytest.raises(EvalDomainError):
        evaluate(log(var(0)), (-1.0,))
    with pytest.raises(EvalDomainError):
        evaluate(div(ONE, var(0)), (0.0,))
    with pytest.raises(EvalDomainError):
        evaluate(powc(var(0), 0.5), (-2.0,))


def test_eval_cache_is_reusable():
    ch = Chart.box([(0.1, 1.0)] * 2)
    e = parse_expr("sin(x0) * exp(x1) + x0^2", ch)
    p = (0.4, 0.6)
    cache: dict = {}
    v1 = evaluate(e, p, cache)
    assert cache
    v2 = evaluate(e, p, cache)
    assert v1 == v2


def test_shared_cache_survives_node_turnover():
    # a long-lived cache must pin its nodes: an id-keyed cache hands a
    # recycled address the previous node's value (198/200 iterations here)
    cache: dict = {}
    p = (0.5,)
    for k in range(200):
        e = add(var(0), const(float(k)))
        assert evaluate(e, p, cache) == 0.5 + k
        del e


def test_fd_oracle_domain_guard():
    ch = Chart.box([(0.0, 1.0)])
    e = parse_expr("x0^2", ch)
    with pytest.raises(ValueError):
        fd_oracle(e, (0.0005,), 1e-3, chart=ch)
    with pytest.raises(ValueError):
        fd_oracle(e, (0.5,), -1.0)
