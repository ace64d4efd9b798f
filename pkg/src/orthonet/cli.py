"""Command line runner: load a manifest, run one command, emit a report.

Commands
--------
classify        flag report for every declared net of the metric
verify-product  sampled residual of the twisted connection identity
factorize       gauge-fixed factor recovery for a conformally warped metric
codazzi         two-eigenvalue analysis of each declared tensor
selftest        deterministic battery over the built-in fixtures

Exit codes: 0 when every verdict passes, 2 when at least one fails, 3 when
nothing fails but at least one verdict is inconclusive, 1 on bad input or an
internal error.

JSON output is canonical: keys sorted, floats rounded to 12 significant
digits, no timing data. Identical manifests and seeds therefore produce
byte-identical reports. The text format appends wall-clock time, which the
JSON format omits on purpose.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
import time
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from . import fixtures
from .chart_calculus import MetricField, lc_axiom_residuals
from .codazzi import SymTensorField, classify_codazzi
from .errors import (
    ConstraintError,
    ManifestError,
    NotCodazziError,
    OrthonetError,
    ParseError,
)
from .nets import OrthogonalNet, _status, classify_net
from .product_metrics import (
    PATH_ORDER_TOL,
    FactorSpec,
    ProductSpec,
    build_metric,
    conformal_scale,
    factorize_cwp,
    spherical_factor_check,
    verify_connection_identity,
)
from .sampling import SamplePlan, sample_points
from .scalar_fields import (
    Chart,
    Expr,
    ONE,
    ZERO,
    const,
    diff,
    eval_jet2,
    evaluate,
    fd_oracle,
    parse_expr,
)

COMMANDS = ("classify", "verify-product", "factorize", "codazzi", "selftest")

DEFAULT_TOLERANCE = 1e-8

# selftest expectations are structural, so a coarse plan keeps it quick
_SELFTEST_PLAN = SamplePlan(grid=3, margin=0.1, random=4, seed=0)


# --- manifest loading -----------------------------------------------------------


@dataclass
class Manifest:
    """Validated manifest contents, ready to run."""

    chart: Chart
    metric: MetricField
    spec: ProductSpec | None
    nets: tuple
    tensors: tuple
    functions: dict
    plan: SamplePlan
    tolerance: float


_SCHEMA_CACHE: dict = {}


def _schema() -> dict:
    if "doc" not in _SCHEMA_CACHE:
        text = resources.files("orthonet").joinpath("manifest.schema.json").read_text()
        _SCHEMA_CACHE["doc"] = json.loads(text)
    return _SCHEMA_CACHE["doc"]


def _parse(text: str, chart: Chart, pointer: str) -> Expr:
    try:
        return parse_expr(text, chart)
    except ParseError as e:
        raise ManifestError(f"bad expression {text!r}: {e}", pointer) from e


def _parse_matrix(rows, chart: Chart, pointer: str):
    n = chart.dim
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ManifestError(f"components must form a {n} by {n} matrix", pointer)
    return tuple(
        tuple(_parse(rows[a][b], chart, f"{pointer}/{a}/{b}") for b in range(n))
        for a in range(n)
    )


def _build_chart(cdata: dict, pointer: str) -> Chart:
    domain = [tuple(float(x) for x in iv) for iv in cdata["domain"]]
    dim = len(domain)
    if "dim" in cdata and cdata["dim"] != dim:
        raise ManifestError(
            f"dim {cdata['dim']} disagrees with {dim} domain intervals",
            f"{pointer}/dim",
        )
    names = cdata.get("names")
    if names is not None and len(names) != dim:
        raise ManifestError(
            f"expected {dim} names, got {len(names)}", f"{pointer}/names"
        )
    blocks = cdata.get("blocks")
    if blocks is not None:
        blocks = tuple(tuple(int(i) for i in b) for b in blocks)
    try:
        return Chart.box(domain, names=names, blocks=blocks)
    except (OrthonetError, ValueError) as e:
        raise ManifestError(str(e), pointer) from e


def _build_product(pdata: dict) -> ProductSpec:
    factors = []
    all_domain: list = []
    all_names: list = []
    offset = 0
    for fi, fdata in enumerate(pdata["factors"]):
        ptr = f"/product/factors/{fi}"
        domain = [tuple(float(x) for x in iv) for iv in fdata["domain"]]
        d = len(domain)
        names = fdata.get("names")
        if names is None:
            names = [f"x{offset + a}" for a in range(d)]
        elif len(names) != d:
            raise ManifestError(
                f"expected {d} names, got {len(names)}", f"{ptr}/names"
            )
        try:
            fchart = Chart.box(domain, names=tuple(names))
        except (OrthonetError, ValueError) as e:
            raise ManifestError(str(e), ptr) from e
        comps = fdata.get("components")
        if comps is None:
            metric = tuple(
                tuple(ONE if a == b else ZERO for b in range(d)) for a in range(d)
            )
        else:
            metric = _parse_matrix(comps, fchart, f"{ptr}/components")
        factors.append(FactorSpec(fchart, metric))
        all_domain.extend(domain)
        all_names.extend(names)
        offset += d

    joint = Chart.box(all_domain, names=tuple(all_names))
    twist_texts = pdata.get("twists")
    if twist_texts is None:
        twist_texts = ["1"] * len(factors)
    if len(twist_texts) != len(factors):
        raise ManifestError(
            f"expected {len(factors)} twists, got {len(twist_texts)}",
            "/product/twists",
        )
    twists = tuple(
        _parse(t, joint, f"/product/twists/{i}") for i, t in enumerate(twist_texts)
    )
    cf = None
    if "conformal" in pdata:
        cf = _parse(pdata["conformal"], joint, "/product/conformal")
    try:
        return ProductSpec(
            pdata["kind"], tuple(factors), twists=twists, conformal_factor=cf
        )
    except OrthonetError as e:
        raise ManifestError(str(e), "/product") from e


def load_manifest(path) -> Manifest:
    """Read, validate, and compile a manifest file."""
    with open(path, "r", encoding="utf-8") as fh:
        raw = fh.read()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ManifestError(
            f"invalid JSON: {e.msg} (line {e.lineno} column {e.colno})", ""
        ) from e

    validator = jsonschema.Draft7Validator(_schema())
    best = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if best is not None:
        ptr = "/" + "/".join(str(x) for x in best.absolute_path)
        raise ManifestError(best.message, ptr)

    if "product" in data:
        spec = _build_product(data["product"])
        try:
            metric = build_metric(spec)
        except OrthonetError as e:
            raise ManifestError(str(e), "/product") from e
        chart = metric.chart
        if "chart" in data:
            declared = _build_chart(data["chart"], "/chart")
            same = declared.dim == chart.dim and all(
                abs(a[0] - b[0]) <= 1e-12 and abs(a[1] - b[1]) <= 1e-12
                for a, b in zip(declared.domain, chart.domain)
            )
            if not same:
                raise ManifestError(
                    "chart does not match the product factors", "/chart"
                )
    else:
        spec = None
        chart = _build_chart(data["chart"], "/chart")
        entries = _parse_matrix(
            data["metric"]["components"], chart, "/metric/components"
        )
        try:
            metric = MetricField(chart, entries)
        except OrthonetError as e:
            raise ManifestError(str(e), "/metric") from e

    nets = []
    for ni, ndata in enumerate(data.get("nets", [])):
        blocks = tuple(tuple(int(i) for i in b) for b in ndata["blocks"])
        try:
            nets.append(OrthogonalNet.coordinate(chart, blocks))
        except OrthonetError as e:
            raise ManifestError(str(e), f"/nets/{ni}/blocks") from e
    if not nets:
        default_blocks = chart.blocks or tuple((i,) for i in range(chart.dim))
        try:
            nets.append(OrthogonalNet.coordinate(chart, default_blocks))
        except OrthonetError as e:
            raise ManifestError(str(e), "/chart/blocks") from e

    tensors = []
    for ti, tdata in enumerate(data.get("tensors", [])):
        comps = _parse_matrix(
            tdata["components"], chart, f"/tensors/{ti}/components"
        )
        try:
            tensors.append((tdata["name"], SymTensorField(chart, comps, metric=metric)))
        except OrthonetError as e:
            raise ManifestError(str(e), f"/tensors/{ti}") from e

    functions: dict = {}
    for fi, fdata in enumerate(data.get("functions", [])):
        name = fdata["name"]
        if name in functions:
            raise ManifestError(
                f"duplicate function name {name!r}", f"/functions/{fi}/name"
            )
        fchart = Chart.box([(-1e9, 1e9)], names=(fdata["var"],))
        functions[name] = _parse(fdata["body"], fchart, f"/functions/{fi}/body")

    sdata = data.get("sampling", {})
    try:
        plan = SamplePlan(
            grid=int(sdata.get("grid", 5)),
            margin=float(sdata.get("margin", 0.1)),
            random=int(sdata.get("random", 16)),
            seed=int(sdata.get("seed", 0)),
        )
    except ValueError as e:
        raise ManifestError(str(e), "/sampling") from e

    return Manifest(
        chart=chart,
        metric=metric,
        spec=spec,
        nets=tuple(nets),
        tensors=tuple(tensors),
        functions=functions,
        plan=plan,
        tolerance=float(data.get("tolerance", DEFAULT_TOLERANCE)),
    )


# --- commands -------------------------------------------------------------------


def _cmd_classify(man: Manifest, tol: float, plan: SamplePlan):
    results: dict = {"nets": []}
    verdicts: dict = {}
    for idx, net in enumerate(man.nets):
        rep = classify_net(man.metric, net, plan, tol)
        d = rep.to_dict()
        d["blocks"] = [list(b) for b in net.blocks]
        results["nets"].append(d)
        for k, f in rep.flags.items():
            verdicts[f"net{idx}.{k}"] = f.to_dict()
    return results, verdicts


def _cmd_verify_product(man: Manifest, tol: float, plan: SamplePlan):
    if man.spec is None:
        raise ConstraintError("verify-product requires a product manifest")
    if man.spec.conformal_factor is not None:
        raise ConstraintError(
            "verify-product applies to unscaled products; drop the conformal factor"
        )
    rng = np.random.default_rng(plan.seed)
    pairs = 4
    worst = 0.0
    rows = []
    for p in sample_points(man.chart, plan):
        p = tuple(float(x) for x in p)
        pm = 0.0
        for _ in range(pairs):
            X = tuple(const(float(v)) for v in rng.uniform(-1.0, 1.0, man.chart.dim))
            Y = tuple(const(float(v)) for v in rng.uniform(-1.0, 1.0, man.chart.dim))
            pm = max(pm, verify_connection_identity(man.spec, X, Y, p))
        rows.append({"point": list(p), "residual": pm})
        worst = max(worst, pm)
    results = {
        "kind": man.spec.kind,
        "max_residual": worst,
        "pairs_per_point": pairs,
        "n_samples": len(rows),
        "table": rows,
    }
    verdicts = {
        "connection_identity": {"status": _status(worst, tol), "residual": worst}
    }
    return results, verdicts


def _cmd_factorize(man: Manifest, tol: float, plan: SamplePlan):
    fac = factorize_cwp(man.metric, tol=tol, plan=plan)
    results = fac.to_dict()
    verdicts = {
        "reconstruction": {
            "status": _status(fac.reconstruction_residual, tol),
            "residual": fac.reconstruction_residual,
        },
        "path_order": {
            "status": _status(fac.path_order_residual, PATH_ORDER_TOL),
            "residual": fac.path_order_residual,
        },
    }
    return results, verdicts


def _cmd_codazzi(man: Manifest, tol: float, plan: SamplePlan):
    if not man.tensors:
        raise ConstraintError("codazzi requires at least one tensor in the manifest")
    h = man.functions.get("h")
    results: dict = {}
    verdicts: dict = {}
    for name, phi in man.tensors:
        try:
            rep = classify_codazzi(man.metric, phi, h=h, plan=plan, tol=tol)
        except NotCodazziError as e:
            results[name] = {"error": str(e)}
            verdicts[f"{name}.codazzi"] = {
                "status": "fail",
                "residual": float(getattr(e, "residual", math.inf)),
            }
            continue
        results[name] = rep.to_dict()
        verdicts[f"{name}.codazzi"] = {
            "status": _status(rep.codazzi_residual, tol),
            "residual": rep.codazzi_residual,
        }
        for k, f in rep.flags.items():
            verdicts[f"{name}.{k}"] = f.to_dict()
    return results, verdicts


# --- selftest battery -----------------------------------------------------------


def _flag_pattern_ok(rep, expected_pass):
    for k, f in rep.flags.items():
        want = "pass" if k in expected_pass else "fail"
        if f.status != want:
            return False
    return True


def _cmd_selftest(tol: float, plan: SamplePlan):
    checks: dict = {}

    def put(name, residual, ok):
        checks[name] = {
            "residual": float(residual),
            "status": "pass" if ok else "fail",
        }

    chart = Chart.box([(0.0, 1.0), (0.0, 1.0)], names=("x0", "x1"))
    e = parse_expr("exp(x0*x1) + sin(x0)^2", chart)
    p = (0.3, 0.7)
    jet = eval_jet2(e, p)
    gfd, hfd = fd_oracle(e, p, 1e-4)
    worst = max(
        float(np.max(np.abs(jet.grad - gfd))), float(np.max(np.abs(jet.hess - hfd)))
    )
    put("derivative_fd", worst, worst <= 1e-5)

    worst = 0.0
    for g in (
        fixtures.euclidean(),
        fixtures.polar(),
        fixtures.torus()[0],
        fixtures.exp_sum_conformal(),
    ):
        for q in sample_points(g.chart, plan):
            c, t = lc_axiom_residuals(g, tuple(float(x) for x in q))
            worst = max(worst, c, t)
    put("levi_civita", worst, worst <= 1e-10)

    g = fixtures.polar()
    rep = classify_net(g, OrthogonalNet.coordinate(g.chart), plan, tol)
    put(
        "net_polar",
        max(f.residual for f in rep.flags.values()),
        _flag_pattern_ok(rep, {"TP", "WP", "QW", "CQW", "CQW0", "CWP", "CP"}),
    )

    g = fixtures.twisted_flat()
    rep = classify_net(g, OrthogonalNet.coordinate(g.chart), plan, tol)
    cwp = rep.flags["CWP"].residual
    put(
        "net_twisted_control",
        cwp,
        _flag_pattern_ok(rep, {"TP", "QW", "CQW", "CQW0"}) and cwp > 1e-3,
    )

    g = fixtures.warped_three()
    rep = classify_net(g, OrthogonalNet.coordinate(g.chart), plan, tol)
    put(
        "net_warped_three",
        max(f.residual for f in rep.flags.values() if f.status == "pass"),
        _flag_pattern_ok(rep, {"TP", "WP", "QW", "CQW", "CWP"}),
    )

    g = fixtures.exp_sum_conformal()
    rep = classify_net(g, OrthogonalNet.coordinate(g.chart), plan, tol)
    put(
        "net_exp_sum",
        rep.flags["CP"].residual,
        _flag_pattern_ok(rep, {"TP", "CQW", "CQW0", "CWP", "CP"}),
    )

    g = fixtures.cqw_three()
    rep = classify_net(g, OrthogonalNet.coordinate(g.chart), plan, tol)
    put("h0_sum_three_block", rep.h0_sum_residual, rep.h0_sum_residual <= 1e-9)

    spec = fixtures.twisted_flat_spec()
    rng = np.random.default_rng(plan.seed)
    worst = 0.0
    for q in ((0.4, 0.5), (0.8, 0.3), (1.0, 1.0)):
        for _ in range(4):
            X = tuple(const(float(v)) for v in rng.uniform(-1.0, 1.0, 2))
            Y = tuple(const(float(v)) for v in rng.uniform(-1.0, 1.0, 2))
            worst = max(worst, verify_connection_identity(spec, X, Y, q))
    put("connection_identity", worst, worst <= 1e-9)

    g = fixtures.polar()
    fac = factorize_cwp(conformal_scale(g, parse_expr("exp(t + theta)", g.chart)))
    put(
        "factorize_scaled_polar",
        max(fac.reconstruction_residual, fac.path_order_residual),
        fac.reconstruction_residual <= 1e-6
        and fac.path_order_residual <= PATH_ORDER_TOL,
    )

    spec, phi_sum, phi_ctl = fixtures.sum_reciprocal()
    pts = ((0.3, 0.4), (0.5, 0.9), (0.85, 0.2))
    w_sum = 0.0
    w_ctl = 1.0
    for q in pts:
        c = spherical_factor_check(spec, phi_sum, 1, q)
        w_sum = max(w_sum, c.residual_ii, c.residual_iii, c.residual_v)
        c = spherical_factor_check(spec, phi_ctl, 1, q)
        w_ctl = min(w_ctl, max(c.residual_ii, c.residual_iii, c.residual_v))
    put("spherical_factor_split", w_sum, w_sum <= 1e-9 and w_ctl > 1e-3)

    g, phi = fixtures.torus()
    rep = classify_codazzi(g, phi, h=const(1.0), plan=plan, tol=tol)
    put(
        "codazzi_torus",
        max(rep.codazzi_residual, rep.warping_ode_residual or 0.0),
        rep.relation_case == "warped_rank_one"
        and rep.codazzi_residual <= 1e-10
        and (rep.warping_ode_residual or 0.0) <= 1e-9,
    )

    g, phi = fixtures.polar_cone()
    rep = classify_codazzi(g, phi, h=const(0.0), plan=plan, tol=tol)
    put(
        "codazzi_cone",
        max(rep.codazzi_residual, rep.warping_ode_residual or 0.0),
        rep.relation_case == "warped_rank_one"
        and rep.codazzi_residual <= 1e-10
        and (rep.warping_ode_residual or 0.0) <= 1e-9,
    )

    cand = fixtures.conformal_product_pair()
    rep = classify_codazzi(cand.metric, cand.tensor, plan=plan, tol=tol)
    two_path = max(
        rep.residuals["eta_two_path"], rep.residuals["zeta_two_path"]
    )
    put(
        "codazzi_conformal_pair",
        max(rep.codazzi_residual, two_path),
        all(f.status == "pass" for f in rep.flags.values()) and two_path <= 1e-9,
    )

    verdicts = {k: dict(v) for k, v in checks.items()}
    results = {"checks": checks, "n_checks": len(checks)}
    return results, verdicts


# --- report assembly and emission -------------------------------------------------


def _exit_code(verdicts: dict) -> int:
    statuses = {v["status"] for v in verdicts.values()}
    if "fail" in statuses:
        return 2
    if "inconclusive" in statuses:
        return 3
    return 0


def run(command: str, manifest: Manifest | None, tolerance=None, plan=None):
    """Run one command and return (report dict, exit code)."""
    if command not in COMMANDS:
        raise ConstraintError(f"unknown command {command!r}")
    if command == "selftest":
        tol = DEFAULT_TOLERANCE if tolerance is None else float(tolerance)
        plan = plan or _SELFTEST_PLAN
        results, verdicts = _cmd_selftest(tol, plan)
    else:
        if manifest is None:
            raise ConstraintError(f"{command} requires a manifest")
        tol = manifest.tolerance if tolerance is None else float(tolerance)
        plan = plan or manifest.plan
        handler = {
            "classify": _cmd_classify,
            "verify-product": _cmd_verify_product,
            "factorize": _cmd_factorize,
            "codazzi": _cmd_codazzi,
        }[command]
        results, verdicts = handler(manifest, tol, plan)
    report = {
        "command": command,
        "tolerance": tol,
        "sampling": {
            "grid": plan.grid,
            "margin": plan.margin,
            "random": plan.random,
            "seed": plan.seed,
        },
        "results": results,
        "verdicts": verdicts,
    }
    return report, _exit_code(verdicts)


def _canonical(obj):
    """Round floats to 12 significant digits and force plain containers, so
    json.dumps output is reproducible bit for bit."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return repr(obj)
        return float(f"{obj:.12e}")
    if isinstance(obj, int):
        return obj
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return [_canonical(x) for x in obj.tolist()]
    if isinstance(obj, (list, tuple)):
        return [_canonical(x) for x in obj]
    return str(obj)


_TAGS = {
    "pass": "PASS",
    "fail": "FAIL",
    "inconclusive": "INCONCLUSIVE",
    "not_applicable": "N/A",
}


def emit(report: dict, fmt: str = "text", elapsed=None) -> str:
    """Render a report. JSON is canonical and timing-free; text is for eyes."""
    if fmt == "json":
        return json.dumps(_canonical(report), sort_keys=True, indent=2) + "\n"
    s = report["sampling"]
    lines = [
        f"command: {report['command']}",
        f"tolerance: {report['tolerance']:.12e}",
        "sampling: grid={grid} margin={margin} random={random} seed={seed}".format(**s),
    ]
    res = report["results"]
    cmd = report["command"]
    if cmd == "classify":
        for i, nd in enumerate(res["nets"]):
            lines.append(
                f"net{i}: blocks={nd['blocks']} "
                f"h0_sum={nd['h0_sum_residual']:.12e} samples={nd['n_samples']}"
            )
    elif cmd == "verify-product":
        lines.append(
            f"kind={res['kind']} samples={res['n_samples']} "
            f"pairs_per_point={res['pairs_per_point']}"
        )
    elif cmd == "factorize":
        lines.append(f"base={res['base']} blocks={res['blocks']}")
        if "phi_expr" in res:
            lines.append(f"conformal factor: {res['phi_expr']}")
    elif cmd == "codazzi":
        for name in sorted(res):
            body = res[name]
            if "error" in body:
                lines.append(f"{name}: {body['error']}")
            else:
                lines.append(
                    f"{name}: ranks=({body['rank_lambda']}, {body['rank_mu']}) "
                    f"case={body['relation_case']}"
                )
    elif cmd == "selftest":
        lines.append(f"checks: {res['n_checks']}")
    lines.append("verdicts:")
    verdicts = report["verdicts"]
    for k in sorted(verdicts):
        v = verdicts[k]
        tag = _TAGS.get(v["status"], v["status"])
        r = v.get("residual")
        suffix = "" if r is None else f"  residual {r:.12e}"
        lines.append(f"  [{tag}] {k}{suffix}")
    word = {0: "pass", 2: "fail", 3: "inconclusive"}[_exit_code(verdicts)]
    lines.append(f"summary: {word}")
    if elapsed is not None:
        lines.append(f"elapsed: {elapsed:.2f}s")
    return "\n".join(lines) + "\n"


# --- entry point ----------------------------------------------------------------


class _UsageError(OrthonetError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="orthonet",
        description="Classify, verify, and factor structured Riemannian metrics "
        "described by a JSON manifest.",
    )
    p.add_argument("--command", choices=COMMANDS, required=True)
    p.add_argument("--manifest", help="path to a manifest JSON file")
    p.add_argument(
        "--tolerance",
        type=float,
        default=None,
        help=f"residual tolerance (default {DEFAULT_TOLERANCE:g} or manifest value)",
    )
    p.add_argument(
        "--samples", type=int, default=None, help="grid points per axis override"
    )
    p.add_argument("--seed", type=int, default=None, help="sampling seed override")
    p.add_argument(
        "--format", choices=("text", "json"), default="text", dest="fmt"
    )
    return p


def main(argv=None) -> int:
    t0 = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    try:
        if args.command == "selftest":
            manifest = None
            plan = dataclasses.replace(
                _SELFTEST_PLAN,
                grid=args.samples if args.samples is not None else _SELFTEST_PLAN.grid,
                seed=args.seed if args.seed is not None else _SELFTEST_PLAN.seed,
            )
        else:
            if not args.manifest:
                raise ManifestError(
                    f"--manifest is required for {args.command}", ""
                )
            manifest = load_manifest(args.manifest)
            plan = manifest.plan
            if args.samples is not None:
                plan = dataclasses.replace(plan, grid=args.samples)
            if args.seed is not None:
                plan = dataclasses.replace(plan, seed=args.seed)
        report, code = run(
            args.command, manifest, tolerance=args.tolerance, plan=plan
        )
    except (OrthonetError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    elapsed = time.perf_counter() - t0
    out = emit(report, args.fmt, elapsed=elapsed if args.fmt == "text" else None)
    sys.stdout.write(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
