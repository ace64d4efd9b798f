"""Manifest loading, command plumbing, exit codes, and output formats."""

import json
from pathlib import Path

import numpy as np
import pytest

from orthonet.cli import (
    DEFAULT_TOLERANCE,
    _canonical,
    build_parser,
    emit,
    load_manifest,
    main,
    run,
)
from orthonet.errors import ConstraintError, ManifestError

MANIFESTS = Path(__file__).resolve().parents[1] / "manifests"


def write_manifest(tmp_path, data, name="m.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def flat_manifest(**extra):
    data = {
        "chart": {"domain": [[0.0, 1.0], [0.0, 1.0]], "names": ["x0", "x1"]},
        "metric": {"components": [["1", "0"], ["0", "1"]]},
    }
    data.update(extra)
    return data


def test_load_shipped_polar_manifest():
    man = load_manifest(MANIFESTS / "polar.json")
    assert man.chart.names == ("t", "theta")
    assert man.tolerance == 1e-8
    assert man.spec is None
    # the chart blocks become the default coordinate net
    assert len(man.nets) == 1
    assert man.nets[0].blocks == ((0,), (1,))


def test_load_shipped_product_manifest():
    man = load_manifest(MANIFESTS / "twisted_control.json")
    assert man.spec is not None
    assert man.spec.kind == "twisted"
    assert man.chart.dim == 2
    assert man.metric.provenance is man.spec


def test_default_net_without_blocks(tmp_path):
    man = load_manifest(write_manifest(tmp_path, flat_manifest()))
    assert man.nets[0].blocks == ((0,), (1,))


def test_manifest_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{ not json", encoding="utf-8")
    with pytest.raises(ManifestError, match="invalid JSON.*line 1"):
        load_manifest(path)


def test_manifest_schema_violations(tmp_path):
    with pytest.raises(ManifestError):
        load_manifest(write_manifest(tmp_path, {"chart": {"domain": []}}))
    data = flat_manifest()
    data["metric"]["components"] = [["1", 2], ["0", "1"]]
    with pytest.raises(ManifestError, match="/metric/components"):
        load_manifest(write_manifest(tmp_path, data))
    data = flat_manifest(sampling={"margin": 0.9})
    with pytest.raises(ManifestError, match="/sampling/margin"):
        load_manifest(write_manifest(tmp_path, data))


def test_manifest_bad_expression_pointer(tmp_path):
    data = flat_manifest()
    data["metric"]["components"][0][0] = "1 +"
    with pytest.raises(ManifestError, match="/metric/components"):
        load_manifest(write_manifest(tmp_path, data))
    data = flat_manifest()
    data["metric"]["components"][0][0] = "1 + zz"
    with pytest.raises(ManifestError, match="/metric/components"):
        load_manifest(write_manifest(tmp_path, data))


def test_manifest_chart_product_mismatch(tmp_path):
    raw = json.loads((MANIFESTS / "twisted_control.json").read_text())
    raw["chart"] = {"domain": [[0.0, 9.0], [0.2, 1.2]]}
    with pytest.raises(ManifestError, match="does not match the product"):
        load_manifest(write_manifest(tmp_path, raw))


def test_manifest_duplicate_function_names(tmp_path):
    data = flat_manifest(functions=[
        {"name": "h", "var": "s", "body": "s"},
        {"name": "h", "var": "s", "body": "2*s"},
    ])
    with pytest.raises(ManifestError, match="duplicate function"):
        load_manifest(write_manifest(tmp_path, data))


def test_manifest_bad_net_blocks(tmp_path):
    data = flat_manifest(nets=[{"blocks": [[0], [0, 1]]}])
    with pytest.raises(ManifestError, match="/nets/0/blocks"):
        load_manifest(write_manifest(tmp_path, data))


def test_classify_exit_codes():
    man = load_manifest(MANIFESTS / "polar.json")
    report, code = run("classify", man)
    assert code == 0
    assert all(v["status"] in ("pass", "not_applicable")
               for v in report["verdicts"].values())

    twisted = load_manifest(MANIFESTS / "twisted_control.json")
    report, code = run("classify", twisted)
    assert code == 2
    assert report["verdicts"]["net0.CWP"]["status"] == "fail"
    assert report["verdicts"]["net0.CWP"]["residual"] > 1e-3

    # a loose tolerance moves the failures into the inconclusive band
    report, code = run("classify", twisted, tolerance=0.1)
    assert code == 3
    statuses = {v["status"] for v in report["verdicts"].values()}
    assert "fail" not in statuses and "inconclusive" in statuses


def test_verify_product_command():
    man = load_manifest(MANIFESTS / "twisted_control.json")
    report, code = run("verify-product", man, tolerance=1e-9)
    assert code == 0
    assert report["verdicts"]["connection_identity"]["residual"] <= 1e-9
    assert report["results"]["kind"] == "twisted"

    metric_only = load_manifest(MANIFESTS / "polar.json")
    with pytest.raises(ConstraintError, match="requires a product manifest"):
        run("verify-product", metric_only)


def test_verify_product_rejects_scaled_spec():
    man = load_manifest(MANIFESTS / "factorize_scaled_polar.json")
    with pytest.raises(ConstraintError, match="unscaled"):
        run("verify-product", man)


def test_factorize_command():
    man = load_manifest(MANIFESTS / "factorize_scaled_polar.json")
    report, code = run("factorize", man)
    assert code == 0
    assert report["verdicts"]["reconstruction"]["residual"] <= 1e-6
    assert report["verdicts"]["path_order"]["residual"] <= 1e-7
    assert report["results"]["blocks"] == [[0], [1]]


def test_codazzi_command():
    man = load_manifest(MANIFESTS / "torus_codazzi.json")
    report, code = run("codazzi", man)
    assert code == 0
    body = report["results"]["shape_operator"]
    assert body["relation_case"] == "warped_rank_one"
    assert report["verdicts"]["shape_operator.codazzi"]["status"] == "pass"
    assert report["verdicts"]["shape_operator.conformal_product"]["status"] == "pass"


def test_codazzi_requires_tensor(tmp_path):
    man = load_manifest(write_manifest(tmp_path, flat_manifest()))
    with pytest.raises(ConstraintError, match="at least one tensor"):
        run("codazzi", man)


def test_codazzi_violation_is_verdict_not_error(tmp_path):
    data = flat_manifest(tensors=[
        {"name": "phi", "components": [["1 + x1", "0"], ["0", "3"]]}
    ])
    man = load_manifest(write_manifest(tmp_path, data))
    report, code = run("codazzi", man)
    assert code == 2
    assert "error" in report["results"]["phi"]
    verdict = report["verdicts"]["phi.codazzi"]
    assert verdict["status"] == "fail"
    assert verdict["residual"] == pytest.approx(1.0, abs=1e-9)


def test_selftest_passes_and_is_deterministic():
    report1, code1 = run("selftest", None)
    report2, code2 = run("selftest", None)
    assert code1 == code2 == 0
    assert report1["results"]["n_checks"] >= 10
    assert emit(report1, "json") == emit(report2, "json")


def test_canonical_rounding():
    assert _canonical(0.1 + 0.2) == 0.3
    assert _canonical(np.float64(2.5)) == 2.5
    assert _canonical(np.int64(7)) == 7
    assert _canonical(float("inf")) == "inf"
    assert _canonical((1.0, {"a": np.arange(2.0)})) == [1.0, {"a": [0.0, 1.0]}]
    # 12 significant digits, so deep float noise is squashed
    assert _canonical(1.0000000000000002) == 1.0


def test_emit_text_format():
    man = load_manifest(MANIFESTS / "polar.json")
    report, _ = run("classify", man)
    text = emit(report, "text", elapsed=0.5)
    assert text.startswith("command: classify\n")
    assert "net0: blocks=[[0], [1]]" in text
    assert "[PASS] net0.WP" in text
    assert "summary: pass" in text
    assert text.rstrip().endswith("elapsed: 0.50s")
    # JSON output carries no timing, so bytes are reproducible
    assert "elapsed" not in emit(report, "json")


def test_main_json_runs_are_byte_identical(capsys):
    argv = ["--command", "classify", "--manifest", str(MANIFESTS / "polar.json"),
            "--format", "json"]
    assert main(argv) == 0
    out1 = capsys.readouterr().out
    assert main(argv) == 0
    out2 = capsys.readouterr().out
    assert out1 == out2
    parsed = json.loads(out1)
    assert parsed["command"] == "classify"


def test_main_error_paths(tmp_path, capsys):
    assert main(["--command", "classify"]) == 1
    assert "error:" in capsys.readouterr().err

    assert main(["--command", "nope"]) == 1
    capsys.readouterr()

    assert main(["--command", "classify", "--manifest", "/no/such/file.json"]) == 1
    assert "error:" in capsys.readouterr().err

    bad = tmp_path / "bad.json"
    bad.write_text("{", encoding="utf-8")
    assert main(["--command", "classify", "--manifest", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "invalid JSON" in err


def test_main_sampling_overrides(capsys):
    argv = ["--command", "classify", "--manifest", str(MANIFESTS / "polar.json"),
            "--samples", "3", "--seed", "5", "--format", "json"]
    assert main(argv) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["sampling"]["grid"] == 3
    assert report["sampling"]["seed"] == 5


def test_parser_defaults():
    args = build_parser().parse_args(["--command", "selftest"])
    assert args.fmt == "text"
    assert args.tolerance is None
    assert DEFAULT_TOLERANCE == 1e-8
