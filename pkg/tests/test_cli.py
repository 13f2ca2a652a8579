"""End-to-end command-line behavior on small synthetic inputs."""

import json
import math

import numpy as np
import pytest

from localexplain.cli import EXIT_ERROR, EXIT_OK, EXIT_PARTIAL, main


def write_quadratic_inputs(tmp_path, n=60, seed=1):
    """y = x^2 exactly, one continuous feature."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2, 2, n)
    data = tmp_path / "data.csv"
    lines = ["x,f"] + [f"{float(xi)!r},{float(xi * xi)!r}" for xi in x]
    data.write_text("\n".join(lines) + "\n")
    schema = tmp_path / "schema.json"
    schema.write_text(json.dumps({
        "features": [{"name": "x", "kind": "continuous"}],
        "output_kind": "raw",
    }))
    return str(data), str(schema)


def write_mixed_inputs(tmp_path, n=90, seed=2):
    """y = 1 + 2*x1 + 0*x2 + (color==g)*0.5 - (color==b)*0.25, exact."""
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(-2, 2, n)
    x2 = rng.uniform(-2, 2, n)
    colors = np.array(["r", "g", "b"])[np.arange(n) % 3]
    offset = {"r": 0.0, "g": 0.5, "b": -0.25}
    y = 1 + 2 * x1 + np.array([offset[c] for c in colors])
    data = tmp_path / "mixed.csv"
    rows = ["x1,x2,color,f"] + [
        f"{float(a)!r},{float(b)!r},{c},{float(d)!r}" for a, b, c, d in zip(x1, x2, colors, y)
    ]
    data.write_text("\n".join(rows) + "\n")
    schema = tmp_path / "mixed_schema.json"
    schema.write_text(json.dumps({
        "features": [
            {"name": "x1", "kind": "continuous"},
            {"name": "x2", "kind": "continuous"},
            {"name": "color", "kind": "categorical",
             "categories": ["r", "g", "b"], "baseline": "r"},
        ],
        "output_kind": "raw",
    }))
    return str(data), str(schema)


def write_probability_inputs(tmp_path, n=160, seed=3):
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(-2, 2, n)
    x2 = rng.uniform(-2, 2, n)
    p = 1.0 / (1.0 + np.exp(-(0.3 + 0.9 * x1 - 0.4 * x2)))
    data = tmp_path / "prob.csv"
    rows = ["x1,x2,f"] + [f"{float(a)!r},{float(b)!r},{float(c)!r}" for a, b, c in zip(x1, x2, p)]
    data.write_text("\n".join(rows) + "\n")
    schema = tmp_path / "prob_schema.json"
    schema.write_text(json.dumps({
        "features": [
            {"name": "x1", "kind": "continuous"},
            {"name": "x2", "kind": "continuous"},
        ],
        "output_kind": "probability",
    }))
    return str(data), str(schema)


class TestSimulate:
    def test_writes_reproducible_dataset_and_schema(self, tmp_path):
        out1 = tmp_path / "sim1.csv"
        out2 = tmp_path / "sim2.csv"
        schema_out = tmp_path / "schema.json"
        for out in (out1, out2):
            code = main([
                "simulate", "--n", "50", "--seed", "7",
                "--data-out", str(out), "--schema-out", str(schema_out),
            ])
            assert code == EXIT_OK
        assert out1.read_bytes() == out2.read_bytes()
        schema = json.loads(schema_out.read_text())
        names = [f["name"] for f in schema["features"]]
        assert names == ["x1", "x2", "a", "b"]
        assert schema["features"][2]["categories"] == ["1", "2", "3"]
        assert schema["features"][2]["baseline"] == "1"

    def test_output_loads_back(self, tmp_path):
        data = tmp_path / "sim.csv"
        schema = tmp_path / "schema.json"
        main(["simulate", "--n", "30", "--seed", "1",
              "--data-out", str(data), "--schema-out", str(schema)])
        from localexplain.data import FeatureSchema, load_dataset
        ds = load_dataset(str(data), FeatureSchema.from_json(schema.read_text()))
        assert ds.n == 30

    def test_single_row(self, tmp_path):
        data = tmp_path / "one.csv"
        schema = tmp_path / "one_schema.json"
        code = main(["simulate", "--n", "1", "--seed", "2",
                     "--data-out", str(data), "--schema-out", str(schema)])
        assert code == EXIT_OK
        body = [ln for ln in data.read_text().splitlines() if not ln.startswith("#")]
        assert len(body) == 2  # header + one row
        assert math.isfinite(float(body[1].split(",")[-1]))


class TestExplain:
    def test_row_query_report_shape(self, tmp_path):
        data, schema = write_mixed_inputs(tmp_path)
        out = tmp_path / "report.json"
        code = main([
            "explain", "--data", data, "--schema", schema, "--query", "0",
            "--k", "1", "--m", "45", "--B", "60", "--seed", "5", "--out", str(out),
        ])
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        assert [f["name"] for f in report["features"]] == ["x1", "x2", "color"]
        for entry in report["features"]:
            assert set(entry) >= {"name", "kind", "score", "bootstrap_interval"}
            iv = entry["bootstrap_interval"]
            assert iv["lower"] <= iv["upper"]
        meta = report["metadata"]
        assert set(meta) >= {"k", "m", "c", "B", "alpha", "seed", "weighted", "diagnostics"}
        assert set(report["manifest"]) == {"command", "parameters", "input_digests", "version"}

    def test_inline_json_query_and_exact_scores(self, tmp_path):
        data, schema = write_mixed_inputs(tmp_path)
        out = tmp_path / "report.json"
        code = main([
            "explain", "--data", data, "--schema", schema,
            "--query", json.dumps({"x1": 0.2, "x2": -0.3, "color": "g"}),
            "--k", "1", "--m", "60", "--B", "50", "--kind", "gradient",
            "--naive-ci", "--out", str(out),
        ])
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        by_name = {f["name"]: f for f in report["features"]}
        assert by_name["x1"]["score"] == pytest.approx(2.0, abs=1e-7)
        assert by_name["x2"]["score"] == pytest.approx(0.0, abs=1e-7)
        assert by_name["color"]["score"] == pytest.approx(0.5, abs=1e-7)
        assert "naive_interval" in by_name["x1"]
        assert "naive_interval" not in by_name["color"]

    def test_byte_identical_reruns(self, tmp_path):
        data, schema = write_mixed_inputs(tmp_path)
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            main([
                "explain", "--data", data, "--schema", schema, "--query", "3",
                "--k", "2", "--m", "60", "--B", "80", "--seed", "11", "--out", str(out),
            ])
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_probability_data_defaults(self, tmp_path):
        # German-Credit-style hyperparameters on probability outputs
        data, schema = write_probability_inputs(tmp_path)
        out = tmp_path / "report.json"
        code = main([
            "explain", "--data", data, "--schema", schema, "--query", "0",
            "--k", "2", "--m", "40", "--c", "0.9", "--B", "100",
            "--naive-ci", "--out", str(out),
        ])
        assert code == EXIT_OK
        report = json.loads(out.read_text())
        assert report["metadata"]["kind"] == "function_difference"
        assert "naive_ci_skipped" in report["metadata"]["diagnostics"]
        for entry in report["features"]:
            assert "naive_interval" not in entry

    def test_compas_style_fraction(self, tmp_path):
        data, schema = write_probability_inputs(tmp_path)
        out = tmp_path / "report.json"
        code = main([
            "explain", "--data", data, "--schema", schema, "--query", "1",
            "--k", "2", "--m", "150", "--c", "0.667", "--B", "60", "--out", str(out),
        ])
        assert code == EXIT_OK

    def test_dump_scores_matrix(self, tmp_path):
        data, schema = write_quadratic_inputs(tmp_path)
        out = tmp_path / "report.json"
        dump = tmp_path / "scores.csv"
        main([
            "explain", "--data", data, "--schema", schema, "--query", "0",
            "--k", "2", "--m", "40", "--B", "30", "--out", str(out),
            "--dump-scores", str(dump),
        ])
        lines = dump.read_text().splitlines()
        assert lines[0] == "x"
        assert len(lines) == 31  # header + B successful replicates

    def test_missing_file_gives_json_error(self, tmp_path, capsys):
        _, schema = write_quadratic_inputs(tmp_path)
        code = main([
            "explain", "--data", str(tmp_path / "nope.csv"), "--schema", schema,
            "--query", "0", "--k", "1", "--m", "5",
        ])
        assert code == EXIT_ERROR
        err = json.loads(capsys.readouterr().err)
        assert "error" in err and err["error"]["type"]


class TestSummarize:
    def test_single_instance_summary_matches_explain(self, tmp_path):
        data, schema = write_quadratic_inputs(tmp_path)
        queries = tmp_path / "queries.csv"
        queries.write_text("x\n0.5\n")
        out = tmp_path / "summary.csv"
        report_out = tmp_path / "report.json"
        args = ["--data", data, "--schema", schema, "--k", "2", "--m", "40",
                "--B", "40", "--kind", "gradient", "--seed", "3"]
        code = main(["summarize", *args, "--queries", str(queries),
                     "--threads", "1", "--out", str(out)])
        assert code == EXIT_OK
        rows = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
        header, row = rows[0].split(","), rows[1].split(",")
        entry = dict(zip(header, row))
        assert entry["feature"] == "x"
        # the single instance's |score| (y = x^2 at 0.5 -> derivative 1.0)
        assert float(entry["mean_abs_score"]) == pytest.approx(1.0, abs=1e-7)
        assert entry["instances_ok"] == "1"
        assert entry["low_success"] == "0"

    def test_two_instance_mean_abs(self, tmp_path):
        # gradients of x^2 at 0.5 and -1.5 are {1, -3}: mean |score| = 2
        data, schema = write_quadratic_inputs(tmp_path)
        queries = tmp_path / "queries.csv"
        queries.write_text("x\n0.5\n-1.5\n")
        out = tmp_path / "summary.csv"
        code = main([
            "summarize", "--data", data, "--schema", schema, "--queries", str(queries),
            "--k", "2", "--m", "40", "--B", "40", "--kind", "gradient",
            "--threads", "1", "--out", str(out),
        ])
        assert code == EXIT_OK
        rows = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
        entry = dict(zip(rows[0].split(","), rows[1].split(",")))
        assert float(entry["mean_abs_score"]) == pytest.approx(2.0, abs=1e-7)

    def test_null_feature_has_zero_mean_score(self, tmp_path):
        data, schema = write_mixed_inputs(tmp_path)
        queries = tmp_path / "queries.csv"
        queries.write_text("x1,x2,color\n0.1,0.9,g\n-0.4,-1.0,r\n")
        out = tmp_path / "summary.csv"
        code = main([
            "summarize", "--data", data, "--schema", schema, "--queries", str(queries),
            "--k", "1", "--m", "60", "--B", "40", "--kind", "gradient",
            "--threads", "1", "--out", str(out),
        ])
        assert code == EXIT_OK
        rows = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
        by_feature = {}
        for line in rows[1:]:
            cells = line.split(",")
            by_feature[cells[0]] = dict(zip(rows[0].split(","), cells))
        assert float(by_feature["x2"]["mean_abs_score"]) <= 1e-8

    def test_partial_failure_flags_and_exit_code(self, tmp_path, capsys):
        data, schema = write_quadratic_inputs(tmp_path)
        queries = tmp_path / "queries.csv"
        queries.write_text("x\n0.5\nnot_a_number\n")
        out = tmp_path / "summary.csv"
        code = main([
            "summarize", "--data", data, "--schema", schema, "--queries", str(queries),
            "--k", "2", "--m", "40", "--B", "20", "--threads", "1", "--out", str(out),
        ])
        assert code == EXIT_PARTIAL
        assert "warning" in capsys.readouterr().err
        rows = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
        entry = dict(zip(rows[0].split(","), rows[1].split(",")))
        assert entry["instances_failed"] == "1"
        assert entry["low_success"] == "1"  # 1 of 2 < 80%

    def test_threads_do_not_change_output(self, tmp_path):
        data, schema = write_mixed_inputs(tmp_path)
        queries = tmp_path / "queries.csv"
        queries.write_text("x1,x2,color\n0.1,0.9,g\n-0.4,-1.0,r\n1.0,0.0,b\n")
        payloads = []
        for threads, name in ((1, "s1.csv"), (3, "s3.csv")):
            out = tmp_path / name
            main([
                "summarize", "--data", data, "--schema", schema, "--queries", str(queries),
                "--k", "1", "--m", "60", "--B", "30", "--seed", "9",
                "--threads", str(threads), "--out", str(out),
            ])
            payloads.append(out.read_bytes())
        assert payloads[0] == payloads[1]


class TestSweepCommand:
    def test_smoke_grid(self, tmp_path):
        sweep_out = tmp_path / "sweep.csv"
        frontier_out = tmp_path / "frontier.csv"
        code = main([
            "sweep", "--k-list", "1,2", "--m-list", "24", "--c-list", "0.5,0.9",
            "--n", "300", "--p", "1", "--B", "16", "--seed", "3", "--threads", "1",
            "--sweep-out", str(sweep_out), "--frontier-out", str(frontier_out),
        ])
        assert code == EXIT_OK
        lines = sweep_out.read_text().splitlines()
        assert lines[0].startswith("# manifest")
        assert lines[1] == "method,k,m,c,avg_width,coverage,failed_points"
        assert len(lines) == 2 + 8  # 2 k * 1 m * 2 c * 2 methods

    def test_merge_appears_in_frontier(self, tmp_path):
        baseline = tmp_path / "baseline.csv"
        baseline.write_text("method,avg_width,coverage\nexternal,0.001,0.99\n")
        sweep_out = tmp_path / "sweep.csv"
        frontier_out = tmp_path / "frontier.csv"
        code = main([
            "sweep", "--k-list", "1", "--m-list", "24", "--c-list", "0.7",
            "--n", "300", "--p", "1", "--B", "16", "--seed", "3", "--threads", "1",
            "--merge", str(baseline),
            "--sweep-out", str(sweep_out), "--frontier-out", str(frontier_out),
        ])
        assert code == EXIT_OK
        text = frontier_out.read_text()
        assert "external" in text

    def test_invalid_grid_rejected(self, tmp_path, capsys):
        code = main([
            "sweep", "--k-list", "1", "--m-list", "8", "--c-list", "0.1",
            "--n", "100", "--p", "1", "--B", "8", "--threads", "1",
            "--sweep-out", str(tmp_path / "s.csv"),
            "--frontier-out", str(tmp_path / "f.csv"),
        ])
        assert code == EXIT_ERROR
        assert "error" in capsys.readouterr().err
