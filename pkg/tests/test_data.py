"""Ingestion, schema validation, and preprocessing transforms."""

import io
import json
import math

import numpy as np
import pytest

from localexplain.data import (
    DataError,
    FeatureSchema,
    FeatureSpec,
    OneHotLayout,
    QueryDataset,
    encode_one_hot,
    from_log_odds,
    load_dataset,
    standardize,
    to_log_odds,
)


def two_feature_schema(output_kind="raw"):
    return FeatureSchema(
        features=(
            FeatureSpec(name="x1", kind="continuous"),
            FeatureSpec(name="x2", kind="continuous"),
        ),
        output_kind=output_kind,
    )


def mixed_schema():
    return FeatureSchema(
        features=(
            FeatureSpec(name="x1", kind="continuous"),
            FeatureSpec(name="x2", kind="continuous"),
            FeatureSpec(
                name="color", kind="categorical", categories=("a", "b", "c"), baseline="a"
            ),
        )
    )


class TestSchemaValidation:
    def test_duplicate_names_rejected(self):
        with pytest.raises(DataError):
            FeatureSchema(
                (FeatureSpec("x", "continuous"), FeatureSpec("x", "ordinal")),
            )

    def test_categorical_needs_two_categories(self):
        with pytest.raises(DataError):
            FeatureSpec("c", "categorical", categories=("only",), baseline="only")

    def test_baseline_must_be_declared(self):
        with pytest.raises(DataError):
            FeatureSpec("c", "categorical", categories=("a", "b"), baseline="z")

    def test_delta_forbidden_on_categorical(self):
        with pytest.raises(DataError):
            FeatureSpec("c", "categorical", delta=1.0, categories=("a", "b"), baseline="a")

    def test_delta_must_be_positive(self):
        with pytest.raises(DataError):
            FeatureSpec("x", "continuous", delta=0.0)

    def test_json_roundtrip_uses_exact_keys(self):
        schema = FeatureSchema(
            features=(
                FeatureSpec(name="x1", kind="continuous", delta=0.25),
                FeatureSpec(
                    name="color", kind="categorical", categories=("a", "b"), baseline="b"
                ),
            ),
            output_kind="probability",
        )
        raw = json.loads(schema.to_json())
        assert set(raw) == {"features", "output_kind"}
        assert raw["features"][0] == {"name": "x1", "kind": "continuous", "delta": 0.25}
        assert raw["features"][1] == {
            "name": "color", "kind": "categorical", "categories": ["a", "b"], "baseline": "b",
        }
        assert FeatureSchema.from_json(schema.to_json()) == schema


class TestLoadDataset:
    def test_three_row_csv(self):
        csv_text = "x1,x2,f\n1,2,0.5\n3,4,1.5\n5,6,2.5\n"
        ds = load_dataset(csv_text.encode(), two_feature_schema())
        assert ds.n == 3
        np.testing.assert_allclose(ds.numeric, [[1, 2], [3, 4], [5, 6]])
        np.testing.assert_allclose(ds.outputs, [0.5, 1.5, 2.5])

    def test_unknown_category_names_row_and_column(self):
        csv_text = "x1,x2,color,f\n1,2,a,0\n3,4,blue,1\n"
        with pytest.raises(DataError) as err:
            load_dataset(csv_text.encode(), mixed_schema())
        assert err.value.row == 2
        assert err.value.column == "color"
        assert "blue" in str(err.value)

    def test_probability_outputs_accepted(self):
        csv_text = "x1,x2,f\n1,2,0.2\n3,4,0.7\n"
        ds = load_dataset(csv_text.encode(), two_feature_schema("probability"))
        np.testing.assert_allclose(ds.outputs, [0.2, 0.7])

    def test_probability_out_of_range_rejected(self):
        csv_text = "x1,x2,f\n1,2,0.2\n3,4,1.7\n"
        with pytest.raises(DataError):
            load_dataset(csv_text.encode(), two_feature_schema("probability"))

    def test_missing_column(self):
        with pytest.raises(DataError, match="x2"):
            load_dataset(b"x1,f\n1,0\n", two_feature_schema())

    def test_missing_output_column(self):
        with pytest.raises(DataError, match="'f'"):
            load_dataset(b"x1,x2\n1,2\n", two_feature_schema())

    def test_non_numeric_continuous_value(self):
        with pytest.raises(DataError) as err:
            load_dataset(b"x1,x2,f\n1,2,0\nbad,4,1\n", two_feature_schema())
        assert err.value.row == 2
        assert err.value.column == "x1"

    def test_empty_dataset(self):
        with pytest.raises(DataError):
            load_dataset(b"x1,x2,f\n", two_feature_schema())

    def test_output_column_override(self):
        ds = load_dataset(b"x1,x2,score\n1,2,9\n", two_feature_schema(), output_column="score")
        assert ds.outputs[0] == 9

    def test_comment_lines_before_header_are_skipped(self):
        ds = load_dataset(b"# manifest: {}\nx1,x2,f\n1,2,3\n", two_feature_schema())
        assert ds.n == 1

    def test_missing_baseline_defaults_to_most_frequent(self):
        schema = FeatureSchema(
            (FeatureSpec("c", "categorical", categories=("a", "b")),)
        )
        ds = load_dataset(b"c,f\na,0\nb,1\nb,2\n", schema)
        assert ds.schema.feature("c").baseline == "b"


class TestStandardize:
    def test_one_two_three(self):
        # sample (n-1) convention: mean 2, stddev sqrt((1+0+1)/2) = 1
        ds = load_dataset(b"x1,x2,f\n1,0,0\n2,0,0\n3,0,0\n", two_feature_schema())
        out, stats = standardize(ds)
        np.testing.assert_allclose(out.numeric[:, 0], [-1.0, 0.0, 1.0], atol=1e-12)
        assert stats.mean("x1") == pytest.approx(2.0)
        assert stats.stddev("x1") == pytest.approx(1.0)

    def test_constant_column_guard(self):
        ds = load_dataset(b"x1,x2,f\n5,0,0\n5,1,0\n5,2,0\n", two_feature_schema())
        out, stats = standardize(ds)
        np.testing.assert_allclose(out.numeric[:, 0], [0.0, 0.0, 0.0])
        assert stats.stddev("x1") == 1.0

    def test_categorical_untouched(self):
        ds = load_dataset(b"x1,x2,color,f\n1,2,b,0\n3,4,c,1\n", mixed_schema())
        out, _ = standardize(ds)
        np.testing.assert_array_equal(out.codes, ds.codes)

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        csv_text = "x1,x2,f\n" + "\n".join(
            f"{rng.normal()},{rng.normal()},{rng.normal()}" for _ in range(20)
        )
        ds = load_dataset(csv_text.encode(), two_feature_schema())
        once, _ = standardize(ds)
        twice, _ = standardize(once)
        np.testing.assert_allclose(twice.numeric, once.numeric, atol=1e-12)

    def test_pipeline_preserves_rows_and_outputs(self):
        csv_text = "x1,x2,color,f\n1,2,a,0.1\n3,4,b,0.9\n5,6,c,0.4\n"
        ds = load_dataset(csv_text.encode(), mixed_schema())
        std, _ = standardize(ds)
        table = encode_one_hot(std)
        assert table.shape[0] == ds.n
        np.testing.assert_array_equal(std.outputs, ds.outputs)


class TestOneHot:
    def test_non_baseline_category(self):
        layout = OneHotLayout(mixed_schema())
        row = layout.encode(np.array([[0.0, 0.0]]), np.array([[1]]))[0]  # "b"
        np.testing.assert_array_equal(row[2:], [1.0, 0.0])

    def test_baseline_is_zero_vector(self):
        layout = OneHotLayout(mixed_schema())
        row = layout.encode(np.array([[0.0, 0.0]]), np.array([[0]]))[0]  # "a"
        np.testing.assert_array_equal(row[2:], [0.0, 0.0])

    def test_width_two_continuous_plus_three_categories(self):
        assert OneHotLayout(mixed_schema()).width == 4

    def test_at_most_one_indicator_per_block(self):
        ds = load_dataset(
            b"x1,x2,color,f\n1,2,a,0\n3,4,b,0\n5,6,c,0\n", mixed_schema()
        )
        table = encode_one_hot(ds)
        block = table[:, 2:]
        assert (block.sum(axis=1) <= 1).all()
        assert set(np.unique(block)) <= {0.0, 1.0}

    def test_column_order_deterministic(self):
        layout = OneHotLayout(mixed_schema())
        assert layout.column_names == ("x1", "x2", "color=b", "color=c")


class TestLogOdds:
    def test_half_maps_to_zero(self):
        assert to_log_odds(0.5) == pytest.approx(0.0, abs=1e-12)

    def test_one_maps_to_clamped_value(self):
        expected = math.log((1 - 1e-6) / 1e-6)
        assert to_log_odds(1.0) == pytest.approx(expected, rel=1e-9)
        assert to_log_odds(1.0) == pytest.approx(13.8155, abs=1e-4)

    def test_inverse_of_zero_is_half(self):
        assert from_log_odds(0.0) == pytest.approx(0.5, abs=1e-15)

    def test_roundtrip_on_clamped_range(self):
        p = np.linspace(1e-6, 1 - 1e-6, 1001)
        back = from_log_odds(to_log_odds(p))
        np.testing.assert_allclose(back, p, atol=1e-12)

    def test_strictly_monotone(self):
        p = np.linspace(2e-6, 1 - 2e-6, 533)
        z = to_log_odds(p)
        assert (np.diff(z) > 0).all()


class TestQueryDataset:
    def test_non_finite_output_rejected(self):
        schema = two_feature_schema()
        with pytest.raises(DataError):
            QueryDataset(schema, np.zeros((2, 2)), np.zeros((2, 0), dtype=np.int64),
                         np.array([1.0, np.nan]))

    def test_row_mapping_roundtrip(self):
        ds = load_dataset(b"x1,x2,color,f\n1.5,2,c,0\n", mixed_schema())
        assert ds.row_mapping(0) == {"x1": 1.5, "x2": 2.0, "color": "c"}
