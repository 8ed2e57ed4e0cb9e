import numpy as np
import pytest

from anchormem.data import (
    CATEGORICAL,
    EmpiricalDistribution,
    FeatureSchema,
    NUMERIC,
    SlotSpec,
    discretize,
    ingest_csv,
    ingest_text,
    load_embedding_table,
    quantile_edges,
    token_schema,
)
from anchormem.errors import ConfigError, DomainError, IngestionError


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


SCHEMA_NUM = {"columns": [{"name": "a", "kind": "numeric", "bins": 2}], "label": "y"}


class TestIngestCsv:
    def test_two_bin_quantile_codes(self, tmp_path):
        # sorted values 1,2,7,8; the 2-bin edge sits at the median 4.5
        path = write(tmp_path, "d.csv", "a,y\n1,0\n2,0\n7,1\n8,1\n")
        result = ingest_csv(path, SCHEMA_NUM)
        assert result.schema[0].bin_edges == (4.5, 8.0)
        assert [x[0] for x in result.instances] == [0, 0, 1, 1]

    def test_categorical_first_seen_order(self, tmp_path):
        path = write(
            tmp_path,
            "d.csv",
            "c,y\na,0\nb,0\na,1\n",
        )
        result = ingest_csv(path, {"columns": [{"name": "c", "kind": "categorical"}], "label": "y"})
        assert [x[0] for x in result.instances] == [0, 1, 0]
        assert result.schema[0].cardinality == 2

    def test_header_only_is_an_error(self, tmp_path):
        path = write(tmp_path, "d.csv", "a,y\n")
        with pytest.raises(IngestionError):
            ingest_csv(path, SCHEMA_NUM)

    def test_missing_label_column(self, tmp_path):
        path = write(tmp_path, "d.csv", "a,b\n1,2\n")
        with pytest.raises(IngestionError):
            ingest_csv(path, SCHEMA_NUM)

    def test_unparseable_rows_dropped_and_counted(self, tmp_path):
        path = write(tmp_path, "d.csv", "a,y\n1,0\nnope,0\n2,1\n7,1\n8,0\n")
        result = ingest_csv(path, SCHEMA_NUM)
        assert result.dropped_rows == 1
        assert len(result.instances) == 4

    def test_all_rows_dropped(self, tmp_path):
        path = write(tmp_path, "d.csv", "a,y\nx,0\ny,1\n")
        with pytest.raises(IngestionError):
            ingest_csv(path, SCHEMA_NUM)

    def test_quoted_cells(self, tmp_path):
        path = write(
            tmp_path,
            "d.csv",
            'c,y\n"north, east",0\nsouth,1\n"north, east",1\n',
        )
        result = ingest_csv(path, {"columns": [{"name": "c", "kind": "categorical"}], "label": "y"})
        assert [x[0] for x in result.instances] == [0, 1, 0]

    def test_label_encoding_first_seen(self, tmp_path):
        path = write(tmp_path, "d.csv", "a,y\n1,hi\n2,lo\n7,hi\n8,hi\n")
        result = ingest_csv(path, SCHEMA_NUM)
        assert result.labels == [0, 1, 0, 0]
        assert result.label_names == ("hi", "lo")

    def test_round_trip_is_idempotent(self, tmp_path):
        path = write(
            tmp_path,
            "d.csv",
            "a,c,y\n" + "".join(f"{v},{'ab'[v % 2]},0\n" for v in (3, 1, 4, 1, 5, 9, 2, 6)),
        )
        config = {
            "columns": [
                {"name": "a", "kind": "numeric", "bins": 2},
                {"name": "c", "kind": "categorical"},
            ],
            "label": "y",
        }
        first = ingest_csv(path, config)
        emitted = write(
            tmp_path,
            "codes.csv",
            "a,c,y\n" + "".join(f"{x[0]},{x[1]},0\n" for x in first.instances),
        )
        second = ingest_csv(emitted, config)
        assert second.instances == first.instances


class TestDiscretize:
    slot = SlotSpec("a", NUMERIC, 3, bin_edges=(3.0, 6.0, 9.0))

    def test_interior_value(self):
        assert discretize(5.0, self.slot) == 1

    def test_minimum_lands_in_first_bin(self):
        assert discretize(1.0, self.slot) == 0
        assert discretize(3.0, self.slot) == 0

    def test_beyond_max_lands_in_last_bin(self):
        assert discretize(9.0, self.slot) == 2
        assert discretize(99.0, self.slot) == 2

    def test_unknown_category_strict(self):
        slot = SlotSpec("c", CATEGORICAL, 2, vocab=("a", "b"))
        with pytest.raises(DomainError):
            discretize("z", slot, strict=True)

    def test_unknown_category_lenient(self):
        slot = SlotSpec("c", CATEGORICAL, 3, vocab=("a", "b"), other_code=2)
        assert discretize("z", slot, strict=False) == 2


def test_quantile_edges_balance_occupancy():
    rng = np.random.default_rng(5)
    values = rng.normal(size=400)
    for bins in (2, 4, 5):
        edges = quantile_edges(values, bins)
        codes = [discretize(v, SlotSpec("a", NUMERIC, len(edges), bin_edges=edges)) for v in values]
        counts = np.bincount(codes, minlength=len(edges))
        # continuous draws have no duplicated edge values, so bins stay balanced
        assert counts.max() - counts.min() <= np.ceil(len(values) / bins) - np.floor(
            len(values) / bins
        ) + 1


def test_bad_edges_rejected():
    with pytest.raises(ConfigError):
        SlotSpec("a", NUMERIC, 2, bin_edges=(5.0, 5.0))


class TestEmpiricalDistribution:
    schema = FeatureSchema(
        (
            SlotSpec("a", CATEGORICAL, 3, vocab=("x", "y", "z")),
            SlotSpec("b", CATEGORICAL, 2, vocab=("n", "p")),
        )
    )

    def test_frequencies_normalize(self):
        dist = EmpiricalDistribution.from_instances(self.schema, [(0, 0), (1, 1), (0, 1)])
        for p in dist.probs:
            assert abs(p.sum() - 1.0) < 1e-9
        assert dist.pools[0].tolist() == [0, 1]  # z never observed
        assert dist.slot_probability(0, 0) == pytest.approx(2 / 3)

    def test_code_moments(self):
        dist = EmpiricalDistribution.uniform(self.schema)
        assert dist.code_means[0] == pytest.approx(1.0)
        assert dist.code_stds[0] == pytest.approx(np.sqrt(2 / 3))
        assert dist.code_means[1] == pytest.approx(0.5)

    def test_schema_hash_is_stable_and_sensitive(self):
        other = FeatureSchema(self.schema.slots[:1])
        assert self.schema.hash() == self.schema.hash()
        assert self.schema.hash() != other.hash()


class TestEmbeddingTable:
    def test_load_and_shape(self, tmp_path):
        path = write(tmp_path, "emb.tsv", "cat\t1.0 0.0\ndog\t0.9 0.1\nsky\t0.0 1.0\n")
        table = load_embedding_table(path)
        assert table.size == 3 and table.dim == 2
        assert table.ids == {"cat": 0, "dog": 1, "sky": 2}

    def test_nearest_includes_self_first(self, tmp_path):
        path = write(tmp_path, "emb.tsv", "cat\t1.0 0.0\ndog\t0.9 0.1\nsky\t0.0 1.0\n")
        table = load_embedding_table(path)
        near = table.nearest(0, 2)
        assert near[0] == 0 and near[1] == 1

    def test_dimension_mismatch(self, tmp_path):
        path = write(tmp_path, "emb.tsv", "cat\t1.0 0.0\ndog\t0.9\n")
        with pytest.raises(IngestionError):
            load_embedding_table(path)

    def test_empty_table(self, tmp_path):
        path = write(tmp_path, "emb.tsv", "")
        with pytest.raises(IngestionError):
            load_embedding_table(path)


class TestIngestText:
    def table(self, tmp_path):
        path = write(tmp_path, "emb.tsv", "good\t1 0\nbad\t-1 0\nfilm\t0 1\n")
        return load_embedding_table(path)

    def test_pad_and_truncate(self, tmp_path):
        table = self.table(tmp_path)
        out = ingest_text(["good film", "bad good film bad"], table, arity=3)
        assert out[0] == (0, 2, 3)  # pad code is table size
        assert out[1] == (1, 0, 2)

    def test_unknown_tokens_skipped_by_default(self, tmp_path):
        table = self.table(tmp_path)
        assert ingest_text(["good unknown film"], table, arity=3)[0] == (0, 2, 3)

    def test_unknown_tokens_strict(self, tmp_path):
        table = self.table(tmp_path)
        with pytest.raises(DomainError):
            ingest_text(["good unknown"], table, arity=3, strict=True)

    def test_token_schema_carries_pad(self, tmp_path):
        table = self.table(tmp_path)
        schema = token_schema(table, arity=2)
        assert schema.arity == 2
        assert schema[0].cardinality == table.size + 1
        schema.validate_instance((0, 3))


def test_lenient_ingest_reserves_an_other_code(tmp_path):
    path = write(tmp_path, "d.csv", "c,y\na,0\nb,1\n")
    result = ingest_csv(
        path,
        {"columns": [{"name": "c", "kind": "categorical"}], "label": "y"},
        reserve_other=True,
    )
    slot = result.schema[0]
    assert slot.cardinality == 3
    assert slot.other_code == 2
    assert discretize("unseen", slot, strict=False) == 2
