import random
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from .helpers import write_csv
from obdascale.errors import DataError, InputOutputError, ValidationError
from obdascale.schema import ColumnRef, load_schema
from obdascale.stats import (
    literal_region_counts,
    region_counts_from_sets,
    scan_instance,
    venn_profile,
)

EW_SCHEMA = """
table exploration_wellbores(id:INTEGER, name:TEXT, year:INTEGER NULL, state:TEXT NULL)
pk exploration_wellbores(id)
"""


def test_fixed_domain_column_stats(tmp_path):
    schema = load_schema(EW_SCHEMA)
    write_csv(
        tmp_path,
        "exploration_wellbores",
        ["id", "name", "year", "state"],
        [[1, "a", 1997, "suspended"], [2, "b", 2001, "active"], [3, "c", 2001, "suspended"], [4, "d", None, None]],
    )
    state = ColumnRef("exploration_wellbores", "state")
    stats = scan_instance(schema, tmp_path, fixed={state})["exploration_wellbores"]
    col = stats.columns["state"]
    assert stats.rows == 4
    assert col.distinct == 2
    assert col.null_ratio == Fraction(1, 4)
    assert col.domain_values == ("suspended", "active")
    year = stats.columns["year"]
    assert year.distinct == 2 and year.min_numeric == 1997
    assert stats.columns["name"].domain_values is None


def test_empty_table(tmp_path):
    schema = load_schema(EW_SCHEMA)
    write_csv(tmp_path, "exploration_wellbores", ["id", "name", "year", "state"], [])
    stats = scan_instance(schema, tmp_path)["exploration_wellbores"]
    assert stats.rows == 0
    for col in stats.columns.values():
        assert col.distinct == 0 and col.null_ratio == 0


def test_backslash_n_is_null(tmp_path):
    schema = load_schema("table t(a:INTEGER NULL)")
    (tmp_path / "t.csv").write_text("a\n\\N\n5\n\n", encoding="utf-8")
    col = scan_instance(schema, tmp_path)["t"].columns["a"]
    assert (col.distinct, col.null_count, col.rows) == (1, 2, 3)


def test_decimal_and_date_minimum(tmp_path):
    schema = load_schema("table t(d:DECIMAL, day:DATE)")
    write_csv(tmp_path, "t", ["d", "day"], [["1.5", "2001-01-02"], ["0.25", "1999-12-31"], ["3", "2001-01-02"]])
    cols = scan_instance(schema, tmp_path)["t"].columns
    assert cols["d"].decimal_places == 2 and cols["d"].min_numeric == 25
    import datetime as dt

    assert cols["day"].min_numeric == dt.date(1999, 12, 31).toordinal()
    assert cols["day"].distinct == 2


def test_missing_file(tmp_path):
    with pytest.raises(InputOutputError, match="missing data file"):
        scan_instance(load_schema(EW_SCHEMA), tmp_path)


def test_coercion_failure_reports_row_and_column(tmp_path):
    schema = load_schema("table t(a:INTEGER, b:INTEGER)")
    write_csv(tmp_path, "t", ["a", "b"], [[1, 2], [3, "x"]])
    with pytest.raises(DataError, match=r"line 3, column b"):
        scan_instance(schema, tmp_path)


def test_header_must_match(tmp_path):
    schema = load_schema("table t(a:INTEGER, b:INTEGER)")
    write_csv(tmp_path, "t", ["b", "a"], [[1, 2]])
    with pytest.raises(DataError, match="header"):
        scan_instance(schema, tmp_path)


def test_duplicate_pk_rejected(tmp_path):
    schema = load_schema("table t(a:INTEGER, b:INTEGER)\npk t(a, b)")
    write_csv(tmp_path, "t", ["a", "b"], [[1, 2], [1, 3], [1, 2]])
    with pytest.raises(ValidationError, match="primary key"):
        scan_instance(schema, tmp_path)
    schema = load_schema("table t(a:INTEGER, b:INTEGER)\npk t(a)")
    with pytest.raises(ValidationError, match="primary key"):
        scan_instance(schema, tmp_path)


def test_null_in_non_nullable_rejected(tmp_path):
    schema = load_schema("table t(a:INTEGER)")
    write_csv(tmp_path, "t", ["a"], [[1], [None]])
    with pytest.raises(DataError, match="non-nullable"):
        scan_instance(schema, tmp_path)


def test_scan_independent_of_row_order(tmp_path, npd_schema, npd_dir):
    base = scan_instance(npd_schema, npd_dir)
    rng = random.Random(3)
    for table in npd_schema.tables:
        lines = (npd_dir / f"{table}.csv").read_text().splitlines()
        body = lines[1:]
        rng.shuffle(body)
        (tmp_path / f"{table}.csv").write_text("\n".join([lines[0]] + body) + "\n")
    shuffled = scan_instance(npd_schema, tmp_path, parallelism=4)
    assert shuffled == base


def test_venn_two_columns(tmp_path):
    schema = load_schema("table a(x:INTEGER)\ntable b(y:INTEGER NULL)")
    write_csv(tmp_path, "a", ["x"], [[1], [2], [3], [4], [4]])
    write_csv(tmp_path, "b", ["y"], [[3], [4], [5], [None]])
    A, B = ColumnRef("a", "x"), ColumnRef("b", "y")
    v = venn_profile({A, B}, tmp_path, schema)
    assert v.region_counts == {frozenset([A]): 2, frozenset([B]): 1, frozenset([A, B]): 2}


def test_venn_disjoint_wellbore_ids(npd_schema, npd_dir):
    dw, ew = ColumnRef("development_wellbores", "id"), ColumnRef("exploration_wellbores", "id")
    v = venn_profile({dw, ew}, npd_dir, npd_schema)
    assert v.region_counts[frozenset([dw, ew])] == 0
    assert v.region_counts[frozenset([dw])] == 150


def test_venn_singleton(npd_schema, npd_dir):
    fid = ColumnRef("fields", "fid")
    assert venn_profile({fid}, npd_dir, npd_schema).region_counts == {frozenset([fid]): 120}


def test_venn_cap(tmp_path):
    cols = [ColumnRef("t", f"c{i}") for i in range(13)]
    schema = load_schema("table t(" + ", ".join(f"c{i}:INTEGER" for i in range(13)) + ")")
    with pytest.raises(ValidationError, match="cap"):
        venn_profile(set(cols), tmp_path, schema)


@given(st.lists(st.sets(st.integers(0, 30), max_size=20), min_size=1, max_size=5))
def test_venn_partition_identity(sets):
    cols = [ColumnRef("t", f"c{i}") for i in range(len(sets))]
    regions = region_counts_from_sets(cols, sets)
    assert all(n >= 0 for n in regions.values())
    for c, s in zip(cols, sets):
        assert sum(n for h, n in regions.items() if c in h) == len(s)
    assert sum(regions.values()) == len(set().union(*sets))


@given(st.sets(st.integers(0, 20)), st.sets(st.integers(0, 20)))
def test_literal_formula_equals_partition_for_pairs(a, b):
    cols = [ColumnRef("t", "a"), ColumnRef("t", "b")]
    assert literal_region_counts(cols, [a, b]) == region_counts_from_sets(cols, [a, b])


def test_literal_formula_differs_for_three_columns():
    cols = [ColumnRef("t", n) for n in "abc"]
    sets = [{1, 2}, {1, 2}, {2}]
    partition = region_counts_from_sets(cols, sets)
    literal = literal_region_counts(cols, sets)
    ab = frozenset(cols[:2])
    # Value 1 is shared by a and b only; the literal reading also counts it under {a} and {b}.
    assert partition[ab] == 1 and literal[ab] == 1
    assert partition[frozenset([cols[0]])] == 0 and literal[frozenset([cols[0]])] == 1
