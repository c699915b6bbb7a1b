"""Tests for the DuckDB warehouse."""

import pandas as pd
import pytest

from analysis.metrics import episodes_frame
from analysis.warehouse import clean_column_name, execute_query, get_table_row_count, upsert_frame


@pytest.fixture
def db_path(tmp_path):
    return tmp_path / "warehouse" / "lab.duckdb"


class TestCleanColumnName:
    """Tests for clean_column_name."""

    @pytest.mark.parametrize("raw, clean", [("Tool Calls", "Tool_Calls"), ("Steps/Action", "Steps_Action"), ("ok_1", "ok_1")])
    def test_clean(self, raw, clean):
        assert clean_column_name(raw) == clean


class TestUpsertFrame:
    """Tests for upsert_frame."""

    def test_creates_table(self, db_path, make_record):
        df = episodes_frame([make_record(task_id="a"), make_record(task_id="b")])
        assert upsert_frame(db_path, df, "episodes")
        assert get_table_row_count(db_path, "episodes") == 2

    def test_replaces_by_key(self, db_path, make_record):
        upsert_frame(db_path, episodes_frame([make_record(task_id="a", tool_calls=1), make_record(task_id="b")]), "episodes")
        upsert_frame(db_path, episodes_frame([make_record(task_id="a", tool_calls=5)]), "episodes")
        assert get_table_row_count(db_path, "episodes") == 2
        df = execute_query(db_path, "SELECT tool_calls FROM episodes WHERE task_id = ?", ["a"])
        assert df["tool_calls"].tolist() == [5]

    def test_regimes_do_not_collide(self, db_path, make_record):
        upsert_frame(db_path, episodes_frame([make_record(task_id="a", regime="ar")]), "episodes")
        upsert_frame(db_path, episodes_frame([make_record(task_id="a", regime="diffusion")]), "episodes")
        assert get_table_row_count(db_path, "episodes") == 2

    def test_unknown_table_replaces(self, db_path):
        upsert_frame(db_path, pd.DataFrame({"x": [1, 2]}), "scratch")
        upsert_frame(db_path, pd.DataFrame({"x": [3]}), "scratch")
        assert execute_query(db_path, "SELECT x FROM scratch")["x"].tolist() == [3]

    def test_nested_values_stored_as_json(self, db_path):
        df = pd.DataFrame({"regime": ["ar"], "budget": [{"t_max": 15}]})
        upsert_frame(db_path, df, "metrics")
        stored = execute_query(db_path, "SELECT budget FROM metrics")["budget"].iloc[0]
        assert stored == '{"t_max":15}'

    def test_empty_frame(self, db_path):
        assert upsert_frame(db_path, pd.DataFrame(), "episodes")
        assert get_table_row_count(db_path, "episodes") == 0
