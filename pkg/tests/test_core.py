"""Tests for ambient configuration, errors and shared utilities."""

import logging

import pytest

from core.config import (
    ConfigurationError,
    NumericError,
    TraceSchemaError,
    get_config,
    load_run_config,
    setup_logging,
)
from core.utils import canonical_json, derive_seed, directory_hash, read_jsonl, stable_hash, write_jsonl


# ============================================
# Errors
# ============================================


class TestErrors:
    """Tests for the lab's error types."""

    def test_configuration_error_format(self):
        error = ConfigurationError(message="Bad value", fix="Use a good value")
        text = str(error)
        assert "CONFIGURATION ERROR" in text
        assert "Bad value" in text
        assert "HOW TO FIX:\nUse a good value" in text

    def test_configuration_error_without_fix(self):
        assert "HOW TO FIX" not in str(ConfigurationError(message="Bad value"))

    def test_numeric_error_names_location(self):
        error = NumericError("Non-finite gradient", where="out_proj.weight")
        assert error.where == "out_proj.weight"
        assert "out_proj.weight" in str(error)

    def test_trace_schema_error_line(self):
        error = TraceSchemaError("missing field 'step'", 12)
        assert error.line_number == 12
        assert str(error).startswith("line 12:")


# ============================================
# Configuration
# ============================================


class TestGetConfig:
    """Tests for get_config and setup_logging."""

    def test_reads_environment(self, tmp_path):
        config = get_config(force_reload=True)
        assert config.log_dir == tmp_path / "logs"
        assert config.data_dir == tmp_path / "runs"
        assert config.log_level == "INFO"

    def test_invalid_level(self, monkeypatch):
        monkeypatch.setenv("LAB_LOG_LEVEL", "LOUD")
        with pytest.raises(ConfigurationError):
            get_config(force_reload=True)

    def test_cached(self):
        assert get_config(force_reload=True) is get_config()

    def test_setup_logging_writes_file(self, tmp_path):
        config = get_config(force_reload=True)
        setup_logging(config, name="unit")
        logging.getLogger("tests.core").info("hello")
        for handler in logging.getLogger().handlers:
            handler.flush()
        assert "hello" in (tmp_path / "logs" / "unit.log").read_text(encoding="utf-8")


class TestLoadRunConfig:
    """Tests for load_run_config."""

    def test_none(self):
        assert load_run_config(None) == {}

    def test_json(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text('{"tool-cap": 12, "regime": "ar"}', encoding="utf-8")
        assert load_run_config(path) == {"tool_cap": 12, "regime": "ar"}

    def test_key_value(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# budget\nt_max = 15\nregime=ar\nlam=0.5\nspan_aware=false\n", encoding="utf-8")
        assert load_run_config(path) == {"t_max": 15, "regime": "ar", "lam": 0.5, "span_aware": False}

    @pytest.mark.parametrize("text", ["{not json", "seed 7"])
    def test_malformed(self, tmp_path, text):
        path = tmp_path / "run.cfg"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_run_config(path)

    def test_missing(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_run_config(tmp_path / "nope.cfg")


# ============================================
# Utilities
# ============================================


class TestHashing:
    """Tests for canonical_json, stable_hash, derive_seed and directory_hash."""

    def test_key_order_irrelevant(self):
        assert canonical_json({"b": 1, "a": [1, 2]}) == '{"a":[1,2],"b":1}'
        assert stable_hash({"b": 1, "a": 2}) == stable_hash({"a": 2, "b": 1})

    def test_derive_seed(self):
        assert derive_seed(7, "corrupt", 3) == derive_seed(7, "corrupt", 3)
        assert derive_seed(7, "corrupt", 3) != derive_seed(7, "corrupt", 4)
        assert derive_seed(7, "corrupt") != derive_seed(8, "corrupt")
        assert 0 <= derive_seed(7, "x") < 2 ** 63

    def test_directory_hash_skips_manifest(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for root, stamp in ((a, "1"), (b, "2")):
            write_jsonl(root / "rows.jsonl", [{"x": 1}])
            (root / "manifest.json").write_text(stamp, encoding="utf-8")
        assert directory_hash(a) == directory_hash(b)
        write_jsonl(b / "rows.jsonl", [{"x": 2}])
        assert directory_hash(a) != directory_hash(b)


class TestJsonl:
    """Tests for write_jsonl and read_jsonl."""

    def test_round_trip(self, tmp_path):
        rows = [{"b": 1, "a": "x"}, {"c": [1, 2]}]
        path = tmp_path / "nested" / "rows.jsonl"
        assert write_jsonl(path, rows) == 2
        assert read_jsonl(path) == rows
        assert path.read_text(encoding="utf-8").splitlines()[0] == '{"a":"x","b":1}'
