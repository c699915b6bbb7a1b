"""
DuckDB Warehouse for dllm_agent_lab

Keeps episode rows and regime metrics queryable by SQL across runs.
Re-analyzing a run replaces its rows (delete matching keys, then insert),
so the warehouse never double counts an episode.

Usage:
    from analysis.warehouse import upsert_frame, execute_query

    upsert_frame("lab.duckdb", episodes_df, "episodes")
    df = execute_query("lab.duckdb", "SELECT regime, AVG(turns) FROM episodes GROUP BY 1")
"""

import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Union

import duckdb
import pandas as pd

from core.utils import canonical_json


logger = logging.getLogger(__name__)


# ============================================
# Table Key Definitions
# ============================================

TABLE_KEYS: Dict[str, List[str]] = {
    'episodes': ['regime', 'task_id'],
    'metrics': ['regime'],
    'seeker_histogram': ['regime', 'seeker_calls'],
}


def clean_column_name(name: str) -> str:
    """Replace anything but letters, digits and underscores with underscores."""
    return re.sub(r'[^a-zA-Z0-9_]', '_', str(name))


def _table_exists(conn: duckdb.DuckDBPyConnection, table_name: str) -> bool:
    return conn.execute(
        "SELECT COUNT(*) FROM information_schema.tables WHERE table_name = ?",
        [table_name]
    ).fetchone()[0] > 0


def upsert_frame(
    duckdb_path: Union[str, Path],
    df: pd.DataFrame,
    table_name: str,
    key_columns: Optional[List[str]] = None,
) -> bool:
    """
    Upsert a DataFrame into a DuckDB table.

    1. If the table doesn't exist, create it from the frame
    2. Otherwise delete rows whose key matches an incoming row, then insert

    Args:
        duckdb_path: Path to the DuckDB file (created if missing)
        df: Rows to write
        table_name: Target table
        key_columns: Unique key; looked up in TABLE_KEYS when None,
                     full replace when still unknown

    Returns:
        True if successful, False otherwise
    """
    if df is None or df.empty:
        logger.warning(f"No data to upsert for {table_name}")
        return True

    df = df.copy()
    df.columns = [clean_column_name(col) for col in df.columns]
    # nested values (dicts, lists) are stored as JSON text
    for col in df.columns:
        if df[col].map(lambda v: isinstance(v, (dict, list))).any():
            df[col] = df[col].map(lambda v: canonical_json(v) if isinstance(v, (dict, list)) else v)
        if df[col].dtype == object:
            df[col] = df[col].astype("string")

    if key_columns is None:
        key_columns = TABLE_KEYS.get(table_name)
    if key_columns:
        missing = [k for k in key_columns if k not in df.columns]
        if missing:
            logger.warning(f"Key columns {missing} not found for {table_name}, falling back to replace")
            key_columns = None

    try:
        db_path = Path(duckdb_path)
        db_path.parent.mkdir(parents=True, exist_ok=True)
        conn = duckdb.connect(str(db_path))
        conn.register("incoming", df)

        if not _table_exists(conn, table_name):
            logger.info(f"Table {table_name} doesn't exist, creating...")
            conn.execute(f"CREATE TABLE {table_name} AS SELECT * FROM incoming")
        elif key_columns:
            match = " AND ".join(f"{table_name}.{k} = incoming.{k}" for k in key_columns)
            conn.execute(f"DELETE FROM {table_name} USING incoming WHERE {match}")
            conn.execute(f"INSERT INTO {table_name} SELECT * FROM incoming")
        else:
            logger.warning(f"No key columns for {table_name}, using full replace")
            conn.execute(f"CREATE OR REPLACE TABLE {table_name} AS SELECT * FROM incoming")

        conn.unregister("incoming")
        conn.close()
        logger.info(f"Upserted {len(df):,} rows to {table_name}")
        return True

    except Exception as e:
        logger.error(f"Failed to upsert {table_name}: {e}")
        return False


def get_table_row_count(duckdb_path: Union[str, Path], table_name: str) -> int:
    """Row count of a table, 0 if it doesn't exist."""
    try:
        conn = duckdb.connect(str(duckdb_path), read_only=True)
        result = conn.execute(f"SELECT COUNT(*) FROM {table_name}").fetchone()
        conn.close()
        return result[0] if result else 0
    except Exception:
        return 0


def execute_query(duckdb_path: Union[str, Path], query: str, params: Optional[List] = None) -> pd.DataFrame:
    """Run a read-only SQL query and return a DataFrame."""
    conn = duckdb.connect(str(duckdb_path), read_only=True)
    result = conn.execute(query, params or []).fetchdf()
    conn.close()
    return result
