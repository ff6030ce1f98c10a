"""
Database manager for run provenance and checkpointed dataset samples.
"""

import logging
import sqlite3
from typing import Dict, List, Optional

import config
from database.schema import CREATE_DATASET_SAMPLES_TABLE, CREATE_INDEXES, CREATE_RUNS_TABLE

logger = logging.getLogger(__name__)

SAMPLE_FIELDS = (
    'seed', 'N_roi', 'N_bg', 'r_D', 'rho',
    'zeta_n', 'P_p_n', 'P_s_n', 'nu_n', 'L_s_n', 'qvp', 'feasible',
)


def make_run_key(command: str, config_hash: str, seed: int) -> str:
    """Runs with the same command, configuration and seed share a key, which is what makes resume work."""
    return f"{command}:{config_hash}:{seed}"


class ResultsDatabase:
    """Manages all database operations for recorded runs."""

    def __init__(self, db_path: str = None):
        """Initialize database manager."""
        self.db_path = db_path or config.DATABASE_PATH
        self.init_database()

    def get_connection(self) -> sqlite3.Connection:
        """Get a database connection."""
        conn = sqlite3.connect(self.db_path)
        conn.row_factory = sqlite3.Row
        return conn

    def init_database(self):
        """Initialize database tables and indexes."""
        conn = self.get_connection()
        cursor = conn.cursor()

        cursor.execute(CREATE_RUNS_TABLE)
        cursor.execute(CREATE_DATASET_SAMPLES_TABLE)
        for index_sql in CREATE_INDEXES:
            cursor.execute(index_sql)

        conn.commit()
        conn.close()

    # ==================== Run Operations ====================

    def register_run(self, command: str, config_hash: str, seed: int, build: str) -> str:
        """Record a run; an existing run with the same key is reused."""
        run_key = make_run_key(command, config_hash, seed)
        conn = self.get_connection()
        cursor = conn.cursor()
        try:
            cursor.execute("""
                INSERT INTO runs (run_key, command, config_hash, seed, build)
                VALUES (?, ?, ?, ?, ?)
            """, (run_key, command, config_hash, seed, build))
            conn.commit()
        except sqlite3.IntegrityError:
            logger.info(f"Resuming run {run_key}")
        finally:
            conn.close()
        return run_key

    def get_run(self, run_key: str) -> Optional[Dict]:
        conn = self.get_connection()
        cursor = conn.cursor()
        cursor.execute("SELECT * FROM runs WHERE run_key = ?", (run_key,))
        row = cursor.fetchone()
        conn.close()
        return dict(row) if row else None

    # ==================== Dataset Operations ====================

    def add_sample(self, run_key: str, sample_index: int, sample: Dict) -> bool:
        """Store one labelled sample. Returns False if it was already stored."""
        conn = self.get_connection()
        cursor = conn.cursor()
        try:
            cursor.execute(f"""
                INSERT INTO dataset_samples (run_key, sample_index, {', '.join(SAMPLE_FIELDS)})
                VALUES (?, ?, {', '.join('?' for _ in SAMPLE_FIELDS)})
            """, (run_key, sample_index, *(sample[name] for name in SAMPLE_FIELDS)))
            conn.commit()
            return True
        except sqlite3.IntegrityError:
            return False
        finally:
            conn.close()

    def get_samples(self, run_key: str) -> Dict[int, Dict]:
        """Stored samples of a run, keyed by sample index."""
        conn = self.get_connection()
        cursor = conn.cursor()
        cursor.execute(f"""
            SELECT sample_index, {', '.join(SAMPLE_FIELDS)}
            FROM dataset_samples
            WHERE run_key = ?
            ORDER BY sample_index
        """, (run_key,))
        rows = cursor.fetchall()
        conn.close()
        return {row['sample_index']: {name: row[name] for name in SAMPLE_FIELDS} for row in rows}

    def count_samples(self, run_key: str) -> int:
        conn = self.get_connection()
        cursor = conn.cursor()
        cursor.execute("SELECT COUNT(*) FROM dataset_samples WHERE run_key = ?", (run_key,))
        count = cursor.fetchone()[0]
        conn.close()
        return count

    def list_runs(self) -> List[Dict]:
        conn = self.get_connection()
        cursor = conn.cursor()
        cursor.execute("SELECT * FROM runs ORDER BY run_id")
        rows = cursor.fetchall()
        conn.close()
        return [dict(row) for row in rows]
