"""
Database schema definitions for run provenance and GA-labelled dataset samples.
"""

CREATE_RUNS_TABLE = """
CREATE TABLE IF NOT EXISTS runs (
    run_id INTEGER PRIMARY KEY AUTOINCREMENT,
    run_key TEXT UNIQUE NOT NULL,
    command TEXT NOT NULL,
    config_hash TEXT NOT NULL,
    seed INTEGER NOT NULL,
    build TEXT NOT NULL,
    created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
);
"""

CREATE_DATASET_SAMPLES_TABLE = """
CREATE TABLE IF NOT EXISTS dataset_samples (
    sample_id INTEGER PRIMARY KEY AUTOINCREMENT,
    run_key TEXT NOT NULL,
    sample_index INTEGER NOT NULL CHECK(sample_index >= 0),
    seed INTEGER NOT NULL,
    N_roi INTEGER NOT NULL,
    N_bg INTEGER NOT NULL,
    r_D REAL NOT NULL,
    rho REAL NOT NULL,
    zeta_n REAL NOT NULL,
    P_p_n REAL NOT NULL,
    P_s_n REAL NOT NULL,
    nu_n REAL NOT NULL,
    L_s_n REAL NOT NULL,
    qvp REAL NOT NULL,
    feasible INTEGER NOT NULL CHECK(feasible IN (0, 1)),
    FOREIGN KEY (run_key) REFERENCES runs(run_key),
    UNIQUE(run_key, sample_index)
);
"""

CREATE_INDEXES = [
    "CREATE INDEX IF NOT EXISTS idx_samples_run_key ON dataset_samples(run_key);",
    "CREATE INDEX IF NOT EXISTS idx_runs_config_hash ON runs(config_hash);",
]
