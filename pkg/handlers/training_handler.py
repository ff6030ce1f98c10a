"""
Optimization and learning commands: optimize, gen-dataset, train, predict.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import partial
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

import config
from core.learner import load_model, normalize_targets, predict, save_model, train
from core.optimizer import OptResult, baseline_ep, baseline_mp, solve, solve_with_baselines
from core.secrecy_analysis import intercept_probability, qvp
from core.system_model import ImageSpec
from database.db_manager import ResultsDatabase
from utils.constants import (
    DATASET_COLUMNS, DATASET_INPUT_COLUMNS, DATASET_TARGET_COLUMNS, TX_COLUMNS,
)
from utils.reports import format_opt_report, format_qvp_report, format_tx, read_table, write_table
from utils.run_config import ConfigError, RunConfig

logger = logging.getLogger(__name__)


def _result_row(label: str, scenario: str, result: OptResult) -> Dict:
    tx = result.tx_star
    row = {'label': label, 'scenario': scenario}
    row.update({name: getattr(tx, name) for name in TX_COLUMNS})
    row.update({'qvp': result.qvp_star, 'ip': result.ip_star, 'feasible': int(result.feasible),
                'evaluations': result.evaluations})
    return row


def _single_scenario(run: RunConfig, command: str):
    scenarios = run.scenarios()
    if len(scenarios) != 1:
        raise ConfigError(f"scenario.mode: {command} needs a single scenario (nce or ce)")
    return scenarios[0]


# ==================== optimize ====================

def optimize_scenario(run: RunConfig, scenario, rng: np.random.Generator) -> List[tuple]:
    """[(label, OptResult)] for one scenario, following optimizer.baseline."""
    problem = run.opt_problem(scenario)
    settings = run.ga_settings()
    pinned = dict(run.optimizer.pinned)
    baseline = run.optimizer.baseline
    if baseline == 'mp':
        return [('MP', baseline_mp(problem, rng, settings, pinned))]
    if baseline == 'ep':
        return [('EP', baseline_ep(problem, rng, settings, pinned))]
    if pinned:
        return [('GA', solve(problem, rng, settings, pinned))]
    full, mp, ep = solve_with_baselines(problem, rng, settings)
    return [('GA', full), ('MP', mp), ('EP', ep)]


def cmd_optimize(run: RunConfig, out: Optional[str] = None) -> str:
    rng = np.random.default_rng(run.seed)
    reports, rows = [], []
    for scenario in run.scenarios():
        for label, result in optimize_scenario(run, scenario, rng):
            name = f"{label} / {scenario.mode.value.upper()}"
            reports.append(format_opt_report(name, result, run.system.sigma_n))
            rows.append(_result_row(label, scenario.mode.value, result))
    if out:
        write_table(pd.DataFrame(rows), out, run.config_hash(), run.seed, "optimize")
    return "\n".join(reports)


# ==================== gen-dataset ====================

def sample_seeds(seed: int, samples: int) -> List[int]:
    """One reproducible integer seed per sample index."""
    children = np.random.SeedSequence(seed).spawn(samples)
    return [int(child.generate_state(1)[0]) for child in children]


def label_sample(run: RunConfig, index_seed) -> Dict:
    """Draw one image / channel configuration and label it with the GA optimum."""
    index, seed = index_seed
    rng = np.random.default_rng(seed)
    ds = run.dataset
    N_roi = int(rng.choice(ds.N_roi_choices))
    N_bg = int(rng.integers(ds.N_bg_range[0], ds.N_bg_range[1] + 1))
    r_D = float(rng.uniform(*ds.r_D_range))
    rho = float(rng.uniform(*ds.rho_range))

    cfg = replace(run.system_config(), r_D=r_D, rho=rho)
    img = ImageSpec(N_roi=N_roi, N_bg=N_bg, D_lim=run.image.D_lim)
    scenario = _single_scenario(run, "gen-dataset")
    result = solve(run.opt_problem(scenario, img=img, cfg=cfg), rng, run.ga_settings())
    targets = normalize_targets(result.tx_star, cfg, N_roi)

    sample = {'sample': index, 'seed': seed, 'N_roi': N_roi, 'N_bg': N_bg, 'r_D': r_D, 'rho': rho}
    sample.update(dict(zip(DATASET_TARGET_COLUMNS, targets)))
    sample.update({'qvp': result.qvp_star, 'feasible': int(result.feasible)})
    return sample


def generate_dataset(run: RunConfig, db_path: Optional[str] = None,
                     workers: Optional[int] = None) -> pd.DataFrame:
    """
    Label run.dataset.samples configurations.

    With a database, finished samples are stored as they complete and a
    rerun with the same configuration and seed only labels the missing ones.
    """
    _single_scenario(run, "gen-dataset")
    seeds = sample_seeds(run.seed, run.dataset.samples)
    done: Dict[int, Dict] = {}
    database, run_key = None, None
    if db_path:
        database = ResultsDatabase(db_path)
        run_key = database.register_run("gen-dataset", run.config_hash(), run.seed, config.BUILD_ID)
        done = database.get_samples(run_key)
        if done:
            logger.info(f"Resuming gen-dataset with {len(done)} of {len(seeds)} samples already labelled")

    pending = [(i, s) for i, s in enumerate(seeds) if i not in done]
    label = partial(label_sample, run)
    workers = max(1, workers or config.WORKERS)

    def store(sample: Dict):
        done[sample['sample']] = sample
        if database is not None:
            database.add_sample(run_key, sample['sample'], sample)
        if len(done) % config.DATASET_LOG_EVERY == 0:
            logger.info(f"Labelled {len(done)}/{len(seeds)} samples")

    if workers == 1:
        for item in pending:
            store(label(item))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for sample in pool.map(label, pending):
                store(sample)

    rows = []
    for index in range(len(seeds)):
        sample = dict(done[index])
        sample['sample'] = index
        rows.append({column: sample[column] for column in DATASET_COLUMNS})
    frame = pd.DataFrame(rows, columns=DATASET_COLUMNS)
    infeasible = int((frame['feasible'] == 0).sum())
    if infeasible:
        logger.warning(f"{infeasible} samples have no feasible optimum")
    return frame


def cmd_gen_dataset(run: RunConfig, out: Optional[str] = None, db_path: Optional[str] = None,
                    workers: Optional[int] = None) -> str:
    frame = generate_dataset(run, db_path, workers)
    path = out or run.learner.dataset_path
    write_table(frame, path, run.config_hash(), run.seed, "gen-dataset")
    return f"{len(frame)} samples ({int(frame['feasible'].sum())} feasible) written to {path}"


# ==================== train ====================

def cmd_train(run: RunConfig, dataset_path: Optional[str] = None, model_path: Optional[str] = None,
              out: Optional[str] = None) -> str:
    dataset_path = dataset_path or run.learner.dataset_path
    model_path = model_path or run.learner.model_path
    try:
        frame = read_table(dataset_path)
    except (OSError, pd.errors.ParserError) as exc:
        raise ConfigError(f"cannot read dataset {dataset_path}: {exc}")
    missing = [c for c in DATASET_INPUT_COLUMNS + DATASET_TARGET_COLUMNS if c not in frame.columns]
    if missing:
        raise ConfigError(f"dataset {dataset_path} lacks columns {missing}")
    if 'feasible' in frame.columns:
        frame = frame[frame['feasible'] == 1]
    logger.info(f"Training on {len(frame)} feasible samples from {dataset_path}")

    X = frame[DATASET_INPUT_COLUMNS].to_numpy(dtype=float)
    Y = frame[DATASET_TARGET_COLUMNS].to_numpy(dtype=float)
    model, report = train(X, Y, np.random.default_rng(run.seed), run.train_settings())
    save_model(model, model_path)

    if out:
        curve = pd.DataFrame({
            'epoch': np.arange(1, report.epochs + 1),
            'train_mse': report.train_mse,
            'val_mse': report.val_mse,
            'learning_rate': report.learning_rates,
        })
        write_table(curve, out, run.config_hash(), run.seed, "train")
    return (f"Trained for {report.epochs} epochs; best epoch {report.best_epoch + 1}, "
            f"test MSE {report.test_mse:.4g}. Model saved to {model_path}")


# ==================== predict ====================

def cmd_predict(run: RunConfig, model_path: Optional[str] = None, out: Optional[str] = None) -> str:
    model = load_model(model_path or run.learner.model_path)
    cfg, img = run.system_config(), run.image_spec()
    tx = predict(model, cfg, img.N_roi, img.N_bg)
    lines = [f"Predicted: {format_tx(tx, cfg.sigma_n)}"]
    rows = []
    for scenario in run.scenarios():
        breakdown = qvp(cfg, tx, img, scenario)
        ip = intercept_probability(cfg, tx, scenario)
        lines.append(format_qvp_report(scenario.mode.value, breakdown).rstrip())
        lines.append(f"{'IP':<18} {ip:.6g} (eps_IP {run.scenario.eps_IP})")
        row = {'scenario': scenario.mode.value}
        row.update({name: getattr(tx, name) for name in TX_COLUMNS})
        row.update({'qvp': breakdown.qvp, 'ip': ip})
        rows.append(row)
    if out:
        write_table(pd.DataFrame(rows), out, run.config_hash(), run.seed, "predict")
    return "\n".join(lines)
