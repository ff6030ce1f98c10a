"""
Analysis commands: QVP report, parameter sweeps, secure frame size and
analytic-vs-simulation validation.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import partial
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

import config
from core.errors import DeliveryModelError, InfeasibleConfigurationError
from core.protocol_sim import (
    McEstimate, estimate_intercept_probability, estimate_qvp, simulate_trials,
)
from core.secrecy_analysis import (
    delay_violation, intercept_probability, min_secure_Ls, qvp,
)
from core.system_model import EveScenario, ImageSpec, SystemConfig, TxParams
from utils.constants import (
    AXIS_D_LIM, AXIS_LAMBDA_E, AXIS_N_T, AXIS_N_TOTAL, AXIS_RHO, MC_COLUMNS, MIN_LS_REPORT,
    QVP_COLUMNS, SWEEP_AXES, VALIDATION_COLUMNS, VALIDATION_METRICS,
)
from utils.reports import agrees, format_qvp_report, format_validation_table, write_table
from utils.run_config import ConfigError, RunConfig

logger = logging.getLogger(__name__)

DEFAULT_GRIDS = {
    AXIS_D_LIM: [10, 20, 30, 40, 50, 60],
    AXIS_LAMBDA_E: [0.05, 0.1, 0.2, 0.5, 1.0, 2.0],
    AXIS_RHO: [0.8, 0.85, 0.9, 0.95, 0.99],
    AXIS_N_TOTAL: [50, 100, 150, 200],
    AXIS_N_T: [2, 4, 8],
}


def point_seed(seed: int, index: int) -> int:
    """Seed of grid point `index`, independent of how points are scheduled."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _tx(run: RunConfig) -> TxParams:
    try:
        return run.tx_params()
    except ConfigError as exc:
        raise ConfigError(f"while evaluating tx section: {exc}") from exc


# ==================== qvp ====================

def cmd_qvp(run: RunConfig, simulate: bool = False, workers: Optional[int] = None) -> str:
    """Analytic QVP breakdown per scenario, optionally checked by simulation."""
    cfg, tx, img = run.system_config(), _tx(run), run.image_spec()
    reports = []
    for scenario in run.scenarios():
        breakdown = qvp(cfg, tx, img, scenario)
        estimate = None
        if simulate:
            estimate = estimate_qvp(cfg, tx, img, scenario, run.simulation.trials, run.seed,
                                    run.simulation_settings(), workers)
        reports.append(format_qvp_report(scenario.mode.value, breakdown, estimate))
    return "\n".join(reports)


# ==================== sweep ====================

def grid_point(run: RunConfig, axis: str, value: float):
    """(cfg, img) of the configuration with `axis` set to value."""
    cfg, img = run.system_config(), run.image_spec()
    if axis == AXIS_D_LIM:
        img = replace(img, D_lim=int(value))
    elif axis == AXIS_LAMBDA_E:
        cfg = replace(cfg, lambda_E=float(value))
    elif axis == AXIS_RHO:
        cfg = replace(cfg, rho=float(value))
    elif axis == AXIS_N_T:
        cfg = replace(cfg, n_T=int(value))
    elif axis == AXIS_N_TOTAL:
        L_s = run.tx.L_s
        share = img.N_roi / (img.N_roi + img.N_bg)
        N_roi = max(L_s, int(round(value * share / L_s)) * L_s)
        img = replace(img, N_roi=N_roi, N_bg=max(0, int(value) - N_roi))
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    return cfg, img


def _sweep_point(run: RunConfig, axis: str, simulate: bool, indexed_value) -> Dict:
    index, value = indexed_value
    cfg, img = grid_point(run, axis, value)
    tx = _tx(run)
    row = {axis: value}
    for scenario in run.scenarios():
        prefix = f"{scenario.mode.value}_"
        try:
            breakdown = qvp(cfg, tx, img, scenario)
        except InfeasibleConfigurationError as exc:
            logger.warning(f"{axis}={value} ({scenario.mode.value}): {exc}")
            row.update({prefix + c: math.nan for c in QVP_COLUMNS})
            continue
        for column in QVP_COLUMNS:
            row[prefix + column] = getattr(breakdown, column)
        if simulate:
            estimate = estimate_qvp(cfg, tx, img, scenario, run.simulation.trials,
                                    point_seed(run.seed, index), run.simulation_settings(), workers=1)
            values = (estimate.value, estimate.std_err, int(agrees(breakdown.qvp_shared, estimate)))
            row.update({prefix + c: v for c, v in zip(MC_COLUMNS, values)})
    return row


def run_sweep(run: RunConfig, axis: str, simulate: bool = False,
              workers: Optional[int] = None) -> pd.DataFrame:
    """One row per grid value, in grid order, with a column block per scenario."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    values = list(run.sweep.values) or DEFAULT_GRIDS[axis]
    workers = max(1, workers or config.WORKERS)
    evaluate_point = partial(_sweep_point, run, axis, simulate)
    points = list(enumerate(values))
    if workers == 1:
        rows = [evaluate_point(p) for p in points]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(evaluate_point, points))
    return pd.DataFrame(rows)


def cmd_sweep(run: RunConfig, axis: str, out: Optional[str] = None, simulate: bool = False,
              workers: Optional[int] = None) -> str:
    table = run_sweep(run, axis, simulate, workers)
    if out:
        write_table(table, out, run.config_hash(), run.seed, f"sweep {axis}")
    return table.to_string(index=False, float_format=lambda v: f"{v:.6g}")


# ==================== min-ls ====================

def cmd_min_ls(run: RunConfig) -> str:
    cfg, tx, img = run.system_config(), _tx(run), run.image_spec()
    lines = []
    for scenario in run.scenarios():
        L_s = min_secure_Ls(cfg, tx, scenario, run.scenario.eps_IP, img.N_roi)
        secured = replace(tx, L_s=L_s)
        lines.append(f"[{scenario.mode.value.upper()}] "
                     + MIN_LS_REPORT.format(eps=run.scenario.eps_IP, L_s=L_s)
                     + f" (IP = {intercept_probability(cfg, secured, scenario):.6g})")
    return "\n".join(lines)


# ==================== validate ====================

def validation_rows(cfg: SystemConfig, tx: TxParams, img: ImageSpec, scenario: EveScenario,
                    trials: int, seed: int, settings, workers: Optional[int] = None) -> List[Dict]:
    """
    Analytic and simulated delay violation, FIP, IP and QVP for one scenario.

    FIP and QVP are reported under both interception terms against the
    same simulated flags.
    """
    outcomes = simulate_trials(cfg, tx, img, scenario, trials, seed, settings, workers)
    flags = {
        'delay_violation': [o.delay_violated for o in outcomes],
        'fip': [o.intercepted_in_time and not o.delay_violated for o in outcomes],
        'qvp': [o.qos_violated for o in outcomes],
    }
    breakdown = qvp(cfg, tx, img, scenario)
    analytic = {
        'delay_violation': delay_violation(cfg, tx, img),
        'fip': breakdown.intercept_term,
        'fip_shared': breakdown.intercept_shared,
        'qvp': breakdown.qvp,
        'qvp_shared': breakdown.qvp_shared,
    }
    estimates = {name: McEstimate.from_flags(values, seed) for name, values in flags.items()}
    estimates['fip_shared'] = estimates['fip']
    estimates['qvp_shared'] = estimates['qvp']
    estimates['intercept_probability'] = estimate_intercept_probability(
        cfg, tx, scenario, 10 * trials, seed, settings.r_max)
    analytic['intercept_probability'] = intercept_probability(cfg, tx, scenario)

    rows = []
    for metric in VALIDATION_METRICS:
        estimate = estimates[metric]
        rows.append({
            'metric': metric,
            'scenario': scenario.mode.value,
            'analytic': analytic[metric],
            'simulated': estimate.value,
            'std_err': estimate.std_err,
            'agree': agrees(analytic[metric], estimate),
        })
    return rows


def cmd_validate(run: RunConfig, out: Optional[str] = None, workers: Optional[int] = None) -> str:
    cfg, tx, img = run.system_config(), _tx(run), run.image_spec()
    rows = []
    for scenario in run.scenarios():
        try:
            rows.extend(validation_rows(cfg, tx, img, scenario, run.simulation.trials, run.seed,
                                        run.simulation_settings(), workers))
        except DeliveryModelError as exc:
            logger.error(f"Validation failed for {scenario.mode.value}: {exc}")
            raise
    if out:
        frame = pd.DataFrame(rows, columns=VALIDATION_COLUMNS)
        frame['agree'] = frame['agree'].astype(int)
        write_table(frame, out, run.config_hash(), run.seed, "validate")
    return format_validation_table(rows)
