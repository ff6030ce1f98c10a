"""
Report generation utilities: text summaries and provenance-stamped tables.
"""

import logging
from typing import Iterable, Optional

import pandas as pd

import config
from core.optimizer import OptResult
from core.protocol_sim import McEstimate
from core.secrecy_analysis import QvpBreakdown
from core.system_model import TxParams, linear_to_db
from utils.constants import (
    AGREEMENT_SIGMAS, AGREEMENT_TOLERANCE, OPTIMIZE_REPORT_HEADER, QVP_REPORT_HEADER,
    WROTE_FILE_MSG,
)

logger = logging.getLogger(__name__)


def agrees(analytic: float, estimate: McEstimate, tolerance: float = AGREEMENT_TOLERANCE) -> bool:
    """|analytic - simulated| within tolerance plus AGREEMENT_SIGMAS standard errors."""
    return abs(analytic - estimate.value) <= tolerance + AGREEMENT_SIGMAS * estimate.std_err


def provenance_lines(config_hash: str, seed: int, command: str) -> list:
    return [
        f"# command: {command}",
        f"# config_sha256: {config_hash}",
        f"# seed: {seed}",
        f"# build: {config.BUILD_ID}",
    ]


def write_table(frame: pd.DataFrame, path: str, config_hash: str, seed: int, command: str):
    """
    Write a comma-separated table preceded by '# ' provenance lines.

    Floats use TABLE_FLOAT_FORMAT so that reruns are byte-identical.
    """
    with open(path, 'w', encoding='utf-8', newline='') as handle:
        handle.write("\n".join(provenance_lines(config_hash, seed, command)) + "\n")
        frame.to_csv(handle, index=False, float_format=config.TABLE_FLOAT_FORMAT, lineterminator='\n')
    logger.info(WROTE_FILE_MSG.format(path=path))


def read_table(path: str) -> pd.DataFrame:
    return pd.read_csv(path, comment='#')


def format_tx(tx: TxParams, sigma_n: float = 1.0) -> str:
    return (f"zeta={tx.zeta:.4f}  P_p={linear_to_db(tx.P_p / sigma_n):.2f} dB  "
            f"P_s={linear_to_db(tx.P_s / sigma_n):.2f} dB  nu={tx.nu:.4f}  L_s={tx.L_s}")


def format_qvp_report(scenario: str, breakdown: QvpBreakdown,
                      estimate: Optional[McEstimate] = None) -> str:
    """Format the analytic QVP breakdown, with the Monte Carlo check when present."""
    report = QVP_REPORT_HEADER.format(scenario=scenario.upper())
    report += f"{'delay violation':<18} {breakdown.delay_violation:.6g}\n"
    report += f"{'intercept term':<18} {breakdown.intercept_term:.6g}\n"
    report += f"{'QVP':<18} {breakdown.qvp:.6g}\n"
    report += f"{'N_bar_bg':<18} {breakdown.N_bar_bg}\n"
    report += f"{'N_tilde':<18} {breakdown.N_tilde}\n"
    report += f"{'Omega':<18} {breakdown.Omega:.6g}\n"
    report += f"{'Lambda':<18} {breakdown.Lambda:.6g}\n"
    report += f"{'shared intercept':<18} {breakdown.intercept_shared:.6g}\n"
    report += f"{'shared-slot QVP':<18} {breakdown.qvp_shared:.6g}\n"
    if estimate is not None:
        flag = "yes" if agrees(breakdown.qvp_shared, estimate) else "NO"
        report += (f"{'simulated QVP':<18} {estimate.value:.6g} +/- {estimate.std_err:.2g} "
                   f"({estimate.trials} trials, seed {estimate.seed}); agreement: {flag}\n")
    return report


def format_opt_report(label: str, result: OptResult, sigma_n: float = 1.0) -> str:
    report = OPTIMIZE_REPORT_HEADER.format(label=label)
    report += format_tx(result.tx_star, sigma_n) + "\n"
    report += f"QVP={result.qvp_star:.6g}  IP={result.ip_star:.6g}  feasible={result.feasible}  "
    report += f"evaluations={result.evaluations}\n"
    return report


def format_validation_table(rows: Iterable[dict]) -> str:
    """Fixed-width agreement table printed by the validate command."""
    lines = [f"{'metric':<18} | {'scenario':<8} | {'analytic':<12} | {'simulated':<12} | "
             f"{'std_err':<10} | agree"]
    lines.append("-" * 80)
    for row in rows:
        lines.append(
            f"{row['metric']:<18} | {row['scenario']:<8} | {row['analytic']:<12.6g} | "
            f"{row['simulated']:<12.6g} | {row['std_err']:<10.3g} | {'yes' if row['agree'] else 'NO'}")
    return "\n".join(lines)
