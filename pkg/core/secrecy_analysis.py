"""
Closed-form secrecy and delay analysis of the hybrid fountain-coded delivery.

Covers the wiretap-channel distributions for non-colluding (max) and
colluding (sum) Eves, the public-rate distribution, the delivery-time and
interception-time distributions and the resulting QoSec violation
probability (QVP), intercept probability (IP) and the smallest admissible
confidential frame size.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats

from core.errors import (
    ContractError, DegenerateInputError, DomainError,
    InfeasibleConfigurationError, NumericalFailureError,
)
from core.special_math import (
    DEFAULT_QUADRATURE, QuadratureSpec, beta_fn, clamp_probability,
    regularized_lower_gamma, scaled_whittaker_w,
)
from core.system_model import (
    DerivedConstants, EveMode, EveScenario, ImageSpec, SystemConfig, TxParams,
    divisors, rate_threshold, slot_type_probabilities,
)

logger = logging.getLogger(__name__)

BISECTION_XTOL = 1e-8


@dataclass(frozen=True)
class QvpBreakdown:
    delay_violation: float
    intercept_term: float
    qvp: float
    N_bar_bg: int
    N_tilde: int
    Omega: float
    Lambda: float
    intercept_shared: float
    qvp_shared: float


# ==================== Wiretap channel ====================

def nce_cdf(cfg: SystemConfig, tx: TxParams, omega: float) -> float:
    """CDF of the strongest Eve's SINR (non-colluding Eves) at omega."""
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    if cfg.lambda_E == 0:
        return 1.0
    c = DerivedConstants.from_params(cfg, tx)
    two_over_eta = 2.0 / cfg.eta
    log_exponent = (math.log(c.beta * cfg.lambda_E)
                    + two_over_eta * (math.log(c.a1) - math.log(omega))
                    + (1 - cfg.n_T) * math.log1p(c.xi * omega))
    return math.exp(-math.exp(log_exponent))


def ce_laplace_exponent(cfg: SystemConfig, tx: TxParams, s: float,
                        quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """-log of the Laplace transform of the colluding-Eve SINR at s."""
    if not s >= 0:
        raise DomainError(f"s must be non-negative, got {s}")
    if s == 0 or cfg.lambda_E == 0:
        return 0.0
    c = DerivedConstants.from_params(cfg, tx)
    n_T, two_over_eta = cfg.n_T, 2.0 / cfg.eta
    if tx.zeta == 1.0:
        # No AN: the Gamma-distributed AN power drops out of the radial integral.
        integral = beta_fn(two_over_eta, 1.0 - two_over_eta) / cfg.eta * (c.a1 * s) ** two_over_eta
    else:
        k = (1 - n_T + two_over_eta) / 2.0
        m = (2 - n_T - two_over_eta) / 2.0
        integral = (c.calB * (c.a1 * s) ** ((n_T - 1 + two_over_eta) / 2.0)
                    * scaled_whittaker_w(k, m, c.varsigma * s, quad))
    if not np.isfinite(integral):
        raise NumericalFailureError(f"colluding-Eve Laplace exponent not finite at s={s}")
    return 2.0 * math.pi * cfg.lambda_E * integral


def ce_laplace(cfg: SystemConfig, tx: TxParams, s: float,
               quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Laplace transform E[exp(-s * sum_i gamma_Ei)] of the colluding-Eve SINR."""
    return math.exp(-ce_laplace_exponent(cfg, tx, s, quad))


def ce_ccdf(cfg: SystemConfig, tx: TxParams, scenario: EveScenario, omega: float,
            quad: QuadratureSpec = DEFAULT_QUADRATURE) -> float:
    """Gamma-approximation CCDF of the colluding-Eve SINR at omega."""
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    K = scenario.K_terms
    c = DerivedConstants.from_params(cfg, tx, K)
    total = 0.0
    for k in range(K + 1):
        total += special.comb(K, k, exact=True) * (-1) ** k * ce_laplace(cfg, tx, k * c.varphi / omega, quad)
    return clamp_probability(total)


def eve_cdf(cfg: SystemConfig, tx: TxParams, scenario: EveScenario, omega: float) -> float:
    """CDF of the equivalent wiretap SINR for the scenario's Eve model."""
    if scenario.mode == EveMode.NCE:
        return nce_cdf(cfg, tx, omega)
    return 1.0 - ce_ccdf(cfg, tx, scenario, omega)


# ==================== Public stream ====================

def public_rate_pmf(cfg: SystemConfig, tx: TxParams) -> np.ndarray:
    """Distribution of the packet count L_p of a public frame, over its finite support."""
    pr_psi0, _ = slot_type_probabilities(cfg, tx)
    if pr_psi0 <= 0:
        raise DegenerateInputError("nu = 0: public slots never occur")
    c = DerivedConstants.from_params(cfg, tx)
    cap = c.kappa_p * tx.nu
    k_max = max(0, math.ceil(cfg.ratio_BT_b * math.log2(1.0 + cap)))
    ks = np.arange(k_max + 1)
    gamma_l = 2.0 ** (ks / cfg.ratio_BT_b) - 1.0
    gamma_u = np.minimum(cap, 2.0 ** ((ks + 1) / cfg.ratio_BT_b) - 1.0)
    upper = special.gammainc(cfg.n_T, gamma_u / c.kappa_p)
    lower = special.gammainc(cfg.n_T, gamma_l / c.kappa_p)
    pmf = np.where(gamma_l < gamma_u, upper - lower, 0.0) / pr_psi0
    return np.clip(pmf, 0.0, 1.0)


def p_bg_k(cfg: SystemConfig, tx: TxParams, k: int) -> float:
    """Probability that a public frame carries exactly k packets."""
    if k < 0:
        raise DomainError(f"k must be non-negative, got {k}")
    pmf = public_rate_pmf(cfg, tx)
    return float(pmf[k]) if k < len(pmf) else 0.0


def slots_for_packets(n_packets: int, mean_rate: float) -> int:
    """Slots needed to push n_packets at mean_rate packets per slot (ceiling)."""
    if n_packets == 0:
        return 0
    if not mean_rate > 0:
        raise InfeasibleConfigurationError(
            f"public frames carry no packets on average; cannot deliver {n_packets} packets")
    ratio = n_packets / mean_rate
    return math.ceil(ratio * (1.0 - 1e-12))


def n_bar_bg(cfg: SystemConfig, tx: TxParams, N_bg: int) -> int:
    """Expected number of slots spent on the public stream."""
    if N_bg < 0:
        raise DomainError(f"N_bg must be non-negative, got {N_bg}")
    if N_bg == 0:
        return 0
    pmf = public_rate_pmf(cfg, tx)
    mean_rate = float(np.dot(np.arange(len(pmf)), pmf))
    return slots_for_packets(N_bg, mean_rate)


# ==================== Confidential stream ====================

def confidential_frames(tx: TxParams, img: ImageSpec) -> int:
    """N_roi / L_s; the number of successful frames the RoI needs."""
    if img.N_roi % tx.L_s != 0:
        raise ContractError(f"L_s = {tx.L_s} does not divide N_roi = {img.N_roi}")
    return img.N_roi // tx.L_s


def omega_outage(cfg: SystemConfig, tx: TxParams) -> float:
    """Destination outage probability of a confidential frame, given Psi1."""
    _, pr_psi1 = slot_type_probabilities(cfg, tx)
    if pr_psi1 <= 0:
        raise DegenerateInputError("Pr(Psi1) = 0: confidential slots never occur")
    c = DerivedConstants.from_params(cfg, tx)
    if c.theta < c.kappa_s * tx.nu:
        return 0.0
    value = (regularized_lower_gamma(cfg.n_T, c.theta / c.kappa_s)
             - regularized_lower_gamma(cfg.n_T, tx.nu)) / pr_psi1
    return clamp_probability(value)


def tilde_N(cfg: SystemConfig, tx: TxParams, img: ImageSpec) -> int:
    """Smallest possible delivery time: public slots plus outage-free confidential slots."""
    return n_bar_bg(cfg, tx, img.N_bg) + confidential_frames(tx, img)


def _nbinom_pmf(failures: np.ndarray, successes: int, failure_prob: float) -> np.ndarray:
    failures = np.asarray(failures)
    if successes == 0:
        return np.where(failures == 0, 1.0, 0.0)
    if failure_prob >= 1.0:
        return np.zeros(failures.shape)
    return stats.nbinom.pmf(failures, successes, 1.0 - failure_prob)


def _nbinom_cdf(failures: np.ndarray, successes: int, failure_prob: float) -> np.ndarray:
    failures = np.asarray(failures)
    if successes == 0:
        return np.where(failures >= 0, 1.0, 0.0)
    if failure_prob >= 1.0:
        return np.zeros(failures.shape)
    return np.where(failures >= 0, stats.nbinom.cdf(failures, successes, 1.0 - failure_prob), 0.0)


def pmf_T_D(cfg: SystemConfig, tx: TxParams, img: ImageSpec, k: int) -> float:
    """Probability that the destination completes the image in exactly k slots."""
    m = confidential_frames(tx, img)
    n_tilde = tilde_N(cfg, tx, img)
    if k < n_tilde:
        return 0.0
    omega = omega_outage(cfg, tx) if m > 0 else 0.0
    return float(_nbinom_pmf(k - n_tilde, m, omega))


def delay_violation(cfg: SystemConfig, tx: TxParams, img: ImageSpec) -> float:
    """Probability that delivery takes longer than D_lim slots."""
    m = confidential_frames(tx, img)
    n_tilde = tilde_N(cfg, tx, img)
    if img.D_lim < n_tilde:
        return 1.0
    omega = omega_outage(cfg, tx) if m > 0 else 0.0
    return clamp_probability(1.0 - float(_nbinom_cdf(img.D_lim - n_tilde, m, omega)))


# ==================== Eavesdropping ====================

def lambda_slot_failure(cfg: SystemConfig, tx: TxParams, scenario: EveScenario) -> float:
    """Per-slot probability that the Eves fail to capture a confidential frame."""
    if cfg.lambda_E == 0:
        return 1.0
    pr_psi0, pr_psi1 = slot_type_probabilities(cfg, tx)
    theta = rate_threshold(tx.L_s, cfg.ratio_BT_b)
    return clamp_probability(pr_psi1 * eve_cdf(cfg, tx, scenario, theta) + pr_psi0)


def cdf_T_E(cfg: SystemConfig, tx: TxParams, img: ImageSpec, scenario: EveScenario, k: int) -> float:
    """Probability that the Eves gather all confidential packets within k slots."""
    m = confidential_frames(tx, img)
    if m == 0 or k < m:
        return 0.0
    lam = lambda_slot_failure(cfg, tx, scenario)
    return clamp_probability(float(_nbinom_cdf(k - m, m, lam)))


def eve_capture_probability(cfg: SystemConfig, tx: TxParams, scenario: EveScenario) -> float:
    """Probability that the Eves decode a confidential frame that is actually sent."""
    if cfg.lambda_E == 0:
        return 0.0
    theta = rate_threshold(tx.L_s, cfg.ratio_BT_b)
    return clamp_probability(1.0 - eve_cdf(cfg, tx, scenario, theta))


def intercept_probability(cfg: SystemConfig, tx: TxParams, scenario: EveScenario) -> float:
    """Per-frame probability that the Eves decode a confidential frame of L_s packets."""
    if cfg.lambda_E == 0:
        return 0.0
    _, pr_psi1 = slot_type_probabilities(cfg, tx)
    theta = rate_threshold(tx.L_s, cfg.ratio_BT_b)
    return clamp_probability(pr_psi1 * (1.0 - eve_cdf(cfg, tx, scenario, theta)))


# ==================== QVP ====================

def qvp(cfg: SystemConfig, tx: TxParams, img: ImageSpec, scenario: EveScenario) -> QvpBreakdown:
    """
    QoSec violation probability and its components.

    `intercept_term` treats the interception time as independent of the
    delivery time: the Eves race over every slot, public ones included.
    `intercept_shared` conditions on the slots the delivery actually spends
    on confidential frames. With T_D = k there are k - N_bar_bg of them, and
    the Eves must capture m of those frames, so the term is
    sum_k Pr(T_D = k) Pr(Bin(k - N_bar_bg, q) >= m) with q the per-frame
    capture probability. Both terms coincide when there are no public slots
    (nu = 0, N_bg = 0).
    """
    m = confidential_frames(tx, img)
    pr_psi0, pr_psi1 = slot_type_probabilities(cfg, tx)
    if m > 0 and pr_psi1 <= 0:
        raise InfeasibleConfigurationError("confidential packets pending but Pr(Psi1) = 0")
    if img.N_bg > 0 and pr_psi0 <= 0:
        raise InfeasibleConfigurationError("public packets pending but Pr(Psi0) = 0")

    N_bar = n_bar_bg(cfg, tx, img.N_bg)
    n_tilde = N_bar + m
    omega = omega_outage(cfg, tx) if m > 0 else 0.0
    lam = lambda_slot_failure(cfg, tx, scenario) if pr_psi1 > 0 else 1.0

    if img.D_lim < n_tilde:
        dv, intercept, shared = 1.0, 0.0, 0.0
    else:
        ks = np.arange(n_tilde, img.D_lim + 1)
        pmf = _nbinom_pmf(ks - n_tilde, m, omega)
        dv = clamp_probability(1.0 - float(_nbinom_cdf(img.D_lim - n_tilde, m, omega)))
        if m == 0:
            intercept, shared = 0.0, 0.0
        else:
            intercept = float(np.dot(pmf, _nbinom_cdf(ks - m, m, lam)))
            intercept = min(clamp_probability(intercept), 1.0 - dv)
            capture = eve_capture_probability(cfg, tx, scenario) if pr_psi1 > 0 else 0.0
            shared = float(np.dot(pmf, stats.binom.sf(m - 1, ks - N_bar, capture)))
            shared = min(clamp_probability(shared), 1.0 - dv)

    return QvpBreakdown(
        delay_violation=dv,
        intercept_term=intercept,
        qvp=dv + intercept,
        N_bar_bg=N_bar,
        N_tilde=n_tilde,
        Omega=omega,
        Lambda=lam,
        intercept_shared=shared,
        qvp_shared=dv + shared,
    )


def file_intercept_probability(cfg: SystemConfig, tx: TxParams, img: ImageSpec,
                               scenario: EveScenario, shared_slots: bool = False) -> float:
    """
    Probability that the Eves gather the RoI no later than the destination, within D_lim.

    shared_slots selects the interception term that only lets the Eves
    capture the confidential frames the delivery sends.
    """
    breakdown = qvp(cfg, tx, img, scenario)
    return breakdown.intercept_shared if shared_slots else breakdown.intercept_term


# ==================== Secure frame size ====================

def _eve_quantile(cfg: SystemConfig, tx: TxParams, scenario: EveScenario, q: float) -> float:
    """Smallest omega with eve_cdf(omega) >= q, by bracketing and bisection."""
    lo = 1e-12
    if eve_cdf(cfg, tx, scenario, lo) >= q:
        return 0.0
    hi = 1.0
    while eve_cdf(cfg, tx, scenario, hi) < q:
        hi *= 2.0
        if hi > 1e15:
            raise NumericalFailureError(f"could not bracket the Eve SINR quantile {q}")
    root = optimize.bisect(lambda w: eve_cdf(cfg, tx, scenario, w) - q, lo, hi, xtol=BISECTION_XTOL)
    candidate = root + BISECTION_XTOL * max(1.0, root)
    return candidate if eve_cdf(cfg, tx, scenario, candidate) >= q else hi


def min_secure_Ls(cfg: SystemConfig, tx_partial: TxParams, scenario: EveScenario,
                  eps_IP: float, N_roi: int) -> int:
    """
    Smallest divisor L_s of N_roi keeping the intercept probability at or below eps_IP.

    Only zeta, P_s and nu of tx_partial matter; its L_s is ignored.
    """
    if not 0 < eps_IP < 1:
        raise DomainError(f"eps_IP must lie in (0, 1), got {eps_IP}")
    if N_roi < 1:
        raise ContractError(f"N_roi must be at least 1, got {N_roi}")
    candidates = divisors(N_roi)
    _, pr_psi1 = slot_type_probabilities(cfg, tx_partial)

    if cfg.lambda_E == 0 or eps_IP >= pr_psi1:
        bound = 0.0
    else:
        omega_star = _eve_quantile(cfg, tx_partial, scenario, 1.0 - eps_IP / pr_psi1)
        bound = cfg.ratio_BT_b * math.log2(1.0 + omega_star)

    for L_s in candidates:
        if L_s < bound:
            continue
        tx = TxParams(tx_partial.zeta, tx_partial.P_p, tx_partial.P_s, tx_partial.nu, L_s)
        if intercept_probability(cfg, tx, scenario) <= eps_IP:
            return L_s
        logger.debug(f"L_s={L_s} meets the bound {bound:.6g} but misses eps_IP on re-check")

    raise InfeasibleConfigurationError(
        f"no divisor of N_roi={N_roi} reaches the secure frame size bound L_s >= {bound:.6g}")
