"""
Scenario and parameter types, channel sampling, beamformers and the SINR
expressions of the AN-aided MISO link.

Powers are carried in linear watts; every formula consumes P / sigma_n.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from scipy import integrate, linalg, special

import config
from core.errors import DomainError, DegenerateInputError, ContractError
from core.special_math import beta_fn, gamma_fn, poisson_ccdf_sum


class EveMode(str, Enum):
    NCE = "nce"
    CE = "ce"


class FrameKind(str, Enum):
    PUBLIC = "public"
    CONFIDENTIAL = "confidential"


class PlacementMode(str, Enum):
    """Eve placement: redrawn every slot (iid) or fixed per delivery (static)."""
    IID = "iid"
    STATIC = "static"


@dataclass(frozen=True)
class SystemConfig:
    """Static wireless scenario."""
    n_T: int = 8
    eta: float = 4.0
    lambda_E: float = 0.2
    ratio_BT_b: float = 50.0 / 8.0
    sigma_n: float = 1.0
    r_D: float = 2.0 * math.sqrt(2.0)
    rho: float = 0.95
    gamma_min: float = 10.0
    gamma_max: float = 1000.0

    def __post_init__(self):
        if int(self.n_T) != self.n_T or self.n_T < 2:
            raise DomainError(f"n_T must be an integer >= 2, got {self.n_T}")
        if not self.eta > 2:
            raise DomainError(f"eta must exceed 2, got {self.eta}")
        if not self.lambda_E >= 0:
            raise DomainError(f"lambda_E must be non-negative, got {self.lambda_E}")
        if not self.ratio_BT_b > 0:
            raise DomainError(f"ratio_BT_b must be positive, got {self.ratio_BT_b}")
        if not self.sigma_n > 0:
            raise DomainError(f"sigma_n must be positive, got {self.sigma_n}")
        if not self.r_D > 0:
            raise DomainError(f"r_D must be positive, got {self.r_D}")
        if not 0 < self.rho <= 1:
            raise DomainError(f"rho must lie in (0, 1], got {self.rho}")
        if not 0 < self.gamma_min < self.gamma_max:
            raise DomainError(
                f"need 0 < gamma_min < gamma_max, got {self.gamma_min}, {self.gamma_max}")


@dataclass(frozen=True)
class TxParams:
    """Decision vector (zeta, P_p, P_s, nu, L_s)."""
    zeta: float
    P_p: float
    P_s: float
    nu: float
    L_s: int

    def __post_init__(self):
        if not 0 < self.zeta <= 1:
            raise DomainError(f"zeta must lie in (0, 1], got {self.zeta}")
        if not (self.P_p > 0 and self.P_s > 0):
            raise DomainError("transmit powers must be positive")
        if not self.nu >= 0:
            raise DomainError(f"nu must be non-negative, got {self.nu}")
        if int(self.L_s) != self.L_s or self.L_s < 1:
            raise DomainError(f"L_s must be an integer >= 1, got {self.L_s}")


@dataclass(frozen=True)
class ImageSpec:
    """Packet counts of the segmented image and the delivery deadline."""
    N_roi: int
    N_bg: int
    D_lim: int

    def __post_init__(self):
        if self.N_roi < 0 or self.N_bg < 0:
            raise DomainError("packet counts must be non-negative")
        if self.N_roi + self.N_bg < 1:
            raise DomainError("the image must contain at least one packet")
        if self.D_lim < 1:
            raise DomainError(f"D_lim must be at least 1, got {self.D_lim}")


@dataclass(frozen=True)
class EveScenario:
    mode: EveMode = EveMode.NCE
    K_terms: int = config.CE_K_TERMS

    def __post_init__(self):
        object.__setattr__(self, 'mode', EveMode(self.mode))
        if self.mode == EveMode.CE and self.K_terms < config.CE_MIN_K_TERMS:
            raise DomainError(
                f"CE approximation needs K_terms >= {config.CE_MIN_K_TERMS}, got {self.K_terms}")


@dataclass(frozen=True)
class DerivedConstants:
    """Shorthands shared by the closed forms."""
    beta: float
    xi: float
    a1: float
    varrho: float
    varsigma: float
    calB: float
    kappa_p: float
    kappa_s: float
    theta: float
    varphi: float

    @classmethod
    def from_params(cls, cfg: SystemConfig, tx: TxParams, K_terms: int = config.CE_K_TERMS):
        n_T, eta, zeta = cfg.n_T, cfg.eta, tx.zeta
        snr_s = tx.P_s / cfg.sigma_n
        path = cfg.r_D ** eta * cfg.sigma_n
        rho2 = cfg.rho ** 2

        varrho = (1.0 - zeta) * snr_s / (n_T - 1)
        if zeta < 1.0:
            varsigma = zeta * (n_T - 1) / (1.0 - zeta)
            calB = beta_fn(2.0 / eta, 1.0 - 2.0 / eta) / eta * varrho ** ((1 - n_T + 2.0 / eta) / 2.0)
        else:
            varsigma = math.inf
            calB = math.inf

        return cls(
            beta=math.pi * gamma_fn(1.0 + 2.0 / eta),
            xi=(1.0 / zeta - 1.0) / (n_T - 1),
            a1=zeta * snr_s,
            varrho=varrho,
            varsigma=varsigma,
            calB=calB,
            kappa_p=rho2 * tx.P_p / ((1.0 - rho2) * tx.P_p + path),
            kappa_s=rho2 * zeta * tx.P_s / ((1.0 - rho2) * tx.P_s + path),
            theta=rate_threshold(tx.L_s, cfg.ratio_BT_b),
            varphi=K_terms / special.factorial(K_terms) ** (1.0 / K_terms),
        )


# ==================== Helpers ====================

def rate_threshold(packets: float, ratio_BT_b: float) -> float:
    """SINR needed to carry `packets` packets in one slot: 2^(packets b / BT) - 1."""
    return 2.0 ** (packets / ratio_BT_b) - 1.0


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


def divisors(n: int) -> list:
    """Sorted positive divisors of n."""
    if n < 1:
        return []
    small = [d for d in range(1, int(math.isqrt(n)) + 1) if n % d == 0]
    return sorted(set(small + [n // d for d in small]))


def validate_tx(cfg: SystemConfig, tx: TxParams, img: Optional[ImageSpec] = None):
    """Check the SNR box and divisibility constraints of the optimization problem."""
    for name, power in (("P_p", tx.P_p), ("P_s", tx.P_s)):
        snr = power / cfg.sigma_n
        if not cfg.gamma_min * (1 - 1e-12) <= snr <= cfg.gamma_max * (1 + 1e-12):
            raise DomainError(
                f"{name}/sigma_n = {snr} outside [{cfg.gamma_min}, {cfg.gamma_max}]")
    if img is not None and img.N_roi > 0 and img.N_roi % tx.L_s != 0:
        raise ContractError(f"L_s = {tx.L_s} does not divide N_roi = {img.N_roi}")


def slot_type_probabilities(cfg: SystemConfig, tx: TxParams) -> Tuple[float, float]:
    """(Pr(Psi0), Pr(Psi1)): estimated gain below / above the threshold nu."""
    pr_psi1 = poisson_ccdf_sum(cfg.n_T, tx.nu)
    return 1.0 - pr_psi1, pr_psi1


# ==================== Channel sampling ====================

def sample_estimated_channel(n_T: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. unit-variance circular complex Gaussian vector h_hat."""
    return (rng.standard_normal(n_T) + 1j * rng.standard_normal(n_T)) / math.sqrt(2.0)


def sample_estimated_gain(n_T: int, rng: np.random.Generator) -> float:
    """||h_hat||^2, distributed Gamma(n_T, 1)."""
    if n_T < 1:
        raise DomainError(f"n_T must be at least 1, got {n_T}")
    return float(rng.standard_gamma(n_T))


def sinr_destination(cfg: SystemConfig, tx: TxParams, g_hat: float, frame_kind: FrameKind) -> float:
    """Destination SINR with the estimation error folded into the interference term."""
    if g_hat < 0:
        raise DomainError(f"g_hat must be non-negative, got {g_hat}")
    rho2 = cfg.rho ** 2
    path = cfg.r_D ** cfg.eta * cfg.sigma_n
    if FrameKind(frame_kind) == FrameKind.CONFIDENTIAL:
        return tx.zeta * rho2 * tx.P_s * g_hat / ((1.0 - rho2) * tx.P_s + path)
    return rho2 * tx.P_p * g_hat / ((1.0 - rho2) * tx.P_p + path)


def build_beamformers(h_hat: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    MRT beam along the estimated channel and an orthonormal AN basis.

    Returns:
        w: unit-norm vector proportional to conj(h_hat)
        G: n_T x (n_T - 1) matrix with orthonormal columns and h_hat^T G = 0
    """
    h_hat = np.asarray(h_hat, dtype=complex)
    norm = np.linalg.norm(h_hat)
    if norm == 0:
        raise DegenerateInputError("beamformers need a non-zero channel estimate")
    w = np.conj(h_hat) / norm
    G = linalg.null_space(h_hat[np.newaxis, :])
    return w, G


# ==================== Eavesdroppers ====================

def _eve_gains(cfg: SystemConfig, tx: TxParams) -> Tuple[float, float]:
    """(a1, a2): signal gain and per-dimension AN gain at an Eve."""
    a1 = tx.zeta * tx.P_s / cfg.sigma_n
    a2 = (1.0 - tx.zeta) * tx.P_s / cfg.sigma_n / (cfg.n_T - 1)
    return a1, a2


def auto_r_max(cfg: SystemConfig, tx: TxParams, omega_ref: float,
               mode: EveMode = EveMode.NCE,
               tail_fraction: float = config.PPP_TAIL_FRACTION) -> float:
    """
    Simulation radius for the Eve PPP.

    NCE: Eves beyond the radius hold less than `tail_fraction` of the
    strongest-Eve CDF exponent at omega_ref. The radial integrand
    r exp(-r^eta omega / a1) leaves the regularized upper
    Gamma(2/eta, omega r^eta / a1) outside r.

    CE: additionally large enough that the fluctuation of the far-field
    SINR sum stays below CE_TAIL_STD_FRACTION * omega_ref. Its mean is
    added back by far_field_mean_sinr.
    """
    if not omega_ref > 0:
        raise DomainError(f"omega_ref must be positive, got {omega_ref}")
    a1, _ = _eve_gains(cfg, tx)
    x = special.gammainccinv(2.0 / cfg.eta, tail_fraction)
    radius = (x * a1 / omega_ref) ** (1.0 / cfg.eta)
    if EveMode(mode) == EveMode.CE and cfg.lambda_E > 0:
        # Var of the sum beyond r: 2 pi lambda E[u^2] a1^2 int r^(1 - 2 eta) dr
        spread = config.CE_TAIL_STD_FRACTION * omega_ref
        two_eta = 2.0 * cfg.eta - 2.0
        radius_ce = (4.0 * math.pi * cfg.lambda_E * a1 ** 2 / (two_eta * spread ** 2)) ** (1.0 / two_eta)
        radius = max(radius, radius_ce)
    return float(radius)


@lru_cache(maxsize=256)
def far_field_mean_sinr(cfg: SystemConfig, tx: TxParams, r_max: float) -> float:
    """Expected summed SINR of the Eves lying outside the simulated disc."""
    if cfg.lambda_E == 0:
        return 0.0
    a1, a2 = _eve_gains(cfg, tx)
    shape = cfg.n_T - 1
    log_norm = special.gammaln(shape)

    def mean_inverse_path(r):
        path = r ** cfg.eta
        if a2 == 0:
            return 1.0 / path
        value, _ = integrate.quad(
            lambda v: math.exp((shape - 1) * math.log(v) - v - log_norm) / (a2 * v + path)
            if v > 0 else 0.0,
            0.0, np.inf)
        return value

    outer, _ = integrate.quad(lambda r: r * mean_inverse_path(r), r_max, np.inf)
    return 2.0 * math.pi * cfg.lambda_E * a1 * outer


def sample_eve_positions(cfg: SystemConfig, r_max: float, rng: np.random.Generator) -> np.ndarray:
    """Distances of a PPP realization on the disc of radius r_max."""
    if not r_max > 0:
        raise DomainError(f"r_max must be positive, got {r_max}")
    count = rng.poisson(cfg.lambda_E * math.pi * r_max ** 2)
    return r_max * np.sqrt(rng.random(count))


def eve_sinrs_at(cfg: SystemConfig, tx: TxParams, distances: np.ndarray,
                 rng: np.random.Generator) -> np.ndarray:
    """Per-Eve SINR for given distances with fresh small-scale fading."""
    count = len(distances)
    if count == 0:
        return np.empty(0)
    u = rng.exponential(size=count)
    v = rng.standard_gamma(cfg.n_T - 1, size=count)
    a1, a2 = _eve_gains(cfg, tx)
    path = distances ** cfg.eta
    return a1 * u / (a2 * v + path)


def sample_eve_sinrs(cfg: SystemConfig, tx: TxParams, r_max: float,
                     rng: np.random.Generator) -> np.ndarray:
    """SINRs of all Eves of one PPP realization during a confidential slot."""
    return eve_sinrs_at(cfg, tx, sample_eve_positions(cfg, r_max, rng), rng)


def combine_eve_sinrs(sinrs: np.ndarray, mode: EveMode, far_field: float = 0.0) -> float:
    """
    Equivalent wiretap SINR: strongest Eve (NCE) or the sum (CE).

    far_field is added to the CE sum for the Eves outside the simulated disc.
    """
    if EveMode(mode) == EveMode.CE:
        return float(np.sum(sinrs)) + far_field
    return float(np.max(sinrs)) if len(sinrs) else 0.0


def sample_eve_sinr_batch(cfg: SystemConfig, tx: TxParams, r_max: float,
                          rng: np.random.Generator, n_slots: int, mode: EveMode) -> np.ndarray:
    """Equivalent wiretap SINR for n_slots independent PPP realizations."""
    mode = EveMode(mode)
    far_field = far_field_mean_sinr(cfg, tx, r_max) if mode == EveMode.CE else 0.0
    chunks = []
    for start in range(0, n_slots, config.EVE_BATCH_SLOTS):
        size = min(config.EVE_BATCH_SLOTS, n_slots - start)
        counts = rng.poisson(cfg.lambda_E * math.pi * r_max ** 2, size=size)
        distances = r_max * np.sqrt(rng.random(int(counts.sum())))
        sinrs = eve_sinrs_at(cfg, tx, distances, rng)
        owner = np.repeat(np.arange(size), counts)
        if mode == EveMode.NCE:
            result = np.zeros(size)
            np.maximum.at(result, owner, sinrs)
        else:
            result = np.bincount(owner, weights=sinrs, minlength=size) + far_field
        chunks.append(result)
    return np.concatenate(chunks) if chunks else np.zeros(0)
