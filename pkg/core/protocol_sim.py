"""
Slot-by-slot Monte Carlo simulation of the hybrid fountain-coded delivery.

Every slot draws the estimated legitimate gain, picks a public or
confidential frame, fountain-encodes it, decides destination and Eve
reception from the sampled SINRs and updates the ledgers. The estimators
built on top are the independent oracle for the closed forms in
core.secrecy_analysis.
"""

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from enum import Enum
from functools import partial
from typing import Iterable, List, Optional, Sequence

import numpy as np

import config
from core.errors import DomainError
from core.fountain import FountainCodec, PacketLedger, Stream, fountain_decode_frame, fountain_encode
from core.system_model import (
    EveMode, EveScenario, FrameKind, ImageSpec, PlacementMode, SystemConfig, TxParams,
    auto_r_max, combine_eve_sinrs, eve_sinrs_at, far_field_mean_sinr, rate_threshold,
    sample_estimated_gain, sample_eve_positions, sample_eve_sinr_batch, sinr_destination,
    validate_tx,
)

logger = logging.getLogger(__name__)


class SlotKind(str, Enum):
    PUBLIC = "public"
    CONFIDENTIAL = "confidential"
    IDLE = "idle"


@dataclass(frozen=True)
class SimulationSettings:
    """
    Knobs of the simulator that the analysis does not model.

    r_max None picks auto_r_max at the confidential threshold. payload_size 0
    skips byte payloads; any positive size carries random payloads through
    the XOR codec and checks them at the end of each delivery.
    """
    placement: PlacementMode = PlacementMode.IID
    r_max: Optional[float] = None
    payload_size: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'placement', PlacementMode(self.placement))
        if self.r_max is not None and not self.r_max > 0:
            raise DomainError(f"r_max must be positive, got {self.r_max}")
        if self.payload_size < 0:
            raise DomainError(f"payload_size must be non-negative, got {self.payload_size}")


DEFAULT_SETTINGS = SimulationSettings()


@dataclass(frozen=True)
class SlotRecord:
    kind: SlotKind
    g_hat: float
    packets: int = 0
    dest_success: bool = False
    eve_success: bool = False


@dataclass
class DeliveryOutcome:
    """One delivery. T_D None: deadline exceeded. T_E None: never intercepted."""
    T_D: Optional[int]
    T_E: Optional[int]
    delay_violated: bool
    intercepted_in_time: bool
    slots_public: int = 0
    slots_confidential: int = 0
    slots_idle: int = 0
    payloads_verified: Optional[bool] = None

    @property
    def slots_used(self) -> int:
        return self.slots_public + self.slots_confidential + self.slots_idle

    @property
    def qos_violated(self) -> bool:
        return self.delay_violated or self.intercepted_in_time


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_err: float
    trials: int
    seed: int

    @classmethod
    def from_flags(cls, flags: Sequence[bool], seed: int) -> "McEstimate":
        trials = len(flags)
        if trials < 1:
            raise DomainError("an estimate needs at least one trial")
        value = float(np.mean(flags))
        return cls(value, math.sqrt(value * (1.0 - value) / trials), trials, seed)


@dataclass(frozen=True)
class SlotStatistics:
    """Empirical per-slot frequencies matching the closed-form building blocks."""
    n_slots: int
    psi1_frequency: float
    public_count_pmf: np.ndarray
    outage_frequency: float
    eve_failure_frequency: float
    intercept_frequency: float


@dataclass
class DeliveryState:
    """Ledgers and Eve counters of one delivery in progress."""
    cfg: SystemConfig
    tx: TxParams
    scenario: EveScenario
    ledger: PacketLedger
    theta: float
    r_max: float
    far_field: float = 0.0
    eve_distances: Optional[np.ndarray] = None
    eve_packets: int = 0
    codec: Optional[FountainCodec] = None

    @classmethod
    def start(cls, cfg: SystemConfig, tx: TxParams, img: ImageSpec, scenario: EveScenario,
              rng: np.random.Generator, settings: SimulationSettings = DEFAULT_SETTINGS) -> "DeliveryState":
        theta = rate_threshold(tx.L_s, cfg.ratio_BT_b)
        r_max = settings.r_max or resolve_r_max(cfg, tx, scenario)
        far_field = far_field_mean_sinr(cfg, tx, r_max) if scenario.mode == EveMode.CE else 0.0
        distances = None
        if settings.placement == PlacementMode.STATIC:
            distances = sample_eve_positions(cfg, r_max, rng)
        codec = None
        if settings.payload_size > 0:
            codec = FountainCodec.random(img.N_roi, img.N_bg, settings.payload_size, rng)
        return cls(cfg, tx, scenario, PacketLedger.for_image(img.N_roi, img.N_bg),
                   theta, r_max, far_field, distances, codec=codec)

    def eve_sinr(self, rng: np.random.Generator) -> float:
        if self.eve_distances is None:
            distances = sample_eve_positions(self.cfg, self.r_max, rng)
        else:
            distances = self.eve_distances
        sinrs = eve_sinrs_at(self.cfg, self.tx, distances, rng)
        return combine_eve_sinrs(sinrs, self.scenario.mode, self.far_field)


def resolve_r_max(cfg: SystemConfig, tx: TxParams, scenario: EveScenario) -> float:
    theta = rate_threshold(tx.L_s, cfg.ratio_BT_b)
    return auto_r_max(cfg, tx, theta, scenario.mode)


# ==================== Slots and deliveries ====================

def public_packet_count(cfg: SystemConfig, gamma):
    """Packets a public frame carries at SINR gamma: floor(BT/b * log2(1 + gamma))."""
    return np.floor(cfg.ratio_BT_b * np.log2(1.0 + np.asarray(gamma))).astype(int)


def run_slot(state: DeliveryState, rng: np.random.Generator) -> SlotRecord:
    """Advance the delivery by one slot."""
    cfg, tx, ledger = state.cfg, state.tx, state.ledger
    g_hat = sample_estimated_gain(cfg.n_T, rng)

    if g_hat <= tx.nu:
        if ledger.is_complete(Stream.PUBLIC):
            return SlotRecord(SlotKind.IDLE, g_hat)
        gamma = sinr_destination(cfg, tx, g_hat, FrameKind.PUBLIC)
        L_p = int(public_packet_count(cfg, gamma))
        if L_p < 1:
            return SlotRecord(SlotKind.PUBLIC, g_hat)
        frame = fountain_encode(ledger, Stream.PUBLIC, L_p, state.codec)
        fountain_decode_frame(ledger, frame, True)
        return SlotRecord(SlotKind.PUBLIC, g_hat, len(frame), dest_success=True)

    if ledger.is_complete(Stream.CONFIDENTIAL):
        return SlotRecord(SlotKind.IDLE, g_hat)
    frame = fountain_encode(ledger, Stream.CONFIDENTIAL, tx.L_s, state.codec)
    dest_success = sinr_destination(cfg, tx, g_hat, FrameKind.CONFIDENTIAL) >= state.theta
    eve_success = cfg.lambda_E > 0 and state.eve_sinr(rng) > state.theta
    fountain_decode_frame(ledger, frame, dest_success)
    if eve_success:
        state.eve_packets += len(frame)
    return SlotRecord(SlotKind.CONFIDENTIAL, g_hat, len(frame), dest_success, eve_success)


def simulate_delivery(cfg: SystemConfig, tx: TxParams, img: ImageSpec, scenario: EveScenario,
                      rng: np.random.Generator,
                      settings: SimulationSettings = DEFAULT_SETTINGS) -> DeliveryOutcome:
    """Run one delivery until the destination holds every packet or D_lim slots have passed."""
    validate_tx(cfg, tx, img)
    state = DeliveryState.start(cfg, tx, img, scenario, rng, settings)
    counts = {kind: 0 for kind in SlotKind}
    T_D = None
    T_E = None

    for slot in range(1, img.D_lim + 1):
        record = run_slot(state, rng)
        counts[record.kind] += 1
        if T_E is None and img.N_roi > 0 and state.eve_packets >= img.N_roi:
            T_E = slot
        if state.ledger.delivered:
            T_D = slot
            break

    verified = None
    if state.codec is not None and T_D is not None:
        verified = state.codec.matches(state.ledger)
        if not verified:
            logger.warning("Decoded payloads differ from the source payloads")

    return DeliveryOutcome(
        T_D=T_D,
        T_E=T_E,
        delay_violated=T_D is None,
        intercepted_in_time=T_E is not None,
        slots_public=counts[SlotKind.PUBLIC],
        slots_confidential=counts[SlotKind.CONFIDENTIAL],
        slots_idle=counts[SlotKind.IDLE],
        payloads_verified=verified,
    )


def simulate_interception_time(cfg: SystemConfig, tx: TxParams, img: ImageSpec,
                               scenario: EveScenario, rng: np.random.Generator,
                               horizon: int, r_max: Optional[float] = None) -> Optional[int]:
    """
    Slot at which the Eves hold N_roi confidential packets when the
    confidential stream never stops, or None if that takes longer than horizon.
    """
    if horizon < 1:
        raise DomainError(f"horizon must be at least 1, got {horizon}")
    if img.N_roi == 0 or cfg.lambda_E == 0:
        return None
    frames_needed = img.N_roi // tx.L_s
    theta = rate_threshold(tx.L_s, cfg.ratio_BT_b)
    r_max = r_max or resolve_r_max(cfg, tx, scenario)

    g_hat = rng.standard_gamma(cfg.n_T, size=horizon)
    psi1_slots = np.flatnonzero(g_hat > tx.nu)
    eve = sample_eve_sinr_batch(cfg, tx, r_max, rng, len(psi1_slots), scenario.mode)
    captured = psi1_slots[eve > theta]
    if len(captured) < frames_needed:
        return None
    return int(captured[frames_needed - 1]) + 1


def empirical_slot_statistics(cfg: SystemConfig, tx: TxParams, scenario: EveScenario,
                              n_slots: int, rng: np.random.Generator,
                              r_max: Optional[float] = None) -> SlotStatistics:
    """Per-slot frequencies of public packet counts, outages and Eve captures."""
    if n_slots < 1:
        raise DomainError(f"n_slots must be at least 1, got {n_slots}")
    theta = rate_threshold(tx.L_s, cfg.ratio_BT_b)
    g_hat = rng.standard_gamma(cfg.n_T, size=n_slots)
    psi1 = g_hat > tx.nu

    public_gamma = g_hat[~psi1] * sinr_destination(cfg, tx, 1.0, FrameKind.PUBLIC)
    if len(public_gamma):
        public_pmf = np.bincount(public_packet_count(cfg, public_gamma)) / len(public_gamma)
    else:
        public_pmf = np.zeros(0)

    confidential_gamma = g_hat[psi1] * sinr_destination(cfg, tx, 1.0, FrameKind.CONFIDENTIAL)
    n_psi1 = int(psi1.sum())
    outage = float(np.mean(confidential_gamma < theta)) if n_psi1 else 0.0

    if cfg.lambda_E > 0 and n_psi1:
        r_max = r_max or resolve_r_max(cfg, tx, scenario)
        eve = sample_eve_sinr_batch(cfg, tx, r_max, rng, n_psi1, scenario.mode)
        captures = int(np.sum(eve > theta))
    else:
        captures = 0

    return SlotStatistics(
        n_slots=n_slots,
        psi1_frequency=n_psi1 / n_slots,
        public_count_pmf=public_pmf,
        outage_frequency=outage,
        eve_failure_frequency=1.0 - captures / n_slots,
        intercept_frequency=captures / n_slots,
    )


# ==================== Estimators ====================

def _simulate_chunk(cfg: SystemConfig, tx: TxParams, img: ImageSpec, scenario: EveScenario,
                    settings: SimulationSettings, seeds: Sequence[np.random.SeedSequence]):
    return [simulate_delivery(cfg, tx, img, scenario, np.random.default_rng(s), settings)
            for s in seeds]


def simulate_trials(cfg: SystemConfig, tx: TxParams, img: ImageSpec, scenario: EveScenario,
                    trials: int, seed: int, settings: SimulationSettings = DEFAULT_SETTINGS,
                    workers: Optional[int] = None) -> List[DeliveryOutcome]:
    """
    Independent deliveries, one SeedSequence child per trial.

    Outcomes are returned in trial order, so the result does not depend on
    the number of workers.
    """
    if trials < 1:
        raise DomainError(f"trials must be at least 1, got {trials}")
    workers = max(1, workers or config.WORKERS)
    if settings.placement == PlacementMode.STATIC:
        logger.warning("Static Eve placement breaks the slot independence the analysis assumes")
    children = np.random.SeedSequence(seed).spawn(trials)
    run_chunk = partial(_simulate_chunk, cfg, tx, img, scenario, settings)

    if workers == 1 or trials < 2 * workers:
        outcomes = run_chunk(children)
    else:
        size = math.ceil(trials / workers)
        chunks = [children[i:i + size] for i in range(0, trials, size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = [o for chunk in pool.map(run_chunk, chunks) for o in chunk]

    logger.debug(f"Simulated {trials} deliveries with seed {seed} on {workers} worker(s)")
    return outcomes


def estimate_qvp(cfg: SystemConfig, tx: TxParams, img: ImageSpec, scenario: EveScenario,
                 trials: int, seed: int, settings: SimulationSettings = DEFAULT_SETTINGS,
                 workers: Optional[int] = None) -> McEstimate:
    """Fraction of deliveries that miss D_lim or are intercepted in time."""
    outcomes = simulate_trials(cfg, tx, img, scenario, trials, seed, settings, workers)
    return McEstimate.from_flags([o.qos_violated for o in outcomes], seed)


def estimate_fip(cfg: SystemConfig, tx: TxParams, img: ImageSpec, scenario: EveScenario,
                 trials: int, seed: int, settings: SimulationSettings = DEFAULT_SETTINGS,
                 workers: Optional[int] = None) -> McEstimate:
    """Fraction of deliveries completed in time but intercepted no later than completion."""
    outcomes = simulate_trials(cfg, tx, img, scenario, trials, seed, settings, workers)
    return McEstimate.from_flags(
        [o.intercepted_in_time and not o.delay_violated for o in outcomes], seed)


def estimate_intercept_probability(cfg: SystemConfig, tx: TxParams, scenario: EveScenario,
                                   n_slots: int, seed: int,
                                   r_max: Optional[float] = None) -> McEstimate:
    """Per-slot frequency of confidential frames captured by the Eves."""
    stats = empirical_slot_statistics(cfg, tx, scenario, n_slots, np.random.default_rng(seed), r_max)
    value = stats.intercept_frequency
    return McEstimate(value, math.sqrt(value * (1.0 - value) / n_slots), n_slots, seed)


# ==================== Trial records ====================

def write_trial_records(outcomes: Iterable[DeliveryOutcome], path: str) -> int:
    """Write one JSON object per delivery; returns the number of records."""
    written = 0
    with open(path, 'w', encoding='utf-8') as handle:
        for trial, outcome in enumerate(outcomes):
            record = asdict(outcome)
            record.pop('payloads_verified')
            handle.write(json.dumps({'trial': trial, **record}) + '\n')
            written += 1
    logger.info(f"Wrote {written} trial records to {path}")
    return written
