"""
RunConfig: the JSON document every command reads.

Each section maps onto a dataclass below; unknown keys are rejected with
their dotted location. Powers are written in dB here and converted to
linear values when the core types are built.
"""

import hashlib
import json
from dataclasses import dataclass, field, fields, asdict
from typing import Any, Dict, List, Optional

from core.errors import DeliveryModelError
from core.learner import TrainSettings
from core.optimizer import GENES, GaSettings, OptProblem
from core.protocol_sim import SimulationSettings
from core.system_model import (
    EveScenario, ImageSpec, SystemConfig, TxParams, db_to_linear,
)
import config
from utils.constants import MODE_CHOICES, SCENARIO_BOTH, SCENARIO_CHOICES


class ConfigError(DeliveryModelError):
    """The run configuration document is malformed or inconsistent."""


@dataclass
class SystemSection:
    n_T: int = 8
    eta: float = 4.0
    lambda_E: float = 0.2
    ratio_BT_b: float = 50.0 / 8.0
    sigma_n: float = 1.0
    r_D: float = 2.8284271247461903
    rho: float = 0.95
    gamma_min_db: float = 10.0
    gamma_max_db: float = 30.0


@dataclass
class TxSection:
    zeta: float = 0.5
    snr_p_db: float = 30.0
    snr_s_db: float = 30.0
    nu: float = 6.0
    L_s: int = 10


@dataclass
class ImageSection:
    N_roi: int = 60
    N_bg: int = 40
    D_lim: int = 40


@dataclass
class ScenarioSection:
    mode: str = "nce"
    K_terms: int = config.CE_K_TERMS
    eps_IP: float = 0.1


@dataclass
class SimulationSection:
    trials: int = 10000
    placement: str = "iid"
    r_max: Optional[float] = None
    payload_size: int = 0


@dataclass
class OptimizerSection:
    population: int = config.GA_POPULATION
    generations: int = config.GA_GENERATIONS
    tournament_size: int = config.GA_TOURNAMENT_SIZE
    crossover_prob: float = config.GA_CROSSOVER_PROB
    crossover_eta: float = config.GA_CROSSOVER_ETA
    mutation_prob: float = config.GA_MUTATION_PROB
    mutation_eta: float = config.GA_MUTATION_ETA
    elitism: int = config.GA_ELITISM
    penalty: float = config.GA_PENALTY
    gene_order: List[str] = field(default_factory=lambda: list(GENES))
    pinned: Dict[str, float] = field(default_factory=dict)
    baseline: str = "none"


@dataclass
class DatasetSection:
    samples: int = 5000
    N_roi_choices: List[int] = field(default_factory=lambda: [20, 30, 40, 60])
    N_bg_range: List[int] = field(default_factory=lambda: [20, 60])
    r_D_range: List[float] = field(default_factory=lambda: [2.0, 4.0])
    rho_range: List[float] = field(default_factory=lambda: [0.85, 0.99])


@dataclass
class LearnerSection:
    batch_size: int = config.DNN_BATCH_SIZE
    max_epochs: int = config.DNN_MAX_EPOCHS
    learning_rate: float = config.DNN_LEARNING_RATE
    drop_factor: float = config.DNN_DROP_FACTOR
    drop_period: int = config.LR_DROP_PERIOD
    split: List[int] = field(default_factory=lambda: list(config.DNN_SPLIT))
    model_path: str = "model.npz"
    dataset_path: str = "dataset.csv"


@dataclass
class SweepSection:
    values: List[float] = field(default_factory=list)


SECTIONS = {
    'system': SystemSection,
    'tx': TxSection,
    'image': ImageSection,
    'scenario': ScenarioSection,
    'simulation': SimulationSection,
    'optimizer': OptimizerSection,
    'dataset': DatasetSection,
    'learner': LearnerSection,
    'sweep': SweepSection,
}
TOP_LEVEL_KEYS = set(SECTIONS) | {'seed'}


def _build_section(name: str, cls, raw: Any):
    if not isinstance(raw, dict):
        raise ConfigError(f"{name}: expected an object, got {type(raw).__name__}")
    known = {f.name for f in fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{name}.{key}: unknown key")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"{name}: {exc}")


@dataclass
class RunConfig:
    seed: int = 0
    system: SystemSection = field(default_factory=SystemSection)
    tx: TxSection = field(default_factory=TxSection)
    image: ImageSection = field(default_factory=ImageSection)
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    learner: LearnerSection = field(default_factory=LearnerSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    # ==================== Loading ====================

    @classmethod
    def from_dict(cls, document: Dict[str, Any]) -> "RunConfig":
        if not isinstance(document, dict):
            raise ConfigError("the configuration must be a JSON object")
        for key in document:
            if key not in TOP_LEVEL_KEYS:
                raise ConfigError(f"{key}: unknown key")
        sections = {name: _build_section(name, SECTIONS[name], document[name])
                    for name in SECTIONS if name in document}
        seed = document.get('seed', 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ConfigError(f"seed: expected a non-negative integer, got {seed!r}")
        run = cls(seed=seed, **sections)
        run.validate()
        return run

    @classmethod
    def load(cls, path: Optional[str]) -> "RunConfig":
        if path is None:
            return cls()
        try:
            with open(path, 'r', encoding='utf-8') as handle:
                document = json.load(handle)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}")
        return cls.from_dict(document)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        """sha256 of the canonical JSON form of the effective configuration."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def validate(self):
        """Build every core object once so that errors surface with their section."""
        if self.scenario.mode not in SCENARIO_CHOICES:
            raise ConfigError(f"scenario.mode: expected one of {SCENARIO_CHOICES}, got {self.scenario.mode!r}")
        if self.simulation.placement not in MODE_CHOICES:
            raise ConfigError(
                f"simulation.placement: expected one of {MODE_CHOICES}, got {self.simulation.placement!r}")
        if self.simulation.trials < 1:
            raise ConfigError("simulation.trials: must be at least 1")
        if self.optimizer.baseline not in ('none', 'mp', 'ep'):
            raise ConfigError(f"optimizer.baseline: expected none, mp or ep, got {self.optimizer.baseline!r}")
        for gene in self.optimizer.pinned:
            if gene not in GENES:
                raise ConfigError(f"optimizer.pinned.{gene}: unknown gene")
        for name in ('N_bg_range', 'r_D_range', 'rho_range'):
            bounds = getattr(self.dataset, name)
            if len(bounds) != 2 or bounds[0] > bounds[1]:
                raise ConfigError(f"dataset.{name}: expected [low, high], got {bounds}")
        self.system_config()
        self.image_spec()
        self.scenarios()
        self.ga_settings()
        self.train_settings()
        self.simulation_settings()

    # ==================== Core objects ====================

    def system_config(self) -> SystemConfig:
        s = self.system
        with _section('system'):
            return SystemConfig(
                n_T=s.n_T, eta=s.eta, lambda_E=s.lambda_E, ratio_BT_b=s.ratio_BT_b,
                sigma_n=s.sigma_n, r_D=s.r_D, rho=s.rho,
                gamma_min=db_to_linear(s.gamma_min_db), gamma_max=db_to_linear(s.gamma_max_db),
            )

    def tx_params(self) -> TxParams:
        t = self.tx
        sigma = self.system.sigma_n
        with _section('tx'):
            return TxParams(
                zeta=t.zeta, P_p=db_to_linear(t.snr_p_db) * sigma,
                P_s=db_to_linear(t.snr_s_db) * sigma, nu=t.nu, L_s=t.L_s,
            )

    def image_spec(self) -> ImageSpec:
        i = self.image
        with _section('image'):
            return ImageSpec(N_roi=i.N_roi, N_bg=i.N_bg, D_lim=i.D_lim)

    def scenarios(self) -> List[EveScenario]:
        modes = ['nce', 'ce'] if self.scenario.mode == SCENARIO_BOTH else [self.scenario.mode]
        with _section('scenario'):
            return [EveScenario(mode=m, K_terms=self.scenario.K_terms) for m in modes]

    def simulation_settings(self) -> SimulationSettings:
        s = self.simulation
        with _section('simulation'):
            return SimulationSettings(placement=s.placement, r_max=s.r_max, payload_size=s.payload_size)

    def ga_settings(self) -> GaSettings:
        o = self.optimizer
        with _section('optimizer'):
            return GaSettings(
                population=o.population, generations=o.generations, tournament_size=o.tournament_size,
                crossover_prob=o.crossover_prob, crossover_eta=o.crossover_eta,
                mutation_prob=o.mutation_prob, mutation_eta=o.mutation_eta,
                elitism=o.elitism, penalty=o.penalty, gene_order=tuple(o.gene_order),
            )

    def train_settings(self) -> TrainSettings:
        lr = self.learner
        with _section('learner'):
            return TrainSettings(
                batch_size=lr.batch_size, max_epochs=lr.max_epochs, learning_rate=lr.learning_rate,
                drop_factor=lr.drop_factor, drop_period=lr.drop_period, split=tuple(lr.split),
            )

    def opt_problem(self, scenario: EveScenario, img: Optional[ImageSpec] = None,
                    cfg: Optional[SystemConfig] = None) -> OptProblem:
        with _section('scenario'):
            return OptProblem(cfg or self.system_config(), img or self.image_spec(),
                              scenario, self.scenario.eps_IP)


class _section:
    """Re-raise domain errors from core constructors as ConfigError with the section name."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if isinstance(exc, (DeliveryModelError, TypeError, ValueError)) and not isinstance(exc, ConfigError):
            raise ConfigError(f"{self.name}: {exc}") from exc
        return False


def apply_overrides(run: RunConfig, seed: Optional[int] = None, trials: Optional[int] = None,
                    scenario: Optional[str] = None, mode: Optional[str] = None) -> RunConfig:
    """CLI flags win over document values."""
    if seed is not None:
        run.seed = seed
    if trials is not None:
        run.simulation.trials = trials
    if scenario is not None:
        run.scenario.mode = scenario
    if mode is not None:
        run.simulation.placement = mode
    run.validate()
    return run

