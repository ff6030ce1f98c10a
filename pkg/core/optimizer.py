"""
Genetic-algorithm search for the transmission parameters minimizing the
analytic QVP under the intercept-probability constraint.

The decision vector (zeta, P_p, P_s, nu, L_s) is encoded as five genes in
[0, 1]-style boxes: zeta itself, powers normalized by sigma_n * gamma_max,
nu normalized by NU_MAX_FACTOR * n_T and a categorical gene picking one of
the sorted divisors of N_roi. Constraint violations enter the fitness as
penalties. The winner is the best feasible candidate evaluated, or the
best penalized one when none was feasible, and is re-checked exactly.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pymoo.algorithms.soo.nonconvex.ga import GA, comp_by_cv_and_fitness
from pymoo.core.callback import Callback
from pymoo.core.problem import ElementwiseProblem
from pymoo.core.survival import Survival
from pymoo.operators.crossover.sbx import SBX
from pymoo.operators.mutation.pm import PM
from pymoo.operators.selection.tournament import TournamentSelection
from pymoo.optimize import minimize

import config
from core.errors import (
    ContractError, DegenerateInputError, DomainError, InfeasibleConfigurationError,
)
from core.secrecy_analysis import intercept_probability, qvp
from core.system_model import EveScenario, ImageSpec, SystemConfig, TxParams, divisors

logger = logging.getLogger(__name__)

GENES = ('zeta', 'P_p', 'P_s', 'nu', 'L_s')


@dataclass(frozen=True)
class GaSettings:
    population: int = config.GA_POPULATION
    generations: int = config.GA_GENERATIONS
    tournament_size: int = config.GA_TOURNAMENT_SIZE
    crossover_prob: float = config.GA_CROSSOVER_PROB
    crossover_eta: float = config.GA_CROSSOVER_ETA
    mutation_prob: float = config.GA_MUTATION_PROB
    mutation_eta: float = config.GA_MUTATION_ETA
    elitism: int = config.GA_ELITISM
    penalty: float = config.GA_PENALTY
    gene_order: Tuple[str, ...] = GENES

    def __post_init__(self):
        if self.population < 2 or self.generations < 1:
            raise DomainError("the GA needs a population of at least 2 and one generation")
        if not 1 <= self.tournament_size <= self.population:
            raise DomainError(f"tournament size {self.tournament_size} out of range")
        if not 0 <= self.elitism <= self.population:
            raise DomainError(f"elitism {self.elitism} out of range")
        if sorted(self.gene_order) != sorted(GENES):
            raise DomainError(f"gene_order must be a permutation of {GENES}, got {self.gene_order}")
        object.__setattr__(self, 'gene_order', tuple(self.gene_order))


@dataclass(frozen=True)
class OptProblem:
    cfg: SystemConfig
    img: ImageSpec
    scenario: EveScenario
    eps_IP: float

    def __post_init__(self):
        if not 0 < self.eps_IP < 1:
            raise DomainError(f"eps_IP must lie in (0, 1), got {self.eps_IP}")
        if self.img.N_roi < 1:
            raise ContractError("the optimizer needs at least one confidential packet")

    @property
    def divisors(self) -> List[int]:
        return divisors(self.img.N_roi)

    @property
    def nu_max(self) -> float:
        return config.NU_MAX_FACTOR * self.cfg.n_T

    def bounds(self) -> Dict[str, Tuple[float, float]]:
        """Normalized box of each gene."""
        power_low = self.cfg.gamma_min / self.cfg.gamma_max
        return {
            'zeta': (config.ZETA_MIN, 1.0),
            'P_p': (power_low, 1.0),
            'P_s': (power_low, 1.0),
            'nu': (0.0, 1.0),
            'L_s': (0.0, 1.0),
        }

    def decode(self, genes: Mapping[str, float]) -> TxParams:
        choices = self.divisors
        index = min(int(genes['L_s'] * len(choices)), len(choices) - 1)
        scale = self.cfg.sigma_n * self.cfg.gamma_max
        return TxParams(
            zeta=float(genes['zeta']),
            P_p=float(genes['P_p']) * scale,
            P_s=float(genes['P_s']) * scale,
            nu=float(genes['nu']) * self.nu_max,
            L_s=choices[max(index, 0)],
        )

    def encode(self, tx: TxParams) -> Dict[str, float]:
        choices = self.divisors
        if tx.L_s not in choices:
            raise ContractError(f"L_s = {tx.L_s} does not divide N_roi = {self.img.N_roi}")
        scale = self.cfg.sigma_n * self.cfg.gamma_max
        bounds = self.bounds()
        raw = {
            'zeta': tx.zeta,
            'P_p': tx.P_p / scale,
            'P_s': tx.P_s / scale,
            'nu': tx.nu / self.nu_max,
            'L_s': (choices.index(tx.L_s) + 0.5) / len(choices),
        }
        return {name: float(np.clip(value, *bounds[name])) for name, value in raw.items()}


@dataclass
class OptResult:
    tx_star: TxParams
    qvp_star: float
    feasible: bool
    evaluations: int
    history: List[float] = field(default_factory=list)
    ip_star: float = math.nan


# ==================== Fitness ====================

def box_violations(problem: OptProblem, tx: TxParams) -> int:
    cfg = problem.cfg
    count = 0
    for power in (tx.P_p, tx.P_s):
        snr = power / cfg.sigma_n
        if not cfg.gamma_min * (1 - 1e-12) <= snr <= cfg.gamma_max * (1 + 1e-12):
            count += 1
    if not 0 < tx.zeta <= 1:
        count += 1
    if tx.nu < 0:
        count += 1
    if problem.img.N_roi % tx.L_s != 0:
        count += 1
    return count


def evaluate(problem: OptProblem, tx: TxParams) -> Tuple[float, float]:
    """(qvp, IP) of a candidate; raises when the analysis is undefined there."""
    value = qvp(problem.cfg, tx, problem.img, problem.scenario).qvp
    ip = intercept_probability(problem.cfg, tx, problem.scenario)
    return value, ip


@dataclass(frozen=True)
class Assessment:
    fitness: float
    qvp: float
    feasible: bool


def assess(problem: OptProblem, tx: TxParams, penalty: float) -> Assessment:
    """Penalized fitness of a candidate together with its raw QVP and feasibility."""
    try:
        value, ip = evaluate(problem, tx)
    except (InfeasibleConfigurationError, DegenerateInputError, DomainError) as exc:
        logger.debug(f"Candidate {tx} has no QVP: {exc}")
        return Assessment(1.0 + 2.0 * penalty, 1.0, False)
    violations = box_violations(problem, tx)
    fitness = value + penalty * max(0.0, ip - problem.eps_IP) + penalty * violations
    return Assessment(fitness, value, ip <= problem.eps_IP and violations == 0)


def penalized_fitness(problem: OptProblem, tx: TxParams, penalty: float) -> float:
    """qvp plus penalties for the IP constraint and box violations."""
    return assess(problem, tx, penalty).fitness


# ==================== pymoo plumbing ====================

class QvpProblem(ElementwiseProblem):
    """
    Free genes only; pinned genes are merged back before decoding.

    Every evaluation also updates the best feasible candidate seen so far,
    so a small penalty cannot hand back an infeasible winner.
    """

    def __init__(self, problem: OptProblem, free: Sequence[str], pinned: Mapping[str, float],
                 penalty: float):
        bounds = problem.bounds()
        self.problem = problem
        self.free = list(free)
        self.pinned = dict(pinned)
        self.penalty = penalty
        self.best_feasible: Optional[Tuple[float, TxParams]] = None
        super().__init__(
            n_var=len(self.free), n_obj=1,
            xl=np.array([bounds[name][0] for name in self.free]),
            xu=np.array([bounds[name][1] for name in self.free]),
        )

    def genes(self, x) -> Dict[str, float]:
        genes = dict(self.pinned)
        genes.update(zip(self.free, (float(v) for v in x)))
        return genes

    def _evaluate(self, x, out, *args, **kwargs):
        tx = self.problem.decode(self.genes(x))
        result = assess(self.problem, tx, self.penalty)
        if result.feasible and (self.best_feasible is None or result.qvp < self.best_feasible[0]):
            self.best_feasible = (result.qvp, tx)
        out["F"] = result.fitness


class ElitistSurvival(Survival):
    """
    Keep the `elitism` best parents, then the best offspring, then the
    remaining parents until the population is full.
    """

    def __init__(self, elitism: int):
        super().__init__(filter_infeasible=False)
        self.elitism = elitism

    def _do(self, problem, pop, *args, n_survive=None, algorithm=None, **kwargs):
        n_survive = len(pop) if n_survive is None else n_survive
        n_parents = len(pop)
        if algorithm is not None and algorithm.pop is not None:
            n_parents = min(len(algorithm.pop), len(pop))
        F = pop.get("F")[:, 0]
        parents = np.arange(n_parents)
        parents = parents[np.argsort(F[parents], kind='stable')]
        offspring = np.arange(n_parents, len(pop))
        offspring = offspring[np.argsort(F[offspring], kind='stable')]

        elite = list(parents[:self.elitism])
        keep = elite + list(offspring[:max(0, n_survive - len(elite))])
        keep += list(parents[self.elitism:])[:max(0, n_survive - len(keep))]
        keep = sorted(keep[:n_survive], key=lambda i: (F[i], i))
        return pop[keep]


class BestFitnessHistory(Callback):
    def __init__(self, log_every: int = config.GA_LOG_EVERY):
        super().__init__()
        self.history = []
        self.log_every = log_every

    def notify(self, algorithm):
        best = float(algorithm.opt.get("F")[0, 0])
        self.history.append(best)
        if algorithm.n_gen % self.log_every == 0:
            logger.info(f"Generation {algorithm.n_gen}: best fitness {best:.6g}")


# ==================== Solvers ====================

def _finalize(problem: OptProblem, tx: TxParams, evaluations: int, history: List[float]) -> OptResult:
    try:
        value, ip = evaluate(problem, tx)
    except (InfeasibleConfigurationError, DegenerateInputError, DomainError) as exc:
        logger.warning(f"Best candidate has no valid QVP: {exc}")
        return OptResult(tx, 1.0, False, evaluations, history)
    feasible = ip <= problem.eps_IP and box_violations(problem, tx) == 0
    if not feasible:
        logger.warning(f"No feasible candidate found; best IP {ip:.6g} > eps_IP {problem.eps_IP}")
    return OptResult(tx, value, feasible, evaluations, history, ip)


def solve(problem: OptProblem, rng: np.random.Generator,
          settings: Optional[GaSettings] = None,
          pinned: Optional[Mapping[str, float]] = None,
          warm_start: Sequence[TxParams] = ()) -> OptResult:
    """
    Minimize the penalized QVP over the free genes.

    pinned fixes genes at normalized values; warm_start candidates are
    placed in the initial population (their pinned genes are overridden).
    """
    settings = settings or GaSettings()
    pinned = dict(pinned or {})
    unknown = set(pinned) - set(GENES)
    if unknown:
        raise DomainError(f"unknown genes pinned: {sorted(unknown)}")
    if len(problem.divisors) == 1:
        pinned.setdefault('L_s', 0.0)
    free = [name for name in settings.gene_order if name not in pinned]

    if not free:
        tx = problem.decode(pinned)
        return _finalize(problem, tx, 1, [penalized_fitness(problem, tx, settings.penalty)])

    pymoo_problem = QvpProblem(problem, free, pinned, settings.penalty)
    seeds = []
    for tx in warm_start:
        genes = problem.encode(tx)
        seeds.append([genes[name] for name in free])
    n_random = max(0, settings.population - len(seeds))
    initial = rng.uniform(pymoo_problem.xl, pymoo_problem.xu, size=(n_random, len(free)))
    if seeds:
        initial = np.vstack([np.asarray(seeds, dtype=float)[:settings.population], initial])

    algorithm = GA(
        pop_size=settings.population,
        sampling=initial,
        selection=TournamentSelection(func_comp=comp_by_cv_and_fitness, pressure=settings.tournament_size),
        crossover=SBX(prob=settings.crossover_prob, eta=settings.crossover_eta),
        mutation=PM(prob=1.0, eta=settings.mutation_eta, prob_var=settings.mutation_prob),
        survival=ElitistSurvival(settings.elitism),
        eliminate_duplicates=True,
    )
    callback = BestFitnessHistory()
    result = minimize(
        pymoo_problem, algorithm, ('n_gen', settings.generations),
        seed=int(rng.integers(2 ** 31 - 1)), callback=callback, verbose=False,
    )

    if pymoo_problem.best_feasible is not None:
        tx = pymoo_problem.best_feasible[1]
    else:
        best = result.X if result.X is not None else result.pop[0].X
        tx = problem.decode(pymoo_problem.genes(np.atleast_1d(best)))
    evaluations = int(result.algorithm.evaluator.n_eval)
    logger.info(f"GA finished after {evaluations} evaluations")
    return _finalize(problem, tx, evaluations, callback.history)


def baseline_mp(problem: OptProblem, rng: Optional[np.random.Generator] = None,
                settings: Optional[GaSettings] = None,
                pinned: Optional[Mapping[str, float]] = None) -> OptResult:
    """Maximum-power transmission: both SNRs at gamma_max, the rest optimized."""
    genes = dict(pinned or {})
    genes.update({'P_p': 1.0, 'P_s': 1.0})
    return solve(problem, rng or np.random.default_rng(0), settings, genes)


def baseline_ep(problem: OptProblem, rng: Optional[np.random.Generator] = None,
                settings: Optional[GaSettings] = None,
                pinned: Optional[Mapping[str, float]] = None) -> OptResult:
    """Equal power split between information and AN: zeta = 0.5, the rest optimized."""
    genes = dict(pinned or {})
    genes['zeta'] = 0.5
    return solve(problem, rng or np.random.default_rng(0), settings, genes)


def solve_with_baselines(problem: OptProblem, rng: np.random.Generator,
                         settings: Optional[GaSettings] = None) -> Tuple[OptResult, OptResult, OptResult]:
    """(full, MP, EP); the full search starts from both baseline optima."""
    mp = baseline_mp(problem, rng, settings)
    ep = baseline_ep(problem, rng, settings)
    full = solve(problem, rng, settings, warm_start=[mp.tx_star, ep.tx_star])
    return full, mp, ep
