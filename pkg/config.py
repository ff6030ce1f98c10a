"""
Configuration module for the secure image-delivery toolkit.
Loads environment variables and provides default settings.
"""

import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def _env_float(name: str, default: float) -> float:
    value = os.getenv(name)
    if value is None or value.strip() == '':
        return default
    try:
        return float(value)
    except ValueError:
        raise ValueError(f"{name} must be a number, got {value!r}")


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    if value is None or value.strip() == '':
        return default
    try:
        return int(value)
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {value!r}")


# Build identifier written into every output file header
BUILD_ID = "secure-delivery 1.0.0"

# Logging Configuration
LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO').upper()

# Database Configuration
DATABASE_PATH = os.getenv('DATABASE_PATH', 'secure_delivery.db')

# Parallel workers for sweeps, datasets and Monte Carlo
WORKERS = _env_int('WORKERS', 1)

# Progress logging interval for dataset generation
DATASET_LOG_EVERY = _env_int('DATASET_LOG_EVERY', 100)

# Quadrature (special functions)
QUAD_ABS_TOL = _env_float('QUAD_ABS_TOL', 1e-10)
QUAD_REL_TOL = _env_float('QUAD_REL_TOL', 1e-8)
QUAD_MAX_SUBDIVISIONS = _env_int('QUAD_MAX_SUBDIVISIONS', 200)

# Probabilities overshooting [0,1] by more than this are logged
CLAMP_WARN_TOLERANCE = 1e-9

# Colluding-Eve approximation order
CE_K_TERMS = _env_int('CE_K_TERMS', 10)
CE_MIN_K_TERMS = 5

# PPP truncation: share of the strongest-Eve CDF exponent left outside r_max
PPP_TAIL_FRACTION = _env_float('PPP_TAIL_FRACTION', 1e-6)

# Genetic algorithm defaults
GA_POPULATION = _env_int('GA_POPULATION', 60)
GA_GENERATIONS = _env_int('GA_GENERATIONS', 120)
GA_TOURNAMENT_SIZE = _env_int('GA_TOURNAMENT_SIZE', 3)
GA_CROSSOVER_PROB = _env_float('GA_CROSSOVER_PROB', 0.9)
GA_CROSSOVER_ETA = _env_float('GA_CROSSOVER_ETA', 15.0)
GA_MUTATION_PROB = _env_float('GA_MUTATION_PROB', 0.1)
GA_MUTATION_ETA = _env_float('GA_MUTATION_ETA', 20.0)
GA_ELITISM = _env_int('GA_ELITISM', 2)
GA_PENALTY = _env_float('GA_PENALTY', 1e3)
GA_LOG_EVERY = 20

# Smallest AN power split searched by the optimizer
ZETA_MIN = 1e-3
# nu is searched as nu / (NU_MAX_FACTOR * n_T)
NU_MAX_FACTOR = 4.0

# DNN architecture (input, hidden..., output)
DNN_LAYER_SIZES = (4, 32, 16, 16, 8, 5)

# DNN training
DNN_BATCH_SIZE = _env_int('DNN_BATCH_SIZE', 50)
DNN_MAX_EPOCHS = _env_int('DNN_MAX_EPOCHS', 500)
DNN_LEARNING_RATE = _env_float('DNN_LEARNING_RATE', 0.001)
DNN_DROP_FACTOR = _env_float('DNN_DROP_FACTOR', 0.9)
LR_DROP_PERIOD = _env_int('LR_DROP_PERIOD', 50)
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPSILON = 1e-8
BN_EPSILON = _env_float('BN_EPSILON', 1e-5)
BN_MOMENTUM = _env_float('BN_MOMENTUM', 0.9)
DNN_SPLIT = (3500, 750, 750)
DNN_LOG_EVERY = 50

# Fixed input scales: N_roi, N_bg by 1e3, r_D by the largest scenario radius, rho as-is
DNN_PACKET_SCALE = 1e3
DNN_MAX_RADIUS = _env_float('DNN_MAX_RADIUS', 5.0)

# Model file format version
MODEL_FORMAT_VERSION = 1

# Output tables
TABLE_FLOAT_FORMAT = '%.12g'

# CE truncation: far-field SINR standard deviation allowed, relative to the threshold
CE_TAIL_STD_FRACTION = _env_float('CE_TAIL_STD_FRACTION', 0.02)

# Eve slots sampled per vectorized chunk
EVE_BATCH_SLOTS = 5000
