"""
Constants and message templates for the secure-delivery command line.
"""

# Exit codes
EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL_FAILURE = 4
EXIT_MODEL_ERROR = 5

# Scenario / placement choices
SCENARIO_NCE = "nce"
SCENARIO_CE = "ce"
SCENARIO_BOTH = "both"
SCENARIO_CHOICES = (SCENARIO_NCE, SCENARIO_CE, SCENARIO_BOTH)
MODE_CHOICES = ("iid", "static")

# Sweep axes
AXIS_D_LIM = "D_lim"
AXIS_LAMBDA_E = "lambda_E"
AXIS_RHO = "rho"
AXIS_N_TOTAL = "N_total"
AXIS_N_T = "n_T"
SWEEP_AXES = (AXIS_D_LIM, AXIS_LAMBDA_E, AXIS_RHO, AXIS_N_TOTAL, AXIS_N_T)

# Table columns
QVP_COLUMNS = [
    "delay_violation", "intercept_term", "qvp", "N_bar_bg", "N_tilde", "Omega", "Lambda",
    "intercept_shared", "qvp_shared",
]
MC_COLUMNS = ["mc_qvp", "mc_std_err", "agree"]
TX_COLUMNS = ["zeta", "P_p", "P_s", "nu", "L_s"]
DATASET_INPUT_COLUMNS = ["N_roi", "N_bg", "r_D", "rho"]
DATASET_TARGET_COLUMNS = ["zeta_n", "P_p_n", "P_s_n", "nu_n", "L_s_n"]
DATASET_COLUMNS = ["sample", "seed"] + DATASET_INPUT_COLUMNS + DATASET_TARGET_COLUMNS + ["qvp", "feasible"]
VALIDATION_COLUMNS = ["metric", "scenario", "analytic", "simulated", "std_err", "agree"]
VALIDATION_METRICS = (
    "delay_violation", "fip", "fip_shared", "intercept_probability", "qvp", "qvp_shared",
)

# Monte Carlo agreement: |analytic - simulated| <= tolerance + 3 std_err
AGREEMENT_TOLERANCE = 0.02
AGREEMENT_SIGMAS = 3.0

# Report templates
QVP_REPORT_HEADER = "QoSec violation probability ({scenario})\n"
OPTIMIZE_REPORT_HEADER = "Optimized transmission parameters ({label})\n"
MIN_LS_REPORT = "Smallest secure L_s for eps_IP = {eps}: {L_s}"
INFEASIBLE_MSG = "Infeasible: {reason}"
CONFIG_ERROR_MSG = "Configuration error: {reason}"
NUMERICAL_ERROR_MSG = "Numerical failure: {reason}"
MODEL_ERROR_MSG = "Model error: {reason}"
WROTE_FILE_MSG = "Wrote {path}"
