import os

from .run_settings import *

# Numerical kernel
OWEN_T_EPSABS = 1e-13
SURVIVAL_FLOOR = 1e-300
SN_TAIL_SWITCH = 1e-4
SN_TAIL_NODES = 64

# Nonparametric MLE of the latent scale distribution
CNM_GRID_POINTS = 200
CNM_MAX_ITER = 500
CNM_REFINE_XTOL = 1e-6
CNM_GRAD_TOL_FACTOR = 1e-6
SIGMA_MIN_FACTOR = 1e-3
SIGMA_MAX_FACTOR = 10.0
SUPPORT_MERGE_FACTOR = 1e-4
INITIAL_SUPPORT_FACTORS = (0.5, 1.5)
NNLS_ROW_CAP = 1e4
NNLS_MAX_HALVINGS = 60
CNM_EM_STEPS = 5

# Quasi-Newton step for the structural parameters
BFGS_MAX_ITER = 500
BFGS_TOL_FACTOR = 1e-6
BFGS_FTOL = 1e-10
BFGS_ARMIJO = 1e-4
BFGS_SHRINK = 0.5
BFGS_MAX_HALVINGS = 40
BFGS_CURVATURE_GUARD = 1e-12
FD_STEP = 1e-6

# Outer alternation
OUTER_TOL = 1e-6
MAX_OUTER = 100

# Comparators
GEHAN_MAX_ITER = 200
GEHAN_TOL_FACTOR = 1e-10
GEHAN_ACCEPT_FACTOR = 1e-4
BJ_TOL = 1e-6
BJ_MAX_ITER = 100
BJ_MAX_CYCLE = 4
SN_START_SLANTS = (-2.0, 2.0)

# Evaluation
G_FLOOR = 0.05
IBS_GRID_POINTS = 200
BOOTSTRAP_REPLICATES = 500
BOOTSTRAP_FAILURE_LIMIT = 0.2
LUNG_T_MAX = 1826.25
CURVE_POINTS = 100

# Simulation
TRUE_BETA = (2.0, 1.0, -1.0)
DEFAULT_REPLICATIONS = 200
DESK_REPLICATIONS = 100
PREDICTION_TRAIN_N = 250
PREDICTION_TEST_M = 1000
DEFAULT_SEED = 20240601

METHOD_NORMAL = "normal"
METHOD_SN = "sn"
METHOD_GEHAN = "gehan"
METHOD_GEE = "gee"
METHOD_SSNSM = "ssnsm"
METHOD_NGSM = "ngsm"

# The five estimators compared throughout the simulation and data-analysis workflows
ALL_METHODS = (METHOD_NORMAL, METHOD_SN, METHOD_GEHAN, METHOD_GEE, METHOD_SSNSM)
METHOD_CHOICES = ALL_METHODS + (METHOD_NGSM,)

COMMAND_FIT = "fit"
COMMAND_SIMULATE = "simulate"
COMMAND_PREDICT = "predict"
COMMAND_EVALUATE = "evaluate"
COMMANDS = (COMMAND_FIT, COMMAND_SIMULATE, COMMAND_PREDICT, COMMAND_EVALUATE)

SECTION_REQUIRED = None
SECTION_DATA = "Data"
SECTION_METHODS = "Methods"
SECTION_SIMULATION = "Simulation"
SECTION_EVALUATION = "Evaluation"
SECTION_OUTPUT = "Output"


def _methods(value) -> list[str]:
    methods = csv_list(value)
    if methods == ["all"]:
        return list(ALL_METHODS)
    return methods


def _float_list(value) -> list[float]:
    return [float(item) for item in csv_list(value)]


RUN_SETTINGS = RunSettings(
    [
        Section(
            name=SECTION_REQUIRED,
            params=[
                Param(
                    key="command",
                    label="Command",
                    help_text="Action to run",
                    required=True,
                    choices=COMMANDS,
                ),
                Param(
                    key="config",
                    label="Config File",
                    help_text="YAML file of key: value pairs; command-line flags take precedence",
                    placeholder="PATH",
                ),
            ],
        ),
        Section(
            name=SECTION_DATA,
            params=[
                Param(
                    key="input",
                    label="Input CSV",
                    help_text="Comma-separated file with a header row",
                    placeholder="PATH",
                ),
                Param(
                    key="time_col",
                    label="Time Column",
                    help_text="Column holding the observed (positive) time",
                    initial="time",
                ),
                Param(
                    key="status_col",
                    label="Status Column",
                    help_text="Column holding the event indicator (1 = event, 0 = censored)",
                    initial="status",
                ),
                Param(
                    key="covariates",
                    label="Covariates",
                    field=csv_list,
                    help_text="Comma separated covariate columns; defaults to every other column",
                    placeholder="A,B,C",
                ),
                Param(
                    key="model",
                    label="Model JSON",
                    help_text="Fitted model dump read by the predict command",
                    placeholder="PATH",
                ),
            ],
        ),
        Section(
            name=SECTION_METHODS,
            params=[
                Param(
                    key="methods",
                    label="Methods",
                    field=_methods,
                    help_text=f"Comma separated subset of {', '.join(METHOD_CHOICES)}, or 'all'",
                    initial=list(ALL_METHODS),
                    choices=METHOD_CHOICES,
                ),
                Param(
                    key="seed",
                    label="Seed",
                    field=int,
                    help_text="Base seed for every derived random stream",
                    initial=DEFAULT_SEED,
                    env="SSNSM_AFT_SEED",
                ),
                Param(
                    key="workers",
                    label="Workers",
                    field=int,
                    help_text="Worker processes for replications and bootstrap; defaults to all cores",
                    initial=os.cpu_count() or 1,
                    env="SSNSM_AFT_WORKERS",
                ),
            ],
        ),
        Section(
            name=SECTION_SIMULATION,
            params=[
                Param(
                    key="preset",
                    label="Scenario Preset",
                    help_text="Scenario name such as sim1/n200/tau4/t3, sim2/tau4/skewt or sim3/n400/tau4/slant-50",
                    placeholder="NAME",
                ),
                Param(
                    key="reps",
                    label="Replications",
                    field=int,
                    help_text="Override the preset replication count",
                    aliases=("--replications",),
                ),
            ],
        ),
        Section(
            name=SECTION_EVALUATION,
            params=[
                Param(
                    key="bootstrap",
                    label="Bootstrap Replicates",
                    field=int,
                    help_text="Case-resampling replicates for standard errors (0 disables)",
                    initial=BOOTSTRAP_REPLICATES,
                ),
                Param(
                    key="tmax",
                    label="IBS Horizon",
                    field=float,
                    help_text="Upper limit of the integrated Brier score and of survival curves",
                    initial=LUNG_T_MAX,
                ),
                Param(
                    key="t_star",
                    label="Brier Time Points",
                    field=_float_list,
                    help_text="Comma separated time points for the Brier score",
                    placeholder="T1,T2",
                ),
                Param(
                    key="profiles",
                    label="Covariate Profiles",
                    help_text="Survival-curve profiles as 'name:col=value,col=value;name2:...'; "
                    "unspecified covariates are held at their sample mean",
                    placeholder="PROFILES",
                ),
            ],
        ),
        Section(
            name=SECTION_OUTPUT,
            params=[
                Param(
                    key="out",
                    label="Output Directory",
                    help_text="Directory receiving CSV and JSON outputs",
                    initial="results",
                    placeholder="DIR",
                ),
            ],
        ),
    ]
)
