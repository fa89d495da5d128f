from skyrsma import constants_utils as cu

RANDOM_SEED = 0
PLACEMENT_SEED = 0

NUM_GTS = 2
N_SLOTS = 100
F_UAV = 300.0
ALT_LEVELS = 20
TIME_LEVELS = 5
START_POSE = (1, 20, 1)

ACCESS = "rsma"
DECODING = "priority"
AGENT = "gdrs"

EPISODES = 500
STEPS_PER_EPISODE = None  # None runs every slot of the mission
EVAL_EPISODES = 5

POWER_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
LAMBDA1 = 1.0
LAMBDA2 = 1.0
PENALTY_C0 = 10.0
TERMINAL_DISTANCE_WEIGHT = 0.0

DISCOUNT = 0.95
TEMPERATURE = 0.05
SOFT_UPDATE = 0.005
BATCH_SIZE = 64
REPLAY_CAPACITY = 100000
WARMUP = 500
LEARNING_RATE = 5e-4
HIDDEN = (128, 128)
ACTIVATION = "tanh"
OPTIMIZER = "adam"
DIFFUSION_STEPS = 20
PHI_MIN = 0.1
PHI_MAX = 20.0
NOISE_SCALE = "verbatim"
DENOISE_CLIP = 4.0
EMBED_DIM = 16

EPS_START = 1.0
EPS_END = 0.05
EPS_DECAY_STEPS = 10000

FINAL_WINDOW_FRACTION = 0.1
SWEEP_WORKERS = 1

GRADCHECK_STEPS = 5
GRADCHECK_PHI_MAX = 2.0
GRADCHECK_TOLERANCE = 1e-5
TELESCOPING_TOLERANCE = 1e-9
TELESCOPING_INSTANCES = 200
ORACLE_INSTANCES = 500

# Smoke training: 25 m cells make time levels 1 and 2 too short for a one-cell move
SMOKE_EPISODES = 30
SMOKE_SLOTS = 20
SMOKE_CELL_SPACING = 25.0
SMOKE_WARMUP = 100
SMOKE_LEARNING_RATE = 5e-3

# Reference envelopes; values outside are accepted with a warning
ENVELOPES = {
    "/scenario/num_gts": cu.NUM_GTS_RANGE,
    "/scenario/compute/f_u": cu.F_UAV_RANGE,
    "/scenario/tasks/cycles": cu.TASK_CYCLES_RANGE,
    "/scenario/tasks/bits": cu.TASK_BITS_RANGE,
    "/scenario/mission/h_min": (cu.H_MIN, cu.H_MAX),
    "/scenario/mission/h_max": (cu.H_MIN, cu.H_MAX),
    "/scenario/mission/t_min": (cu.T_MIN, cu.T_MAX),
    "/scenario/mission/t_max": (cu.T_MIN, cu.T_MAX),
}

if PHI_MIN >= PHI_MAX:
    raise Exception("Diffusion schedule endpoints are inverted")

if not 0 < FINAL_WINDOW_FRACTION <= 1:
    raise Exception("Final window must be a fraction of the episodes")

if BATCH_SIZE > REPLAY_CAPACITY or WARMUP > REPLAY_CAPACITY:
    raise Exception("Replay buffer too small for the batch or warm-up")

if any(not 0 <= f <= 1 for f in POWER_GRID):
    raise Exception("Power grid entries are fractions of the per-sub-message budget")

if not cu.NUM_GTS_RANGE[0] <= NUM_GTS <= cu.NUM_GTS_RANGE[1]:
    cu.log.warning("Default GT count lies outside the reference range")
