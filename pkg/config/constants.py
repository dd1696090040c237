"""Constants and Configuration"""

# Image I/O
SUPPORTED_SUFFIXES = (".png", ".pgm", ".ppm")
GRAY_WEIGHTS = (0.299, 0.587, 0.114)  # ITU-R BT.601 luma

# Soft mask defaults (best cell of the tau x n ablation)
MASK_TAU = 0.3
MASK_ALPHA = 50.0
MASK_N = 8
PAD_MODES = ("edge", "symmetric", "reflect")
DEFAULT_PAD_MODE = "edge"

NEIGHBORHOODS = {
    4: [(-1, 0), (1, 0), (0, -1), (0, 1)],
    8: [(-1, 0), (1, 0), (0, -1), (0, 1),
        (-1, -1), (-1, 1), (1, -1), (1, 1)],
    12: [(-1, 0), (1, 0), (0, -1), (0, 1),
         (-1, -1), (-1, 1), (1, -1), (1, 1),
         (-2, 0), (2, 0), (0, -2), (0, 2)],
}

# Network
OMEGA0 = 30.0
FINER_BIAS_SCALE = 1.0
BACKBONES = ("siren", "finer")
HIDDEN_LAYERS = 3
WIDTH = 256
COORD_DIM = 2

# Adam
LEARNING_RATE = 1e-4
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Two-stage schedule
STAGE1_EPOCHS = 200
STAGE2_EPOCHS = 300
EVAL_EVERY = 50
DEGENERATE_WEIGHT = 1e-12
STAGE_HF = "hf"
STAGE_FULL = "full"
PROGRESS_LOGGER = "services.trainer.progress"

# Metrics
PSNR_MAX = 1.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_RANGE = 1.0
REGION_THRESHOLD = 0.5

# Ablation grids; tau x n is the default for `ablate` without list flags
TAU_GRID = [0.1, 0.2, 0.3, 0.4, 0.5]
N_GRID = [4, 8, 12]
STAGE1_GRID = [100, 150, 200, 250, 300]

# Run profiles: desk-scale for quick checks, full-scale for 256x256 benchmark runs
PROFILES = {
    "desk": {
        "resize": (64, 64),
        "width": 64,
        "hidden_layers": 3,
        "stage1_epochs": 100,
        "stage2_epochs": 150,
    },
    "full": {
        "resize": (256, 256),
        "width": 256,
        "hidden_layers": 3,
        "stage1_epochs": 200,
        "stage2_epochs": 300,
    },
}

# Reports
REPORT_FILE = "report.csv"
EVAL_REPORT_FILE = "eval_report.csv"
CONFIG_FILE = "config.json"
MEAN_ROW_ID = "MEAN"
REPORT_COLUMNS = [
    "image", "backbone", "tau", "alpha", "n", "stage1_epochs", "stage2_epochs",
    "seed", "psnr", "ssim", "hf_psnr", "lf_psnr", "wall_seconds",
]

# Checkpoints
CHECKPOINT_MAGIC = b"HFCK"
CHECKPOINT_VERSION = 1
ACTIVATION_IDS = {"sine": 0, "finer": 1}
