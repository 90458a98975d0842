"""
Конфигурация gsattack: корень проекта, каталоги по умолчанию, числовые умолчания.
Переменные окружения читаются из .env в корне проекта (python-dotenv).
"""
import os
from pathlib import Path

from dotenv import load_dotenv

ROOT = Path(__file__).resolve().parent.parent

# Загрузка .env из корня проекта
load_dotenv(ROOT / ".env")

OUTPUT_DIR_ENV = "GSATTACK_OUTPUT_DIR"
CORA_BUNDLE_ENV = "GSATTACK_CORA_BUNDLE"
CITESEER_BUNDLE_ENV = "GSATTACK_CITESEER_BUNDLE"

DEFAULT_OUTPUT_DIR = ROOT / "runs"


def default_output_dir() -> Path:
    """Каталог результатов: GSATTACK_OUTPUT_DIR или <root>/runs."""
    value = os.environ.get(OUTPUT_DIR_ENV)
    return Path(value) if value else DEFAULT_OUTPUT_DIR


# --- Атака ---
BUDGET_FRACTION = 0.05
EPSILON_UNRESTRICTED = 1.0

# --- Обучение суррогата / жертвы ---
EPOCHS = 200
LEARNING_RATE = 0.01
WEIGHT_DECAY = 5e-4
HIDDEN_GCN = 16
HIDDEN_MULTIHOP = 32
MULTIHOP_LAYERS = 2
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8

# --- Оценка жертвы ---
VICTIM_RUNS = 10

# --- Данные ---
TRAIN_FRACTION = 0.1
SBM_FEATURE_NOISE = 0.1
FLOAT_FORMAT = "%.17g"

# --- Диагностика ---
EIGEN_TOL = 1e-10
BIPARTITE_TOL = 1e-8
GENERIC_COMPONENT_TOL = 1e-8
LEMMA1_TRIALS = 100
LEMMA1_DELTA = 1e-4
LEMMA1_TIE_FACTOR = 10.0

# Имена файлов бандла
META_FILE = "meta.json"
EDGES_FILE = "edges.csv"
FEATURES_DENSE_FILE = "features.csv"
FEATURES_SPARSE_FILE = "features.triplets"
LABELS_FILE = "labels.csv"
SPLITS_FILE = "splits.json"
PERTURBATIONS_FILE = "perturbations.csv"
TRACE_CONFIG_FILE = "config.json"
RUN_CONFIG_FILE = "run_config.json"

PERTURBATION_COLUMNS = [
    "iter", "i", "j", "action", "saliency", "intra_pseudo", "intra_gt",
    "h_pseudo", "h_gt", "lambda1", "lambda2",
]
DYNAMICS_COLUMNS = ["iter", "h_gt", "h_pseudo", "lower_limit", "upper_limit"]
