"""
Модели данных gsattack (pydantic): конфигурации обучения/атаки/запуска,
записи трассы атаки и отчёты диагностики. Численные структуры графа
(массивы numpy/scipy) живут в graph.py.
"""
import hashlib
import math
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .config import (
    BUDGET_FRACTION,
    EPOCHS,
    EPSILON_UNRESTRICTED,
    HIDDEN_GCN,
    HIDDEN_MULTIHOP,
    LEARNING_RATE,
    MULTIHOP_LAYERS,
    VICTIM_RUNS,
    WEIGHT_DECAY,
)

# Архитектуры суррогата
ARCH_GCN = "gcn"
ARCH_MULTIHOP = "multihop"

# Виды потерь атаки
LOSS_CE = "ce"
LOSS_RESTRICTED = "restricted"

# Действия над ребром
ACTION_ADD = "add"
ACTION_REMOVE = "remove"

Architecture = Literal["gcn", "multihop"]


# ============== Конфигурации ==============

class TrainConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    epochs: int = Field(default=EPOCHS, ge=1)
    learning_rate: float = Field(default=LEARNING_RATE, gt=0)
    weight_decay: float = Field(default=WEIGHT_DECAY, ge=0)
    hidden_width: Optional[int] = Field(default=None, ge=1)
    layers: int = Field(default=MULTIHOP_LAYERS, ge=1)  # только multihop; у gcn всегда 2 слоя
    seed: int = Field(default=0, ge=0)
    optimizer: Literal["adam", "gradient_descent"] = "adam"

    def hidden_for(self, architecture: str) -> int:
        if self.hidden_width is not None:
            return self.hidden_width
        return HIDDEN_GCN if architecture == ARCH_GCN else HIDDEN_MULTIHOP


class AttackConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    budget_fraction: float = Field(default=BUDGET_FRACTION, gt=0, le=1)
    budget: Optional[int] = Field(default=None, ge=1)  # явный Δ важнее доли
    epsilon: float = Field(default=EPSILON_UNRESTRICTED, gt=0, le=1)
    loss: Literal["ce", "restricted"] = LOSS_CE
    retrain_every: int = Field(default=1, ge=1)
    surrogate: Architecture = ARCH_MULTIHOP
    label_source: Literal["self", "train"] = "self"
    warm_start: bool = False
    seed: int = Field(default=0, ge=0)
    train: TrainConfig = Field(default_factory=TrainConfig)

    def resolve_budget(self, edge_count: int) -> int:
        if self.budget is not None:
            return self.budget
        return max(1, int(self.budget_fraction * edge_count))

    @property
    def unrestricted(self) -> bool:
        return self.loss == LOSS_CE or self.epsilon >= EPSILON_UNRESTRICTED


class RunConfig(BaseModel):
    """Полностью разрешённая конфигурация запуска CLI; пишется в run_config.json."""

    model_config = ConfigDict(extra="forbid")

    subcommand: str
    dataset: Optional[str] = None
    output_dir: str
    seed: int = Field(default=0, ge=0)
    budget_fraction: float = Field(default=BUDGET_FRACTION, gt=0, le=1)
    budget: Optional[int] = Field(default=None, ge=1)
    epsilon: float = Field(default=EPSILON_UNRESTRICTED, gt=0, le=1)
    surrogate: Architecture = ARCH_MULTIHOP
    loss: Literal["ce", "restricted"] = LOSS_CE
    retrain_every: int = Field(default=1, ge=1)
    label_source: Literal["self", "train"] = "self"
    warm_start: bool = False
    method: Literal["saliency", "dice"] = "saliency"
    victim_runs: int = Field(default=VICTIM_RUNS, ge=1)
    epochs: int = Field(default=EPOCHS, ge=1)
    learning_rate: float = Field(default=LEARNING_RATE, gt=0)
    hidden_width: Optional[int] = Field(default=None, ge=1)
    options: Dict[str, Any] = Field(default_factory=dict)

    def train_config(self, seed: Optional[int] = None) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.learning_rate,
            hidden_width=self.hidden_width,
            seed=self.seed if seed is None else seed,
        )

    def attack_config(self) -> AttackConfig:
        return AttackConfig(
            budget_fraction=self.budget_fraction,
            budget=self.budget,
            epsilon=self.epsilon,
            loss=self.loss,
            retrain_every=self.retrain_every,
            surrogate=self.surrogate,
            label_source=self.label_source,
            warm_start=self.warm_start,
            seed=self.seed,
            train=self.train_config(),
        )


# ============== Трасса атаки ==============

class PerturbationRecord(BaseModel):
    iteration: int = Field(..., ge=1)
    i: int = Field(..., ge=0)
    j: int = Field(..., ge=0)
    action: Literal["add", "remove"]
    saliency: float
    intra_pseudo: bool
    intra_gt: bool
    h_pseudo: Optional[float]  # None, если рёбер не осталось
    h_gt: Optional[float]
    lambda1: float = 1.0
    lambda2: float = 0.0

    @model_validator(mode="after")
    def _ordered_pair(self):
        if self.i >= self.j:
            raise ValueError("perturbation endpoints must satisfy i < j")
        return self


class AttackTrace(BaseModel):
    records: List[PerturbationRecord] = Field(default_factory=list)
    clean_h_pseudo: Optional[float]  # None для графа без рёбер
    clean_h_gt: Optional[float]
    clean_edge_count: int = Field(..., ge=0)
    method: Literal["saliency", "dice"] = "saliency"
    config: Dict[str, Any] = Field(default_factory=dict)

    @property
    def budget(self) -> int:
        return len(self.records)

    def trace_hash(self) -> str:
        digest = hashlib.sha256()
        for r in self.records:
            digest.update(f"{r.iteration},{r.i},{r.j},{r.action};".encode("ascii"))
        return digest.hexdigest()


# ============== Отчёты ==============

class EvalReport(BaseModel):
    accuracies: List[float]
    seeds: List[int]
    mean: float
    std: float
    runs: int
    graph_identity: str = "clean"

    @classmethod
    def from_runs(cls, seeds: List[int], accuracies: List[float], graph_identity: str = "clean") -> "EvalReport":
        order = np.argsort(seeds, kind="stable")
        seeds = [int(seeds[k]) for k in order]
        accuracies = [float(accuracies[k]) for k in order]
        values = np.asarray(accuracies)
        std = float(values.std(ddof=1)) if values.size > 1 else 0.0
        return cls(
            accuracies=accuracies,
            seeds=seeds,
            mean=float(values.mean()),
            std=std,
            runs=len(accuracies),
            graph_identity=graph_identity,
        )

    @model_validator(mode="after")
    def _consistent(self):
        if not (len(self.accuracies) == len(self.seeds) == self.runs):
            raise ValueError("runs must match the number of accuracies and seeds")
        if self.accuracies and not math.isclose(self.mean, float(np.mean(self.accuracies)), abs_tol=1e-12):
            raise ValueError("mean does not match the per-run accuracies")
        return self


class VictimComparison(BaseModel):
    """Парное сравнение жертвы на чистом и отравленном графе при одинаковых seed."""

    seeds: List[int]
    clean_mean: float
    poisoned_mean: float
    drop: float
    paired_drops: List[float]
    poisoned_lower_everywhere: bool


class LpaScenario(BaseModel):
    n1: float = Field(..., ge=0)
    n2: float = Field(..., ge=0)
    delta: float = Field(..., gt=0, lt=1)

    @model_validator(mode="after")
    def _non_degenerate(self):
        if self.n1 + self.n2 <= 0:
            raise ValueError("the target node needs at least one neighbor")
        return self


class LpaReport(BaseModel):
    scenario: LpaScenario
    p_delta1: float
    p_delta2: float
    gap: float
    identity_residual: float
    adding_inter_preferred: bool


class Lemma1Report(BaseModel):
    trials: int
    evaluated: int
    agreements: int
    agreement_rate: float
    delta_a: float
    excluded_ties: int


class SpectralReport(BaseModel):
    n_nodes: int
    eigenvalues: List[float]
    leading_eigenvector: List[float]
    connected: bool
    bipartite: bool
    bipartite_spectral: bool
    lambda_min: float
    lambda_max: float
    lambda_max_ok: bool = True
    lambda_min_ok: bool = True
    stationary_residual: float
    stationary_residual_inverse: float
    kappa_target: Optional[float] = None
    dominant_kappa_target: Optional[float] = None
    # часть smoothing_trace
    rescaled: Optional[bool] = None
    features_regenerated: Optional[bool] = None
    taus: List[int] = Field(default_factory=list)
    pairs: List[List[int]] = Field(default_factory=list)
    distances: List[List[float]] = Field(default_factory=list)
    kappa_median: List[float] = Field(default_factory=list)
    final_kappas: List[Optional[float]] = Field(default_factory=list)
    kappa_error: Optional[float] = None
    shrinkage_holds: Optional[bool] = None


class DynamicsRow(BaseModel):
    iter: int
    h_gt: Optional[float]
    h_pseudo: Optional[float]
    lower_limit: Optional[float]
    upper_limit: Optional[float]
    envelope_lower: Optional[float]
    envelope_upper: Optional[float]


class InterclassStats(BaseModel):
    flips: int
    additions: int
    removals: int
    add_inter_pseudo: int
    add_intra_pseudo: int
    remove_inter_pseudo: int
    remove_intra_pseudo: int
    add_inter_gt: int
    add_intra_gt: int
    remove_inter_gt: int
    remove_intra_gt: int
    addition_fraction: float
    inter_fraction_of_additions_pseudo: float
    inter_fraction_of_additions_gt: float
    trajectory: List[DynamicsRow] = Field(default_factory=list)


class SweepRow(BaseModel):
    epsilon: float
    budget: int
    accuracy_mean: float
    accuracy_std: float
    h_gt: Optional[float]
    h_pseudo: Optional[float]


class SweepReport(BaseModel):
    clean: EvalReport
    clean_h_gt: Optional[float]
    clean_h_pseudo: Optional[float]
    rows: List[SweepRow]


# ============== Формат бандла ==============

class DatasetMeta(BaseModel):
    model_config = ConfigDict(extra="forbid")

    num_nodes: int = Field(..., ge=1)
    num_classes: int = Field(..., ge=1)
    feature_dim: int = Field(..., ge=1)
    feature_storage: Literal["dense", "sparse"] = "dense"


class SplitSpec(BaseModel):
    train: List[int]
    test: List[int]
    seed: int = 0

    @field_validator("train", "test")
    @classmethod
    def _non_negative(cls, v: List[int]) -> List[int]:
        if any(x < 0 for x in v):
            raise ValueError("node indices must be non-negative")
        return v

    @model_validator(mode="after")
    def _disjoint(self):
        if set(self.train) & set(self.test):
            raise ValueError("train and test must be disjoint")
        if not self.train:
            raise ValueError("train split must be non-empty")
        return self
