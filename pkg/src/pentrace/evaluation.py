"""Ten-fold cross-validation harness and the two experiment grids.

Folds default to stratified AND participant-group-aware: when the merged
experiments pool the two tasks of a category, both samples of a participant
land in the same fold, so no writer straddles train and test. Passing
``paper_mode=True`` drops the group constraint to mimic plain pooled
cross-validation.

The single-task grid covers 6 tasks x {A, P, AL} x 4 classifiers (72
cells); the merged grid covers 3 categories x 3 x 4 (36 cells). Every cell
is seeded from the master seed and its own coordinates, so cells are
independent of execution order and reruns are bit-identical. All
classifiers in one (tasks, feature-set) block share a fold plan, so their
accuracies are comparable.
"""
from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .ink import CATEGORIES, TASKS
from .learners import (Dataset, dataset_from_vectors, default_params,
                       predict, train)

CLASSIFIERS = ("DT", "RF", "SVM", "MLP")
FEATURE_SET_ORDER = ("A", "P", "AL")


def derive_seed(master_seed: int, *parts) -> int:
    """Stable sub-seed for a pipeline stage, derived by hashing the master
    seed with the stage coordinates (no wall clock, no OS entropy)."""
    text = ":".join([str(master_seed), *map(str, parts)])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % (2 ** 63)


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray  # sample index -> fold id
    stratified: bool
    group_aware: bool
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def make_folds(dataset: Dataset, k: int = 10, stratified: bool = True,
               group_aware: bool = True, seed: int = 0) -> FoldPlan:
    """Deterministic fold assignment.

    Greedy balanced dealing: groups (participants when ``group_aware``,
    single samples otherwise) are shuffled per class and dealt to the fold
    with the fewest samples of that class, breaking ties by total fold
    size then fold id. With equal-size groups this yields fold sizes
    within one sample and per-class counts within one of each other.
    """
    n = dataset.n
    if k < 2:
        raise ValidationError(f"need k >= 2 folds, got {k}")
    if k > n:
        raise ValidationError(f"k={k} folds exceed {n} samples")
    rng = np.random.default_rng(np.random.SeedSequence(seed))

    if group_aware:
        keys = list(dict.fromkeys(dataset.groups))  # stable unique order
        members = {key: [] for key in keys}
        for i, g in enumerate(dataset.groups):
            members[g].append(i)
        largest = max(len(m) for m in members.values())
        if largest > n / k:
            warnings.warn(
                f"a participant has {largest} samples > n/k = {n / k:.1f}; "
                "fold sizes will be balanced best-effort")
    else:
        keys = list(range(n))
        members = {i: [i] for i in keys}

    def group_class(key) -> int:
        labels = dataset.labels[members[key]]
        return int(round(float(np.mean(labels)))) if stratified else 0

    by_class: dict[int, list] = {}
    for key in keys:
        by_class.setdefault(group_class(key), []).append(key)

    assignments = np.full(n, -1, dtype=int)
    fold_sizes = np.zeros(k, dtype=int)
    fold_class_counts = {cls: np.zeros(k, dtype=int) for cls in by_class}
    for cls in sorted(by_class):
        group_keys = by_class[cls]
        order = rng.permutation(len(group_keys))
        # largest groups first so stragglers can still balance
        order = sorted(order, key=lambda i: -len(members[group_keys[i]]))
        for i in order:
            key = group_keys[i]
            size = len(members[key])
            cost = list(zip(fold_class_counts[cls], fold_sizes, range(k)))
            fold = min(cost)[2]
            for sample in members[key]:
                assignments[sample] = fold
            fold_sizes[fold] += size
            fold_class_counts[cls][fold] += size
    return FoldPlan(k=k, assignments=assignments, stratified=stratified,
                    group_aware=group_aware, seed=seed)


@dataclass
class CellResult:
    """Cross-validated accuracy bookkeeping for one grid cell."""

    mean_accuracy: float  # percent
    fold_accuracies: list[float]  # percent, successful folds only
    confusion: dict[str, int]  # tp/tn/fp/fn with AD as positive
    n_samples: int
    failed_folds: list[int]
    seed: int


def cross_validate(kind: str, dataset: Dataset, params, plan: FoldPlan) -> CellResult:
    """Train on k-1 folds, test on the held-out one, for every fold.

    Folds whose training part degenerates to a single class are recorded
    as failed and excluded from the mean.
    """
    if len(plan.assignments) != dataset.n:
        raise ValidationError("fold plan does not cover the dataset")
    fold_accs = []
    failed = []
    confusion = {"tp": 0, "tn": 0, "fp": 0, "fn": 0}
    for fold in range(plan.k):
        train_idx = plan.train_indices(fold)
        test_idx = plan.test_indices(fold)
        if len(test_idx) == 0:
            continue
        train_ds = dataset.subset_rows(train_idx)
        if len(np.unique(train_ds.labels)) < 2:
            warnings.warn(f"fold {fold}: single-class training set, skipped")
            failed.append(fold)
            continue
        model = train(kind, train_ds, params)
        labels, _ = predict(model, dataset.features[test_idx])
        truth = dataset.labels[test_idx]
        fold_accs.append(100.0 * float(np.mean(labels == truth)))
        confusion["tp"] += int(np.sum((labels == 1) & (truth == 1)))
        confusion["tn"] += int(np.sum((labels == 0) & (truth == 0)))
        confusion["fp"] += int(np.sum((labels == 1) & (truth == 0)))
        confusion["fn"] += int(np.sum((labels == 0) & (truth == 1)))
    mean = float(np.mean(fold_accs)) if fold_accs else 0.0
    return CellResult(mean_accuracy=mean, fold_accuracies=fold_accs,
                      confusion=confusion, n_samples=dataset.n,
                      failed_folds=failed, seed=plan.seed)


@dataclass
class EvalRow:
    """One table row group cell: (task or category, feature set, classifier)."""

    task_type: str  # RW | NRW | NW
    tasks_label: str  # '1', '2', ... or '1-2', '3-4', '5-6'
    feature_set: str
    classifier: str
    result: CellResult | None  # None when data for the cell is missing
    best_in_group: bool = False


@dataclass
class EvalReport:
    mode: str  # 'single' | 'merged' | 'selected'
    rows: list[EvalRow] = field(default_factory=list)
    seed: int = 0
    config_digest: str = ""

    def cell(self, tasks_label: str, feature_set: str, classifier: str) -> EvalRow:
        for row in self.rows:
            if (row.tasks_label, row.feature_set, row.classifier) == \
                    (tasks_label, feature_set, classifier):
                return row
        raise KeyError((tasks_label, feature_set, classifier))


def flag_best_cells(report: EvalReport) -> None:
    """Mark the single best cell of each task/category row group (max mean
    accuracy; ties broken by table order, matching one bold cell per group)."""
    groups: dict[str, list[EvalRow]] = {}
    for row in report.rows:
        groups.setdefault(row.tasks_label, []).append(row)
    for rows in groups.values():
        best = None
        for row in rows:
            row.best_in_group = False
            if row.result is None:
                continue
            if best is None or row.result.mean_accuracy > best.result.mean_accuracy:
                best = row
        if best is not None:
            best.best_in_group = True


@dataclass(frozen=True)
class ExperimentConfig:
    k: int = 10
    stratified: bool = True
    group_aware: bool = True
    paper_mode: bool = False  # True disables group-awareness, like the pooled setup
    seed: int = 0
    classifier_params: dict = field(default_factory=dict)  # kind -> params

    def params_for(self, kind: str):
        return self.classifier_params.get(kind, default_params(kind))

    @property
    def effective_group_aware(self) -> bool:
        return self.group_aware and not self.paper_mode


def _grid(report: EvalReport, blocks, vectors_by_task_set,
          classifiers, config: ExperimentConfig) -> EvalReport:
    """Shared grid runner. ``blocks`` yields (task_type, tasks_label,
    [task ids]); each (block, set) gets one fold plan shared by the
    classifiers of that block."""
    for task_type, tasks_label, task_ids in blocks:
        for feature_set in FEATURE_SET_ORDER:
            vectors = []
            for task_id in task_ids:
                vectors.extend(vectors_by_task_set.get((task_id, feature_set), []))
            dataset = None
            plan = None
            if vectors:
                try:
                    dataset = dataset_from_vectors(vectors)
                    plan = make_folds(
                        dataset, k=config.k, stratified=config.stratified,
                        group_aware=config.effective_group_aware,
                        seed=derive_seed(config.seed, tasks_label, feature_set))
                except ValidationError as exc:
                    warnings.warn(f"{tasks_label}/{feature_set}: {exc}")
                    dataset = None
            for kind in classifiers:
                if dataset is None:
                    report.rows.append(EvalRow(task_type, tasks_label,
                                               feature_set, kind, None))
                    continue
                result = cross_validate(kind, dataset, config.params_for(kind), plan)
                report.rows.append(EvalRow(task_type, tasks_label, feature_set,
                                           kind, result))
    flag_best_cells(report)
    return report


def run_single_task_experiment(vectors_by_task_set, classifiers=CLASSIFIERS,
                               config: ExperimentConfig = ExperimentConfig()) -> EvalReport:
    """Per-task accuracies: 6 tasks x {A,P,AL} x classifiers."""
    report = EvalReport(mode="single", seed=config.seed)
    blocks = [(TASKS[t][0], str(t), [t]) for t in sorted(TASKS)]
    return _grid(report, blocks, vectors_by_task_set, classifiers, config)


def run_merged_experiment(vectors_by_task_set, classifiers=CLASSIFIERS,
                          config: ExperimentConfig = ExperimentConfig()) -> EvalReport:
    """Category-pooled accuracies: {RW,NRW,NW} x {A,P,AL} x classifiers."""
    report = EvalReport(mode="merged", seed=config.seed)
    blocks = [(cat, f"{a}-{b}", [a, b]) for cat, (a, b) in CATEGORIES.items()]
    return _grid(report, blocks, vectors_by_task_set, classifiers, config)


def vectors_by_task_and_set(vector_lists) -> dict:
    """Index {'A': [...], 'P': [...], 'AL': [...]} by (task_id, set_tag)."""
    out: dict = {}
    for tag, vectors in vector_lists.items():
        for v in vectors:
            out.setdefault((v.task_id, tag), []).append(v)
    return out
