"""Wrapper-based recursive feature elimination and its report artifacts.

The default mode is a true wrapper search: at each iteration every
leave-one-out candidate subset of the current feature set is scored by
cross-validated accuracy of the wrapper model (boosted trees), and the
feature whose removal scores best - the worst performer - is eliminated.
Run to a single remaining feature this evaluates d + (d-1) + ... + 2
= d(d+1)/2 - 1 subsets, the quadratic worst case. The returned subset is
the accuracy peak over the whole elimination trace, preferring smaller
subsets on ties.

A cheaper ``importance`` mode ranks features by the wrapper's split-gain
importances and drops the weakest per iteration (one CV evaluation per
size instead of one per candidate); it is not the default.

Per category (two tasks), the occurrence histogram counts how many of the
two per-task selected AL subsets contain each feature (0, 1 or 2), grouped
into on-paper / in-air / personal blocks.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .evaluation import (CLASSIFIERS, FEATURE_SET_ORDER, CellResult,
                         EvalReport, EvalRow, ExperimentConfig, FoldPlan,
                         cross_validate, derive_seed, flag_best_cells,
                         make_folds)
from .ink import CATEGORIES, TASKS
from .learners import (Dataset, GBTParams, dataset_from_vectors,
                       feature_importance, train)

#: wrapper default: light boosted trees; the O(d^2) search multiplies the
#: per-fit cost by thousands of subset evaluations
RFE_WRAPPER_DEFAULTS = GBTParams(n_rounds=40, depth=2, shrinkage=0.3)


@dataclass
class SelectionTrace:
    """Full record of one backward-elimination run."""

    all_names: tuple[str, ...]  # dataset schema the search started from
    elimination_order: list[str]  # first-removed first
    subset_accuracies: dict[int, float]  # subset size -> CV accuracy %
    subsets: dict[int, tuple[str, ...]]  # subset size -> surviving names
    best_subset: tuple[str, ...]
    best_accuracy: float
    evaluations: int
    wrapper_kind: str
    seed: int
    failed_subsets: int = 0


def _wrapper_accuracy(dataset: Dataset, names, wrapper_kind, wrapper_params,
                      plan: FoldPlan):
    try:
        sub = dataset.subset_features(names)
        result = cross_validate(wrapper_kind, sub, wrapper_params, plan)
        if not result.fold_accuracies:
            return 0.0, True
        return result.mean_accuracy, False
    except ValidationError:
        return 0.0, True


def rfe_select(dataset: Dataset, wrapper_params=None, plan: FoldPlan = None,
               wrapper_kind: str = "GBT", mode: str = "loo",
               seed: int = 0) -> SelectionTrace:
    """Backward elimination over the dataset's features.

    ``mode='loo'`` scores every leave-one-out candidate per iteration
    (wrapper accuracy decides the eliminated feature); ``mode='importance'``
    drops the lowest-importance feature and spends one evaluation per
    iteration. Accuracy ties eliminate the lexicographically last name.
    """
    if dataset.d < 2:
        raise ValidationError(f"RFE needs d >= 2 features, got {dataset.d}")
    if plan is None:
        raise ValidationError("RFE needs a fold plan for wrapper evaluation")
    if mode not in ("loo", "importance"):
        raise ValidationError(f"unknown RFE mode {mode!r}")
    if wrapper_params is None and wrapper_kind == "GBT":
        wrapper_params = RFE_WRAPPER_DEFAULTS

    current = list(dataset.names)
    elimination_order: list[str] = []
    subset_accuracies: dict[int, float] = {}
    subsets: dict[int, tuple[str, ...]] = {}
    evaluations = 0
    failed = 0

    while len(current) > 1:
        if mode == "loo":
            best_acc, best_candidate, removed = -1.0, None, None
            for name in current:
                candidate = [n for n in current if n != name]
                acc, fail = _wrapper_accuracy(dataset, candidate, wrapper_kind,
                                              wrapper_params, plan)
                evaluations += 1
                failed += int(fail)
                # ties eliminate the lexicographically last feature name
                if acc > best_acc or (acc == best_acc and name > removed):
                    best_acc, best_candidate, removed = acc, candidate, name
        else:
            model = train(wrapper_kind, dataset.subset_features(current),
                          wrapper_params)
            importances = feature_importance(model)
            weakest = min(importances[n] for n in current)
            removed = max(n for n in current if importances[n] == weakest)
            best_candidate = [n for n in current if n != removed]
            best_acc, fail = _wrapper_accuracy(dataset, best_candidate,
                                               wrapper_kind, wrapper_params, plan)
            evaluations += 1
            failed += int(fail)
        current = best_candidate
        elimination_order.append(removed)
        size = len(current)
        subset_accuracies[size] = best_acc
        subsets[size] = tuple(current)

    # accuracy peak over the trace; ties prefer the smaller subset
    best_size = None
    for size in sorted(subset_accuracies):
        if best_size is None or subset_accuracies[size] > subset_accuracies[best_size]:
            best_size = size
    return SelectionTrace(
        all_names=dataset.names,
        elimination_order=elimination_order,
        subset_accuracies=subset_accuracies,
        subsets=subsets,
        best_subset=subsets[best_size],
        best_accuracy=subset_accuracies[best_size],
        evaluations=evaluations,
        wrapper_kind=wrapper_kind,
        seed=seed,
        failed_subsets=failed,
    )


def evaluate_selected(dataset: Dataset, best_subset, classifiers=CLASSIFIERS,
                      plan: FoldPlan = None, classifier_params=None) -> dict[str, CellResult]:
    """Re-run the classifier grid on the dataset projected to a subset.

    Projection keeps the original column order, so projecting onto all
    features reproduces the unselected results exactly (same plan, same
    seeds).
    """
    if not best_subset:
        raise ValidationError("empty feature subset")
    if plan is None:
        raise ValidationError("evaluate_selected needs a fold plan")
    classifier_params = classifier_params or {}
    projected = dataset.subset_features(best_subset)
    out = {}
    for kind in classifiers:
        params = classifier_params.get(kind)
        out[kind] = cross_validate(kind, projected, params, plan)
    return out


def run_selection_experiment(vectors_by_task_set, classifiers=CLASSIFIERS,
                             config: ExperimentConfig = ExperimentConfig(),
                             wrapper_params=None, mode: str = "loo"):
    """RFE per (task, feature set), then the post-selection classifier grid.

    Returns ``(traces, report)``: traces keyed by (task_id, set_tag) and a
    report shaped like the single-task table. Fold plans reuse the
    single-task seed derivation, so a trace that keeps every feature
    reproduces the unselected accuracies.
    """
    traces: dict[tuple[int, str], SelectionTrace] = {}
    report = EvalReport(mode="selected", seed=config.seed)
    for task_id in sorted(TASKS):
        task_type = TASKS[task_id][0]
        for feature_set in FEATURE_SET_ORDER:
            vectors = vectors_by_task_set.get((task_id, feature_set), [])
            if not vectors:
                for kind in classifiers:
                    report.rows.append(EvalRow(task_type, str(task_id),
                                               feature_set, kind, None))
                continue
            dataset = dataset_from_vectors(vectors)
            plan = make_folds(dataset, k=config.k, stratified=config.stratified,
                              group_aware=config.effective_group_aware,
                              seed=derive_seed(config.seed, task_id, feature_set))
            trace = rfe_select(dataset, wrapper_params, plan, mode=mode,
                               seed=plan.seed)
            traces[(task_id, feature_set)] = trace
            results = evaluate_selected(dataset, trace.best_subset, classifiers,
                                        plan, config.classifier_params)
            for kind in classifiers:
                report.rows.append(EvalRow(task_type, str(task_id), feature_set,
                                           kind, results[kind]))
    flag_best_cells(report)
    return traces, report


@dataclass
class OccurrenceHistogram:
    """Per-feature selection counts across a category's two tasks (AL set)."""

    category: str
    counts: dict[str, int] = field(default_factory=dict)  # feature -> 0..2
    groups: dict[str, str] = field(default_factory=dict)  # feature -> P|A|personal


def feature_group(name: str) -> str:
    if name.startswith("P_"):
        return "P"
    if name.startswith("A_"):
        return "A"
    return "personal"


def occurrence_histogram(traces: dict[int, SelectionTrace],
                         category: str) -> OccurrenceHistogram:
    """Count, per feature, how many of the category's two task-level
    selected subsets contain it; features keep schema order."""
    if category not in CATEGORIES:
        raise ValidationError(f"unknown category {category!r}")
    task_ids = CATEGORIES[category]
    for task_id in task_ids:
        if task_id not in traces:
            raise ValidationError(
                f"missing selection trace for task {task_id} ({TASKS[task_id][1]!r})")
    names = list(traces[task_ids[0]].all_names)
    for task_id in task_ids[1:]:
        for name in traces[task_id].all_names:
            if name not in names:
                names.append(name)
    hist = OccurrenceHistogram(category=category)
    for name in names:
        hist.counts[name] = sum(
            1 for task_id in task_ids if name in traces[task_id].best_subset)
        hist.groups[name] = feature_group(name)
    return hist


def write_trace_csv(trace: SelectionTrace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "removed_feature", "subset_size", "accuracy"])
        d = len(trace.elimination_order) + 1
        for i, name in enumerate(trace.elimination_order, start=1):
            size = d - i
            writer.writerow([i, name, size, repr(trace.subset_accuracies[size])])


def write_histogram_csv(hist: OccurrenceHistogram, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["feature", "group", "count"])
        for name in hist.counts:
            writer.writerow([name, hist.groups[name], hist.counts[name]])
