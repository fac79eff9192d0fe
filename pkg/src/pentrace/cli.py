"""Command-line orchestration of the pipeline.

Subcommands::

    pentrace synth      --recipe recipe.json --out study/
    pentrace validate   --study study/
    pentrace extract    --study study/ --out features/
    pentrace experiment --features features/ --mode single|merged --out reports/
    pentrace select     --features features/ --out reports/
    pentrace report     --reports reports/

A JSON config file (``--config``) may set any option; explicit flags
override file values. All randomness flows from the single master seed;
reruns with the same inputs and seed rewrite byte-identical artifacts.
Exit codes: 0 success, 2 parse error, 3 validation error, 4 execution
error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from .errors import ParseError, PentraceError, ValidationError
from .evaluation import (CLASSIFIERS, ExperimentConfig,
                         run_merged_experiment, run_single_task_experiment,
                         vectors_by_task_and_set)
from .features import FEATURE_SETS, extract_study, load_feature_csv, write_feature_csv
from .ink import CATEGORIES, load_study, validate_study
from .kinematics import SmoothingConfig
from .learners import PARAM_TYPES, GBTParams
from .reports import (load_histogram_csv, load_report_csv, write_histogram_svg,
                      write_report_csv, write_report_markdown)
from .selection import (RFE_WRAPPER_DEFAULTS, occurrence_histogram,
                        run_selection_experiment, write_histogram_csv,
                        write_trace_csv)
from .synth import StudyRecipe, generate_study, load_recipe, write_study

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_EXECUTION = 4


def _load_config_file(path) -> dict:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ValidationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"config file {path}: {exc}") from None
    if not isinstance(payload, dict):
        raise ParseError(f"config file {path}: expected a JSON object")
    return payload


def _resolve(args) -> dict:
    """Merge defaults <- config file <- explicit CLI flags into the settings
    dict that seeds the config digest (paths excluded on purpose)."""
    settings = {
        "seed": 0,
        "folds": {"k": 10, "stratified": True, "group_aware": True,
                  "paper_mode": False},
        "smoothing": {"enabled": True, "kernel_sigma": 10.0,
                      "min_stroke_duration": 20.0, "split_in_air": True},
        "classifiers": {},
        "rfe": {"mode": "loo",
                "wrapper": {"n_rounds": RFE_WRAPPER_DEFAULTS.n_rounds,
                            "depth": RFE_WRAPPER_DEFAULTS.depth,
                            "shrinkage": RFE_WRAPPER_DEFAULTS.shrinkage}},
        "formats": ["csv", "markdown", "svg"],
    }
    if getattr(args, "config", None):
        file_cfg = _load_config_file(args.config)
        for key, value in file_cfg.items():
            if key not in settings:
                raise ValidationError(f"unknown config key {key!r}")
            if isinstance(settings[key], dict):
                for sub, subval in value.items():
                    if sub not in settings[key]:
                        raise ValidationError(f"unknown config key {key}.{sub}")
                    settings[key][sub] = subval
            else:
                settings[key] = value
    flag_map = [
        ("seed", ("seed",)),
        ("folds", ("folds", "k")),
        ("paper_mode", ("folds", "paper_mode")),
        ("kernel_sigma", ("smoothing", "kernel_sigma")),
        ("min_stroke_duration", ("smoothing", "min_stroke_duration")),
        ("rfe_mode", ("rfe", "mode")),
        ("wrapper_rounds", ("rfe", "wrapper", "n_rounds")),
        ("formats", ("formats",)),
    ]
    for flag, keys in flag_map:
        value = getattr(args, flag, None)
        if value is None:
            continue
        target = settings
        for key in keys[:-1]:
            target = target[key]
        target[keys[-1]] = value
    if getattr(args, "no_smoothing", False):
        settings["smoothing"]["enabled"] = False
    if getattr(args, "no_split_in_air", False):
        settings["smoothing"]["split_in_air"] = False
    if getattr(args, "no_stratify", False):
        settings["folds"]["stratified"] = False
    if getattr(args, "no_group_aware", False):
        settings["folds"]["group_aware"] = False
    return settings


def config_digest(settings: dict) -> str:
    return hashlib.sha256(
        json.dumps(settings, sort_keys=True).encode("utf-8")).hexdigest()[:16]


def _smoothing_config(settings) -> SmoothingConfig:
    s = settings["smoothing"]
    return SmoothingConfig(enabled=s["enabled"], kernel_sigma=s["kernel_sigma"],
                           min_stroke_duration=s["min_stroke_duration"])


def _experiment_config(settings) -> ExperimentConfig:
    f = settings["folds"]
    params = {}
    for kind, overrides in settings["classifiers"].items():
        if kind not in PARAM_TYPES:
            raise ValidationError(f"unknown classifier {kind!r} in config")
        params[kind] = PARAM_TYPES[kind](**overrides)
    return ExperimentConfig(k=f["k"], stratified=f["stratified"],
                            group_aware=f["group_aware"],
                            paper_mode=f["paper_mode"],
                            seed=settings["seed"],
                            classifier_params=params)


def _load_features_dir(features_dir) -> dict:
    features_dir = Path(features_dir)
    vector_lists = {}
    for tag in FEATURE_SETS:
        path = features_dir / f"features_{tag}.csv"
        if not path.exists():
            raise ValidationError(
                f"missing {path.name}; run `pentrace extract` first")
        vector_lists[tag] = load_feature_csv(path)
    return vectors_by_task_and_set(vector_lists)


def cmd_synth(args) -> int:
    recipe = load_recipe(args.recipe) if args.recipe else StudyRecipe()
    if args.seed is not None:
        recipe = StudyRecipe(n_per_cohort=recipe.n_per_cohort,
                             profiles=recipe.profiles, tasks=recipe.tasks,
                             seed=args.seed)
    participants, recordings = generate_study(recipe)
    manifest = write_study(participants, recordings, args.out, recipe)
    print(f"wrote {len(recordings)} recordings for {len(participants)} "
          f"participants to {args.out} (manifest: {manifest.name})")
    return EXIT_OK


def cmd_validate(args) -> int:
    participants, recordings = load_study(args.study)
    report = validate_study(recordings, participants)
    print(report.describe())
    return EXIT_OK if report.ok else EXIT_VALIDATION


def cmd_extract(args) -> int:
    settings = _resolve(args)
    cfg = _smoothing_config(settings)
    participants, recordings = load_study(args.study)
    vectors, log = extract_study(
        participants, recordings, cfg,
        split_in_air=settings["smoothing"]["split_in_air"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    all_failed = True
    for tag in FEATURE_SETS:
        if vectors[tag]:
            write_feature_csv(vectors[tag], out / f"features_{tag}.csv")
            all_failed = False
    (out / "extraction_log.txt").write_text(
        "".join(line + "\n" for line in log), encoding="utf-8")
    for tag in FEATURE_SETS:
        print(f"{tag}: {len(vectors[tag])} samples")
    if log:
        print(f"{len(log)} log entries -> extraction_log.txt")
    return EXIT_EXECUTION if all_failed else EXIT_OK


def _write_report(report, out_dir, stem, settings) -> None:
    digest = config_digest(settings)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if "csv" in settings["formats"]:
        write_report_csv(report, out_dir / f"{stem}.csv", digest)
    if "markdown" in settings["formats"]:
        write_report_markdown(report, out_dir / f"{stem}.md", digest)


def cmd_experiment(args) -> int:
    settings = _resolve(args)
    settings["mode"] = args.mode
    config = _experiment_config(settings)
    by_task_set = _load_features_dir(args.features)
    if args.mode == "single":
        report = run_single_task_experiment(by_task_set, CLASSIFIERS, config)
    else:
        report = run_merged_experiment(by_task_set, CLASSIFIERS, config)
    _write_report(report, args.out, f"{args.mode}_experiment", settings)
    n_cells = len(report.rows)
    print(f"{args.mode} experiment: {n_cells} cells -> {args.out}")
    return EXIT_OK


def cmd_select(args) -> int:
    settings = _resolve(args)
    settings["mode"] = "selected"
    config = _experiment_config(settings)
    by_task_set = _load_features_dir(args.features)
    wrapper = settings["rfe"]["wrapper"]
    wrapper_params = GBTParams(n_rounds=wrapper["n_rounds"],
                               depth=wrapper["depth"],
                               shrinkage=wrapper["shrinkage"])
    traces, report = run_selection_experiment(
        by_task_set, CLASSIFIERS, config,
        wrapper_params=wrapper_params, mode=settings["rfe"]["mode"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_report(report, out, "selected_experiment", settings)
    for (task_id, tag), trace in traces.items():
        write_trace_csv(trace, out / f"trace_task{task_id}_{tag}.csv")
    for category in CATEGORIES:
        task_a, task_b = CATEGORIES[category]
        al_traces = {t: traces[(t, "AL")] for t in (task_a, task_b)
                     if (t, "AL") in traces}
        if len(al_traces) < 2:
            print(f"skipping {category} histogram: AL traces incomplete")
            continue
        hist = occurrence_histogram(al_traces, category)
        if "csv" in settings["formats"]:
            write_histogram_csv(hist, out / f"occurrence_{category}.csv")
        if "svg" in settings["formats"]:
            write_histogram_svg(hist, out / f"occurrence_{category}.svg")
    print(f"selection: {len(traces)} traces -> {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    """Re-render human-readable tables and charts from the CSV artifacts."""
    reports_dir = Path(args.reports)
    count = 0
    for csv_path in sorted(reports_dir.glob("*_experiment.csv")):
        report, digest = load_report_csv(csv_path)
        write_report_markdown(report, csv_path.with_suffix(".md"), digest)
        count += 1
    for csv_path in sorted(reports_dir.glob("occurrence_*.csv")):
        write_histogram_svg(load_histogram_csv(csv_path), csv_path.with_suffix(".svg"))
        count += 1
    if count == 0:
        raise ValidationError(f"no report CSVs found under {reports_dir}")
    print(f"re-rendered {count} artifacts in {reports_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pentrace",
        description="handwriting kinematics and cohort-classification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--seed", type=int, default=None, help="master seed")

    p = sub.add_parser("synth", parents=[common],
                       help="generate a synthetic study directory")
    p.add_argument("--recipe", help="recipe JSON (defaults used when omitted)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", parents=[common],
                       help="cross-check a study directory")
    p.add_argument("--study", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("extract", parents=[common],
                       help="extract A/P/AL feature tables from a study")
    p.add_argument("--study", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kernel-sigma", type=float, default=None, dest="kernel_sigma")
    p.add_argument("--min-stroke-duration", type=float, default=None,
                   dest="min_stroke_duration")
    p.add_argument("--no-smoothing", action="store_true", dest="no_smoothing")
    p.add_argument("--no-split-in-air", action="store_true", dest="no_split_in_air")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("experiment", parents=[common],
                       help="run the single-task or merged-task grid")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=("single", "merged"), required=True)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--paper-mode", action="store_true", default=None,
                   dest="paper_mode")
    p.add_argument("--no-stratify", action="store_true", dest="no_stratify")
    p.add_argument("--no-group-aware", action="store_true", dest="no_group_aware")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("select", parents=[common],
                       help="wrapper RFE, post-selection grid, histograms")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--folds", type=int, default=None)
    p.add_argument("--rfe-mode", choices=("loo", "importance"), default=None,
                   dest="rfe_mode")
    p.add_argument("--wrapper-rounds", type=int, default=None,
                   dest="wrapper_rounds")
    p.add_argument("--paper-mode", action="store_true", default=None,
                   dest="paper_mode")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("report", parents=[common],
                       help="re-render markdown/SVG from report CSVs")
    p.add_argument("--reports", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except PentraceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXECUTION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_EXECUTION


if __name__ == "__main__":
    sys.exit(main())
