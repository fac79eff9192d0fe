"""Per-stroke handwriting features, task-level aggregation, and vectors.

Twenty-one features are computed per stroke (static shape/position features
plus dynamic velocity/acceleration/jerk features), averaged separately over
the on-paper and in-air strokes of a task, and assembled into one of three
vectors per (participant, task):

* ``P``  - 21 on-paper means + on-paper stroke count + 4 personal = 26
* ``A``  - 20 in-air means (no pressure) + in-air stroke count + 4 personal = 25
* ``AL`` - both trait blocks (names prefixed ``P_``/``A_``) + personal once = 47

Sizes and positions are in raw tablet units, times in milliseconds, so
velocity/acceleration/jerk carry units of tablet-units per ms^k. The
normalized jerk measures in both variants use the dimensionless form
``sqrt(0.5 * integral(j^2 dt) * T^5 / L^2)`` with T the stroke duration and
L its road length; a minimum-jerk point-to-point stroke scores sqrt(360)
regardless of extent or tempo, which the tests pin.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MissingTraitError, ParseError, ValidationError
from .ink import Cohort, Participant, Recording, TraitKind
from .kinematics import (KinematicSeries, SmoothingConfig, Stroke,
                         estimate_derivatives, segment_strokes)

#: the 21 per-stroke features, in canonical (table) order
STROKE_FEATURES = (
    "duration",
    "start_vertical_position",
    "vertical_size",
    "peak_vertical_velocity",
    "peak_vertical_acceleration",
    "start_horizontal_position",
    "horizontal_size",
    "straightness_error",
    "slant",
    "loop_surface",
    "relative_initial_slant",
    "relative_time_to_peak_vertical_velocity",
    "absolute_size",
    "average_absolute_velocity",
    "road_length",
    "absolute_y_jerk",
    "normalized_y_jerk",
    "absolute_jerk",
    "normalized_jerk",
    "n_peak_acceleration_points",
    "pen_pressure",
)

PERSONAL_FEATURES = ("sex", "age", "work", "education")

SEX_CODES = {"F": 0.0, "M": 1.0}
WORK_CODES = {"manual": 0.0, "intellectual": 1.0}

#: window (ms) over which the initial writing direction is measured
INITIAL_SLANT_WINDOW_MS = 80.0
#: relative noise floor for counting acceleration peaks
PEAK_ACCEL_NOISE_FLOOR = 0.01

FEATURE_SETS = ("A", "P", "AL")


def _wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = (a + np.pi) % (2.0 * np.pi) - np.pi
    if a == -np.pi:
        a = np.pi
    return float(a)


def static_stroke_features(stroke: Stroke, previous: Stroke | None = None) -> dict[str, float]:
    """Shape and position features of one stroke.

    ``previous`` is the stroke immediately before this one in task time
    order; it closes the polygon whose shoelace area is the loop surface
    (zero for the first stroke of a task).
    """
    if stroke.n_samples < 2:
        raise ValidationError("stroke needs at least 2 samples")
    x, y = stroke.x, stroke.y
    dx = float(x[-1] - x[0])
    dy = float(y[-1] - y[0])
    vertical_size = float(y.max() - y.min())
    horizontal_size = float(x.max() - x.min())
    road_length = float(np.sum(np.hypot(np.diff(x), np.diff(y))))

    if previous is None:
        loop_surface = 0.0
    else:
        px = np.concatenate([previous.x, x])
        py = np.concatenate([previous.y, y])
        # shoelace over the implicitly closed polygon
        loop_surface = float(abs(np.sum(px * np.roll(py, -1) - np.roll(px, -1) * py)) / 2.0)

    return {
        "start_vertical_position": float(y[0]),
        "vertical_size": vertical_size,
        "start_horizontal_position": float(x[0]),
        "horizontal_size": horizontal_size,
        "slant": float(np.arctan2(dy, dx)),
        "loop_surface": loop_surface,
        "absolute_size": float(np.hypot(vertical_size, horizontal_size)),
        "road_length": road_length,
    }


def _perpendicular_distances(x, y):
    """Distances of each point to the chord from first to last point."""
    ax, ay = x[0], y[0]
    bx, by = x[-1], y[-1]
    length = float(np.hypot(bx - ax, by - ay))
    if length == 0.0:
        return None, 0.0
    cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax)
    return np.abs(cross) / length, length


def _direction_over_window(stroke: Stroke, window_ms: float) -> float:
    """Angle of the displacement over the stroke's first ``window_ms``.

    The endpoint is linearly interpolated between samples; strokes shorter
    than the window use their full extent.
    """
    t, x, y = stroke.t, stroke.x, stroke.y
    t_end = t[0] + window_ms
    if t_end >= t[-1]:
        xe, ye = x[-1], y[-1]
    else:
        xe = float(np.interp(t_end, t, x))
        ye = float(np.interp(t_end, t, y))
    return float(np.arctan2(ye - y[0], xe - x[0]))


def _count_acceleration_peaks(a_mag: np.ndarray) -> int:
    """Local extrema of |a|, up-going and down-going, confirmed with a
    hysteresis of 1% of the stroke's max |a|.

    An extremum counts once the signal has moved away from it by at least
    the noise floor in the opposite direction, which keeps the count
    stable under jitter and indifferent to flat discrete peaks. Endpoints
    are not extrema.
    """
    if len(a_mag) < 3:
        return 0
    floor = PEAK_ACCEL_NOISE_FLOOR * float(a_mag.max())
    direction = 0
    hi = lo = float(a_mag[0])
    count = 0
    for val in a_mag[1:]:
        val = float(val)
        if direction == 0:
            hi = max(hi, val)
            lo = min(lo, val)
            if val <= hi - floor:
                direction = -1
                lo = val
            elif val >= lo + floor:
                direction = 1
                hi = val
        elif direction > 0:
            if val > hi:
                hi = val
            elif val <= hi - floor:
                count += 1
                direction = -1
                lo = val
        else:
            if val < lo:
                lo = val
            elif val >= lo + floor:
                count += 1
                direction = 1
                hi = val
    return count


def dynamic_stroke_features(stroke: Stroke, series: KinematicSeries) -> dict[str, float]:
    """Velocity/acceleration/jerk features of one stroke.

    Derivatives are the recording-wide estimates sliced to the stroke;
    integrals use the trapezoid rule on the actual timestamps. Degenerate
    strokes (zero road length) report zero normalized jerk and are flagged
    via the ``degenerate`` key.
    """
    if len(series) != len(stroke.recording):
        raise ValidationError("series is not aligned to the stroke's recording")
    sl = slice(stroke.start, stroke.stop)
    t = stroke.t
    duration = float(t[-1] - t[0])
    if duration <= 0.0:
        raise ValidationError("stroke duration must be positive")
    vy = series.vy[sl]
    ay = series.ay[sl]
    jx = series.jx[sl]
    jy = series.jy[sl]
    speed = series.speed[sl]

    peak_idx = int(np.argmax(vy))
    rel_time_to_peak = float((t[peak_idx] - t[0]) / duration)

    whole_slant = float(np.arctan2(stroke.y[-1] - stroke.y[0], stroke.x[-1] - stroke.x[0]))
    initial_dir = _direction_over_window(stroke, INITIAL_SLANT_WINDOW_MS)
    rel_initial_slant = _wrap_angle(initial_dir - whole_slant)

    distances, line_length = _perpendicular_distances(stroke.x, stroke.y)
    degenerate = False
    if distances is None:
        straightness_error = 0.0
        degenerate = True
    else:
        straightness_error = float(np.std(distances) / line_length)

    road_length = float(np.sum(np.hypot(np.diff(stroke.x), np.diff(stroke.y))))
    j2_y = jy ** 2
    j2 = jx ** 2 + jy ** 2
    if road_length == 0.0:
        normalized_y_jerk = 0.0
        normalized_jerk = 0.0
        degenerate = True
    else:
        normalized_y_jerk = float(np.sqrt(
            0.5 * np.trapezoid(j2_y, t) * duration ** 5 / road_length ** 2))
        normalized_jerk = float(np.sqrt(
            0.5 * np.trapezoid(j2, t) * duration ** 5 / road_length ** 2))

    out = {
        "duration": duration,
        "peak_vertical_velocity": float(vy.max()),
        "peak_vertical_acceleration": float(ay.max()),
        "straightness_error": straightness_error,
        "relative_initial_slant": rel_initial_slant,
        "relative_time_to_peak_vertical_velocity": rel_time_to_peak,
        "average_absolute_velocity": float(speed.mean()),
        "absolute_y_jerk": float(np.sqrt(np.mean(j2_y))),
        "normalized_y_jerk": normalized_y_jerk,
        "absolute_jerk": float(np.sqrt(np.mean(j2))),
        "normalized_jerk": normalized_jerk,
        "n_peak_acceleration_points": float(_count_acceleration_peaks(np.hypot(series.ax[sl], ay))),
        "degenerate": degenerate,
    }
    if stroke.kind is TraitKind.ON_PAPER:
        out["pen_pressure"] = float(stroke.pressure.mean())
    return out


def stroke_features(stroke: Stroke, series: KinematicSeries,
                    previous: Stroke | None = None) -> dict[str, float]:
    """All per-stroke features (static + dynamic) as one name->value map."""
    feats = static_stroke_features(stroke, previous)
    feats.update(dynamic_stroke_features(stroke, series))
    return feats


@dataclass
class TaskFeatures:
    """Per-trait means of the stroke features for one (participant, task)."""

    on_paper: dict[str, float]  # 21 features
    in_air: dict[str, float]  # 20 features (no pen_pressure); {} when absent
    n_strokes_on_paper: int
    n_strokes_in_air: int
    n_degenerate: int = 0


def aggregate_task(strokes: list[Stroke], series: KinematicSeries) -> TaskFeatures:
    """Compute per-stroke features in time order and average them per trait.

    The loop-surface polygon always closes against the immediately
    preceding stroke in the full sequence, whatever its kind.
    """
    if not strokes:
        raise ValidationError("no strokes to aggregate")
    per_kind: dict[TraitKind, list[dict[str, float]]] = {
        TraitKind.ON_PAPER: [], TraitKind.IN_AIR: []}
    n_degenerate = 0
    previous = None
    for stroke in strokes:
        feats = stroke_features(stroke, series, previous)
        n_degenerate += int(feats.pop("degenerate"))
        per_kind[stroke.kind].append(feats)
        previous = stroke
    if not per_kind[TraitKind.ON_PAPER]:
        raise ValidationError("task has no on-paper strokes; recording unusable")

    def mean_of(dicts, names):
        return {name: float(np.mean([d[name] for d in dicts])) for name in names}

    on_names = STROKE_FEATURES
    air_names = tuple(n for n in STROKE_FEATURES if n != "pen_pressure")
    on_paper = mean_of(per_kind[TraitKind.ON_PAPER], on_names)
    in_air = (mean_of(per_kind[TraitKind.IN_AIR], air_names)
              if per_kind[TraitKind.IN_AIR] else {})
    return TaskFeatures(
        on_paper=on_paper,
        in_air=in_air,
        n_strokes_on_paper=len(per_kind[TraitKind.ON_PAPER]),
        n_strokes_in_air=len(per_kind[TraitKind.IN_AIR]),
        n_degenerate=n_degenerate,
    )


@dataclass(frozen=True)
class FeatureVector:
    """One sample for the classifiers: named values + label + grouping keys."""

    set_tag: str  # 'A' | 'P' | 'AL'
    names: tuple[str, ...]
    values: np.ndarray
    label: str  # 'AD' | 'HC'
    participant_id: str
    task_id: int

    def __post_init__(self):
        expected = {"P": 26, "A": 25, "AL": 47}[self.set_tag]
        if len(self.names) != expected or len(self.values) != expected:
            raise ValidationError(
                f"{self.set_tag} vector must have {expected} features, got {len(self.names)}")
        if len(set(self.names)) != len(self.names):
            raise ValidationError("duplicate feature names")


def set_feature_names(set_tag: str) -> tuple[str, ...]:
    """Canonical feature-name order for a set tag."""
    air_names = tuple(n for n in STROKE_FEATURES if n != "pen_pressure")
    if set_tag == "P":
        return STROKE_FEATURES + ("n_strokes",) + PERSONAL_FEATURES
    if set_tag == "A":
        return air_names + ("n_strokes",) + PERSONAL_FEATURES
    if set_tag == "AL":
        return (tuple("P_" + n for n in STROKE_FEATURES) + ("P_n_strokes",)
                + tuple("A_" + n for n in air_names) + ("A_n_strokes",)
                + PERSONAL_FEATURES)
    raise ValidationError(f"unknown feature set {set_tag!r}")


def assemble_vector(task: TaskFeatures, participant: Participant,
                    set_tag: str, task_id: int) -> FeatureVector:
    """Assemble one A/P/AL vector from task means and personal covariates."""
    personal = [
        SEX_CODES[participant.sex],
        float(participant.age),
        WORK_CODES[participant.work],
        float(participant.education),
    ]
    air_names = tuple(n for n in STROKE_FEATURES if n != "pen_pressure")
    needs_air = set_tag in ("A", "AL")
    if needs_air and task.n_strokes_in_air == 0:
        raise MissingTraitError(participant.id, task_id, TraitKind.IN_AIR.value)

    if set_tag == "P":
        values = [task.on_paper[n] for n in STROKE_FEATURES]
        values += [float(task.n_strokes_on_paper)] + personal
    elif set_tag == "A":
        values = [task.in_air[n] for n in air_names]
        values += [float(task.n_strokes_in_air)] + personal
    elif set_tag == "AL":
        values = [task.on_paper[n] for n in STROKE_FEATURES]
        values += [float(task.n_strokes_on_paper)]
        values += [task.in_air[n] for n in air_names]
        values += [float(task.n_strokes_in_air)] + personal
    else:
        raise ValidationError(f"unknown feature set {set_tag!r}")

    return FeatureVector(
        set_tag=set_tag,
        names=set_feature_names(set_tag),
        values=np.asarray(values, dtype=float),
        label=participant.cohort.value,
        participant_id=participant.id,
        task_id=task_id,
    )


def extract_task(recording: Recording,
                 cfg: SmoothingConfig = SmoothingConfig(),
                 split_in_air: bool = True) -> TaskFeatures:
    """Recording -> derivatives -> strokes -> task-level feature means."""
    series = estimate_derivatives(recording, cfg, require="jerk")
    strokes = segment_strokes(recording, series, cfg, split_in_air=split_in_air)
    return aggregate_task(strokes, series)


def extract_study(participants, recordings,
                  cfg: SmoothingConfig = SmoothingConfig(),
                  split_in_air: bool = True):
    """Extract every feature set for every recording of a study.

    Returns ``(vectors, log)`` where ``vectors`` maps 'A'/'P'/'AL' to lists
    of FeatureVector and ``log`` lists skipped samples: tasks with no
    in-air strokes are dropped from A and AL rather than imputed, and
    degenerate strokes are reported per recording.
    """
    by_id = {p.id: p for p in participants}
    vectors = {tag: [] for tag in FEATURE_SETS}
    log = []
    for rec in recordings:
        participant = by_id.get(rec.participant_id)
        if participant is None:
            log.append(f"skip ({rec.participant_id}, task {rec.task_id}): unknown participant")
            continue
        try:
            task = extract_task(rec, cfg, split_in_air=split_in_air)
        except ValidationError as exc:
            log.append(f"skip ({rec.participant_id}, task {rec.task_id}): {exc}")
            continue
        if task.n_degenerate:
            log.append(f"note ({rec.participant_id}, task {rec.task_id}): "
                       f"{task.n_degenerate} degenerate stroke(s)")
        for tag in FEATURE_SETS:
            try:
                vectors[tag].append(assemble_vector(task, participant, tag, rec.task_id))
            except MissingTraitError as exc:
                log.append(f"drop {tag} ({rec.participant_id}, task {rec.task_id}): {exc}")
    return vectors, log


def write_feature_csv(vectors: list[FeatureVector], path) -> None:
    """One row per (participant, task); full-precision reprs for exact round trips."""
    if not vectors:
        raise ValidationError("no vectors to write")
    names = vectors[0].names
    for v in vectors:
        if v.names != names:
            raise ValidationError("vectors have inconsistent feature names")
    rows = sorted(vectors, key=lambda v: (v.participant_id, v.task_id))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["participant_id", "task_id", "set", "label", *names])
        for v in rows:
            writer.writerow([v.participant_id, v.task_id, v.set_tag, v.label,
                             *[repr(float(x)) for x in v.values]])


def load_feature_csv(path) -> list[FeatureVector]:
    path = Path(path)
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path.name}: empty file") from None
        if header[:4] != ["participant_id", "task_id", "set", "label"]:
            raise ParseError(f"{path.name}: bad header {header[:4]!r}")
        names = tuple(header[4:])
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path.name}: line {lineno}: "
                                 f"expected {len(header)} fields, got {len(row)}")
            try:
                label = Cohort(row[3]).value
                out.append(FeatureVector(
                    set_tag=row[2],
                    names=names,
                    values=np.array([float(x) for x in row[4:]]),
                    label=label,
                    participant_id=row[0],
                    task_id=int(row[1]),
                ))
            except (ValueError, KeyError) as exc:
                raise ParseError(f"{path.name}: line {lineno}: {exc}") from None
    return out
