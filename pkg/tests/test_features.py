import numpy as np
import pytest

from pentrace.errors import MissingTraitError, ValidationError
from pentrace.features import (PERSONAL_FEATURES, STROKE_FEATURES,
                               aggregate_task, assemble_vector,
                               dynamic_stroke_features, extract_task,
                               load_feature_csv, set_feature_names,
                               static_stroke_features, stroke_features,
                               write_feature_csv)
from pentrace.ink import Cohort, Participant, TraitKind
from pentrace.kinematics import (SmoothingConfig, Stroke, estimate_derivatives,
                                 segment_strokes)

from conftest import make_recording, on_paper_recording

NO_SMOOTH = SmoothingConfig(enabled=False, min_stroke_duration=0.0)
SQRT360 = np.sqrt(360.0)


def whole_stroke(rec):
    from pentrace.kinematics import BoundaryReason
    return Stroke(rec, 0, len(rec), TraitKind.ON_PAPER,
                  BoundaryReason.RECORDING_EDGE, BoundaryReason.RECORDING_EDGE)


def minjerk_recording(T_ms, L, dt=5.0, angle=0.0):
    t = np.arange(0.0, T_ms + dt / 2, dt)
    u = t / T_ms
    s = L * (10 * u ** 3 - 15 * u ** 4 + 6 * u ** 5)
    x = s * np.cos(angle)
    y = s * np.sin(angle)
    return on_paper_recording(t, x, y)


def test_345_stroke_statics():
    rec = on_paper_recording([0, 10], [0, 3], [0, 4])
    feats = static_stroke_features(whole_stroke(rec))
    assert feats["slant"] == pytest.approx(np.arctan2(4, 3))
    assert feats["road_length"] == pytest.approx(5.0)
    assert feats["vertical_size"] == pytest.approx(4.0)
    assert feats["horizontal_size"] == pytest.approx(3.0)
    assert feats["absolute_size"] == pytest.approx(5.0)
    assert feats["start_vertical_position"] == 0.0
    assert feats["start_horizontal_position"] == 0.0
    assert feats["loop_surface"] == 0.0  # no previous stroke


def test_loop_surface_unit_square():
    prev_rec = on_paper_recording([0, 5], [0, 1], [0, 0])
    curr_rec = on_paper_recording([10, 15], [1, 0], [1, 1])
    feats = static_stroke_features(whole_stroke(curr_rec), whole_stroke(prev_rec))
    assert feats["loop_surface"] == pytest.approx(1.0)


def test_road_length_at_least_chord():
    rng = np.random.default_rng(5)
    for _ in range(25):
        n = int(rng.integers(2, 40))
        t = np.cumsum(rng.uniform(3, 7, size=n))
        rec = on_paper_recording(t, rng.normal(size=n), rng.normal(size=n))
        feats = static_stroke_features(whole_stroke(rec))
        chord = float(np.hypot(rec.x[-1] - rec.x[0], rec.y[-1] - rec.y[0]))
        assert feats["road_length"] >= chord - 1e-12


def test_constant_velocity_stroke_dynamics():
    t = np.arange(0.0, 400.0, 5.0)
    rec = on_paper_recording(t, 0.03 * t, 0.04 * t)
    series = estimate_derivatives(rec, NO_SMOOTH)
    feats = dynamic_stroke_features(whole_stroke(rec), series)
    assert feats["straightness_error"] == pytest.approx(0.0, abs=1e-12)
    assert feats["absolute_jerk"] == pytest.approx(0.0, abs=1e-12)
    assert feats["normalized_jerk"] == pytest.approx(0.0, abs=1e-10)
    assert feats["relative_initial_slant"] == pytest.approx(0.0, abs=1e-9)
    assert feats["average_absolute_velocity"] == pytest.approx(0.05)
    assert feats["duration"] == pytest.approx(t[-1] - t[0])
    assert feats["pen_pressure"] == pytest.approx(1.0)


def test_symmetric_velocity_peak_at_half():
    # minimum-jerk profile: vy peaks exactly at mid-duration
    rec = minjerk_recording(600.0, 30.0, angle=np.pi / 2)
    series = estimate_derivatives(rec, NO_SMOOTH)
    feats = dynamic_stroke_features(whole_stroke(rec), series)
    spacing = 5.0 / 600.0
    assert abs(feats["relative_time_to_peak_vertical_velocity"] - 0.5) <= spacing


def test_peak_vy_and_ay_are_maxima():
    rng = np.random.default_rng(2)
    t = np.arange(0.0, 300.0, 5.0)
    rec = on_paper_recording(t, rng.normal(size=len(t)).cumsum(),
                             rng.normal(size=len(t)).cumsum())
    series = estimate_derivatives(rec, NO_SMOOTH)
    feats = dynamic_stroke_features(whole_stroke(rec), series)
    assert feats["peak_vertical_velocity"] == pytest.approx(series.vy.max())
    assert feats["peak_vertical_acceleration"] == pytest.approx(series.ay.max())


def test_minjerk_normalized_jerk_constant():
    # analytic oracle: sqrt(0.5 * 720 L^2/T^5 * T^5 / L^2) = sqrt(360),
    # independent of duration and distance (1 kHz sampling for accuracy)
    values = []
    for T_ms, L in [(400, 10), (700, 25), (1000, 60), (1500, 5)]:
        rec = minjerk_recording(T_ms, L, dt=1.0, angle=0.3)
        series = estimate_derivatives(rec, NO_SMOOTH)
        feats = dynamic_stroke_features(whole_stroke(rec), series)
        values.append(feats["normalized_jerk"])
    values = np.array(values)
    assert np.all(np.abs(values - SQRT360) / SQRT360 < 0.01)
    assert values.std() / SQRT360 < 0.01
    # at the tablet's 200 Hz the discretization bias stays under 5%
    rec = minjerk_recording(600.0, 30.0, dt=5.0)
    series = estimate_derivatives(rec, NO_SMOOTH)
    nj = dynamic_stroke_features(whole_stroke(rec), series)["normalized_jerk"]
    assert abs(nj - SQRT360) / SQRT360 < 0.05


def test_vertical_minjerk_normalized_y_jerk():
    rec = minjerk_recording(800.0, 40.0, dt=1.0, angle=np.pi / 2)
    series = estimate_derivatives(rec, NO_SMOOTH)
    feats = dynamic_stroke_features(whole_stroke(rec), series)
    assert abs(feats["normalized_y_jerk"] - SQRT360) / SQRT360 < 0.01


def test_tremor_raises_normalized_jerk():
    base = minjerk_recording(600.0, 30.0)
    t = base.t
    trem = on_paper_recording(t, base.x,
                              base.y + 0.3 * np.sin(2 * np.pi * 6.0 / 1000.0 * t))
    for cfg in (NO_SMOOTH, SmoothingConfig()):
        nj = []
        for rec in (base, trem):
            series = estimate_derivatives(rec, cfg)
            nj.append(dynamic_stroke_features(whole_stroke(rec), series)["normalized_jerk"])
        assert nj[1] > nj[0]


def test_degenerate_stroke_flagged():
    # endpoints coincide and road length ~ 0: closed dot
    t = np.arange(0.0, 40.0, 5.0)
    rec = on_paper_recording(t, np.zeros(8), np.zeros(8))
    series = estimate_derivatives(rec, NO_SMOOTH)
    feats = dynamic_stroke_features(whole_stroke(rec), series)
    assert feats["degenerate"] is True
    assert feats["normalized_jerk"] == 0.0
    assert feats["straightness_error"] == 0.0


def test_peak_acceleration_count():
    t = np.arange(0.0, 500.0, 5.0)
    w = 2 * np.pi * 4.0 / 1000.0
    rec = on_paper_recording(t, np.zeros_like(t), np.sin(w * t))
    series = estimate_derivatives(rec, NO_SMOOTH)
    feats = dynamic_stroke_features(whole_stroke(rec), series)
    # |ay| = w^2 |sin(w t)| over 495 ms of a 4 Hz wave: maxima at
    # 62.5/187.5/312.5/437.5 ms and interior minima at 125/250/375 ms -> 7
    assert feats["n_peak_acceleration_points"] == 7


def test_peak_acceleration_count_ignores_jitter():
    t = np.arange(0.0, 500.0, 5.0)
    w = 2 * np.pi * 4.0 / 1000.0
    clean = np.abs(np.sin(w * t))
    rng = np.random.default_rng(8)
    jittered = clean + rng.uniform(-1e-4, 1e-4, size=len(t))
    from pentrace.features import _count_acceleration_peaks
    assert _count_acceleration_peaks(jittered) == _count_acceleration_peaks(clean) == 7
    assert _count_acceleration_peaks(np.ones(50)) == 0


def test_straightness_error_oracle():
    # points on a parabola between (0,0) and (10,0): distances are |y|,
    # straightness = std(|y|)/10 computed independently
    t = np.arange(0.0, 55.0, 5.0)
    x = np.linspace(0.0, 10.0, 11)
    y = 0.5 * x * (10.0 - x) / 10.0
    rec = on_paper_recording(t, x, y)
    series = estimate_derivatives(rec, NO_SMOOTH)
    feats = dynamic_stroke_features(whole_stroke(rec), series)
    assert feats["straightness_error"] == pytest.approx(float(np.std(y)) / 10.0)


# ----------------------------------------------------------------------
# aggregation and vectors


def segmented(rec, cfg=NO_SMOOTH):
    series = estimate_derivatives(rec, cfg, require="jerk")
    return segment_strokes(rec, series, cfg), series


def two_kind_recording():
    t = np.arange(0.0, 300.0, 5.0)
    n = len(t)
    status = np.ones(n, dtype=bool)
    status[20:40] = False
    y = np.sin(2 * np.pi * 1.5 / 1000.0 * t)
    return make_recording(t, 0.05 * t, y, status=status)


def test_aggregate_means_match_brute_force():
    rec = two_kind_recording()
    strokes, series = segmented(rec)
    task = aggregate_task(strokes, series)
    # independent recomputation: plain sum/len over per-stroke features
    per = []
    prev = None
    for s in strokes:
        per.append((s.kind, stroke_features(s, series, prev)))
        prev = s
    for name in STROKE_FEATURES:
        values = [f[name] for kind, f in per if kind is TraitKind.ON_PAPER]
        assert task.on_paper[name] == pytest.approx(sum(values) / len(values), rel=1e-12)
    assert task.n_strokes_on_paper == sum(1 for k, _ in per if k is TraitKind.ON_PAPER)
    assert task.n_strokes_in_air == sum(1 for k, _ in per if k is TraitKind.IN_AIR)


def test_aggregate_single_stroke_identity():
    t = np.arange(0.0, 200.0, 5.0)
    rec = on_paper_recording(t, 0.05 * t, 0.02 * t)
    strokes, series = segmented(rec)
    assert len(strokes) == 1
    task = aggregate_task(strokes, series)
    direct = stroke_features(strokes[0], series)
    for name in STROKE_FEATURES:
        assert task.on_paper[name] == pytest.approx(direct[name])


def test_aggregate_requires_on_paper(no_smoothing):
    rec = two_kind_recording()
    strokes, series = segmented(rec)
    air_only = [s for s in strokes if s.kind is TraitKind.IN_AIR]
    with pytest.raises(ValidationError, match="on-paper"):
        aggregate_task(air_only, series)


def test_vector_dimensions(participant_ad):
    rec = two_kind_recording()
    strokes, series = segmented(rec)
    task = aggregate_task(strokes, series)
    for tag, dim in (("P", 26), ("A", 25), ("AL", 47)):
        vec = assemble_vector(task, participant_ad, tag, task_id=1)
        assert len(vec.names) == dim
        assert len(vec.values) == dim
        assert vec.names == set_feature_names(tag)


def test_al_personal_once(participant_ad):
    names = set_feature_names("AL")
    for personal in PERSONAL_FEATURES:
        assert sum(1 for n in names if n == personal) == 1
        assert sum(1 for n in names if n.endswith(personal)) == 1


def test_personal_encoding(participant_ad, participant_hc):
    rec = two_kind_recording()
    strokes, series = segmented(rec)
    task = aggregate_task(strokes, series)
    vec = assemble_vector(task, participant_ad, "P", task_id=2)
    get = dict(zip(vec.names, vec.values))
    assert get["sex"] == 0.0 and get["work"] == 0.0  # F, manual
    assert get["age"] == 71.0 and get["education"] == 8.0
    assert vec.label == "AD"
    vec2 = assemble_vector(task, participant_hc, "P", task_id=2)
    get2 = dict(zip(vec2.names, vec2.values))
    assert get2["sex"] == 1.0 and get2["work"] == 1.0  # M, intellectual


def test_p_vector_matches_recomputed_means(participant_ad):
    rec = two_kind_recording()
    strokes, series = segmented(rec)
    task = aggregate_task(strokes, series)
    vec = assemble_vector(task, participant_ad, "P", task_id=1)
    get = dict(zip(vec.names, vec.values))
    prev = None
    sums, count = {}, 0
    for s in strokes:
        feats = stroke_features(s, series, prev)
        prev = s
        if s.kind is TraitKind.ON_PAPER:
            count += 1
            for k in STROKE_FEATURES:
                sums[k] = sums.get(k, 0.0) + feats[k]
    for k in STROKE_FEATURES:
        assert get[k] == pytest.approx(sums[k] / count, rel=1e-12)
    assert get["n_strokes"] == count


def test_missing_in_air_raises(participant_ad):
    t = np.arange(0.0, 200.0, 5.0)
    rec = on_paper_recording(t, 0.05 * t, 0.02 * t)
    strokes, series = segmented(rec)
    task = aggregate_task(strokes, series)
    with pytest.raises(MissingTraitError) as err:
        assemble_vector(task, participant_ad, "A", task_id=3)
    assert err.value.participant_id == "p1" and err.value.task_id == 3
    with pytest.raises(MissingTraitError):
        assemble_vector(task, participant_ad, "AL", task_id=3)
    # P still works
    assemble_vector(task, participant_ad, "P", task_id=3)


# ----------------------------------------------------------------------
# invariance properties


def extract_all(rec, cfg=NO_SMOOTH):
    strokes, series = segmented(rec, cfg)
    out = []
    prev = None
    for s in strokes:
        out.append(stroke_features(s, series, prev))
        prev = s
    return out


def test_translation_invariance():
    rec = two_kind_recording()
    shifted = make_recording(rec.t, rec.x + 13.0, rec.y - 4.5,
                             pressure=rec.pressure, status=rec.status)
    a = extract_all(rec)
    b = extract_all(shifted)
    assert len(a) == len(b)
    for fa, fb in zip(a, b):
        for name in fa:
            if name == "start_horizontal_position":
                assert fb[name] == pytest.approx(fa[name] + 13.0)
            elif name == "start_vertical_position":
                assert fb[name] == pytest.approx(fa[name] - 4.5)
            elif name == "degenerate":
                assert fa[name] == fb[name]
            else:
                assert fb[name] == pytest.approx(fa[name], rel=1e-9, abs=1e-9)


def test_uniform_scaling():
    s = 2.5
    rec = two_kind_recording()
    scaled = make_recording(rec.t, rec.x * s, rec.y * s,
                            pressure=rec.pressure, status=rec.status)
    a = extract_all(rec)
    b = extract_all(scaled)
    scale_linear = ("vertical_size", "horizontal_size", "absolute_size",
                    "road_length", "peak_vertical_velocity",
                    "average_absolute_velocity", "start_horizontal_position",
                    "start_vertical_position", "peak_vertical_acceleration",
                    "absolute_y_jerk", "absolute_jerk")
    unchanged = ("slant", "straightness_error",
                 "relative_time_to_peak_vertical_velocity",
                 "relative_initial_slant", "normalized_jerk",
                 "normalized_y_jerk", "duration", "pen_pressure")
    for fa, fb in zip(a, b):
        for name in scale_linear:
            assert fb[name] == pytest.approx(s * fa[name], rel=1e-9, abs=1e-9)
        for name in unchanged:
            if name in fa:
                assert fb[name] == pytest.approx(fa[name], rel=1e-7, abs=1e-9)
        assert fb["loop_surface"] == pytest.approx(s * s * fa["loop_surface"],
                                                   rel=1e-9, abs=1e-9)


def test_time_reversal():
    t = np.arange(0.0, 300.0, 5.0)
    x = 0.04 * t + np.sin(2 * np.pi * 1.0 / 1000.0 * t)
    y = 0.02 * t
    rec = on_paper_recording(t, x, y)
    rev = on_paper_recording(t, x[::-1], y[::-1])
    fa = stroke_features(whole_stroke(rec), estimate_derivatives(rec, NO_SMOOTH))
    fb = stroke_features(whole_stroke(rev), estimate_derivatives(rev, NO_SMOOTH))
    diff = abs(fb["slant"] - fa["slant"])
    assert min(diff, 2 * np.pi - diff) == pytest.approx(np.pi, abs=1e-9)
    for name in ("duration", "vertical_size", "horizontal_size", "road_length"):
        assert fb[name] == pytest.approx(fa[name], rel=1e-12)


# ----------------------------------------------------------------------
# CSV interchange


def test_feature_csv_round_trip(tmp_path, participant_ad, participant_hc):
    rec1 = two_kind_recording()
    strokes, series = segmented(rec1)
    task = aggregate_task(strokes, series)
    vectors = [assemble_vector(task, participant_ad, "AL", task_id=1),
               assemble_vector(task, participant_hc, "AL", task_id=2)]
    path = tmp_path / "features_AL.csv"
    write_feature_csv(vectors, path)
    again = load_feature_csv(path)
    assert len(again) == 2
    for orig, back in zip(vectors, again):
        assert back.names == orig.names
        assert np.array_equal(back.values, orig.values)
        assert back.label == orig.label
        assert back.participant_id == orig.participant_id
        assert back.task_id == orig.task_id


def test_extract_task_end_to_end(participant_ad):
    rec = two_kind_recording()
    task = extract_task(rec, NO_SMOOTH)
    assert task.n_strokes_on_paper > 0
    assert task.n_strokes_in_air > 0
    vec = assemble_vector(task, participant_ad, "AL", task_id=1)
    assert np.isfinite(vec.values).all()
