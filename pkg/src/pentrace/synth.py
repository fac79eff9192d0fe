"""Deterministic synthetic handwriting studies with injectable pathology.

Stands in for clinical data: every (participant, task) recording is built
from per-letter minimum-jerk stroke segments sampled on a 5 ms grid
(200 Hz), with in-air bridges between letters. Letters are abstract
2-4-stroke shapes with ascender/descender heights - no glyph realism -
shaped deterministically per character so the six task words are stable
across studies.

A cohort profile bends the kinematics along interpretable axes:

* ``base_speed``       - units/ms pen speed (slower cohorts stretch time)
* ``tremor_amplitude`` - sinusoidal positional tremor (units)
* ``tremor_freq``      - tremor frequency in Hz (physiological 3-12 band)
* ``pause_rate``       - expected extra mid-letter pen lifts per word
* ``jerk_gain``        - multiplier on a fixed 6.5 Hz roughness component;
                         1.0 means none, larger values degrade smoothness
* ``noise_sigma``      - white coordinate noise (units)

Everything derives from the study seed: same recipe + seed => identical
study, byte for byte.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, asdict, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .ink import (Cohort, Participant, Recording, TASKS, recording_filename,
                  write_participants, write_recording)

_DT_MS = 5.0  # 200 Hz sampling grid
_XHEIGHT = 4.0
_ASCENDER = 7.5
_DESCENDER = -3.5
# jerk scales with frequency cubed, so the roughness band sits high (but
# inside the default 10 ms smoothing passband) to survive sensor-noise jerk
_ROUGHNESS_BASE = 0.2  # units of wiggle per unit of (jerk_gain - 1)
_ROUGHNESS_FREQ = 11.0  # Hz

_ASCENDERS = set("bdfhklt")
_DESCENDERS = set("gjpqy")


@dataclass(frozen=True)
class CohortProfile:
    base_speed: float = 0.08  # units per ms
    tremor_amplitude: float = 0.0
    tremor_freq: float = 8.0
    pause_rate: float = 0.5
    jerk_gain: float = 1.0
    noise_sigma: float = 0.01

    def __post_init__(self):
        for name in ("base_speed", "tremor_amplitude", "tremor_freq",
                     "pause_rate", "jerk_gain", "noise_sigma"):
            if getattr(self, name) < 0:
                raise ValidationError(f"profile field {name} must be >= 0")
        if self.base_speed == 0:
            raise ValidationError("profile field base_speed must be > 0")
        if self.tremor_amplitude > 0 and not (3.0 <= self.tremor_freq <= 12.0):
            raise ValidationError(
                "profile field tremor_freq must be in [3, 12] Hz when tremor is on")


@dataclass(frozen=True)
class StudyRecipe:
    n_per_cohort: int = 10
    profiles: dict = field(default_factory=lambda: {
        "AD": CohortProfile(base_speed=0.04, pause_rate=1.5, jerk_gain=3.0),
        "HC": CohortProfile(),
    })
    tasks: tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    seed: int = 0

    def __post_init__(self):
        if self.n_per_cohort < 1:
            raise ValidationError("recipe field n_per_cohort must be >= 1")
        for cohort in ("AD", "HC"):
            if cohort not in self.profiles:
                raise ValidationError(f"recipe field profiles missing {cohort}")
        for task_id in self.tasks:
            if task_id not in TASKS:
                raise ValidationError(f"recipe field tasks has unknown id {task_id}")


@lru_cache(maxsize=None)
def letter_template(char: str):
    """Anchor points (x offsets, y heights) for one letter, 2-4 strokes.

    Deterministic per character: the same letter always has the same
    abstract shape, with the ascender/descender class deciding its
    vertical extent.
    """
    rng = np.random.default_rng(np.random.SeedSequence(ord(char)))
    n_strokes = 2 + int(rng.integers(0, 3))  # 2..4
    if char in _ASCENDERS:
        peak = _ASCENDER
    elif char in _DESCENDERS:
        peak = _DESCENDER
    else:
        peak = _XHEIGHT
    xs = [0.0]
    ys = [float(rng.uniform(-0.3, 0.3))]
    for s in range(n_strokes):
        xs.append(xs[-1] + float(rng.uniform(1.0, 2.0)))
        if s % 2 == 0:
            # odd-numbered anchors reach for the letter's peak band
            target = peak if s == 0 else float(rng.uniform(0.7, 1.0)) * _XHEIGHT
            ys.append(target + float(rng.uniform(-0.4, 0.4)))
        else:
            ys.append(float(rng.uniform(-0.3, 0.5)))
    bulges = [float(rng.uniform(0.15, 0.45)) * (1 if i % 2 == 0 else -1)
              for i in range(n_strokes)]
    return tuple(xs), tuple(ys), tuple(bulges)


def _minjerk(u):
    return 10.0 * u ** 3 - 15.0 * u ** 4 + 6.0 * u ** 5


def _segment(p0, p1, bulge, duration_ms):
    """Sample a minimum-jerk segment from p0 to p1 on the 5 ms grid,
    excluding the start point; a perpendicular bulge adds curvature."""
    m = max(3, int(round(duration_ms / _DT_MS)))
    u = np.arange(1, m + 1) / m
    s = _minjerk(u)
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    chord = math.hypot(dx, dy)
    if chord > 0:
        nx, ny = -dy / chord, dx / chord
    else:
        nx, ny = 0.0, 1.0
    arc = bulge * chord * 4.0 * s * (1.0 - s)
    x = p0[0] + dx * s + nx * arc
    y = p0[1] + dy * s + ny * arc
    return x, y, m


def generate_recording(participant: Participant, task_id: int,
                       profile: CohortProfile, rng) -> Recording:
    """One synthetic word-copy recording."""
    word = TASKS[task_id][1]
    scale = float(rng.uniform(0.9, 1.1))
    speed = profile.base_speed * float(rng.uniform(0.9, 1.1))
    p_base = float(rng.uniform(0.5, 0.7))
    phases = rng.uniform(0.0, 2.0 * np.pi, size=4)

    # assemble the pen plan: (target point, bulge, on_paper) steps
    steps = []
    cursor_x = 0.0
    origin = None
    for li, char in enumerate(word):
        xs, ys, bulges = letter_template(char)
        jitter = rng.uniform(-0.15, 0.15, size=len(xs))
        anchors = [((cursor_x + xs[i] * scale),
                    (ys[i] + float(jitter[i])) * scale)
                   for i in range(len(xs))]
        if origin is None:
            origin = anchors[0]
        elif steps:
            # in-air bridge from the previous letter to this one
            steps.append((anchors[0], float(rng.uniform(0.2, 0.5)), False))
        n_segments = len(anchors) - 1
        for s in range(n_segments):
            if s > 0 and rng.random() < _pause_probability(profile, word):
                # extra mid-letter lift: hop in the air to the same point
                hop = (anchors[s][0] + 0.2 * scale, anchors[s][1] + 0.3 * scale)
                steps.append((hop, 0.3, False))
                steps.append((anchors[s + 1], bulges[s], True))
            else:
                steps.append((anchors[s + 1], bulges[s], True))
        cursor_x = anchors[-1][0] + 0.8 * scale

    t_list = [0.0]
    x_list = [origin[0]]
    y_list = [origin[1]]
    on_list = [True]
    pos = origin
    t_cursor = 0.0
    for target, bulge, on_paper in steps:
        chord = math.hypot(target[0] - pos[0], target[1] - pos[1])
        seg_speed = speed * (1.3 if not on_paper else 1.0)
        duration = max(60.0, chord / seg_speed) if chord > 0 else 60.0
        x, y, m = _segment(pos, target, bulge, duration)
        t = t_cursor + _DT_MS * np.arange(1, m + 1)
        t_list.extend(t)
        x_list.extend(x)
        y_list.extend(y)
        on_list.extend([on_paper] * m)
        pos = target
        t_cursor = float(t[-1])

    t = np.array(t_list)
    x = np.array(x_list)
    y = np.array(y_list)
    on = np.array(on_list, dtype=bool)

    ts = t / 1000.0
    if profile.tremor_amplitude > 0:
        x = x + profile.tremor_amplitude * np.sin(
            2 * np.pi * profile.tremor_freq * ts + phases[0])
        y = y + profile.tremor_amplitude * np.sin(
            2 * np.pi * profile.tremor_freq * ts + phases[1])
    rough = _ROUGHNESS_BASE * max(0.0, profile.jerk_gain - 1.0)
    if rough > 0:
        x = x + rough * np.sin(2 * np.pi * _ROUGHNESS_FREQ * ts + phases[2])
        y = y + rough * np.sin(2 * np.pi * _ROUGHNESS_FREQ * ts + phases[3])
    if profile.noise_sigma > 0:
        x = x + rng.normal(0.0, profile.noise_sigma, size=len(x))
        y = y + rng.normal(0.0, profile.noise_sigma, size=len(y))

    progress = np.linspace(0.0, 1.0, len(t))
    pressure = np.where(
        on,
        np.clip(p_base + 0.15 * np.sin(np.pi * progress)
                + rng.normal(0.0, 0.02, size=len(t)), 0.05, 1.5),
        0.0)
    return Recording(participant.id, task_id, t, x, y, pressure,
                     status=on, nominal_rate=1000.0 / _DT_MS)


def _pause_probability(profile: CohortProfile, word: str) -> float:
    # spread the expected extra pen-ups over the word's interior transitions
    interior = sum(max(0, len(letter_template(c)[0]) - 2) for c in word)
    if interior == 0:
        return 0.0
    return min(1.0, profile.pause_rate / interior)


def _sample_participant(cohort: Cohort, index: int, seed: int) -> Participant:
    rng = np.random.default_rng(
        np.random.SeedSequence(seed, spawn_key=(0 if cohort is Cohort.AD else 1, index)))
    return Participant(
        id=f"{cohort.value.lower()}{index:03d}",
        cohort=cohort,
        sex="F" if rng.random() < 0.5 else "M",
        age=int(rng.integers(55, 86)),
        work="intellectual" if rng.random() < 0.5 else "manual",
        education=int(rng.integers(3, 19)),
    )


def generate_study(recipe: StudyRecipe):
    """All participants and recordings for a recipe, deterministically."""
    participants = []
    recordings = []
    for cohort_idx, cohort in enumerate((Cohort.AD, Cohort.HC)):
        profile = recipe.profiles[cohort.value]
        for index in range(recipe.n_per_cohort):
            participant = _sample_participant(cohort, index, recipe.seed)
            participants.append(participant)
            for task_id in recipe.tasks:
                rng = np.random.default_rng(np.random.SeedSequence(
                    recipe.seed, spawn_key=(cohort_idx, index, task_id)))
                recordings.append(
                    generate_recording(participant, task_id, profile, rng))
    return participants, recordings


def recipe_to_dict(recipe: StudyRecipe) -> dict:
    return {
        "n_per_cohort": recipe.n_per_cohort,
        "profiles": {k: asdict(v) for k, v in recipe.profiles.items()},
        "tasks": list(recipe.tasks),
        "seed": recipe.seed,
    }


def recipe_from_dict(payload: dict) -> StudyRecipe:
    known = {"n_per_cohort", "profiles", "tasks", "seed"}
    for key in payload:
        if key not in known:
            raise ValidationError(f"unknown recipe field {key!r}")
    profiles = {}
    for cohort, fields_ in payload.get("profiles", {}).items():
        if cohort not in ("AD", "HC"):
            raise ValidationError(f"unknown recipe cohort {cohort!r}")
        try:
            profiles[cohort] = CohortProfile(**fields_)
        except TypeError as exc:
            raise ValidationError(f"recipe profile {cohort}: {exc}") from None
    kwargs = {}
    if "n_per_cohort" in payload:
        kwargs["n_per_cohort"] = int(payload["n_per_cohort"])
    if profiles:
        kwargs["profiles"] = profiles
    if "tasks" in payload:
        kwargs["tasks"] = tuple(int(t) for t in payload["tasks"])
    if "seed" in payload:
        kwargs["seed"] = int(payload["seed"])
    return StudyRecipe(**kwargs)


def load_recipe(path) -> StudyRecipe:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"recipe {path}: {exc}") from None
    return recipe_from_dict(payload)


def recipe_digest(recipe: StudyRecipe) -> str:
    canonical = json.dumps(recipe_to_dict(recipe), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_study(participants, recordings, out_dir, recipe: StudyRecipe) -> Path:
    """Write the study in the ingestion formats plus a manifest; returns
    the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_participants(participants, out_dir / "participants.csv")
    files = ["participants.csv"]
    for rec in recordings:
        name = recording_filename(rec.participant_id, rec.task_id)
        write_recording(rec, out_dir / name)
        files.append(name)
    manifest = {
        "format": "pentrace-study",
        "recipe": recipe_to_dict(recipe),
        "recipe_digest": recipe_digest(recipe),
        "n_participants": len(participants),
        "n_recordings": len(recordings),
        "files": sorted(files),
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                             encoding="utf-8")
    return manifest_path


def pathology_contrast(vectors, feature_name: str) -> float:
    """Standardized mean difference (Cohen's d, pooled std) of one feature
    between the AD and HC samples of a vector list."""
    values = {"AD": [], "HC": []}
    for v in vectors:
        if feature_name not in v.names:
            raise ValidationError(f"unknown feature {feature_name!r}")
        values[v.label].append(float(v.values[v.names.index(feature_name)]))
    a, h = np.array(values["AD"]), np.array(values["HC"])
    if len(a) < 2 or len(h) < 2:
        raise ValidationError("need at least two samples per cohort")
    pooled = math.sqrt(((len(a) - 1) * a.var(ddof=1) + (len(h) - 1) * h.var(ddof=1))
                       / (len(a) + len(h) - 2))
    if pooled == 0:
        return 0.0
    return float((a.mean() - h.mean()) / pooled)
