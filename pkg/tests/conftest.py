import numpy as np
import pytest

from pentrace.ink import Cohort, Participant, Recording
from pentrace.kinematics import SmoothingConfig


def make_recording(t, x, y, pressure=None, status=None, participant="p1", task=1):
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if pressure is None:
        pressure = np.ones_like(t) if status is None else np.where(status, 1.0, 0.0)
    return Recording(participant, task, t, x, y, pressure, status=status)


def on_paper_recording(t, x, y, participant="p1", task=1):
    return make_recording(t, x, y, pressure=np.ones(len(t)), participant=participant,
                          task=task)


@pytest.fixture
def no_smoothing():
    return SmoothingConfig(enabled=False, min_stroke_duration=0.0)


@pytest.fixture
def participant_ad():
    return Participant(id="p1", cohort=Cohort.AD, sex="F", age=71,
                       work="manual", education=8)


@pytest.fixture
def participant_hc():
    return Participant(id="p2", cohort=Cohort.HC, sex="M", age=66,
                       work="intellectual", education=13)
