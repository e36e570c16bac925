import math

import numpy as np
import pytest

from regula import hilbert_core as hc
from regula.operators import build_operator, load_catalog
from regula.schedules import StepSchedule
from regula.schema import OperatorSpec

PI_2 = math.pi / 2


def make_operator(**spec):
    return build_operator(OperatorSpec.from_dict(spec))


@pytest.fixture
def scaling_op():
    """T(x) = -2x on the line; kappa = 1/3, fixed point 0."""
    return make_operator(kind="scaling", a=-2.0, dim=1)


@pytest.fixture
def rotation_op():
    """Quarter turn in the plane; kappa = 0, fixed point at the origin."""
    return make_operator(kind="rotation", angle=PI_2, dim=2)


@pytest.fixture
def catalog_ops():
    return [build_operator(spec) for spec in load_catalog()]


@pytest.fixture
def scaling_schedule(scaling_op):
    return StepSchedule.constant(2.0 / 3.0, scaling_op.kappa)


@pytest.fixture
def half_schedule():
    return StepSchedule.constant(0.5, 0.0)


@pytest.fixture
def vec():
    return hc.as_vector


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
