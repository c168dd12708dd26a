import math

import pytest

from cat_metrology.spin import SpinLength
from cat_metrology.states import CatSpec, cat_state

CAT_THETAS = (0.0, math.pi / 8, math.pi / 4, 7 * math.pi / 20)


@pytest.fixture
def spin100():
    return SpinLength(100)


@pytest.fixture(params=CAT_THETAS, ids=["ghz", "pi/8", "pi/4", "7pi/20"])
def cat100(request):
    return cat_state(CatSpec(100, request.param))


@pytest.fixture
def ghz40():
    return cat_state(CatSpec(40, 0.0))
