"""Shared fixtures: the two-mode preset on its exceptional point."""

import pytest

from src.core.model import PRESETS, make_bimodal, validate


@pytest.fixture
def ep_model():
    """omega1 = -0.5, omega2 = 0.5, gamma = 3, gamma12 = 1, vacuum."""
    return validate(PRESETS["bimodal-ep"].to_model())


@pytest.fixture
def thermal_ep_model():
    return validate(PRESETS["bimodal-ep"].to_model().replace(n_th=0.2))


@pytest.fixture
def below_ep_model():
    return validate(make_bimodal(-0.5, 0.5, 3.0, 0.5))
