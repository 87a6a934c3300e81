"""Tests for model specification, validation and config documents."""

import json

import numpy as np
import pytest

from src.core.errors import ConfigSchemaError, ModelValidationError
from src.core.model import (
    PRESETS,
    ModelSpec,
    load_model,
    make_bimodal,
    parse_config,
    serialize_config,
    supermode_model,
    validate,
)


def test_preset_is_valid_with_supermode_rates(ep_model):
    """Test that the preset validates and its jump rates are gamma -/+ gamma12."""
    assert ep_model.n_modes == 2
    np.testing.assert_allclose(ep_model.jump_rates, [2.0, 4.0], atol=1e-12)
    np.testing.assert_array_equal(ep_model.spec.gamma.real, [[3.0, 1.0], [1.0, 3.0]])


def test_hamiltonian_places_frequencies_on_the_diagonal():
    spec = ModelSpec(omega=[1.0, 2.0], chi=[[0, 0.5j], [-0.5j, 0]], gamma=np.eye(2))
    np.testing.assert_allclose(spec.hamiltonian, [[1.0, 0.5j], [-0.5j, 2.0]])


def test_model_arrays_are_read_only(ep_model):
    with pytest.raises(ValueError):
        ep_model.spec.omega[0] = 7.0


def test_non_psd_damping_is_rejected():
    """Test that |gamma12| > gamma is reported with its smallest eigenvalue."""
    spec = ModelSpec(omega=[0.0, 0.0], chi=None, gamma=[[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ModelValidationError) as excinfo:
        validate(spec)
    assert any("positive semidefinite" in v for v in excinfo.value.violations)


def test_every_violation_is_collected():
    """Test that validation lists all broken invariants at once."""
    spec = ModelSpec(omega=[0.0, 0.0], chi=[[0.0, 1.0], [0.0, 0.0]], gamma=[[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ModelValidationError) as excinfo:
        validate(spec)
    violations = excinfo.value.violations
    assert len(violations) == 2
    assert any(v.startswith("chi not Hermitian") for v in violations)


def test_negative_thermal_occupation_is_rejected():
    spec = make_bimodal(0.0, 0.0, 1.0, 0.0).replace(n_th=-0.1)
    with pytest.raises(ModelValidationError, match="n_th"):
        validate(spec)


def test_make_bimodal_checks_its_arguments():
    with pytest.raises(ModelValidationError):
        make_bimodal(0.0, 0.0, 3.0, 4.0)
    with pytest.raises(ModelValidationError):
        make_bimodal(0.0, 0.0, 0.0, 0.0)


def test_supermode_model_diagonalizes_damping(ep_model):
    """Test that the pi/4 rotation turns detuning into coherent coupling."""
    rotated = supermode_model(ep_model)
    np.testing.assert_allclose(rotated.gamma, np.diag([2.0, 4.0]), atol=1e-12)
    np.testing.assert_allclose(rotated.omega, [0.0, 0.0], atol=1e-12)
    assert rotated.chi[0, 1] == pytest.approx(-0.5)


def test_supermodes_need_two_modes():
    spec = ModelSpec(omega=[0.0], chi=None, gamma=[[1.0]])
    with pytest.raises(ValueError):
        supermode_model(spec)


def test_bimodal_shorthand_matches_builder():
    text = json.dumps({"bimodal": {"omega1": -0.5, "omega2": 0.5, "gamma": 3.0, "gamma12": 1.0}})
    assert parse_config(text) == PRESETS["bimodal-ep"].to_model()


def test_full_form_accepts_complex_pairs():
    document = {
        "modes": [{"omega": 1.0}, {"omega": 2.0}],
        "chi": [[0.0, [0.0, 0.25]], [[0.0, -0.25], 0.0]],
        "gamma": [[1.0, 0.0], [0.0, 1.0]],
        "n_th": 0.1,
    }
    spec = parse_config(json.dumps(document))
    assert spec.chi[0, 1] == 0.25j
    assert spec.n_th == 0.1
    validate(spec)


def test_canonical_form_parses_back_exactly(ep_model):
    """Test that the serialized config reproduces the model bit for bit."""
    spec = ep_model.spec.replace(n_th=0.1 + 1e-17)
    assert parse_config(serialize_config(spec)) == spec


@pytest.mark.parametrize("text, path", [
    ('{"bimodal": {"omega1": 0, "omega2": 0, "gamma": 1, "gamma12": 0, "colour": 1}}', "$.bimodal.colour"),
    ('{"modes": [{"omega": 1.0}], "gamma": [[1.0, 0.0]]}', "$.gamma"),
    ('{"bimodal": {"omega1": 0, "omega2": 0, "gamma": -1, "gamma12": 0}}', "$.bimodal.gamma"),
])
def test_schema_errors_carry_json_path(text, path):
    with pytest.raises(ConfigSchemaError) as excinfo:
        parse_config(text)
    assert excinfo.value.path == path


def test_malformed_json():
    with pytest.raises(ConfigSchemaError, match="invalid JSON"):
        parse_config("{modes: ")


def test_load_model_sources(tmp_path):
    """Test that presets, files and the n_th override all reach validation."""
    assert load_model().spec == PRESETS["bimodal-ep"].to_model()
    assert load_model(preset="bimodal-ep", n_th=0.2).spec.n_th == 0.2
    assert load_model(preset="fig1").spec == PRESETS["bimodal-ep"].to_model()

    path = tmp_path / "model.json"
    path.write_text(json.dumps({"bimodal": {"omega1": 0, "omega2": 1, "gamma": 2, "gamma12": 0.5}}))
    model = load_model(str(path))
    np.testing.assert_array_equal(model.spec.omega, [0.0, 1.0])

    with pytest.raises(ConfigSchemaError):
        load_model(str(tmp_path / "missing.json"))
    with pytest.raises(ConfigSchemaError, match="unknown preset"):
        load_model(preset="fig9")
