"""Tests for the model layer: registry, loader and validation."""
import json

import numpy as np
import pytest

from app.core.errors import InvariantViolation, ModelError, SchemaError, UnknownIdentifier
from app.models.loader import (
    from_model_file,
    load_builtin,
    load_model,
    parse_model_file,
    save_model,
    serialize_model,
)
from app.models.registry import BUILTINS, rao_energy_matrix, rao_energy_matrix_inverse


def _scalar_file(**changes) -> dict:
    data = {
        "name": "adv",
        "d": 1,
        "N": 1,
        "matrices": [[[1.0]], [[2.0]]],
        "gamma1": [],
        "gamma2": [[1.0]],
        "baseState": [0.0],
    }
    data.update(changes)
    return data


def load_model_from(data: dict):
    return from_model_file(parse_model_file(data))


class TestRegistry:
    @pytest.mark.parametrize("name", sorted(BUILTINS))
    def test_every_builtin_validates(self, name):
        model = load_builtin(name)
        assert model.name == name
        assert model.n_dirichlet + model.n_neumann == model.N

    def test_incoming_flags(self):
        assert load_builtin("inceg").totally_incoming
        assert load_builtin("fornet").totally_incoming
        assert not load_builtin("neueg").totally_incoming
        assert not load_builtin("eg2").totally_incoming

    def test_override(self):
        model = load_builtin("neueg", alpha=0.5)
        assert np.allclose(model.Ad, np.diag([1.5, -0.5]))

    def test_unknown_parameter(self):
        with pytest.raises(SchemaError):
            load_builtin("neueg", beta=1.0)

    def test_unknown_builtin(self):
        with pytest.raises(SchemaError):
            load_builtin("nope")

    def test_rao_metadata(self):
        model = load_builtin("rao")
        meta = model.metadata
        assert meta["soundSpeed"] == pytest.approx(np.sqrt(1.0 + 1.0 / 1.5))
        assert meta["supersonic"]
        assert not meta["jordanBlockExpected"]
        assert model.n_dirichlet == 3 and model.n_neumann == 1
        assert not model.is_constant

    def test_rao_energy_inverse(self):
        params = BUILTINS["rao"].defaults
        m = rao_energy_matrix(**params)
        assert np.allclose(m @ rao_energy_matrix_inverse(**params), np.eye(4))

    def test_scalar_state_dependence(self):
        model = load_builtin("scalar1d")
        assert model.A_field(1, np.array([[1.0], [2.0]]))[:, 0, 0] == pytest.approx([1.1, 1.4])
        assert model.dA(1, np.array([1.0]), np.array([1.0]))[0, 0] == pytest.approx(0.2, rel=1e-6)
        assert model.d2A(1, np.array([0.0]), np.array([1.0]))[0, 0] == pytest.approx(0.2, rel=1e-4)


class TestValidation:
    def test_a0_must_be_identity(self):
        with pytest.raises(InvariantViolation) as info:
            load_model_from(_scalar_file(matrices=[[[2.0]], [[1.0]]]))
        assert info.value.check == "A0_identity"

    def test_characteristic_boundary(self):
        with pytest.raises(InvariantViolation) as info:
            load_model_from(_scalar_file(matrices=[[[1.0]], [[0.0]]]))
        assert info.value.check == "Ad_invertible"

    def test_rank_condition(self):
        with pytest.raises(InvariantViolation) as info:
            load_model_from(_scalar_file(gamma1=[[1.0]], gamma2=[[1.0]]))
        assert info.value.check == "rank_condition"

    def test_complex_speeds(self):
        data = {
            "name": "elliptic",
            "d": 2,
            "N": 2,
            "matrices": [[[1, 0], [0, 1]], [[0, 1], [-1, 0]], [[1, 0], [0, 2]]],
            "gamma2": [[1, 0], [0, 1]],
            "baseState": [0, 0],
        }
        with pytest.raises(InvariantViolation) as info:
            load_model_from(data)
        assert info.value.check == "hyperbolic"

    def test_declared_incoming_mismatch(self):
        with pytest.raises(InvariantViolation):
            load_model_from(_scalar_file(matrices=[[[1.0]], [[-1.0]]], flags={"totallyIncoming": True}))

    def test_shape_errors_are_schema_errors(self):
        with pytest.raises(SchemaError):
            parse_model_file(_scalar_file(matrices=[[[1.0]]]))
        with pytest.raises(SchemaError):
            parse_model_file(_scalar_file(unexpected=1))

    def test_unknown_identifier_in_entry(self):
        with pytest.raises(UnknownIdentifier):
            load_model_from(_scalar_file(matrices=[[[1.0]], [["1 + k"]]]))


class TestLoader:
    def test_builtin_prefix(self):
        assert load_model("builtin:inceg", g11=0.25).params == {"g11": 0.25}

    def test_file_roundtrip(self, tmp_path):
        model = load_builtin("eg2", alpha=0.5)
        path = save_model(model, tmp_path / "eg2.json")
        again = load_model(path)
        assert again == model
        assert json.loads(path.read_text()) == json.loads(serialize_model(again))

    def test_file_param_override(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps(_scalar_file(matrices=[[[1.0]], [["k"]]], params={"k": 2.0})))
        assert load_model(path, k=3.0).Ad[0, 0] == pytest.approx(3.0)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ModelError):
            load_model(tmp_path / "absent.json")

    def test_not_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_bytes(b"\xff\xfe")
        with pytest.raises(SchemaError):
            load_model(path)
