import pytest
from fastapi.testclient import TestClient

from app.main import app


@pytest.fixture
def client():
    return TestClient(app)


class TestBasics:
    def test_health(self, client):
        assert client.get("/health").json() == {"ok": True}

    def test_run_id_header_echoed(self, client):
        r = client.get("/health", headers={"x-run-id": "abc123"})
        assert r.headers["x-run-id"] == "abc123"


class TestModels:
    def test_list(self, client):
        names = {m["name"] for m in client.get("/models").json()}
        assert {"neueg", "inceg", "badinceg", "fornet", "eg2", "neueg2", "noest", "rao", "scalar1d"} <= names

    def test_get_with_override(self, client):
        data = client.get("/models/inceg", params={"g11": "0.25"}).json()
        assert data["name"] == "inceg"
        assert data["params"] == {"g11": 0.25}

    def test_unknown(self, client):
        r = client.get("/models/nosuch")
        assert r.status_code == 404
        assert r.json() == {"detail": "Model not found"}

    def test_bad_override(self, client):
        r = client.get("/models/inceg", params={"g11": "big"})
        assert r.status_code == 422
        assert r.json()["error"] == "SchemaError"


class TestStudies:
    def test_stability_builtin(self, client):
        r = client.post(
            "/stability",
            json={"builtin": "inceg", "points": 8, "gammaLevels": [0.0, 0.5, 1.0], "cauchy": False},
            headers={"x-run-id": "run-1"},
        )
        assert r.status_code == 200
        body = r.json()
        assert body["lopatinski"]["verdict"] == "UNIFORM"
        assert body["runId"] == "run-1"

    def test_stability_inline_file(self, client):
        model = {
            "name": "outgoing",
            "d": 1,
            "N": 1,
            "matrices": [[[1.0]], [[-1.0]]],
            "gamma1": [[1.0]],
            "baseState": [0.0],
        }
        r = client.post("/stability", json={**model, "points": 8, "gammaLevels": [0.0, 1.0]})
        assert r.status_code == 200
        assert r.json()["lopatinski"]["case"] == "CaseI"

    def test_model_error_body(self, client):
        r = client.post("/stability", json={"builtin": "nosuch"})
        assert r.status_code == 422
        assert r.json()["error"] == "SchemaError"

    def test_missing_model(self, client):
        r = client.post("/stability", json={"points": 8})
        assert r.status_code == 422
        assert r.json()["error"] == "SchemaError"

    def test_request_validation(self, client):
        r = client.post("/stability", json={"builtin": "inceg", "points": 1})
        assert r.status_code == 422
        assert r.json() == {"detail": "Invalid request"}

    def test_evans_rows(self, client):
        r = client.post("/evans", json={"builtin": "fornet", "radii": 3, "points": 4})
        assert r.status_code == 200
        body = r.json()
        assert body["summary"]["rows"] == len(body["rows"]) > 0

    def test_expand_cascade(self, client):
        r = client.post("/expand", json={"builtin": "scalar1d", "order": 1, "epsilons": [0.1, 0.05], "dx": 0.04})
        assert r.status_code == 200
        assert r.json()["pipeline"] == "cascade"

    def test_converge_dimension_error(self, client):
        r = client.post("/converge", json={"builtin": "inceg", "epsilons": [0.2]})
        assert r.status_code == 422
        assert r.json()["error"] == "DimensionMismatch"
