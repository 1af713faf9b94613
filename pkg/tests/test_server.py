"""HTTP endpoint tests over the in-process ASGI app."""

import pytest
from fastapi.testclient import TestClient

from fontadapt.config import EngineConfig
from fontadapt.engine import Engine
from fontadapt.server import create_app


@pytest.fixture()
def client(group_rows, tmp_path):
    engine = Engine(group_rows, config=EngineConfig(), store_root=tmp_path)
    return TestClient(create_app(engine))


def sample_batch(start_ts=0, n=10, lux=111.69, vib=(0.18, 0.11, 0.26), dist=33.0):
    return {
        "samples": [
            {"ts_ms": start_ts + i * 100, "lux": lux,
             "ax": vib[0], "ay": vib[1], "az": vib[2], "dist_cm": dist}
            for i in range(n)
        ]
    }


def open_session(client, user="u1", hint=None):
    body = {"user_id": user}
    if hint:
        body["environment_hint"] = hint
    resp = client.post("/sessions", json=body)
    assert resp.status_code == 200
    return resp.json()["session_id"]


class TestHealth:
    def test_healthz(self, client):
        resp = client.get("/healthz")
        assert resp.status_code == 200
        assert resp.json()["status"] == "ok"


class TestSessionEndpoints:
    def test_open_with_defaults(self, client):
        resp = client.post("/sessions", json={"user_id": "u1"})
        assert resp.status_code == 200
        assert resp.json()["ipd_cm"] == 6.3

    def test_invalid_ipd_is_422(self, client):
        resp = client.post("/sessions", json={"user_id": "u1", "ipd_cm": 12.0})
        assert resp.status_code == 422

    def test_unknown_session_is_404(self, client):
        resp = client.post("/sessions/nope/recommend", json={})
        assert resp.status_code == 404


class TestPipelineEndpoints:
    def test_full_loop(self, client):
        sid = open_session(client, hint="office")
        resp = client.post(f"/sessions/{sid}/sensors", json=sample_batch())
        assert resp.status_code == 200
        assert resp.json() == {"accepted": 10, "submitted": 10}

        resp = client.post(f"/sessions/{sid}/recommend", json={})
        assert resp.status_code == 200
        rec = resp.json()
        assert rec["scenario"] == "Still-Office"
        assert rec["model_scenario"] == "GROUP"
        assert 12 <= rec["params"]["size_sp"] <= 40
        assert rec["latency_ms"] < 2000

        resp = client.post(
            f"/sessions/{sid}/feedback",
            json={"params": {"size_sp": 24, "weight_px": 1.5,
                             "line_spacing_em": 0.4, "letter_spacing_em": 0.1}},
        )
        assert resp.status_code == 200
        assert resp.json()["model_version"] == 1

    def test_recommend_without_samples_is_409(self, client):
        sid = open_session(client)
        resp = client.post(f"/sessions/{sid}/recommend", json={})
        assert resp.status_code == 409

    def test_out_of_range_feedback_is_422(self, client):
        sid = open_session(client, hint="office")
        client.post(f"/sessions/{sid}/sensors", json=sample_batch())
        resp = client.post(
            f"/sessions/{sid}/feedback",
            json={"params": {"size_sp": 50, "weight_px": 1,
                             "line_spacing_em": 0.3, "letter_spacing_em": 0.1}},
        )
        assert resp.status_code == 422

    def test_flags_change_served_features(self, client):
        sid = open_session(client, hint="office")
        client.post(f"/sessions/{sid}/sensors", json=sample_batch())
        resp = client.post(
            f"/sessions/{sid}/recommend",
            json={"flags": {"fatigued": True}},
        )
        assert resp.status_code == 200
        assert resp.json()["features_used"][5] == 1.0  # fatigued indicator


class TestLabelEndpoints:
    def test_get_label_fresh_session(self, client):
        sid = open_session(client)
        resp = client.get(f"/sessions/{sid}/label")
        assert resp.status_code == 200
        assert resp.json()["scenario"] == "GROUP"

    def test_set_and_confirm(self, client):
        sid = open_session(client)
        resp = client.post(f"/sessions/{sid}/label",
                           json={"label": "Walking-Subway", "confirm": True})
        assert resp.status_code == 200
        body = resp.json()
        assert body["scenario"] == "Walking-Subway"
        assert body["confirmed"] is True

    def test_malformed_label_is_422(self, client):
        sid = open_session(client)
        resp = client.post(f"/sessions/{sid}/label", json={"label": "garbage"})
        assert resp.status_code == 422

    def test_edit_label(self, client):
        sid = open_session(client, hint="desk")
        client.post(f"/sessions/{sid}/sensors", json=sample_batch())
        client.post(f"/sessions/{sid}/recommend", json={})
        resp = client.patch(f"/sessions/{sid}/label",
                            json={"instruction": "I am in an office"})
        assert resp.status_code == 200
        assert resp.json()["scenario"].endswith("-Office")


class TestModelEndpoint:
    def test_group_model(self, client):
        resp = client.get("/models/GROUP")
        assert resp.status_code == 200
        body = resp.json()
        assert body["scenario"] == "GROUP"
        assert len(body["coefficients"]) == 4
        assert len(body["coefficients"][0]) == 9

    def test_user_scenario_model(self, client):
        sid = open_session(client, hint="office")
        client.post(f"/sessions/{sid}/sensors", json=sample_batch())
        client.post(f"/sessions/{sid}/recommend", json={})
        client.post(
            f"/sessions/{sid}/feedback",
            json={"params": {"size_sp": 24, "weight_px": 1.5,
                             "line_spacing_em": 0.4, "letter_spacing_em": 0.1}},
        )
        resp = client.get("/models/Still-Office", params={"user_id": "u1"})
        assert resp.status_code == 200
        assert resp.json()["version"] == 1

    def test_missing_model_is_404(self, client):
        resp = client.get("/models/Running-Nowhere")
        assert resp.status_code == 404
