import base64
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from meltfno.enthalpy import make_params, normalized_enthalpy
from meltfno.fields import Grid3
from meltfno.model import ModelConfig, build_model, infer, save_checkpoint
from meltfno.preprocess import meltpool_mask
from meltfno.service import create_app, meltpool_summary

GRID = Grid3(10, 8, 6, 1e-5)


@pytest.fixture(scope="module")
def served():
    cfg = ModelConfig(modes=(2, 2, 2), padding=2, latent_width=3,
                      decoder_width=4, reference_dx=1e-5, dtype="float64")
    model = build_model(cfg, seed=0, grid=GRID)
    model.provenance = {
        "trained": True,
        "grid": GRID.to_json(),
        "trained_window": {"power_w": [80.0, 140.0],
                           "v_scan_m_s": [0.1, 1.0]},
    }
    app = create_app(model=model)
    return model, TestClient(app)


class TestEndpoints:
    def test_healthz(self, served):
        _, client = served
        r = client.get("/v1/healthz")
        assert r.status_code == 200
        assert r.json() == {"status": "ok"}

    def test_model_info(self, served):
        model, client = served
        r = client.get("/v1/model/info")
        assert r.status_code == 200
        body = r.json()
        assert body["parameter_count"] == model.parameter_count()
        assert body["default_grid"]["nx"] == GRID.nx
        assert body["trained_window"]["power_w"] == [80.0, 140.0]
        assert body["config"]["material"]["t_boil"] == 3123.0

    def test_infer_array_shapes(self, served):
        _, client = served
        r = client.post("/v1/infer", json={"power_w": 100.0,
                                           "v_scan_m_s": 0.5})
        assert r.status_code == 200
        body = r.json()
        n = GRID.n_cells
        for name in ("T", "alpha", "fl", "meltpool_mask"):
            raw = base64.b64decode(body["fields"][name])
            assert len(raw) == 4 * n
        assert body["extrapolation"] is False
        assert body["h_star"] == pytest.approx(
            normalized_enthalpy(100.0, 0.5), rel=1e-12)

    def test_infer_matches_library_call(self, served):
        model, client = served
        r = client.post("/v1/infer", json={"power_w": 100.0,
                                           "v_scan_m_s": 0.5,
                                           "fields": ["T"]})
        arr = np.frombuffer(base64.b64decode(r.json()["fields"]["T"]),
                            dtype="<f4")
        bundle = infer(model, make_params(100.0, 0.5), GRID)
        assert np.allclose(arr, bundle.T.values.astype(np.float32))

    def test_infer_deterministic_bytes(self, served):
        _, client = served
        body = {"power_w": 95.0, "v_scan_m_s": 0.4}
        r1 = client.post("/v1/infer", json=body)
        r2 = client.post("/v1/infer", json=body)
        assert r1.content == r2.content

    def test_extrapolation_flag(self, served):
        _, client = served
        r = client.post("/v1/infer", json={"power_w": 20.0,
                                           "v_scan_m_s": 0.5})
        assert r.status_code == 200
        assert r.json()["extrapolation"] is True

    def test_json_stats_encoding(self, served):
        _, client = served
        r = client.post("/v1/infer", json={"power_w": 100.0,
                                           "v_scan_m_s": 0.5,
                                           "fields": ["T"],
                                           "encoding": "json-stats"})
        stats = r.json()["fields"]["T"]
        assert set(stats) == {"min", "max", "mean"}

    def test_custom_grid(self, served):
        _, client = served
        r = client.post("/v1/infer", json={
            "power_w": 100.0, "v_scan_m_s": 0.5,
            "grid": {"nx": 8, "ny": 6, "nz": 6, "dx_m": 1e-5},
            "fields": ["T"]})
        assert r.status_code == 200
        raw = base64.b64decode(r.json()["fields"]["T"])
        assert len(raw) == 4 * 8 * 6 * 6

    def test_meltpool_summary_matches_bruteforce(self, served):
        model, client = served
        r = client.post("/v1/infer", json={"power_w": 100.0,
                                           "v_scan_m_s": 0.5})
        summary = r.json()["meltpool"]
        bundle = infer(model, make_params(100.0, 0.5), GRID)
        mask = meltpool_mask(bundle.alpha, bundle.fl)
        assert summary["cells"] == int(np.count_nonzero(mask))
        if mask.any():
            xs = np.nonzero(mask.any(axis=(1, 2)))[0]
            assert summary["length_cells"] == xs[-1] - xs[0] + 1
        metal = bundle.alpha.as_3d() >= 0.5
        if metal.any():
            assert summary["max_T_metal_k"] == pytest.approx(
                float(bundle.T.as_3d()[metal].max()))


class TestErrorHandling:
    def test_malformed_json_is_400(self, served):
        _, client = served
        r = client.post("/v1/infer", content=b"{not json",
                        headers={"content-type": "application/json"})
        assert r.status_code == 400

    def test_invalid_body_is_422(self, served):
        _, client = served
        r = client.post("/v1/infer", json={"power_w": -5.0,
                                           "v_scan_m_s": 0.5})
        assert r.status_code == 422

    def test_unrepresentable_grid_is_422(self, served):
        # coarse dx scales the padding to zero cells: 2^3 cannot hold 2 modes
        _, client = served
        r = client.post("/v1/infer", json={
            "power_w": 100.0, "v_scan_m_s": 0.5,
            "grid": {"nx": 2, "ny": 2, "nz": 2, "dx_m": 1e-4}})
        assert r.status_code == 422

    def test_unknown_field_is_422(self, served):
        _, client = served
        r = client.post("/v1/infer", json={"power_w": 100.0,
                                           "v_scan_m_s": 0.5,
                                           "fields": ["vorticity"]})
        assert r.status_code == 422

    def test_reload_gives_503(self, served):
        model, client = served
        client.app.state.slot.begin_reload()
        try:
            r = client.post("/v1/infer", json={"power_w": 100.0,
                                               "v_scan_m_s": 0.5})
            assert r.status_code == 503
        finally:
            client.app.state.slot.swap(model)
        assert client.get("/v1/healthz").status_code == 200


class TestProcessMapEndpoint:
    def test_absent_table_is_404(self, served):
        _, client = served
        assert client.get("/v1/process-map").status_code == 404

    def test_rows_and_metric_filter(self, tmp_path):
        cfg = ModelConfig(modes=(2, 2, 2), padding=1, latent_width=3,
                          decoder_width=4, reference_dx=1e-5, dtype="float64")
        model = build_model(cfg, seed=0, grid=GRID)
        rows = [{"id": "a", "power_w": 100.0, "v_scan_m_s": 0.4,
                 "h_star": 6.0, "split": "test", "mae_T": 12.5,
                 "iou_fl": 0.9}]
        path = tmp_path / "rows.json"
        path.write_text(json.dumps(rows))
        client = TestClient(create_app(model=model,
                                       process_map_path=str(path)))
        r = client.get("/v1/process-map")
        assert r.status_code == 200
        assert r.json()["rows"][0]["mae_T"] == 12.5
        r = client.get("/v1/process-map", params={"metric": "iou_fl"})
        body = r.json()["rows"][0]
        assert body["iou_fl"] == 0.9
        assert "mae_T" not in body
        r = client.get("/v1/process-map", params={"metric": "nope"})
        assert r.status_code == 422


class TestCheckpointServing:
    def test_app_from_checkpoint_dir(self, tmp_path):
        cfg = ModelConfig(modes=(2, 2, 2), padding=1, latent_width=3,
                          decoder_width=4, reference_dx=1e-5, dtype="float64")
        model = build_model(cfg, seed=1, grid=GRID)
        model.provenance = {"trained": False, "grid": GRID.to_json()}
        save_checkpoint(model, str(tmp_path / "ckpt"))
        client = TestClient(create_app(checkpoint_dir=str(tmp_path / "ckpt")))
        r = client.post("/v1/infer", json={"power_w": 90.0,
                                           "v_scan_m_s": 0.3,
                                           "fields": ["alpha"],
                                           "encoding": "json-stats"})
        assert r.status_code == 200
        assert r.json()["extrapolation"] is True  # untrained: no window


def test_meltpool_summary_empty_mask():
    cfg = ModelConfig(modes=(2, 2, 2), padding=1, latent_width=3,
                      decoder_width=4, reference_dx=1e-5, dtype="float64")
    model = build_model(cfg, seed=0, grid=GRID)
    for k, v in model.params.items():
        model.params[k] = np.zeros_like(v)
    bundle = infer(model, make_params(50.0, 0.5), GRID)
    summary = meltpool_summary(bundle, GRID)
    assert summary["cells"] == 0
    assert summary["depth_cells"] == 0
    assert summary["depth_m"] == 0.0
