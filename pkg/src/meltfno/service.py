"""HTTP inference service over a loaded checkpoint.

All endpoints live under /v1. Responses are pure functions of the request
body for a fixed checkpoint: field arrays are base64-encoded little-endian
float32 in the dataset layout (x slowest, z fastest), or summary statistics
when the client asks for json-stats. Requests outside the trained process
window are answered normally but flagged extrapolation=true. During a
checkpoint hot reload the model slot is empty and requests get 503.
"""
from __future__ import annotations

import base64
import json
import threading

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .engine import EngineError
from .enthalpy import make_params
from .fields import Grid3
from .model import FnoModel, default_grid, infer, load_checkpoint, model_info
from .preprocess import meltpool_mask

ALL_FIELDS = ("T", "alpha", "fl", "meltpool_mask")


class GridSpec(BaseModel):
    nx: int = Field(ge=2)
    ny: int = Field(ge=2)
    nz: int = Field(ge=2)
    dx_m: float = Field(gt=0)

    def to_grid(self) -> Grid3:
        return Grid3(self.nx, self.ny, self.nz, self.dx_m)


class InferRequest(BaseModel):
    power_w: float = Field(gt=0)
    v_scan_m_s: float = Field(gt=0)
    grid: GridSpec | None = None
    fields: list[str] = Field(default_factory=lambda: list(ALL_FIELDS))
    encoding: str = "base64-f32"


def _b64_f32(arr: np.ndarray) -> str:
    return base64.b64encode(np.asarray(arr, dtype="<f4").tobytes()).decode("ascii")


def _stats(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype=np.float64)
    return {"min": float(arr.min()), "max": float(arr.max()),
            "mean": float(arr.mean())}


def _axis_extent(mask: np.ndarray, axis: int) -> int:
    if not mask.any():
        return 0
    hit = np.any(mask, axis=tuple(i for i in range(3) if i != axis))
    idx = np.nonzero(hit)[0]
    return int(idx[-1] - idx[0] + 1)


def meltpool_summary(bundle, grid: Grid3) -> dict:
    mask = meltpool_mask(bundle.alpha, bundle.fl)
    length = _axis_extent(mask, 0)
    width = _axis_extent(mask, 1)
    depth = _axis_extent(mask, 2)
    metal = bundle.alpha.as_3d() >= 0.5
    max_t = float(bundle.T.as_3d()[metal].max()) if metal.any() else None
    return {
        "cells": int(np.count_nonzero(mask)),
        "length_cells": length, "width_cells": width, "depth_cells": depth,
        "length_m": length * grid.dx, "width_m": width * grid.dx,
        "depth_m": depth * grid.dx,
        "max_T_metal_k": max_t,
    }


class ModelSlot:
    """Holds the served model; empty while a reload is in flight."""

    def __init__(self, model: FnoModel | None):
        self._model = model
        self._lock = threading.Lock()

    def get(self) -> FnoModel:
        with self._lock:
            if self._model is None:
                raise HTTPException(status_code=503,
                                    detail="checkpoint reload in progress")
            return self._model

    def begin_reload(self) -> None:
        with self._lock:
            self._model = None

    def swap(self, model: FnoModel) -> None:
        with self._lock:
            self._model = model


def _default_grid_for(model: FnoModel) -> Grid3:
    prov = model.provenance or {}
    if isinstance(prov.get("grid"), dict):
        return Grid3.from_json(prov["grid"])
    return default_grid(model.cfg.reference_dx)


def _trained_window(model: FnoModel):
    prov = model.provenance or {}
    return prov.get("trained_window")


def create_app(model: FnoModel | None = None, checkpoint_dir: str | None = None,
               process_map_path: str | None = None) -> FastAPI:
    if model is None:
        if checkpoint_dir is None:
            raise ValueError("need a model or a checkpoint directory")
        model = load_checkpoint(checkpoint_dir)
    app = FastAPI(title="meltfno inference service")
    slot = ModelSlot(model)
    app.state.slot = slot
    app.state.process_map_path = process_map_path

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        malformed = any(e.get("type") == "json_invalid" for e in exc.errors())
        code = 400 if malformed else 422
        return JSONResponse(status_code=code, content={"detail": exc.errors()})

    @app.get("/v1/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/v1/model/info")
    def info():
        m = slot.get()
        payload = model_info(m)
        payload["default_grid"] = _default_grid_for(m).to_json()
        payload["trained_window"] = _trained_window(m)
        return payload

    @app.post("/v1/infer")
    def run_infer(req: InferRequest):
        m = slot.get()
        unknown = [f for f in req.fields if f not in ALL_FIELDS]
        if unknown:
            raise HTTPException(status_code=422,
                                detail=f"unknown fields {unknown}; "
                                       f"choose from {list(ALL_FIELDS)}")
        if req.encoding not in ("json-stats", "base64-f32"):
            raise HTTPException(status_code=422,
                                detail=f"unknown encoding {req.encoding!r}")
        grid = req.grid.to_grid() if req.grid is not None else _default_grid_for(m)
        params = make_params(req.power_w, req.v_scan_m_s, m.cfg.material)
        try:
            bundle = infer(m, params, grid)
        except EngineError as exc:
            raise HTTPException(status_code=422, detail=str(exc))

        window = _trained_window(m)
        extrapolation = True
        if window:
            p_lo, p_hi = window["power_w"]
            v_lo, v_hi = window["v_scan_m_s"]
            extrapolation = not (p_lo <= req.power_w <= p_hi
                                 and v_lo <= req.v_scan_m_s <= v_hi)

        arrays = {"T": bundle.T.values, "alpha": bundle.alpha.values,
                  "fl": bundle.fl.values,
                  "meltpool_mask": meltpool_mask(bundle.alpha,
                                                 bundle.fl).reshape(-1)}
        fields = {}
        for name in req.fields:
            arr = arrays[name]
            if req.encoding == "base64-f32":
                fields[name] = _b64_f32(arr)
            else:
                fields[name] = _stats(arr)
        return {
            "grid": grid.to_json(),
            "layout": "x-slowest-z-fastest",
            "encoding": req.encoding,
            "power_w": req.power_w,
            "v_scan_m_s": req.v_scan_m_s,
            "h_star": params.h_star,
            "extrapolation": extrapolation,
            "fields": fields,
            "meltpool": meltpool_summary(bundle, grid),
        }

    @app.get("/v1/process-map")
    def proc_map(metric: str | None = None):
        path = app.state.process_map_path
        if path is None:
            raise HTTPException(status_code=404,
                                detail="no process map table configured")
        with open(path) as fh:
            rows = json.load(fh)
        if metric is not None:
            keep = {"id", "power_w", "v_scan_m_s", "h_star", "split"}
            if rows and metric not in rows[0]:
                raise HTTPException(status_code=422,
                                    detail=f"unknown metric {metric!r}")
            rows = [{k: r[k] for k in list(keep & set(r)) + [metric]}
                    for r in rows]
        return {"rows": rows}

    return app
