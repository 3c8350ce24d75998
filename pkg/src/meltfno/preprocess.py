"""Transient lab-frame sequences to normalized, masked, quasi-steady samples.

The moving-frame reduction follows the one-cell-per-step rule: the frame
interval is dt = dx / v_scan so the laser advances exactly one grid cell per
retained step, and each retained frame is the lab snapshot nearest in time
(no temporal interpolation; with a 5 us write cadence the selection error is
bounded by 2.5 us). The quasi-steady training sample is the arithmetic mean
of the final 30 moving-frame steps. Note the sliding-window sum here runs
over exactly n frames, i + k - n + 1 .. k; an inclusive k - n .. k bound
would average n + 1.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, asdict

import numpy as np

from .enthalpy import MaterialTable, TI64
from .fields import (AMBIENT_T, FieldBundle, Grid3, ScalarField3, _read_f32,
                     _write_f32)

AMBIENT_ALPHA = 1.0
AMBIENT_FL = 0.0


@dataclass(frozen=True)
class NormalizationScales:
    """Reference magnitudes used to bring all quantities to order one."""

    L_ref: float = 1e-4    # m
    T_ref: float = 3000.0  # K
    V_ref: float = 1e-1    # m/s
    P_ref: float = 10.0    # W
    H_ref: float = 7.5

    def __post_init__(self):
        for name, val in asdict(self).items():
            if not (val > 0):
                raise ValueError(f"normalization scale {name} must be positive")

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(obj: dict) -> "NormalizationScales":
        return NormalizationScales(**{k: float(v) for k, v in obj.items()})


DEFAULT_SCALES = NormalizationScales()


class FieldSequence:
    """Time-ordered FieldBundles with per-frame laser x-positions."""

    def __init__(self, grid: Grid3, times, frames, laser_x):
        times = np.asarray(times, dtype=np.float64)
        laser_x = np.asarray(laser_x, dtype=np.float64)
        if not (len(times) == len(frames) == len(laser_x)):
            raise ValueError("times, frames, laser_x must have equal length")
        if len(times) >= 2 and not np.all(np.diff(times) > 0):
            raise ValueError("times must be strictly increasing")
        if len(laser_x) >= 2 and np.any(np.diff(laser_x) < 0):
            raise ValueError("laser_x must be non-decreasing")
        for fr in frames:
            if fr.grid != grid:
                raise ValueError("all frames must share the sequence grid")
        self.grid = grid
        self.times = times
        self.frames = list(frames)
        self.laser_x = laser_x

    def __len__(self) -> int:
        return len(self.frames)


def _shift_minus_x(arr: np.ndarray, cells: int, fill: float) -> np.ndarray:
    """Gather arr[i + cells] along x; vacated high-x cells get the fill value."""
    if cells == 0:
        return arr.copy()
    nx = arr.shape[0]
    out = np.full_like(arr, fill)
    if cells < nx:
        out[: nx - cells] = arr[cells:]
    return out


def to_moving_frame(seq: FieldSequence, v_scan: float) -> FieldSequence:
    """Resample to the laser frame: one grid cell of travel per time step."""
    if not (v_scan > 0):
        raise ValueError("v_scan must be positive")
    dx = seq.grid.dx
    dt = dx / v_scan
    total_travel = seq.laser_x[-1] - seq.laser_x[0]
    n_steps = int(np.floor(total_travel / dx + 1e-9))
    if n_steps < 1:
        raise ValueError("sequence shorter than one laser cell-traversal")

    t0 = seq.times[0]
    frames, times, laser = [], [], []
    for k in range(n_steps + 1):
        target = t0 + k * dt
        sel = int(np.argmin(np.abs(seq.times - target)))
        shift = int(round((seq.laser_x[sel] - seq.laser_x[0]) / dx))
        src = seq.frames[sel]
        T = _shift_minus_x(src.T.as_3d(), shift, AMBIENT_T)
        a = _shift_minus_x(src.alpha.as_3d(), shift, AMBIENT_ALPHA)
        f = _shift_minus_x(src.fl.as_3d(), shift, AMBIENT_FL)
        frames.append(FieldBundle(ScalarField3.from_3d(seq.grid, T),
                                  ScalarField3.from_3d(seq.grid, a),
                                  ScalarField3.from_3d(seq.grid, f)))
        times.append(k * dt)
        laser.append(seq.laser_x[0])
    return FieldSequence(seq.grid, times, frames, laser)


def window_average(seq: FieldSequence, n: int = 30) -> FieldBundle:
    """Arithmetic mean of the final n frames, per field, per cell."""
    if n < 1:
        raise ValueError("window length must be >= 1")
    if len(seq) < n:
        raise ValueError(f"sequence has {len(seq)} frames, window needs {n}")
    window = seq.frames[len(seq) - n:]
    grid = seq.grid
    out = {}
    for name in ("T", "alpha", "fl"):
        acc = np.zeros(grid.shape)
        for fr in window:
            acc += getattr(fr, name).as_3d()
        out[name] = ScalarField3.from_3d(grid, acc / n)
    return FieldBundle(out["T"], out["alpha"], out["fl"])


def temporal_difference_curve(seq: FieldSequence) -> list:
    """[(t_k, domain mean of |T(t_k) - T(t_{k-1})|)] for k >= 1, in kelvin."""
    if len(seq) < 2:
        raise ValueError("need at least 2 frames")
    curve = []
    prev = seq.frames[0].T.values
    for k in range(1, len(seq)):
        cur = seq.frames[k].T.values
        curve.append((float(seq.times[k]), float(np.mean(np.abs(cur - prev)))))
        prev = cur
    return curve


# ---------------------------------------------------------------------------
# Normalization

def normalize_bundle(b: FieldBundle, scales: NormalizationScales = DEFAULT_SCALES):
    """(T/T_ref, alpha, fl) as plain arrays; alpha and fl are dimensionless."""
    return (b.T.as_3d() / scales.T_ref, b.alpha.as_3d().copy(), b.fl.as_3d().copy())


def denormalize_temperature(t_norm: np.ndarray,
                            scales: NormalizationScales = DEFAULT_SCALES) -> np.ndarray:
    return np.asarray(t_norm) * scales.T_ref


def normalize_params(power_w: float, v_scan_m_s: float, h_star: float,
                     scales: NormalizationScales = DEFAULT_SCALES):
    return (power_w / scales.P_ref, v_scan_m_s / scales.V_ref, h_star / scales.H_ref)


def denormalize_params(p_n: float, v_n: float, h_n: float,
                       scales: NormalizationScales = DEFAULT_SCALES):
    return (p_n * scales.P_ref, v_n * scales.V_ref, h_n * scales.H_ref)


# ---------------------------------------------------------------------------
# Liquid fraction and gas-phase masking

def liquid_fraction_values(T: np.ndarray, mat: MaterialTable = TI64) -> np.ndarray:
    """Piecewise-linear melt fraction of the temperature array."""
    return np.clip((np.asarray(T) - mat.t_solidus) / (mat.t_liquidus - mat.t_solidus),
                   0.0, 1.0)


def liquid_fraction(T: ScalarField3, mat: MaterialTable = TI64) -> ScalarField3:
    return ScalarField3(T.grid, liquid_fraction_values(T.values, mat))


DEFAULT_MASK_SHARPNESS = 20.0


def mask_gate(alpha: np.ndarray, k: float = DEFAULT_MASK_SHARPNESS) -> np.ndarray:
    """Smooth metal gate g in [0, 1]; 1/2 at the interface, ~1 in metal."""
    if not (k > 0):
        raise ValueError("mask sharpness must be positive")
    return 0.5 * (np.tanh(k * (np.asarray(alpha) - 0.5)) + 1.0)


def alpha_mask_values(T: np.ndarray, alpha: np.ndarray,
                      k: float = DEFAULT_MASK_SHARPNESS,
                      mat: MaterialTable = TI64):
    """Blend T toward T_boil in gas; zero fl and alpha outside the metal.

    fl is derived from the blended temperature, so on metal cells the
    returned fl equals the liquid fraction of the returned T exactly.
    """
    T = np.asarray(T, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    g = mask_gate(alpha, k)
    t_masked = mat.t_boil + g * (T - mat.t_boil)
    metal = (alpha >= 0.5).astype(np.float64)
    fl_masked = liquid_fraction_values(t_masked, mat) * metal
    return t_masked, fl_masked, alpha * metal


def alpha_mask(T: ScalarField3, alpha: ScalarField3,
               k: float = DEFAULT_MASK_SHARPNESS,
               mat: MaterialTable = TI64) -> FieldBundle:
    t_m, fl_m, a_m = alpha_mask_values(T.values, alpha.values, k, mat)
    grid = T.grid
    return FieldBundle(ScalarField3(grid, t_m), ScalarField3(grid, a_m),
                       ScalarField3(grid, fl_m))


def meltpool_mask(alpha: ScalarField3, fl: ScalarField3,
                  tau: float = 0.5) -> np.ndarray:
    """Boolean melt-pool mask: alpha >= tau and fl >= tau, cellwise."""
    if not (0.0 < tau < 1.0):
        raise ValueError("threshold must lie in (0, 1)")
    return (alpha.as_3d() >= tau) & (fl.as_3d() >= tau)


def quasi_steady_sample(seq: FieldSequence, v_scan: float, *, n: int = 30,
                        k: float = DEFAULT_MASK_SHARPNESS,
                        mat: MaterialTable = TI64,
                        steady_tol_k: float = 1.0):
    """Full reduction: moving frame -> window average -> alpha mask.

    Returns (bundle, steady) where steady is False if the temperature
    difference curve never fell below steady_tol_k (sample flagged, not
    rejected).
    """
    moving = to_moving_frame(seq, v_scan)
    curve = temporal_difference_curve(moving)
    steady = bool(curve and curve[-1][1] < steady_tol_k)
    avg = window_average(moving, n)
    return alpha_mask(avg.T, avg.alpha, k, mat), steady


# ---------------------------------------------------------------------------
# Ingestion of external transient dumps (.f32 frames + JSON frame table)

def save_sequence(seq: FieldSequence, base_dir: str) -> str:
    os.makedirs(base_dir, exist_ok=True)
    frames = []
    for i, fr in enumerate(seq.frames):
        files = {}
        for name in ("T", "alpha", "fl"):
            rel = f"frame{i:05d}_{name}.f32"
            _write_f32(os.path.join(base_dir, rel), getattr(fr, name).values)
            files[name] = rel
        frames.append({"time_s": float(seq.times[i]),
                       "laser_x_m": float(seq.laser_x[i]), "files": files})
    obj = {"schema_version": 1, "grid": seq.grid.to_json(), "frames": frames}
    path = os.path.join(base_dir, "sequence.json")
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
    return path


def load_sequence(base_dir: str) -> FieldSequence:
    with open(os.path.join(base_dir, "sequence.json")) as fh:
        obj = json.load(fh)
    grid = Grid3.from_json(obj["grid"])
    times, frames, laser = [], [], []
    for fr in obj["frames"]:
        fields = {}
        for name in ("T", "alpha", "fl"):
            arr = _read_f32(os.path.join(base_dir, fr["files"][name]), grid.n_cells)
            if name in ("alpha", "fl"):
                arr = np.clip(arr, 0.0, 1.0)
            fields[name] = ScalarField3(grid, arr)
        frames.append(FieldBundle(fields["T"], fields["alpha"], fields["fl"]))
        times.append(float(fr["time_s"]))
        laser.append(float(fr["laser_x_m"]))
    return FieldSequence(grid, times, frames, laser)
