"""Normalized enthalpy and the enthalpy-stratified process-window plan.

The sampling lattice is equally spaced in (H*, P); scan speed is derived by
inverting the enthalpy relation, and lattice points whose derived speed falls
outside the admissible window are excluded with a recorded reason.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np


@dataclass(frozen=True)
class MaterialTable:
    """Material and beam constants for Ti-6Al-4V.

    eta: absorptivity; rho: density kg/m^3; cp: specific heat J/(kg K);
    dT_m: temperature rise to melting K; diffusivity m^2/s; sigma_beam:
    1/e^2 beam radius m; solidus/liquidus/boiling temperatures K.
    """

    eta: float = 0.35
    rho: float = 4420.0
    cp: float = 750.0
    dT_m: float = 1573.0
    diffusivity: float = 8.1e-6
    sigma_beam: float = 50e-6
    t_solidus: float = 1873.0
    t_liquidus: float = 1923.0
    t_boil: float = 3123.0

    def __post_init__(self):
        for name, val in asdict(self).items():
            if not (val > 0):
                raise ValueError(f"material entry {name} must be positive")
        if not (self.t_solidus < self.t_liquidus < self.t_boil):
            raise ValueError("require t_solidus < t_liquidus < t_boil")

    @property
    def kappa(self) -> float:
        """Thermal conductivity, W/(m K)."""
        return self.rho * self.cp * self.diffusivity

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(obj: dict) -> "MaterialTable":
        return MaterialTable(**{k: float(v) for k, v in obj.items()})


TI64 = MaterialTable()


def normalized_enthalpy(power_w: float, v_scan_m_s: float,
                        mat: MaterialTable = TI64) -> float:
    """Dimensionless energy density; scales as P / sqrt(V_scan)."""
    if not (power_w > 0 and v_scan_m_s > 0):
        raise ValueError("power and scan speed must be positive")
    denom = mat.rho * mat.cp * mat.dT_m * math.sqrt(
        math.pi * mat.diffusivity * mat.sigma_beam ** 3 * v_scan_m_s)
    return mat.eta * power_w / denom


def speed_from_enthalpy(h_star: float, power_w: float,
                        mat: MaterialTable = TI64) -> float:
    """Closed-form inverse of normalized_enthalpy in the speed argument."""
    if not (h_star > 0 and power_w > 0):
        raise ValueError("h_star and power must be positive")
    a = mat.eta * power_w / (mat.rho * mat.cp * mat.dT_m * h_star)
    return a * a / (math.pi * mat.diffusivity * mat.sigma_beam ** 3)


@dataclass(frozen=True)
class ProcessParams:
    """One process-window point; h_star is derived and cached."""

    power_w: float
    v_scan_m_s: float
    h_star: float

    def __post_init__(self):
        if not (self.power_w > 0 and self.v_scan_m_s > 0):
            raise ValueError("power and scan speed must be positive")


def make_params(power_w: float, v_scan_m_s: float,
                mat: MaterialTable = TI64) -> ProcessParams:
    return ProcessParams(power_w, v_scan_m_s,
                         normalized_enthalpy(power_w, v_scan_m_s, mat))


@dataclass
class PlanPoint:
    id: str
    power_w: float
    v_scan_m_s: float
    h_star: float
    split: str
    row: int  # H* lattice row

    def params(self) -> ProcessParams:
        return ProcessParams(self.power_w, self.v_scan_m_s, self.h_star)


@dataclass
class SamplingPlan:
    p_range: tuple[float, float]
    h_range: tuple[float, float]
    n_p: int
    n_h: int
    v_bounds: tuple[float, float]
    seed: int
    points: list = field(default_factory=list)          # included PlanPoints
    excluded: list = field(default_factory=list)        # {id, power_w, h_star, reason}

    def split_points(self, split: str) -> list:
        return [p for p in self.points if p.split == split]

    def to_json(self) -> dict:
        return {
            "p_range": list(self.p_range),
            "h_range": list(self.h_range),
            "n_p": self.n_p,
            "n_h": self.n_h,
            "v_bounds": list(self.v_bounds),
            "seed": self.seed,
            "points": [asdict(p) for p in self.points],
            "excluded": list(self.excluded),
        }

    @staticmethod
    def from_json(obj: dict) -> "SamplingPlan":
        plan = SamplingPlan(
            p_range=tuple(obj["p_range"]),
            h_range=tuple(obj["h_range"]),
            n_p=int(obj["n_p"]),
            n_h=int(obj["n_h"]),
            v_bounds=tuple(obj["v_bounds"]),
            seed=int(obj["seed"]),
            excluded=list(obj.get("excluded", [])),
        )
        plan.points = [PlanPoint(**p) for p in obj["points"]]
        return plan

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)

    @staticmethod
    def load(path: str) -> "SamplingPlan":
        with open(path) as fh:
            return SamplingPlan.from_json(json.load(fh))


DEFAULT_V_BOUNDS = (0.1, 1.0)


def build_plan(p_range: tuple[float, float], h_range: tuple[float, float],
               n_p: int, n_h: int,
               v_bounds: tuple[float, float] = DEFAULT_V_BOUNDS,
               mat: MaterialTable = TI64, seed: int = 0) -> SamplingPlan:
    """Equally spaced (H*, P) lattice with per-row validation/test labels.

    Within each H* row the validation point is the median-power retained
    point and the test point the next-highest power (next-lowest if the
    median is the row maximum); single-point rows become validation so no
    row consists solely of training points. Ties in power are broken by a
    seeded shuffle before sorting, which is deterministic for a fixed seed.
    """
    if n_p < 2 or n_h < 2:
        raise ValueError("lattice counts must be >= 2")
    if not (p_range[0] < p_range[1]) or not (h_range[0] < h_range[1]):
        raise ValueError("ranges must be non-degenerate and increasing")
    rng = np.random.default_rng(seed)
    powers = np.linspace(p_range[0], p_range[1], n_p)
    h_values = np.linspace(h_range[0], h_range[1], n_h)

    plan = SamplingPlan(p_range=tuple(p_range), h_range=tuple(h_range),
                        n_p=n_p, n_h=n_h, v_bounds=tuple(v_bounds), seed=seed)
    for i_h, h in enumerate(h_values):
        row_points = []
        for i_p, p in enumerate(powers):
            pid = f"h{i_h}_p{i_p}"
            v = speed_from_enthalpy(h, p, mat)
            if v < v_bounds[0] or v > v_bounds[1]:
                plan.excluded.append({
                    "id": pid, "power_w": float(p), "h_star": float(h),
                    "reason": f"derived speed {v:.4g} m/s outside "
                              f"[{v_bounds[0]}, {v_bounds[1]}]",
                })
                continue
            row_points.append(PlanPoint(id=pid, power_w=float(p),
                                        v_scan_m_s=float(v), h_star=float(h),
                                        split="train", row=i_h))
        if not row_points:
            continue
        order = rng.permutation(len(row_points))
        row_points = sorted((row_points[j] for j in order),
                            key=lambda q: q.power_w)
        if len(row_points) == 1:
            row_points[0].split = "validation"
        else:
            mid = (len(row_points) - 1) // 2
            row_points[mid].split = "validation"
            test_idx = mid + 1 if mid + 1 < len(row_points) else mid - 1
            row_points[test_idx].split = "test"
        plan.points.extend(sorted(row_points, key=lambda q: q.id))

    if not plan.points:
        raise ValueError("empty plan: every lattice point excluded by speed bounds")
    return plan
