"""Evaluation metrics: per-sample spatial reductions averaged over samples.

MAE and RMSE reduce over grid points within each sample first, then average
across samples. Relative variants divide by the global mean of the ground
truth over the whole evaluation set (plus a small epsilon). IoU thresholds
both fields at tau and averages the per-sample intersection-over-union; a
sample where both masks are empty counts as perfect agreement.
"""
from __future__ import annotations

import csv

import numpy as np

REL_EPS = 1e-8


def _pairs(preds, targets):
    if len(preds) != len(targets):
        raise ValueError("prediction and target lists differ in length")
    if not preds:
        raise ValueError("empty sample set")
    out = []
    for p, t in zip(preds, targets):
        p = np.asarray(p, dtype=np.float64).reshape(-1)
        t = np.asarray(t, dtype=np.float64).reshape(-1)
        if p.shape != t.shape:
            raise ValueError("prediction/target shape mismatch")
        out.append((p, t))
    return out


def mae(preds, targets) -> float:
    pairs = _pairs(preds, targets)
    return float(np.mean([np.mean(np.abs(p - t)) for p, t in pairs]))


def rmse(preds, targets) -> float:
    pairs = _pairs(preds, targets)
    return float(np.mean([np.sqrt(np.mean((p - t) ** 2)) for p, t in pairs]))


def global_target_mean(targets) -> float:
    flat = [np.asarray(t, dtype=np.float64).reshape(-1) for t in targets]
    return float(np.mean(np.concatenate(flat)))


def rel_mae(preds, targets, eps: float = REL_EPS) -> float:
    return mae(preds, targets) / (global_target_mean(targets) + eps)


def rel_rmse(preds, targets, eps: float = REL_EPS) -> float:
    return rmse(preds, targets) / (global_target_mean(targets) + eps)


def iou(preds, targets, tau: float = 0.5) -> float:
    pairs = _pairs(preds, targets)
    scores = []
    for p, t in pairs:
        pm = p >= tau
        tm = t >= tau
        union = np.count_nonzero(pm | tm)
        if union == 0:
            scores.append(1.0)  # both masks empty: perfect agreement
        else:
            scores.append(np.count_nonzero(pm & tm) / union)
    return float(np.mean(scores))


def field_metrics(preds, targets, relative: bool = True) -> dict:
    out = {"mae": mae(preds, targets), "rmse": rmse(preds, targets)}
    if relative:
        mu = global_target_mean(targets) + REL_EPS
        out["rel_mae"] = out["mae"] / mu
        out["rel_rmse"] = out["rmse"] / mu
    return out


def bundle_metrics(pred_bundles, target_bundles) -> dict:
    """Temperature, volume-fraction, and melt-pool metrics for matched sets.

    Temperature carries relative variants; the dimensionless fields carry
    absolute errors plus IoU of their 0.5-thresholded masks.
    """
    pT = [b.T.values for b in pred_bundles]
    tT = [b.T.values for b in target_bundles]
    pa = [b.alpha.values for b in pred_bundles]
    ta = [b.alpha.values for b in target_bundles]
    pf = [b.fl.values for b in pred_bundles]
    tf = [b.fl.values for b in target_bundles]
    out = {"T": field_metrics(pT, tT, relative=True),
           "alpha": field_metrics(pa, ta, relative=False),
           "fl": field_metrics(pf, tf, relative=False)}
    out["alpha"]["iou"] = iou(pa, ta)
    out["fl"]["iou"] = iou(pf, tf)
    return out


def process_map(rows) -> list:
    """Sample rows (dicts with power_w, v_scan_m_s, h_star, metrics) sorted
    deterministically by (h_star, power) for heat-map rendering."""
    return sorted((dict(r) for r in rows),
                  key=lambda r: (r["h_star"], r["power_w"], r.get("id", "")))


def write_process_map_csv(rows, path: str) -> None:
    rows = process_map(rows)
    if not rows:
        raise ValueError("no rows to export")
    fieldnames = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
