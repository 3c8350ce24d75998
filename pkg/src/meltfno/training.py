"""Supervised training: losses, loss balancing, Lion updates, k-fold protocol.

One training step consumes one sample (batch size 1): forward pass, squared
error on normalized temperature, raw volume fraction, and the liquid
fraction derived from the predicted temperature (masked with the
ground-truth metal indicator on both sides), balanced into a single scalar,
then backward, global-norm clipping at 0.5, and a sign-momentum update with
a staircase-decayed learning rate. Everything is deterministic under the run
seed, including the balancing scheme's lookback draws and the per-epoch
sample order.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import engine as eg
from .engine import Tape
from .fields import Dataset
from .metrics import bundle_metrics
from .model import FnoModel, assemble_inputs, forward_normalized, infer


class TrainingDiverged(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Loss balancing (relative loss balancing with random lookback)

@dataclass
class ReLoBRaLoState:
    """Balance weights for multiple objectives with random lookback.

    With n objectives, softmax(L_i(t) / (tau * L_i(t') + eps)) scaled by n
    gives the balance weights lambda_hat(t; t'); each step draws rho ~
    Bernoulli(beta) and the running weights follow
    lambda(t) = alpha * (rho * lambda(t-1) + (1-rho) * lambda_hat(t; 0))
              + (1-alpha) * lambda_hat(t; t-1).
    The first call initializes the reference losses and returns weights of
    exactly 1.
    """

    alpha: float = 0.95
    beta: float = 0.99
    tau: float = 3.0
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        self._rng = np.random.default_rng(self.seed)
        self.l_init = None
        self.l_prev = None
        self.weights = None
        self.step = 0

    def _balance(self, losses: np.ndarray, ref: np.ndarray) -> np.ndarray:
        z = losses / (self.tau * ref + self.eps)
        z = z - z.max()
        soft = np.exp(z)
        soft /= soft.sum()
        return losses.size * soft

    def aggregate(self, losses) -> tuple[float, np.ndarray]:
        losses = np.asarray(losses, dtype=np.float64)
        if self.l_init is None:
            self.l_init = losses.copy()
            self.l_prev = losses.copy()
            self.weights = np.ones_like(losses)
        else:
            lam_start = self._balance(losses, self.l_init)
            lam_prev = self._balance(losses, self.l_prev)
            rho = float(self._rng.random() < self.beta)
            self.weights = (self.alpha * (rho * self.weights
                                          + (1.0 - rho) * lam_start)
                            + (1.0 - self.alpha) * lam_prev)
            self.l_prev = losses.copy()
        self.step += 1
        return float(np.dot(self.weights, losses)), self.weights.copy()


# ---------------------------------------------------------------------------
# Optimizer

def _sign(c: np.ndarray) -> np.ndarray:
    """Elementwise sign with sign(0) = 0; complex parts treated independently.

    Viewing the complex array as interleaved reals applies the sign to the
    real and imaginary parts in one pass.
    """
    if np.iscomplexobj(c):
        flat = np.ascontiguousarray(c).view(c.real.dtype)
        return np.sign(flat).view(c.dtype)
    return np.sign(c)


def clip_global_norm(grads: dict, max_norm: float) -> tuple[dict, float]:
    """Scale all gradients so the joint L2 norm is at most max_norm."""
    sq = 0.0
    for g in grads.values():
        flat = g.reshape(-1)
        sq += float(np.vdot(flat, flat).real)
    norm = float(np.sqrt(sq))
    if norm <= max_norm or norm == 0.0:
        return grads, norm
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}, norm


@dataclass
class OptimState:
    base_lr: float = 6e-5
    betas: tuple = (0.9, 0.99)
    weight_decay: float = 0.0
    clip_norm: float = 0.5
    lr_decay: float = 0.98
    lr_interval: int = 100
    step: int = 0
    momentum: dict = field(default_factory=dict)

    def lr_at(self, step: int) -> float:
        return self.base_lr * self.lr_decay ** (step // self.lr_interval)


def lion_step(params: dict, grads: dict, state: OptimState) -> None:
    """Sign-momentum update in place; every touched coordinate moves by
    exactly lr (weight decay is zero by default)."""
    b1, b2 = state.betas
    lr = state.lr_at(state.step)
    for name, g in grads.items():
        theta = params[name]
        if g.shape != theta.shape:
            raise ValueError(f"gradient shape mismatch for {name}")
        m = state.momentum.get(name)
        if m is None:
            m = np.zeros_like(theta)
        c = m * b1
        c += (1.0 - b1) * g
        update = _sign(c)
        if state.weight_decay != 0.0:
            update = update + state.weight_decay * theta
        update *= lr
        params[name] = theta - update
        m *= b2
        m += (1.0 - b2) * g
        state.momentum[name] = m
    state.step += 1


# ---------------------------------------------------------------------------
# Training loop

@dataclass
class RunConfig:
    steps: int = 6000
    base_lr: float = 6e-5
    betas: tuple = (0.9, 0.99)
    weight_decay: float = 0.0
    clip_norm: float = 0.5
    lr_decay: float = 0.98
    lr_interval: int = 100
    relobralo_alpha: float = 0.95
    relobralo_beta: float = 0.99
    relobralo_tau: float = 3.0
    relobralo_eps: float = 1e-8
    validation_batch: int = 5
    eval_interval: int = 500
    seed: int = 0

    def to_json(self) -> dict:
        d = asdict(self)
        d["betas"] = list(self.betas)
        return d

    @staticmethod
    def from_json(obj: dict) -> "RunConfig":
        obj = dict(obj)
        if "betas" in obj:
            obj["betas"] = tuple(obj["betas"])
        return RunConfig(**obj)


def _prepare_sample(model: FnoModel, dataset: Dataset, sample_id: str) -> dict:
    cfg = model.cfg
    entry = dataset.manifest.entry(sample_id)
    bundle = dataset.load(sample_id)
    rdt = cfg.np_dtype
    params = entry_params(entry)
    t_target = (bundle.T.as_3d() / cfg.scales.T_ref).astype(rdt)
    a_target = bundle.alpha.as_3d().astype(rdt)
    fl_target = bundle.fl.as_3d().astype(rdt)
    metal = (bundle.alpha.as_3d() >= 0.5).astype(rdt)
    return {
        "id": sample_id,
        "inputs": assemble_inputs(cfg, params, dataset.grid),
        "t_target": t_target,
        "a_target": a_target,
        "fl_target": fl_target,
        "metal": metal,
    }


def entry_params(entry):
    from .enthalpy import ProcessParams
    return ProcessParams(entry.power_w, entry.v_scan_m_s, entry.h_star)


def _step_losses(model: FnoModel, sample: dict, grid, tape: Tape):
    """Forward pass plus the three scalar loss tensors."""
    cfg = model.cfg
    out, leaves = forward_normalized(model, sample["inputs"], grid, tape,
                                     train=True)
    t_pred = eg.take_channel(tape, out, 0)
    a_pred = eg.take_channel(tape, out, 1)
    l_t = eg.mse_vs_const(tape, t_pred, sample["t_target"])
    l_a = eg.mse_vs_const(tape, a_pred, sample["a_target"])
    t_kelvin = eg.mul_const(tape, t_pred, cfg.scales.T_ref)
    fl_pred = eg.liquid_fraction_op(tape, t_kelvin, cfg.material.t_solidus,
                                    cfg.material.t_liquidus)
    fl_masked = eg.mul_const(tape, fl_pred, sample["metal"])
    l_fl = eg.mse_vs_const(tape, fl_masked, sample["fl_target"])
    return (l_t, l_a, l_fl), leaves


def train(model: FnoModel, dataset: Dataset, run: RunConfig,
          train_ids: list | None = None,
          val_ids: list | None = None) -> tuple[FnoModel, list]:
    """Train a copy of the model; returns (trained model, history rows)."""
    if train_ids is None:
        train_ids = dataset.ids("train")
    if val_ids is None:
        val_ids = dataset.ids("validation")
    if not train_ids:
        raise ValueError("empty training split")

    model = model.copy()
    grid = dataset.grid
    samples = {sid: _prepare_sample(model, dataset, sid) for sid in train_ids}

    order_rng, _ = [np.random.default_rng(s)
                    for s in np.random.SeedSequence(run.seed).spawn(2)]
    balancer = ReLoBRaLoState(alpha=run.relobralo_alpha, beta=run.relobralo_beta,
                              tau=run.relobralo_tau, eps=run.relobralo_eps,
                              seed=run.seed + 1)
    opt = OptimState(base_lr=run.base_lr, betas=run.betas,
                     weight_decay=run.weight_decay, clip_norm=run.clip_norm,
                     lr_decay=run.lr_decay, lr_interval=run.lr_interval)

    history: list = []
    order: list = []
    for step in range(run.steps):
        if step % len(train_ids) == 0:
            order = [train_ids[i] for i in order_rng.permutation(len(train_ids))]
        sid = order[step % len(train_ids)]

        tape = Tape()
        (l_t, l_a, l_fl), leaves = _step_losses(model, samples[sid], grid, tape)
        loss_values = [float(l_t.data), float(l_a.data), float(l_fl.data)]
        total_value, weights = balancer.aggregate(loss_values)
        if not np.isfinite(total_value):
            raise TrainingDiverged(
                f"non-finite total loss at step {step}: {loss_values}")

        total = eg.weighted_sum(tape, [l_t, l_a, l_fl],
                                weights.astype(model.cfg.np_dtype))
        tape.backward(total)
        grads = {name: leaf.grad for name, leaf in leaves.items()
                 if leaf.grad is not None}
        grads, _ = clip_global_norm(grads, opt.clip_norm)
        lr = opt.lr_at(opt.step)
        lion_step(model.params, grads, opt)

        row = {"step": step, "sample": sid, "loss_T": loss_values[0],
               "loss_alpha": loss_values[1], "loss_fl": loss_values[2],
               "total": total_value, "weights": [float(w) for w in weights],
               "lr": lr}
        if val_ids and run.eval_interval and (step + 1) % run.eval_interval == 0:
            row["validation"] = evaluate(model, dataset, val_ids,
                                         batch=run.validation_batch)["metrics"]
        history.append(row)

    model.provenance = _provenance(dataset, run, train_ids)
    return model, history


def _provenance(dataset: Dataset, run: RunConfig, train_ids: list) -> dict:
    entries = [dataset.manifest.entry(sid) for sid in train_ids]
    manifest_digest = hashlib.sha256(
        json.dumps(dataset.manifest.to_json(), sort_keys=True).encode()).hexdigest()
    return {
        "trained": True,
        "dataset_hash": manifest_digest,
        "run_config": run.to_json(),
        "train_ids": list(train_ids),
        "grid": dataset.grid.to_json(),
        "trained_window": {
            "power_w": [min(e.power_w for e in entries),
                        max(e.power_w for e in entries)],
            "v_scan_m_s": [min(e.v_scan_m_s for e in entries),
                           max(e.v_scan_m_s for e in entries)],
        },
    }


def evaluate(model: FnoModel, dataset: Dataset, ids: list,
             batch: int = 5) -> dict:
    """Metrics over a sample set plus per-sample process-map rows."""
    if not ids:
        raise ValueError("empty evaluation set")
    preds, targets, rows = [], [], []
    for start in range(0, len(ids), max(1, batch)):
        for sid in ids[start:start + max(1, batch)]:
            entry = dataset.manifest.entry(sid)
            target = dataset.load(sid)
            pred = infer(model, entry_params(entry), dataset.grid)
            preds.append(pred)
            targets.append(target)
            per = bundle_metrics([pred], [target])
            rows.append({
                "id": sid, "power_w": entry.power_w,
                "v_scan_m_s": entry.v_scan_m_s, "h_star": entry.h_star,
                "split": entry.split,
                "mae_T": per["T"]["mae"], "rmse_T": per["T"]["rmse"],
                "rel_rmse_T": per["T"]["rel_rmse"],
                "mae_alpha": per["alpha"]["mae"], "iou_alpha": per["alpha"]["iou"],
                "mae_fl": per["fl"]["mae"], "iou_fl": per["fl"]["iou"],
            })
    return {"metrics": bundle_metrics(preds, targets), "rows": rows}


# ---------------------------------------------------------------------------
# K-fold protocol

@dataclass
class FoldPlan:
    k: int
    folds: list            # list of id lists (the held-out set per fold)
    excluded: list         # validation ids kept out of the rotation

    def validate(self) -> None:
        seen = [i for fold in self.folds for i in fold]
        if len(seen) != len(set(seen)):
            raise ValueError("folds overlap")
        sizes = [len(f) for f in self.folds]
        if max(sizes) - min(sizes) > 1:
            raise ValueError(f"fold sizes differ by more than 1: {sizes}")


def make_fold_plan(dataset: Dataset, k: int = 8, seed: int = 0) -> FoldPlan:
    ids = sorted(i for i in dataset.ids() if i not in set(dataset.ids("validation")))
    if len(ids) < k:
        raise ValueError(f"{len(ids)} non-validation samples cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    shuffled = [ids[i] for i in rng.permutation(len(ids))]
    folds = [list(chunk) for chunk in np.array_split(shuffled, k)]
    plan = FoldPlan(k=k, folds=folds, excluded=dataset.ids("validation"))
    plan.validate()
    return plan


def kfold(model: FnoModel, dataset: Dataset, run: RunConfig, k: int = 8,
          seed: int = 0) -> dict:
    """Train k models, each held out on one fold; report per-fold metrics
    plus mean and [min, max] aggregates."""
    plan = make_fold_plan(dataset, k, seed)
    all_ids = [i for fold in plan.folds for i in fold]
    fold_reports = []
    for i, held_out in enumerate(plan.folds):
        train_ids = [sid for sid in all_ids if sid not in set(held_out)]
        fold_run = RunConfig(**{**run.to_json(), "betas": run.betas,
                                "seed": run.seed + i})
        trained, _ = train(model, dataset, fold_run, train_ids=train_ids,
                           val_ids=[])
        report = evaluate(trained, dataset, held_out,
                          batch=run.validation_batch)
        fold_reports.append({"fold": i, "test_ids": list(held_out),
                             "metrics": report["metrics"],
                             "rows": report["rows"]})

    aggregate: dict = {}
    for fname in ("T", "alpha", "fl"):
        aggregate[fname] = {}
        keys = fold_reports[0]["metrics"][fname].keys()
        for key in keys:
            vals = [fr["metrics"][fname][key] for fr in fold_reports]
            aggregate[fname][key] = {"mean": float(np.mean(vals)),
                                     "min": float(np.min(vals)),
                                     "max": float(np.max(vals))}
    return {"k": k, "folds": fold_reports, "aggregate": aggregate,
            "excluded_validation": plan.excluded}
