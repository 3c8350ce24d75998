"""Scikit-learn style facade over the surrogate.

X is an (n_samples, 2) array of (power_w, v_scan_m_s); y holds the matched
field bundles as (n_samples, 3, nx, ny, nz) arrays with channels (T, alpha,
fl), already in kelvin / fractions. fit trains the operator network on all
rows; predict returns arrays of the same layout. Hyperparameters follow the
usual estimator contract (stored verbatim in __init__, get_params/set_params
via BaseEstimator), so the model composes with sklearn model selection
utilities.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .enthalpy import TI64, make_params
from .fields import FieldBundle, Grid3, InMemoryDataset, SampleEntry, ScalarField3
from .metrics import rel_rmse
from .model import ModelConfig, build_model, infer
from .training import RunConfig, train


def _as_bundle(grid: Grid3, row: np.ndarray) -> FieldBundle:
    T = np.asarray(row[0], dtype=np.float64)
    alpha = np.clip(np.asarray(row[1], dtype=np.float64), 0.0, 1.0)
    fl = np.clip(np.asarray(row[2], dtype=np.float64), 0.0, 1.0)
    return FieldBundle(ScalarField3.from_3d(grid, T),
                       ScalarField3.from_3d(grid, alpha),
                       ScalarField3.from_3d(grid, fl))


class MeltPoolFNO(BaseEstimator):
    """Fourier neural operator regressor from process parameters to fields."""

    def __init__(self, grid_shape=(45, 20, 15), dx=2e-5, modes=(12, 10, 8),
                 padding=9, latent_width=24, decoder_width=32, steps=2000,
                 base_lr=6e-5, dtype="float32", h_star_channel=False,
                 seed=0):
        self.grid_shape = grid_shape
        self.dx = dx
        self.modes = modes
        self.padding = padding
        self.latent_width = latent_width
        self.decoder_width = decoder_width
        self.steps = steps
        self.base_lr = base_lr
        self.dtype = dtype
        self.h_star_channel = h_star_channel
        self.seed = seed

    def _grid(self) -> Grid3:
        nx, ny, nz = self.grid_shape
        return Grid3(int(nx), int(ny), int(nz), float(self.dx))

    def _config(self) -> ModelConfig:
        return ModelConfig(modes=tuple(self.modes), padding=int(self.padding),
                           latent_width=int(self.latent_width),
                           decoder_width=int(self.decoder_width),
                           h_star_channel=bool(self.h_star_channel),
                           reference_dx=float(self.dx), dtype=self.dtype)

    def fit(self, X, y):
        X = check_array(X, ensure_2d=True, dtype=np.float64)
        if X.shape[1] != 2:
            raise ValueError("X must have two columns: power_w, v_scan_m_s")
        y = np.asarray(y, dtype=np.float64)
        grid = self._grid()
        want = (X.shape[0], 3) + grid.shape
        if y.shape != want:
            raise ValueError(f"y shape {y.shape} != expected {want}")

        dataset = InMemoryDataset(grid)
        for i, (p, v) in enumerate(X):
            params = make_params(float(p), float(v), TI64)
            entry = SampleEntry(id=f"s{i}", power_w=params.power_w,
                                v_scan_m_s=params.v_scan_m_s,
                                h_star=params.h_star, split="train", files={})
            dataset.add(entry, _as_bundle(grid, y[i]))

        model = build_model(self._config(), seed=self.seed, grid=grid)
        run = RunConfig(steps=int(self.steps), base_lr=float(self.base_lr),
                        seed=self.seed, eval_interval=0)
        self.model_, self.history_ = train(model, dataset, run,
                                           train_ids=dataset.ids(), val_ids=[])
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, ensure_2d=True, dtype=np.float64)
        if X.shape[1] != 2:
            raise ValueError("X must have two columns: power_w, v_scan_m_s")
        grid = self._grid()
        out = np.empty((X.shape[0], 3) + grid.shape, dtype=np.float64)
        for i, (p, v) in enumerate(X):
            bundle = infer(self.model_, make_params(float(p), float(v), TI64),
                           grid)
            out[i, 0] = bundle.T.as_3d()
            out[i, 1] = bundle.alpha.as_3d()
            out[i, 2] = bundle.fl.as_3d()
        return out

    def score(self, X, y):
        """Negative relative RMSE of the temperature channel (higher is better)."""
        y = np.asarray(y, dtype=np.float64)
        pred = self.predict(X)
        return -rel_rmse([p[0] for p in pred], [t[0] for t in y])
