import numpy as np
import pytest
from sklearn.base import clone

from meltfno.enthalpy import build_plan
from meltfno.estimator import MeltPoolFNO
from meltfno.fields import Grid3
from meltfno.oracle import OracleConfig, generate_sample


GRID_SHAPE = (16, 8, 6)
DX = 2e-5


@pytest.fixture(scope="module")
def xy():
    grid = Grid3(*GRID_SHAPE, DX)
    cfg = OracleConfig(grid=grid, r_min=50e-6)
    plan = build_plan((80.0, 140.0), (5.5, 8.5), 2, 3, seed=0)
    X, Y = [], []
    for point in plan.points:
        bundle = generate_sample(point.params(), cfg)
        X.append([point.power_w, point.v_scan_m_s])
        Y.append(np.stack([bundle.T.as_3d(), bundle.alpha.as_3d(),
                           bundle.fl.as_3d()]))
    return np.asarray(X), np.asarray(Y)


@pytest.fixture(scope="module")
def fitted(xy):
    X, Y = xy
    est = MeltPoolFNO(grid_shape=GRID_SHAPE, dx=DX, modes=(3, 2, 2),
                      padding=1, latent_width=4, decoder_width=5,
                      steps=60, seed=0)
    return est.fit(X, Y)


class TestSklearnContract:
    def test_get_params_roundtrip(self):
        est = MeltPoolFNO(latent_width=7, steps=123)
        params = est.get_params()
        assert params["latent_width"] == 7
        assert params["steps"] == 123
        est2 = MeltPoolFNO(**params)
        assert est2.get_params() == params

    def test_set_params(self):
        est = MeltPoolFNO()
        est.set_params(steps=11, modes=(2, 2, 2))
        assert est.steps == 11

    def test_clone(self):
        est = MeltPoolFNO(latent_width=9)
        c = clone(est)
        assert c.latent_width == 9
        assert c is not est

    def test_unfitted_predict_raises(self):
        from sklearn.exceptions import NotFittedError
        with pytest.raises(NotFittedError):
            MeltPoolFNO().predict([[100.0, 0.5]])


class TestFitPredict:
    def test_predict_shapes(self, fitted, xy):
        X, _ = xy
        out = fitted.predict(X[:2])
        assert out.shape == (2, 3) + GRID_SHAPE

    def test_outputs_satisfy_field_invariants(self, fitted, xy):
        X, _ = xy
        out = fitted.predict(X[:1])
        assert np.all(out[0, 0] >= 0.0)          # kelvin
        assert np.all((out[0, 1] >= 0) & (out[0, 1] <= 1))
        assert np.all((out[0, 2] >= 0) & (out[0, 2] <= 1))

    def test_training_improves_over_init(self, xy):
        X, Y = xy
        base = MeltPoolFNO(grid_shape=GRID_SHAPE, dx=DX, modes=(3, 2, 2),
                           padding=1, latent_width=4, decoder_width=5,
                           steps=0, seed=0)
        # steps=0 is rejected by the trainer's empty-history contract only
        # when asked to train; fit with minimal steps instead
        base.set_params(steps=1)
        short = base.fit(X, Y).score(X, Y)
        longer = MeltPoolFNO(grid_shape=GRID_SHAPE, dx=DX, modes=(3, 2, 2),
                             padding=1, latent_width=4, decoder_width=5,
                             steps=60, seed=0).fit(X, Y).score(X, Y)
        assert longer >= short

    def test_input_validation(self, fitted):
        with pytest.raises(ValueError):
            fitted.predict(np.zeros((2, 3)))

    def test_fit_shape_validation(self, xy):
        X, Y = xy
        est = MeltPoolFNO(grid_shape=GRID_SHAPE, dx=DX, steps=1)
        with pytest.raises(ValueError, match="y shape"):
            est.fit(X, Y[:, :, :4])

    def test_history_recorded(self, fitted):
        assert len(fitted.history_) == 60
        assert fitted.model_.provenance["trained"] is True
