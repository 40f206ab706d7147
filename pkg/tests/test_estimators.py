"""Estimator-protocol checks shared by every estimator in the package."""

import inspect

import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from qubitnoise.dephasing import CPMGTraceFitter
from qubitnoise.loss import LossTangentRegressor
from qubitnoise.spectroscopy import FluxNoiseSpectrometer, PowerLawRegressor

ESTIMATORS = [CPMGTraceFitter, LossTangentRegressor, PowerLawRegressor, FluxNoiseSpectrometer]


@pytest.mark.parametrize("cls", ESTIMATORS)
def test_params_match_signature(cls):
    est = cls()
    names = [p for p in inspect.signature(cls.__init__).parameters if p != "self"]
    assert sorted(est.get_params()) == sorted(names)
    for name in names:
        assert est.get_params()[name] == inspect.signature(cls.__init__).parameters[name].default


@pytest.mark.parametrize("cls", ESTIMATORS)
def test_clone_and_set_params(cls):
    est = cls()
    name = sorted(est.get_params())[0]
    c = clone(est)
    assert c is not est and c.get_params() == est.get_params()
    c.set_params(**{name: est.get_params()[name]})
    assert "__init__" not in repr(c)


@pytest.mark.parametrize("cls", [CPMGTraceFitter, LossTangentRegressor, PowerLawRegressor, FluxNoiseSpectrometer])
def test_predict_before_fit(cls):
    with pytest.raises(NotFittedError):
        cls().predict([[1.0, 1.0, 1.0, 1.0, 1.0]] if cls is LossTangentRegressor else [1.0])
