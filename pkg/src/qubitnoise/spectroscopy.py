"""Flux-noise PSD from normalised CPMG data, and power-law fits.

Each datum above the noise floor becomes one PSD sample: the decay
exponent left after removing the T1 factor is divided by the area of the
rectangular stand-in for the filter function, and the result is placed
at the filter's peak frequency.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from ._validation import check_finite, check_positive
from .dephasing import fit_trace
from .errors import DomainError, EmptyEstimateError, FitError
from .filters import CPMGSequence, rectangular_approximation
from .noise import PowerLawPSD, PSDEstimate
from .transduction import flux_sensitivity

__all__ = [
    "FluxNoiseSpectrometer",
    "InvertedPoint",
    "PSDEstimate",
    "PowerLawFit",
    "PowerLawRegressor",
    "extract_psd",
    "fit_power_law",
    "frequency_noise",
    "invert_point",
]


@dataclass(frozen=True)
class InvertedPoint:
    freq: float
    s_phi: float
    sigma: float
    chi: float
    #: PSD of qubit angular-frequency noise, (rad/s)^2/Hz
    s_freq_noise: float


def invert_point(tau, signal, fit, sensitivity, seq, t1, *, noise_floor_sigma=3.0):
    """One PSD sample from one CPMG datum, or ``None`` if the datum is excluded.

    Excluded data: normalised signal ``>= 1``, below the noise floor, or
    with a non-positive decay exponent.
    """
    check_positive(tau, "tau")
    check_positive(t1, "t1")
    sensitivity = check_finite(sensitivity, "sensitivity")
    if sensitivity == 0.0:
        raise DomainError("zero flux sensitivity: flux noise cannot be inferred")
    y = (float(signal) - fit.a0) / fit.a
    if y >= 1.0 or y < fit.floor(noise_floor_sigma) or y <= 0.0:
        return None
    t1_part = (tau - seq.tau0) / t1
    chi = -math.log(y) - t1_part
    # exponents at roundoff level mean the decay is fully explained by T1
    if chi <= 1e-12 * max(1.0, t1_part):
        return None
    rect = rectangular_approximation(seq.with_tau(tau))
    # chi = (tau^2 D^2 / 2) S_omega(omega_c) * height * width
    s_omega = 2.0 * chi / (tau**2 * sensitivity**2 * rect.height * rect.width)
    s_phi = 2.0 * math.pi * s_omega
    sigma_chi = fit.residual_rms / abs(fit.a) / y
    sigma = s_phi * sigma_chi / chi
    return InvertedPoint(
        freq=rect.freq_c,
        s_phi=s_phi,
        sigma=sigma,
        chi=chi,
        s_freq_noise=sensitivity**2 * s_phi,
    )


def frequency_noise(estimate, sensitivity):
    """Qubit angular-frequency noise PSD, ``D^2 S_phi``, for each point."""
    return sensitivity**2 * np.asarray(estimate.s_phi)


def extract_psd(traces, fits, source, flux, *, noise_floor_sigma=3.0):
    """Merge every included datum of ``traces`` into one :class:`PSDEstimate`.

    ``source`` is a transduction source (model or tuning curve) evaluated at
    ``flux``. Points are sorted by frequency, ties broken by N then tau.
    """
    traces = list(traces)
    fits = list(fits)
    if len(traces) != len(fits):
        raise DomainError("need exactly one fit per trace")
    ids = {t.qubit_id for t in traces}
    if len(ids) > 1:
        raise DomainError(f"traces come from several qubits: {sorted(ids)}")
    sensitivity = flux_sensitivity(source, flux)
    rows = []
    for trace, fit in zip(traces, fits):
        for tau, sig in zip(trace.tau, trace.signal):
            seq = CPMGSequence(trace.n_pulses, float(tau), trace.tau0)
            pt = invert_point(float(tau), float(sig), fit, sensitivity, seq, trace.t1,
                              noise_floor_sigma=noise_floor_sigma)
            if pt is not None:
                rows.append((pt.freq, trace.n_pulses, float(tau), pt.s_phi, pt.sigma))
    if not rows:
        raise EmptyEstimateError("no datum above the noise floor; PSD estimate is empty")
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    arr = np.array(rows, dtype=float)
    return PSDEstimate(
        freq=arr[:, 0],
        s_phi=arr[:, 3],
        sigma=arr[:, 4],
        qubit_id=traces[0].qubit_id,
        flux=float(flux),
        n_pulses=arr[:, 1].astype(int),
        tau=arr[:, 2],
    )


@dataclass(frozen=True)
class PowerLawFit:
    alpha: float
    alpha_err: float
    amplitude: float
    amplitude_err: float
    freq_range: tuple
    pivot: float = 1.0
    n_points: int = 0
    reduced_chi2: float = float("nan")

    def model(self):
        return PowerLawPSD(amplitude=self.amplitude, alpha=max(self.alpha, 0.0),
                           pivot_freq=self.pivot)

    def __call__(self, f):
        return self.amplitude * (self.pivot / np.asarray(f, dtype=float)) ** self.alpha

    def to_dict(self):
        at_one_hz = self.pivot == 1.0
        return {
            "alpha": self.alpha,
            "alpha_err": self.alpha_err,
            "amp_1hz": float(self(1.0)),
            "amp_err": self.amplitude_err if at_one_hz else None,
            "pivot_hz": self.pivot,
            "amp_pivot": self.amplitude,
            "f_min": self.freq_range[0],
            "f_max": self.freq_range[1],
            "n_points": self.n_points,
            "reduced_chi2": self.reduced_chi2,
        }


#: Relative uncertainty floor; keeps exact (noise-free) points from
#: receiving infinite weight.
_MIN_REL_SIGMA = 1e-6


class PowerLawRegressor(RegressorMixin, BaseEstimator):
    """Weighted straight-line fit of ``ln S`` against ``ln f``.

    ``S(f) = amplitude_ * (pivot / f) ** alpha_``. Sample weights are
    ``1 / sigma_ln^2`` with ``sigma_ln = sigma_S / S``. Parameter
    uncertainties come from the weighted covariance, inflated by the
    reduced chi-square when it exceeds one.
    """

    def __init__(self, pivot=1.0, min_points=5):
        self.pivot = pivot
        self.min_points = min_points

    def fit(self, X, y, sigma=None):
        f = check_array(X, ensure_2d=False, dtype=float).reshape(-1)
        s = check_array(y, ensure_2d=False, dtype=float).reshape(-1)
        check_consistent_length(f, s)
        check_positive(self.pivot, "pivot")
        if f.size < self.min_points:
            raise FitError(f"power-law fit needs >= {self.min_points} points, got {f.size}")
        if np.any(f <= 0) or np.any(s <= 0):
            raise DomainError("power-law fit needs positive frequencies and PSD values")
        if sigma is None:
            rel = np.ones_like(s)
        else:
            rel = np.maximum(np.asarray(sigma, dtype=float) / s, _MIN_REL_SIGMA)
        x = np.log(f / self.pivot)
        if np.ptp(x) == 0:
            raise FitError("all points share one frequency; exponent undefined")
        w = 1.0 / rel
        design = np.column_stack([np.ones_like(x), -x])
        coef, *_ = np.linalg.lstsq(design * w[:, None], np.log(s) * w, rcond=None)
        resid = (np.log(s) - design @ coef) * w
        dof = max(f.size - 2, 1)
        red = float(resid @ resid / dof)
        cov = np.linalg.inv((design * w[:, None]).T @ (design * w[:, None]))
        if sigma is None or red > 1.0:
            cov = cov * red
        self.alpha_ = float(coef[1])
        self.amplitude_ = float(math.exp(coef[0]))
        self.alpha_err_ = float(math.sqrt(cov[1, 1]))
        self.amplitude_err_ = float(self.amplitude_ * math.sqrt(cov[0, 0]))
        self.covariance_ = cov
        self.reduced_chi2_ = red
        self.freq_range_ = (float(f.min()), float(f.max()))
        self.n_points_ = int(f.size)
        return self

    def predict(self, X):
        check_is_fitted(self, "alpha_")
        f = check_array(X, ensure_2d=False, dtype=float).reshape(-1)
        return self.amplitude_ * (self.pivot / f) ** self.alpha_


def fit_power_law(estimate, freq_range=None, *, pivot=1.0):
    """Fit ``S = A (pivot/f)^alpha`` to the points of ``estimate`` in ``freq_range``."""
    f = np.asarray(estimate.freq)
    lo, hi = (f.min(), f.max()) if freq_range is None else freq_range
    if not lo <= hi:
        raise DomainError("empty frequency range")
    sel = (f >= lo) & (f <= hi)
    if sel.sum() < 5:
        raise FitError(f"only {int(sel.sum())} points in [{lo:.3g}, {hi:.3g}] Hz; need 5")
    reg = PowerLawRegressor(pivot=pivot).fit(
        f[sel], np.asarray(estimate.s_phi)[sel], sigma=np.asarray(estimate.sigma)[sel]
    )
    return PowerLawFit(
        alpha=reg.alpha_,
        alpha_err=reg.alpha_err_,
        amplitude=reg.amplitude_,
        amplitude_err=reg.amplitude_err_,
        freq_range=reg.freq_range_,
        pivot=float(pivot),
        n_points=reg.n_points_,
        reduced_chi2=reg.reduced_chi2_,
    )


class FluxNoiseSpectrometer(BaseEstimator):
    """Trace fits, PSD inversion and power-law fit as one estimator.

    ``fit`` takes a list of :class:`~qubitnoise.dephasing.CPMGTrace` from a
    single qubit and flux point.

    Attributes
    ----------
    trace_fits_ : list of TraceFit
    psd_ : PSDEstimate
    power_law_ : PowerLawFit
    """

    def __init__(self, source=None, flux=0.25, noise_floor_sigma=3.0, n_restarts=5,
                 freq_range=None, pivot=1.0):
        self.source = source
        self.flux = flux
        self.noise_floor_sigma = noise_floor_sigma
        self.n_restarts = n_restarts
        self.freq_range = freq_range
        self.pivot = pivot

    def fit(self, traces, y=None):
        if self.source is None:
            raise DomainError("a transduction source is required")
        traces = list(traces)
        if not traces:
            raise EmptyEstimateError("no traces given")
        self.trace_fits_ = [
            fit_trace(t, noise_floor_sigma=self.noise_floor_sigma, n_restarts=self.n_restarts)
            for t in traces
        ]
        self.psd_ = extract_psd(traces, self.trace_fits_, self.source, self.flux,
                                noise_floor_sigma=self.noise_floor_sigma)
        self.power_law_ = fit_power_law(self.psd_, self.freq_range, pivot=self.pivot)
        return self

    def predict(self, X):
        check_is_fitted(self, "power_law_")
        return self.power_law_(check_array(X, ensure_2d=False, dtype=float).reshape(-1))
