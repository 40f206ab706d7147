"""Flux to qubit-frequency maps and the flux sensitivity d(omega_q)/d(Phi).

Two sources are supported: a parametric asymmetric-SQUID transmon and a
measured tuning curve interpolated with a natural cubic spline. Both
return sensitivities in rad/s per flux quantum.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from ._validation import as_float_array, check_finite, check_increasing, check_positive
from .errors import DegenerateRegimeError, DomainError, ExtrapolationError

#: E_J(flux)/E_C at or below which the transmon formula is rejected.
DEGENERATE_RATIO = 1.0
#: E_J/E_C below which a regime warning is issued.
TRANSMON_RATIO = 20.0


class TransmonRegimeWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TransmonModel:
    """SQUID transmon with junction asymmetry ``asymmetry``.

    Energies are in Hz (E/h). ``flux_offset`` is in flux quanta.
    """

    ej_sum: float
    ec: float
    asymmetry: float = 0.0
    flux_offset: float = 0.0

    def __post_init__(self):
        check_positive(self.ej_sum, "ej_sum")
        check_positive(self.ec, "ec")
        check_finite(self.flux_offset, "flux_offset")
        if not 0.0 <= self.asymmetry < 1.0:
            raise DomainError(f"asymmetry must lie in [0, 1), got {self.asymmetry}")
        if self.ej_sum / self.ec < TRANSMON_RATIO:
            warnings.warn(
                f"ej_sum/ec = {self.ej_sum / self.ec:.1f} is below the transmon regime "
                f"threshold {TRANSMON_RATIO:g}",
                TransmonRegimeWarning,
                stacklevel=3,
            )

    def ej(self, flux):
        """Effective Josephson energy [Hz] at ``flux`` [Phi0]."""
        x = np.pi * (np.asarray(flux, dtype=float) - self.flux_offset)
        d = self.asymmetry
        # |cos x| sqrt(1 + d^2 tan^2 x) without the tan singularity
        return self.ej_sum * np.sqrt(np.cos(x) ** 2 + d**2 * np.sin(x) ** 2)

    def to_dict(self):
        return {
            "ej_sum_hz": self.ej_sum,
            "ec_hz": self.ec,
            "asymmetry": self.asymmetry,
            "flux_offset_phi0": self.flux_offset,
        }

    @classmethod
    def from_dict(cls, data):
        allowed = {"ej_sum_hz", "ec_hz", "asymmetry", "flux_offset_phi0"}
        unknown = set(data) - allowed
        if unknown:
            raise DomainError(f"unknown transmon model keys: {sorted(unknown)}")
        return cls(
            ej_sum=float(data["ej_sum_hz"]),
            ec=float(data["ec_hz"]),
            asymmetry=float(data.get("asymmetry", 0.0)),
            flux_offset=float(data.get("flux_offset_phi0", 0.0)),
        )


def _checked_ej(model, flux):
    ej = model.ej(flux)
    if np.any(ej <= model.ec * DEGENERATE_RATIO):
        raise DegenerateRegimeError(
            f"E_J(flux)/E_C <= {DEGENERATE_RATIO:g} at flux {flux}; "
            "the transmon formula does not apply there"
        )
    return ej


def qubit_freq(model, flux):
    """Qubit frequency ``sqrt(8 E_J(flux) E_C) - E_C`` in Hz."""
    ej = _checked_ej(model, flux)
    f = np.sqrt(8.0 * ej * model.ec) - model.ec
    return float(f) if np.ndim(f) == 0 else f


@dataclass(frozen=True, eq=False)
class FluxTuningCurve:
    """Measured qubit frequency [Hz] versus flux [Phi0].

    Sensitivity queries closer than ``margin`` samples to either end are
    refused: natural end conditions make the spline derivative unreliable
    there.
    """

    flux: np.ndarray
    freq: np.ndarray
    margin: int = 2

    def __post_init__(self):
        flux = check_increasing(as_float_array(self.flux, "flux", min_len=4), "flux")
        freq = as_float_array(self.freq, "freq", min_len=4)
        if flux.size != freq.size:
            raise DomainError("flux and freq must have equal length")
        if np.any(freq <= 0):
            raise DomainError("tuning-curve frequencies must be positive")
        if self.margin < 0 or 2 * self.margin >= flux.size:
            raise DomainError("margin leaves no usable interior")
        for name, arr in (("flux", flux), ("freq", freq)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "_spline", CubicSpline(flux, freq, bc_type="natural"))

    @property
    def interpolation(self):
        return "cubic spline, natural end conditions"

    @property
    def usable_range(self):
        return float(self.flux[self.margin]), float(self.flux[-1 - self.margin])

    def __call__(self, flux):
        lo, hi = float(self.flux[0]), float(self.flux[-1])
        if np.any(np.asarray(flux) < lo) or np.any(np.asarray(flux) > hi):
            raise ExtrapolationError(f"flux {flux} outside tabulated range [{lo}, {hi}]")
        out = self._spline(flux)
        return float(out) if np.ndim(out) == 0 else out

    def derivative(self, flux):
        lo, hi = self.usable_range
        f = np.asarray(flux, dtype=float)
        if np.any(f < lo) or np.any(f > hi):
            raise ExtrapolationError(
                f"flux {flux} outside usable range [{lo}, {hi}] "
                f"({self.margin}-sample end margin)"
            )
        out = self._spline(f, 1)
        return float(out) if np.ndim(out) == 0 else out

    @classmethod
    def from_model(cls, model, flux):
        flux = np.asarray(flux, dtype=float)
        return cls(flux=flux, freq=qubit_freq(model, flux))


def flux_sensitivity(source, flux):
    """``2 pi d f_q / d flux`` in rad/s per Phi0.

    ``source`` is a :class:`TransmonModel` (analytic derivative) or a
    :class:`FluxTuningCurve` (spline derivative).
    """
    if isinstance(source, FluxTuningCurve):
        return 2 * math.pi * source.derivative(flux)
    if not isinstance(source, TransmonModel):
        raise TypeError(f"unsupported transduction source {type(source).__name__}")
    ej = _checked_ej(source, flux)
    x = np.pi * (np.asarray(flux, dtype=float) - source.flux_offset)
    d = source.asymmetry
    dej = source.ej_sum**2 * np.pi * (d**2 - 1.0) * np.sin(x) * np.cos(x) / ej
    dfq = np.sqrt(2.0 * source.ec / ej) * dej
    out = 2 * np.pi * dfq
    return float(out) if np.ndim(out) == 0 else out
