"""CPMG switching functions, filter functions and the rectangular filter.

The filter function is ``g_N(omega, tau) = |int_0^tau f(t) exp(i omega t) dt|^2 / tau^2``
for the ideal (zero-width pulse) switching function ``f``. It depends on
``omega`` and ``tau`` only through ``z = omega * tau``, which is how the
heavy lifting here is organised: everything is computed for ``tau = 1``
and rescaled.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from ._validation import check_finite, check_positive
from .errors import DomainError, NumericalError

#: Upper integration limit for the rectangle area, in units of pi*N/tau.
AREA_HARMONICS = 40
#: Coarse peak-scan step in units of pi/tau.
PEAK_GRID_STEP = 1.0 / 8.0
AREA_RTOL = 1e-4
_CHUNK = 4096


@dataclass(frozen=True)
class CPMGSequence:
    """``(pi/2) - [tau/2N - pi - tau/2N]^N - (pi/2)``."""

    n_pulses: int
    tau: float
    tau0: float = 0.0

    def __post_init__(self):
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 1:
            raise DomainError(f"n_pulses must be a positive integer, got {self.n_pulses}")
        object.__setattr__(self, "n_pulses", int(self.n_pulses))
        check_positive(self.tau, "tau")
        check_finite(self.tau0, "tau0")

    @property
    def pulse_times(self):
        j = np.arange(1, self.n_pulses + 1)
        return (j - 0.5) * self.tau / self.n_pulses

    def with_tau(self, tau):
        return CPMGSequence(self.n_pulses, tau, self.tau0)


@dataclass(frozen=True)
class RectFilter:
    """Equal-height, equal-area stand-in for ``g_N``.

    ``truncated_fraction`` is the share of the full area (``pi / tau`` by
    Parseval) lying above the integration cut-off.
    """

    omega_c: float
    height: float
    width: float
    area: float
    truncated_fraction: float = 0.0

    def __post_init__(self):
        check_positive(self.height, "height")
        check_positive(self.width, "width")

    @property
    def freq_c(self):
        return self.omega_c / (2 * math.pi)


def switching_function(seq, t):
    """``+1`` until the first pi pulse, flipping sign at each pulse.

    At a pulse time the post-flip value is returned.
    """
    t_arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t_arr)) or np.any(t_arr < 0) or np.any(t_arr > seq.tau):
        raise DomainError(f"t must lie in [0, tau={seq.tau}]")
    flips = np.searchsorted(seq.pulse_times, t_arr, side="right")
    out = np.where(flips % 2 == 0, 1.0, -1.0)
    return float(out) if np.ndim(t) == 0 else out


def _interval_edges(n_pulses):
    j = np.arange(1, n_pulses + 1)
    return np.concatenate([[0.0], (j - 0.5) / n_pulses, [1.0]])


def dimensionless_filter(n_pulses, z):
    """``g_N`` as a function of ``z = omega * tau``.

    Closed sum over the ``N + 1`` constant-sign intervals ``[a, b]``, each
    contributing ``exp(i z (a+b)/2) (b-a) sinc(z (b-a)/2)``.
    """
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    zf = np.atleast_1d(z).ravel()
    edges = _interval_edges(n_pulses)
    mid = 0.5 * (edges[:-1] + edges[1:])
    length = np.diff(edges)
    sign = np.where(np.arange(n_pulses + 1) % 2 == 0, 1.0, -1.0)
    weight = sign * length
    out = np.empty_like(zf)
    for start in range(0, zf.size, _CHUNK):
        zz = zf[start:start + _CHUNK, None]
        # np.sinc(x) = sin(pi x)/(pi x)
        terms = np.exp(1j * zz * mid) * np.sinc(zz * length / (2 * np.pi))
        amp = terms @ weight
        out[start:start + _CHUNK] = amp.real**2 + amp.imag**2
    out[zf == 0] = 0.0
    if scalar:
        return float(out[0])
    return out.reshape(z.shape)


def filter_function(seq, omega):
    """``g_N(omega, tau)`` for an ideal CPMG sequence (dimensionless)."""
    omega_arr = np.asarray(omega, dtype=float)
    if np.any(~np.isfinite(omega_arr)) or np.any(omega_arr < 0):
        raise DomainError("omega must be finite and >= 0")
    return dimensionless_filter(seq.n_pulses, omega_arr * seq.tau)


def filter_table(seq, omega_max, n_points):
    """``(omega, g)`` on a uniform grid from 0 to ``omega_max``."""
    check_positive(omega_max, "omega_max")
    if n_points < 2:
        raise DomainError("n_points must be >= 2")
    omega = np.linspace(0.0, omega_max, int(n_points))
    return omega, filter_function(seq, omega)


def _locate_peak(n_pulses):
    step = PEAK_GRID_STEP * math.pi
    grid = step * np.arange(1, int(round(4 * n_pulses / PEAK_GRID_STEP)) + 1)
    values = dimensionless_filter(n_pulses, grid)
    i = int(np.argmax(values))
    neg = lambda z: -dimensionless_filter(n_pulses, z)
    if 0 < i < grid.size - 1:
        res = optimize.minimize_scalar(
            neg, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden",
            options={"xtol": 1e-12},
        )
    else:
        lo = grid[max(i - 1, 0)]
        hi = grid[min(i + 1, grid.size - 1)]
        res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-12})
    return float(res.x)


@lru_cache(maxsize=256)
def _rect_dimensionless(n_pulses):
    z_c = _locate_peak(n_pulses)
    height = dimensionless_filter(n_pulses, z_c)
    # break at every multiple of pi*N/2: harmonics and the zeros between them
    breaks = 0.5 * math.pi * n_pulses * np.arange(0, 2 * AREA_HARMONICS + 1)
    area = 0.0
    err = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        val, e = integrate.quad(
            lambda z: dimensionless_filter(n_pulses, z), lo, hi,
            epsabs=0.0, epsrel=1e-9, limit=200,
        )
        area += val
        err += e
    if not err <= AREA_RTOL * area:
        raise NumericalError(
            "filter area quadrature did not converge",
            {"n_pulses": n_pulses, "area": area, "error_estimate": err},
        )
    truncated = 1.0 - area / math.pi
    return z_c, height, area, truncated


def rectangular_approximation(seq):
    """Rectangle with the peak height of ``g_N`` and the same area.

    The centre is the numerically located main-lobe maximum; the area is
    integrated up to ``40 pi N / tau``.
    """
    z_c, height, area_z, truncated = _rect_dimensionless(seq.n_pulses)
    area = area_z / seq.tau
    return RectFilter(
        omega_c=z_c / seq.tau,
        height=height,
        width=area / height,
        area=area,
        truncated_fraction=truncated,
    )
