"""Reference computations that share no code with the package.

Each oracle takes a different route to a quantity the package computes:

* ``g_fft``: filter function from a zero-padded FFT of the sampled
  switching function (cells aligned to the pulse times, so the only
  error is floating point roundoff).
* ``g_closed``: textbook closed form of the CPMG filter.
* ``chi_quad``: dephasing exponent by plain ``scipy.integrate.quad``.
* ``t1_direct``: loss-budget rate formula written out by hand.
"""

import math

import numpy as np
from scipy import integrate

CELLS_PER_INTERVAL = 16
PAD_FACTOR = 64


def g_fft(n_pulses, z_min=0.1, z_max=200.0):
    """``(z, g)`` on the FFT grid inside ``[z_min, z_max]``."""
    m = 2 * n_pulses * CELLS_PER_INTERVAL
    h = 1.0 / m
    t_mid = (np.arange(m) + 0.5) * h
    flips = (np.arange(1, n_pulses + 1) - 0.5) / n_pulses
    f = np.where(np.searchsorted(flips, t_mid) % 2 == 0, 1.0, -1.0)
    length = PAD_FACTOR * m + 1
    padded = np.zeros(length)
    padded[:m] = f
    k = np.arange(length)
    z = 2 * np.pi * k / (length * h)
    sums = np.fft.ifft(padded) * length
    cell = h * np.exp(0.5j * z * h) * np.sinc(z * h / (2 * np.pi))
    g = np.abs(cell * sums) ** 2
    keep = (z >= z_min) & (z <= z_max)
    return z[keep], g[keep]


def g_closed(n_pulses, z):
    """Closed-form CPMG filter (singular points of the formula excluded by caller)."""
    z = np.asarray(z, dtype=float)
    trig = np.sin(z / 2) ** 2 if n_pulses % 2 == 0 else np.cos(z / 2) ** 2
    return 16 * np.sin(z / (4 * n_pulses)) ** 4 * trig / (z**2 * np.cos(z / (2 * n_pulses)) ** 2)


def _g_safe(n_pulses, z):
    # the closed form has removable 0/0 points at z = (2k+1) pi N; nudge off them
    z = float(z)
    r = z / (math.pi * n_pulses)
    if abs(r - round(r)) < 1e-7 and int(round(r)) % 2 == 1:
        z += 1e-6 * math.pi * n_pulses
    return float(g_closed(n_pulses, z))


def chi_quad(amplitude, alpha, white, sensitivity, n_pulses, tau, acquisition_time,
             uv_harmonics=400, pivot=1.0):
    """``chi = (tau D^2 / 2) int S_omega(z/tau) g(z) dz`` over ``[2 pi tau/T, uv pi N]``."""

    def s_omega(omega):
        f = omega / (2 * math.pi)
        return (amplitude * (pivot / f) ** alpha + white) / (2 * math.pi)

    lo = 2 * math.pi * tau / acquisition_time
    hi = uv_harmonics * math.pi * n_pulses
    edges = np.unique(np.concatenate([[lo, hi], 0.5 * math.pi * n_pulses * np.arange(1, 2 * uv_harmonics)]))
    edges = edges[(edges >= lo) & (edges <= hi)]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(lambda z: s_omega(z / tau) * _g_safe(n_pulses, z), a, b,
                                limit=200, epsabs=0.0, epsrel=1e-10)
        total += val
    return 0.5 * tau * sensitivity**2 * total


def t1_direct(p_ms, p_sa, p_ma, p_bulk, tan_ms, tan_sa, tan_ma, tan_bulk, f_q, other_rate=0.0):
    rate = 2 * math.pi * f_q * (p_ms * tan_ms + p_sa * tan_sa + p_ma * tan_ma + p_bulk * tan_bulk)
    rate += other_rate
    return math.inf if rate == 0 else 1.0 / rate


def transmon_sensitivity_fd(ej_sum, ec, d, flux, step=1e-7):
    """Central finite difference of ``2 pi (sqrt(8 E_J E_C) - E_C)`` in flux."""

    def fq(phi):
        x = math.pi * phi
        ej = ej_sum * math.sqrt(math.cos(x) ** 2 + d**2 * math.sin(x) ** 2)
        return math.sqrt(8 * ej * ec) - ec

    return 2 * math.pi * (fq(flux + step) - fq(flux - step)) / (2 * step)
