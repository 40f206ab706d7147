"""Flux-noise spectral models and Gaussian noise synthesis.

PSDs are one-sided and per linear frequency (Phi0^2/Hz) everywhere in the
public API. Code that integrates over angular frequency converts with
:func:`angular_psd`.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import signal

from ._validation import as_float_array, check_positive
from .errors import DomainError


@dataclass(frozen=True)
class PowerLawPSD:
    """``S(f) = amplitude * (pivot_freq / f)**alpha + white_floor``.

    Parameters
    ----------
    amplitude : float
        One-sided PSD of the power-law part at ``pivot_freq`` [Phi0^2/Hz].
    alpha : float
        Power-law exponent, ``alpha >= 0``.
    white_floor : float
        Frequency-independent floor [Phi0^2/Hz].
    pivot_freq : float
        Reference frequency [Hz].
    """

    amplitude: float = 0.0
    alpha: float = 1.0
    white_floor: float = 0.0
    pivot_freq: float = 1.0

    def __post_init__(self):
        check_positive(self.amplitude, "amplitude", strict=False)
        check_positive(self.white_floor, "white_floor", strict=False)
        check_positive(self.alpha, "alpha", strict=False)
        check_positive(self.pivot_freq, "pivot_freq")

    @property
    def is_zero(self):
        return self.amplitude == 0 and self.white_floor == 0

    def __call__(self, f):
        return psd_eval(self, f)

    def scaled(self, factor):
        """Same shape, every term multiplied by ``factor``."""
        return PowerLawPSD(
            amplitude=self.amplitude * factor,
            alpha=self.alpha,
            white_floor=self.white_floor * factor,
            pivot_freq=self.pivot_freq,
        )

    def to_dict(self):
        return {
            "amplitude": self.amplitude,
            "pivot_freq_hz": self.pivot_freq,
            "alpha": self.alpha,
            "white_floor": self.white_floor,
        }

    @classmethod
    def from_dict(cls, data):
        allowed = {"amplitude", "pivot_freq_hz", "alpha", "white_floor"}
        unknown = set(data) - allowed
        if unknown:
            raise DomainError(f"unknown PSD model keys: {sorted(unknown)}")
        return cls(
            amplitude=float(data.get("amplitude", 0.0)),
            alpha=float(data.get("alpha", 1.0)),
            white_floor=float(data.get("white_floor", 0.0)),
            pivot_freq=float(data.get("pivot_freq_hz", 1.0)),
        )


def psd_eval(model, f):
    """Evaluate a :class:`PowerLawPSD` at frequency ``f`` [Hz].

    Accepts scalars or arrays; raises :class:`DomainError` for ``f <= 0``.
    """
    f_arr = np.asarray(f, dtype=float)
    if np.any(~np.isfinite(f_arr)) or np.any(f_arr <= 0):
        raise DomainError("PSD frequency must be finite and > 0")
    out = model.white_floor + model.amplitude * (model.pivot_freq / f_arr) ** model.alpha
    if np.ndim(f) == 0:
        return float(out)
    return out


def angular_psd(model, omega):
    """One-sided PSD per angular frequency, ``S_f(omega / 2pi) / 2pi``."""
    return psd_eval(model, np.asarray(omega, dtype=float) / (2 * np.pi)) / (2 * np.pi)


@dataclass(frozen=True, eq=False)
class NoiseTrajectory:
    dt: float
    samples: np.ndarray
    seed: int

    def __post_init__(self):
        check_positive(self.dt, "dt")
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 2:
            raise DomainError("a trajectory needs at least two samples")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def times(self):
        return np.arange(self.samples.size) * self.dt

    @property
    def duration(self):
        return self.samples.size * self.dt


@dataclass(frozen=True, eq=False)
class PSDEstimate:
    """Sampled PSD with per-point one-sigma uncertainty.

    ``n_pulses`` and ``tau`` record which CPMG datum produced each point
    when the estimate comes from spectroscopy; they are empty for
    periodogram estimates.
    """

    freq: np.ndarray
    s_phi: np.ndarray
    sigma: np.ndarray
    qubit_id: str = ""
    flux: Optional[float] = None
    n_pulses: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    tau: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        freq = as_float_array(self.freq, "freq")
        s_phi = as_float_array(self.s_phi, "s_phi")
        sigma = as_float_array(self.sigma, "sigma")
        if not (freq.size == s_phi.size == sigma.size):
            raise DomainError("freq, s_phi and sigma must have equal length")
        if np.any(freq <= 0):
            raise DomainError("PSD estimate frequencies must be positive")
        if np.any(s_phi <= 0):
            raise DomainError("PSD estimate values must be positive")
        if np.any(sigma < 0):
            raise DomainError("PSD uncertainties must be non-negative")
        n_pulses = np.asarray(self.n_pulses, dtype=int)
        tau = np.asarray(self.tau, dtype=float)
        for name, arr in (("freq", freq), ("s_phi", s_phi), ("sigma", sigma),
                          ("n_pulses", n_pulses), ("tau", tau)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.freq.size

    @property
    def n_values(self):
        return sorted(set(int(n) for n in self.n_pulses))


def _bin_variances(model, n, dt):
    """Per-bin variance ``S(f_k) * df`` for rfft bins k = 1 .. n//2."""
    df = 1.0 / (n * dt)
    k = np.arange(1, n // 2 + 1)
    var = psd_eval(model, k * df) * df
    if n % 2 == 0:
        # the Nyquist bin covers only half a bin of one-sided bandwidth
        var[-1] *= 0.5
    return var


def _synthesize_rows(bin_var, n, rngs):
    """Random-phase synthesis; one row per generator in ``rngs``."""
    nb = bin_var.size
    nyquist = n % 2 == 0
    coeffs = np.zeros((len(rngs), n // 2 + 1), dtype=complex)
    for i, rng in enumerate(rngs):
        z = rng.standard_normal((2, nb))
        coeffs[i, 1:] = z[0] + 1j * z[1]
    # E|X_k|^2 = n^2 var_k / 2 gives Var(x_j) = sum_k var_k after irfft
    coeffs[:, 1:] *= n * np.sqrt(bin_var / 4.0)
    if nyquist:
        coeffs[:, -1] = coeffs[:, -1].real * 2.0
    return np.fft.irfft(coeffs, n=n, axis=1)


def _n_samples(duration, dt):
    check_positive(duration, "duration")
    check_positive(dt, "dt")
    if duration < 2 * dt:
        raise DomainError("duration must cover at least two samples")
    return int(round(duration / dt))


def synthesize_trajectory(model, duration, dt, seed):
    """Draw one zero-mean Gaussian trajectory with one-sided PSD ``model``.

    The lowest synthesised frequency is ``1/duration`` (nothing below it)
    and the highest is the Nyquist frequency ``1/(2 dt)``.
    """
    n = _n_samples(duration, dt)
    if model.is_zero:
        return NoiseTrajectory(dt=dt, samples=np.zeros(n), seed=int(seed))
    rng = np.random.default_rng(int(seed))
    row = _synthesize_rows(_bin_variances(model, n, dt), n, [rng])[0]
    return NoiseTrajectory(dt=dt, samples=row, seed=int(seed))


def ensemble_seeds(seed, n_traj):
    """Independent per-trajectory integer seeds derived from one master seed."""
    state = np.random.SeedSequence(int(seed)).generate_state(int(n_traj), dtype=np.uint64)
    return [int(s) for s in state]


def synthesize_batch(model, duration, dt, seeds, *, n_keep=None):
    """One trajectory per seed, stacked as rows.

    Row ``i`` equals ``synthesize_trajectory(model, duration, dt, seeds[i])``.
    ``n_keep`` truncates every row to its first samples.
    """
    n = _n_samples(duration, dt)
    n_keep = n if n_keep is None else int(n_keep)
    if model.is_zero:
        return np.zeros((len(seeds), n_keep))
    rngs = [np.random.default_rng(int(s)) for s in seeds]
    return _synthesize_rows(_bin_variances(model, n, dt), n, rngs)[:, :n_keep]


def synthesize_ensemble(model, duration, dt, seed, n_traj, *, n_keep=None):
    """``n_traj`` independent trajectories derived from one master seed."""
    return synthesize_batch(model, duration, dt, ensemble_seeds(seed, n_traj), n_keep=n_keep)


def periodogram(traj, n_segments=8):
    """Welch-averaged one-sided PSD of a trajectory.

    Non-overlapping Hann segments; the DC bin is dropped. ``sigma`` is the
    chi-squared standard error ``S / sqrt(n_segments)``.
    """
    n_segments = int(n_segments)
    if n_segments < 1:
        raise DomainError("n_segments must be >= 1")
    x = np.asarray(traj.samples, dtype=float)
    nperseg = x.size // n_segments
    if nperseg < 16:
        raise DomainError(
            f"trajectory too short: {x.size} samples give {nperseg} per segment (need 16)"
        )
    freq, pxx = signal.welch(
        x[: nperseg * n_segments],
        fs=1.0 / traj.dt,
        window="hann",
        nperseg=nperseg,
        noverlap=0,
        detrend="constant",
        scaling="density",
    )
    keep = (freq > 0) & (pxx > 0)
    return PSDEstimate(
        freq=freq[keep],
        s_phi=pxx[keep],
        sigma=pxx[keep] / np.sqrt(n_segments),
    )
