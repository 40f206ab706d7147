"""CPMG coherence: forward model, synthetic traces, trace fits and a
time-domain Monte Carlo cross-check.

Signal convention used throughout::

    signal(tau) = a0 + a * exp(-chi(tau)) * exp(-(tau - tau0) / T1)

with ``chi`` the Gaussian dephasing exponent, so ``exp(-chi)`` is the
coherence ``|<exp(i phi)>|`` of the accumulated phase.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from ._quadrature import integrate_panels
from ._validation import as_float_array, check_finite, check_increasing, check_positive
from .errors import (
    DomainError,
    FitError,
    NumericalError,
    ResourceError,
    UnidentifiableError,
)
from .filters import CPMGSequence, dimensionless_filter, switching_function
from .noise import angular_psd, ensemble_seeds, synthesize_batch

#: Upper cut-off of the dephasing integral, in units of pi*N/tau.
UV_HARMONICS = 400
DEFAULT_ACQUISITION_TIME = 1.0
CHI_RTOL = 1e-5
#: Monte Carlo time step is tau / (MC_STEPS_PER_PULSE * N).
MC_STEPS_PER_PULSE = 64
MC_MAX_SAMPLES = 2**22
_MC_BATCH_ELEMENTS = 2**23


# --------------------------------------------------------------------------
# forward model


def coherence_exponents(psd, sensitivity, n_pulses, taus, acquisition_time=DEFAULT_ACQUISITION_TIME):
    """Vectorised :func:`coherence_exponent` over the ``taus`` of one N.

    In ``z = omega * tau`` the exponent reads
    ``chi = (tau D^2 / 2) int S_omega(z / tau) g_N(z) dz`` over
    ``[2 pi tau / T_acq, 400 pi N]``.
    """
    taus = as_float_array(taus, "taus")
    if np.any(taus <= 0):
        raise DomainError("taus must be positive")
    check_positive(acquisition_time, "acquisition_time")
    sensitivity = check_finite(sensitivity, "sensitivity")
    n_pulses = int(n_pulses)
    if psd.is_zero or sensitivity == 0.0:
        return np.zeros_like(taus)

    if np.any(taus > acquisition_time):
        raise DomainError("acquisition_time must be at least the longest tau")
    z_uv = UV_HARMONICS * math.pi * n_pulses
    z_ir = 2 * math.pi * taus / acquisition_time
    # components normalised to O(1) so one relative tolerance suits all taus
    z_ref = math.pi * n_pulses
    scale = angular_psd(psd, z_ref / taus)

    def integrand(z):
        g = dimensionless_filter(n_pulses, z)
        s = angular_psd(psd, z[:, None] / taus[None, :]) / scale[None, :]
        # each tau has its own infrared cut-off; all cut-offs are panel edges
        s[z[:, None] < z_ir[None, :]] = 0.0
        return s * g[:, None]

    edges = np.concatenate([
        z_ir, 0.5 * z_ref * np.arange(1, 2 * UV_HARMONICS), [z_uv],
    ])
    edges = edges[edges >= z_ir.min()]
    total, _ = integrate_panels(integrand, edges, CHI_RTOL)
    return 0.5 * taus * sensitivity**2 * scale * total


def coherence_exponent(psd, sensitivity, seq, acquisition_time=DEFAULT_ACQUISITION_TIME):
    """Dephasing exponent ``chi`` (dimensionless) for one CPMG sequence.

    Parameters
    ----------
    psd : PowerLawPSD
        Flux-noise PSD [Phi0^2/Hz].
    sensitivity : float
        ``d omega_q / d flux`` [rad/s/Phi0].
    seq : CPMGSequence
    acquisition_time : float
        Sets the infrared cut-off ``2 pi / acquisition_time`` [rad/s].
    """
    return float(coherence_exponents(psd, sensitivity, seq.n_pulses, [seq.tau], acquisition_time)[0])


# --------------------------------------------------------------------------
# traces


@dataclass(frozen=True, eq=False)
class CPMGTrace:
    """Readout signal versus total evolution time for a fixed pulse count."""

    n_pulses: int
    tau: np.ndarray
    signal: np.ndarray
    t1: float
    qubit_id: str = ""
    flux: Optional[float] = None
    sigma: Optional[np.ndarray] = None
    tau0: float = 0.0

    def __post_init__(self):
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 1:
            raise DomainError("n_pulses must be a positive integer")
        object.__setattr__(self, "n_pulses", int(self.n_pulses))
        tau = check_increasing(as_float_array(self.tau, "tau", min_len=8), "tau")
        sig = as_float_array(self.signal, "signal", min_len=8)
        if tau.size != sig.size:
            raise DomainError("tau and signal must have equal length")
        check_positive(self.t1, "t1")
        arrays = [("tau", tau), ("signal", sig)]
        if self.sigma is not None:
            s = as_float_array(self.sigma, "sigma")
            if s.size != tau.size or np.any(s <= 0):
                raise DomainError("sigma must be positive and match tau")
            arrays.append(("sigma", s))
        for name, arr in arrays:
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self):
        return self.tau.size

    def sequences(self):
        return [CPMGSequence(self.n_pulses, t, self.tau0) for t in self.tau]


def cpmg_grid(n_values, taus, tau0=0.0):
    """Every (N, tau) combination as a flat list of sequences."""
    return [CPMGSequence(int(n), float(t), tau0) for n in n_values for t in taus]


def simulate_signal(psd, sensitivity, seqs, t1, a0, a, noise_rms=0.0, seed=0, *,
                    acquisition_time=DEFAULT_ACQUISITION_TIME, qubit_id="", flux=None):
    """Synthetic CPMG traces, one per distinct pulse count in ``seqs``.

    Readout noise is Gaussian with standard deviation ``noise_rms``; each
    trace draws from its own seed so results do not depend on how many
    traces are generated together.
    """
    check_positive(t1, "t1")
    check_positive(noise_rms, "noise_rms", strict=False)
    groups = {}
    for s in seqs:
        groups.setdefault(s.n_pulses, []).append(s)
    trace_seeds = ensemble_seeds(seed, len(groups))
    traces = []
    for (n_pulses, group), tseed in zip(groups.items(), trace_seeds):
        group = sorted(group, key=lambda s: s.tau)
        taus = np.array([s.tau for s in group])
        tau0 = group[0].tau0
        chi = coherence_exponents(psd, sensitivity, n_pulses, taus, acquisition_time)
        clean = a0 + a * np.exp(-chi) * np.exp(-(taus - tau0) / t1)
        noise = np.random.default_rng(tseed).standard_normal(taus.size) * noise_rms
        traces.append(CPMGTrace(
            n_pulses=n_pulses, tau=taus, signal=clean + noise, t1=t1,
            qubit_id=qubit_id, flux=flux, tau0=tau0,
        ))
    return traces


# --------------------------------------------------------------------------
# Monte Carlo oracle


@dataclass(frozen=True)
class MonteCarloResult:
    coherence: float
    stderr: float
    phase_variance: float
    n_traj: int
    dt: float
    acquisition_time: float

    @property
    def gaussian_coherence(self):
        """``exp(-<phi^2>/2)`` from the same trajectories."""
        return math.exp(-0.5 * self.phase_variance)


def monte_carlo_coherence(psd, sensitivity, seq, n_traj=1000, seed=0, *,
                          acquisition_time=DEFAULT_ACQUISITION_TIME, n_bootstrap=400):
    """Coherence ``|<exp(i phi)>|`` averaged over synthetic noise trajectories.

    Each trajectory spans ``acquisition_time`` (same infrared cut-off as
    :func:`coherence_exponent`) at step ``tau / (64 N)``; the phase
    ``phi = D sum f(t) dPhi(t) dt`` is accumulated over the first ``tau``.
    """
    if n_traj < 100:
        raise DomainError("n_traj must be >= 100")
    check_finite(sensitivity, "sensitivity")
    dt = seq.tau / (MC_STEPS_PER_PULSE * seq.n_pulses)
    check_positive(acquisition_time, "acquisition_time")
    if acquisition_time < seq.tau:
        raise DomainError("acquisition_time must be at least tau")
    n_total = int(round(acquisition_time / dt))
    if n_total > MC_MAX_SAMPLES:
        raise ResourceError(
            f"{n_total} samples per trajectory at dt={dt:.3g} s exceeds {MC_MAX_SAMPLES}; "
            "shorten acquisition_time"
        )
    n_tau = MC_STEPS_PER_PULSE * seq.n_pulses
    if psd.is_zero or sensitivity == 0.0:
        return MonteCarloResult(1.0, 0.0, 0.0, int(n_traj), dt, acquisition_time)

    t_mid = (np.arange(n_tau) + 0.5) * dt
    weights = sensitivity * switching_function(seq, t_mid) * dt
    seeds = ensemble_seeds(seed, n_traj)
    batch = max(1, _MC_BATCH_ELEMENTS // n_total)
    phases = np.empty(n_traj)
    for start in range(0, n_traj, batch):
        chunk = seeds[start:start + batch]
        rows = synthesize_batch(psd, n_total * dt, dt, chunk, n_keep=n_tau)
        phases[start:start + len(chunk)] = rows @ weights

    phasors = np.exp(1j * phases)
    coherence = float(abs(phasors.mean()))
    rng = np.random.default_rng([int(seed), 0x5EED])
    idx = rng.integers(0, n_traj, size=(n_bootstrap, n_traj))
    boot = np.abs(phasors[idx].mean(axis=1))
    return MonteCarloResult(
        coherence=coherence,
        stderr=float(boot.std(ddof=1)),
        phase_variance=float(np.mean(phases**2)),
        n_traj=int(n_traj),
        dt=dt,
        acquisition_time=n_total * dt,
    )


# --------------------------------------------------------------------------
# fitting


def decay_model(tau, a0, a, t2, tau0, t1):
    """``a0 + a exp(-(tau-tau0)^2 / 2 T2^2) exp(-(tau-tau0)/T1)``."""
    dtau = np.asarray(tau, dtype=float) - tau0
    return a0 + a * np.exp(-dtau**2 / (2 * t2**2)) * np.exp(-dtau / t1)


@dataclass(frozen=True)
class TraceFit:
    a0: float
    a: float
    t2: float
    tau0: float
    residual_rms: float
    tau_range: Optional[tuple] = None
    n_included: int = 0
    stderr: dict = field(default_factory=dict)
    n_pulses: Optional[int] = None
    t1: Optional[float] = None

    def floor(self, noise_floor_sigma=3.0):
        """Lowest normalised signal ``(s - a0)/a`` counted as above the floor."""
        return noise_floor_sigma * self.residual_rms / abs(self.a)

    def normalize(self, signal):
        return (np.asarray(signal, dtype=float) - self.a0) / self.a

    def to_dict(self):
        return {
            "n_pulses": self.n_pulses,
            "a0": self.a0,
            "a": self.a,
            "t2_s": self.t2,
            "tau0_s": self.tau0,
            "t1_s": self.t1,
            "residual_rms": self.residual_rms,
            "tau_range_s": list(self.tau_range) if self.tau_range else None,
            "n_included": self.n_included,
            "stderr": dict(self.stderr),
        }


class CPMGTraceFitter(RegressorMixin, BaseEstimator):
    """Least-squares fit of a CPMG decay with the energy-relaxation time held fixed.

    Parameters
    ----------
    t1 : float
        Independently measured energy relaxation time [s].
    tau0 : float
        Time origin offset; starting value when ``fit_tau0`` is true.
    fit_tau0 : bool
        Whether ``tau0`` is a free parameter.
    n_restarts : int
        Perturbed restarts tried when the first solve fails.
    noise_floor_sigma : float
        Points with ``(s - a0)/a`` below ``noise_floor_sigma * rms / |a|``
        are reported as below the noise floor.

    Attributes
    ----------
    a0_, a_, t2_, tau0_ : float
        Fitted parameters.
    residual_rms_ : float
    tau_range_ : tuple or None
        Smallest and largest tau whose normalised signal is above the floor.
    """

    def __init__(self, t1=1.0, tau0=0.0, fit_tau0=False, n_restarts=5, noise_floor_sigma=3.0):
        self.t1 = t1
        self.tau0 = tau0
        self.fit_tau0 = fit_tau0
        self.n_restarts = n_restarts
        self.noise_floor_sigma = noise_floor_sigma

    def _unpack(self, p):
        tau0 = p[3] if self.fit_tau0 else self.tau0
        return p[0], p[1], math.exp(p[2]), tau0

    def fit(self, X, y, sample_weight=None):
        tau = check_array(X, ensure_2d=False, dtype=float).reshape(-1)
        y = check_array(y, ensure_2d=False, dtype=float).reshape(-1)
        check_consistent_length(tau, y)
        check_positive(self.t1, "t1")
        if tau.size < 4 + int(self.fit_tau0):
            raise FitError("too few points to fit the decay")
        w = np.ones_like(y) if sample_weight is None else np.sqrt(np.asarray(sample_weight, float))

        scale = max(np.max(np.abs(y)), np.finfo(float).tiny)
        if np.ptp(y) <= 1e-12 * scale:
            raise UnidentifiableError("signal is constant; T2 cannot be identified")

        order = np.argsort(tau)
        tau, y, w = tau[order], y[order], w[order]
        n_tail = max(3, tau.size // 5)
        a0_init = float(np.median(y[-n_tail:]))
        a_init = float(y[0] - a0_init)
        if a_init == 0.0:
            a_init = float(y[np.argmax(np.abs(y - a0_init))] - a0_init)
        norm = (y - a0_init) / a_init * np.exp((tau - self.tau0) / self.t1)
        below = np.nonzero(norm < 0.5)[0]
        t2_init = float(tau[below[0]]) if below.size else float(tau[-1])
        t2_init = max(t2_init, float(tau[1] - tau[0]))

        def residuals(p):
            a0, a, t2, tau0 = self._unpack(p)
            return w * (decay_model(tau, a0, a, t2, tau0, self.t1) - y)

        starts = [(1.0, 1.0)]
        factors = [0.5, 2.0, 0.25, 4.0, 0.1, 10.0]
        for k in range(int(self.n_restarts)):
            starts.append((factors[k % len(factors)], 1.0 + 0.1 * (-1) ** k * (k // 2 + 1)))

        best = None
        attempts = []
        for t2_factor, a_factor in starts:
            p0 = [a0_init, a_init * a_factor, math.log(t2_init * t2_factor)]
            if self.fit_tau0:
                p0.append(self.tau0)
            try:
                res = optimize.least_squares(
                    residuals, p0, method="trf", x_scale="jac",
                    ftol=1e-12, xtol=1e-12, gtol=1e-12, max_nfev=5000,
                )
            except (ValueError, FloatingPointError) as exc:
                attempts.append(str(exc))
                continue
            attempts.append(f"status={res.status} cost={res.cost:.3g}")
            if res.status > 0 and np.all(np.isfinite(res.x)):
                best = res
                break
        if best is None:
            raise FitError("decay fit did not converge", {"attempts": attempts})

        a0, a, t2, tau0 = self._unpack(best.x)
        resid = decay_model(tau, a0, a, t2, tau0, self.t1) - y
        rms = float(np.sqrt(np.mean(resid**2)))
        if abs(a) <= max(self.noise_floor_sigma * rms, 1e-12 * scale):
            raise UnidentifiableError(
                f"fitted amplitude {a:.3g} does not rise above the noise ({rms:.3g} rms)"
            )
        self.a0_, self.a_, self.t2_, self.tau0_ = float(a0), float(a), float(t2), float(tau0)
        self.residual_rms_ = rms
        self.stderr_ = self._stderr(best, rms, tau.size)

        normed = (y - a0) / a
        keep = normed >= self.noise_floor_sigma * rms / abs(a)
        self.n_included_ = int(keep.sum())
        self.tau_range_ = (float(tau[keep].min()), float(tau[keep].max())) if keep.any() else None
        return self

    def _stderr(self, res, rms, n):
        dof = n - res.x.size
        try:
            cov = np.linalg.pinv(res.jac.T @ res.jac) * (2 * res.cost / max(dof, 1))
        except np.linalg.LinAlgError:
            return {}
        err = np.sqrt(np.clip(np.diag(cov), 0, None))
        out = {"a0": float(err[0]), "a": float(err[1]), "t2": float(err[2] * self.t2_)}
        if self.fit_tau0:
            out["tau0"] = float(err[3])
        return out

    def predict(self, X):
        check_is_fitted(self, "t2_")
        tau = check_array(X, ensure_2d=False, dtype=float).reshape(-1)
        return decay_model(tau, self.a0_, self.a_, self.t2_, self.tau0_, self.t1)


def fit_trace(trace, *, noise_floor_sigma=3.0, n_restarts=5, fit_tau0=False):
    """Fit one :class:`CPMGTrace` with its T1 fixed; returns a :class:`TraceFit`."""
    weight = None if trace.sigma is None else 1.0 / trace.sigma**2
    est = CPMGTraceFitter(
        t1=trace.t1, tau0=trace.tau0, fit_tau0=fit_tau0,
        n_restarts=n_restarts, noise_floor_sigma=noise_floor_sigma,
    ).fit(trace.tau, trace.signal, sample_weight=weight)
    return TraceFit(
        a0=est.a0_, a=est.a_, t2=est.t2_, tau0=est.tau0_,
        residual_rms=est.residual_rms_, tau_range=est.tau_range_,
        n_included=est.n_included_, stderr=est.stderr_,
        n_pulses=trace.n_pulses, t1=trace.t1,
    )
