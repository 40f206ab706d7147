"""Dielectric loss budget: participation ratios times loss tangents.

The smooth relaxation rate of a qubit at frequency ``f_q`` is

    1/T1 = 2 pi f_q (p_ms tan_ms + p_sa tan_sa + p_ma tan_ma + p_bulk tan_bulk) + other_rate

and resonant loss channels add Lorentzian rate peaks on top of it.
Tangents are fitted in rate space, where the channels add linearly.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_consistent_length, check_is_fitted

from ._validation import as_float_array, check_finite, check_increasing, check_positive
from .errors import DegeneracyError, DomainError

INTERFACES = ("ms", "sa", "ma", "bulk")
#: Relative spread of bulk participations tolerated by the bulk-constant model.
BULK_SPREAD_TOL = 0.10
#: Default bulk participation. A user input; no tabulated value exists.
DEFAULT_P_BULK = 0.9
#: Metal-substrate loss tangent of the constant-tangent guide line.
TAN_MS_REFERENCE = 6e-3

# Surface participations (MS, SA, MA) per design.
SURFACE_PARTICIPATIONS = (
    ("A suspended", 1.25e-5, 2.90e-4, 5.74e-6),
    ("A regular", 6.16e-5, 6.40e-5, 1.90e-6),
    ("B", 1.39e-4, 1.64e-4, 1.45e-5),
    ("C 30um", 3.32e-4, 3.83e-4, 3.53e-5),
    ("C 20um", 3.96e-4, 4.55e-4, 4.22e-5),
    ("C 10um", 5.63e-4, 6.49e-4, 6.19e-5),
    ("C 6um", 7.64e-4, 8.85e-4, 8.74e-5),
    ("C 3um", 1.25e-3, 1.46e-3, 1.55e-4),
    ("C 1.5um", 2.16e-3, 2.36e-3, 3.16e-4),
)

# Fabrication steps of design-A qubits and their best T1 [s]. Metadata only.
FABRICATION_MAX_T1 = (
    {"clean1": None, "clean2": None, "drie": False, "clean3": None, "max_t1_s": 4e-6},
    {"clean1": "BOE", "clean2": None, "drie": False, "clean3": None, "max_t1_s": 6e-6},
    {"clean1": "BOE", "clean2": None, "drie": True, "clean3": None, "max_t1_s": 63e-6},
    {"clean1": "BOE", "clean2": None, "drie": True, "clean3": "OPA", "max_t1_s": 59e-6},
    {"clean1": "BOE", "clean2": "OPA", "drie": False, "clean3": None, "max_t1_s": 7e-6},
    {"clean1": "BOE", "clean2": "OPA", "drie": True, "clean3": "OPA", "max_t1_s": 50e-6},
    {"clean1": "OPA", "clean2": "OPA", "drie": False, "clean3": "OPA", "max_t1_s": 23e-6},
    {"clean1": "OPA", "clean2": "OPA", "drie": True, "clean3": "OPA", "max_t1_s": 44e-6},
)


class BulkParticipationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ParticipationRow:
    design_id: str
    p_ms: float
    p_sa: float
    p_ma: float
    p_bulk: float

    def __post_init__(self):
        for name in ("p_ms", "p_sa", "p_ma", "p_bulk"):
            v = check_finite(getattr(self, name), name)
            if not 0.0 < v < 1.0:
                raise DomainError(f"{self.design_id}: {name} = {v} is outside (0, 1)")
            object.__setattr__(self, name, v)

    def vector(self):
        return np.array([self.p_ms, self.p_sa, self.p_ma, self.p_bulk])


class ParticipationTable:
    """Participation rows keyed by design id, in insertion order."""

    def __init__(self, rows):
        self._rows = {}
        for row in rows:
            if row.design_id in self._rows:
                raise DomainError(f"duplicate design id {row.design_id!r}")
            self._rows[row.design_id] = row
        if not self._rows:
            raise DomainError("participation table is empty")

    @classmethod
    def from_surface_table(cls, table=SURFACE_PARTICIPATIONS, p_bulk=DEFAULT_P_BULK):
        return cls(ParticipationRow(d, ms, sa, ma, p_bulk) for d, ms, sa, ma in table)

    def __getitem__(self, design_id):
        return self._rows[design_id]

    def __iter__(self):
        return iter(self._rows.values())

    def __len__(self):
        return len(self._rows)

    @property
    def design_ids(self):
        return list(self._rows)

    def matrix(self):
        """Participations as an array of shape (rows, 4), columns ms, sa, ma, bulk."""
        return np.array([r.vector() for r in self])

    def bulk_spread(self):
        """``(max - min) / mean`` of the bulk participations."""
        p = self.matrix()[:, 3]
        return float(np.ptp(p) / p.mean())

    def check_bulk_similarity(self, tol=BULK_SPREAD_TOL):
        """Warn and return False if bulk participations differ by more than ``tol``."""
        spread = self.bulk_spread()
        if spread > tol:
            warnings.warn(
                f"bulk participations spread by {spread:.1%} (> {tol:.0%}); a single "
                "bulk tangent may not describe every design",
                BulkParticipationWarning,
                stacklevel=2,
            )
            return False
        return True


@dataclass(frozen=True)
class ResonantChannel:
    """Lorentzian rate peak: ``rate_peak`` [1/s] at ``f_k`` [Hz], FWHM ``linewidth`` [Hz]."""

    f_k: float
    rate_peak: float
    linewidth: float

    def __post_init__(self):
        check_positive(self.f_k, "f_k")
        check_positive(self.rate_peak, "rate_peak", strict=False)
        check_positive(self.linewidth, "linewidth")

    def rate(self, f):
        hw2 = (0.5 * self.linewidth) ** 2
        return self.rate_peak * hw2 / ((np.asarray(f, dtype=float) - self.f_k) ** 2 + hw2)


@dataclass(frozen=True)
class LossModel:
    tan_ms: float = 0.0
    tan_sa: float = 0.0
    tan_ma: float = 0.0
    tan_bulk: float = 0.0
    other_rate: float = 0.0
    resonant_channels: tuple = ()

    def __post_init__(self):
        for name in ("tan_ms", "tan_sa", "tan_ma", "tan_bulk", "other_rate"):
            check_positive(getattr(self, name), name, strict=False)
        object.__setattr__(self, "resonant_channels", tuple(self.resonant_channels))

    @property
    def tangents(self):
        return np.array([self.tan_ms, self.tan_sa, self.tan_ma, self.tan_bulk])

    def smooth_rate(self, parts, f_q):
        """Participation-weighted rate plus ``other_rate`` [1/s]; no resonances."""
        p = parts.vector() if isinstance(parts, ParticipationRow) else np.asarray(parts, float)
        return 2 * math.pi * np.asarray(f_q, dtype=float) * float(p @ self.tangents) + self.other_rate

    def to_dict(self):
        return {
            "tan_ms": self.tan_ms,
            "tan_sa": self.tan_sa,
            "tan_ma": self.tan_ma,
            "tan_bulk": self.tan_bulk,
            "other_rate_per_s": self.other_rate,
            "resonant_channels": [
                {"f_k_hz": c.f_k, "rate_peak_per_s": c.rate_peak, "linewidth_hz": c.linewidth}
                for c in self.resonant_channels
            ],
        }

    @classmethod
    def from_dict(cls, data):
        allowed = {"tan_ms", "tan_sa", "tan_ma", "tan_bulk", "other_rate_per_s", "resonant_channels"}
        unknown = set(data) - allowed
        if unknown:
            raise DomainError(f"unknown loss model keys: {sorted(unknown)}")
        channels = tuple(
            ResonantChannel(c["f_k_hz"], c["rate_peak_per_s"], c["linewidth_hz"])
            for c in data.get("resonant_channels", ())
        )
        return cls(
            tan_ms=float(data.get("tan_ms", 0.0)),
            tan_sa=float(data.get("tan_sa", 0.0)),
            tan_ma=float(data.get("tan_ma", 0.0)),
            tan_bulk=float(data.get("tan_bulk", 0.0)),
            other_rate=float(data.get("other_rate_per_s", 0.0)),
            resonant_channels=channels,
        )


def t1_limit(parts, model, f_q):
    """Smooth T1 limit [s]; ``math.inf`` when the total rate is zero."""
    check_positive(f_q, "f_q")
    rate = float(model.smooth_rate(parts, f_q))
    return math.inf if rate == 0.0 else 1.0 / rate


def t1_vs_frequency(parts, model, f_grid):
    """T1 [s] over ``f_grid`` [Hz] including resonant channels."""
    f = check_increasing(as_float_array(f_grid, "f_grid"), "f_grid")
    if np.any(f <= 0):
        raise DomainError("frequencies must be positive")
    rate = model.smooth_rate(parts, f) * np.ones_like(f)
    for ch in model.resonant_channels:
        rate = rate + ch.rate(f)
    with np.errstate(divide="ignore"):
        return np.where(rate > 0, 1.0 / rate, np.inf)


@dataclass(frozen=True, eq=False)
class LossFit:
    model: LossModel
    free: tuple
    covariance: np.ndarray
    #: measured minus predicted rate [1/s], in input row order
    residuals: np.ndarray
    design_ids: tuple = ()
    reduced_chi2: float = float("nan")

    @property
    def stderr(self):
        err = np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))
        return dict(zip(self.free, err.tolist()))

    def to_dict(self):
        out = self.model.to_dict()
        out["free"] = list(self.free)
        out["stderr"] = self.stderr
        out["reduced_chi2"] = self.reduced_chi2
        out["residuals_per_s"] = dict(zip(self.design_ids, self.residuals.tolist()))
        return out


def _free_columns(free, fit_other_rate):
    free = tuple(free)
    names = []
    for name in free:
        if name not in INTERFACES:
            raise DomainError(f"unknown interface {name!r}; expected one of {INTERFACES}")
        names.append(name)
    if len(set(names)) != len(names):
        raise DomainError("repeated interface in free set")
    if fit_other_rate:
        names.append("other")
    return tuple(names)


def _design(parts, f_q, names):
    cols = []
    for name in names:
        if name == "other":
            cols.append(np.ones(len(f_q)))
        else:
            cols.append(2 * math.pi * f_q * parts[:, INTERFACES.index(name)])
    return np.column_stack(cols)


def _null_combination(a_w, names, col):
    _, s, vt = np.linalg.svd(a_w, full_matrices=True)
    rank = int(np.sum(s > s[0] * 1e-10)) if s.size else 0
    if rank >= len(names):
        return None
    v = (vt[-1] if rank == 0 else vt[rank]) / col
    v = v / np.max(np.abs(v))
    terms = [f"{c:+.3g}*tan_{n}" if n != "other" else f"{c:+.3g}*other_rate"
             for c, n in zip(v, names) if abs(c) > 1e-12]
    return " ".join(terms)


def fit_loss_tangents(parts, t1, f_q, *, free=("ms", "bulk"), fit_other_rate=False,
                      t1_rel_sigma=None, fixed=None):
    """Nonnegative weighted least squares of ``1/T1`` on participation vectors.

    Parameters
    ----------
    parts : ParticipationTable or sequence of ParticipationRow
    t1 : array_like
        Measured T1 per row [s].
    f_q : float or array_like
        Qubit frequency per row [Hz].
    free : tuple of str
        Interfaces whose tangents are fitted; the rest come from ``fixed``.
    fit_other_rate : bool
        Also fit a participation-independent rate.
    t1_rel_sigma : float or array_like, optional
        Relative T1 uncertainty per row. Each rate residual is weighted by
        ``1 / (rate * rel_sigma)``; equal relative weights when omitted.
    fixed : LossModel, optional
        Source of tangents that are not free.

    Raises
    ------
    DegeneracyError
        If the design matrix is rank deficient. The message names the
        tangent combination the data cannot constrain.
    """
    rows = list(parts)
    if not rows:
        raise DomainError("no participation rows")
    names = _free_columns(free, fit_other_rate)
    p = np.array([r.vector() for r in rows])
    t1 = as_float_array(t1, "t1")
    if t1.size != len(rows):
        raise DomainError("need one T1 per participation row")
    if np.any(t1 <= 0):
        raise DomainError("T1 values must be positive")
    fq = np.broadcast_to(as_float_array(f_q, "f_q"), t1.shape).astype(float)
    if np.any(fq <= 0):
        raise DomainError("qubit frequencies must be positive")
    rel = np.ones_like(t1) if t1_rel_sigma is None else np.broadcast_to(
        as_float_array(t1_rel_sigma, "t1_rel_sigma"), t1.shape)
    if np.any(rel <= 0):
        raise DomainError("t1_rel_sigma must be positive")

    fixed = LossModel() if fixed is None else fixed
    rate = 1.0 / t1
    fixed_tan = fixed.tangents.copy()
    for name in names:
        if name != "other":
            fixed_tan[INTERFACES.index(name)] = 0.0
    offset = 2 * math.pi * fq * (p @ fixed_tan) + (0.0 if fit_other_rate else fixed.other_rate)
    target = rate - offset

    a = _design(p, fq, names)
    w = 1.0 / (rate * rel)
    a_w = a * w[:, None]
    # column scaling keeps the tangent and rate columns comparable
    col = np.linalg.norm(a_w, axis=0)
    col[col == 0] = 1.0
    a_s = a_w / col
    combo = _null_combination(a_s, names, col)
    if combo is not None:
        raise DegeneracyError(
            f"loss tangents are not identifiable from {len(rows)} row(s): "
            f"unconstrained combination {combo}",
            {"free": list(names), "rows": len(rows), "null_combination": combo},
        )
    coef_s, _ = optimize.nnls(a_s, target * w, maxiter=50 * len(names))
    coef = coef_s / col

    resid_w = target * w - a_s @ coef_s
    dof = len(rows) - len(names)
    red = float(resid_w @ resid_w / dof) if dof > 0 else float("nan")
    cov_s = np.linalg.pinv(a_s.T @ a_s)
    cov = cov_s / np.outer(col, col)
    if t1_rel_sigma is None and dof > 0:
        cov = cov * red

    values = fixed.to_dict()
    for name, c in zip(names, coef):
        if name == "other":
            values["other_rate_per_s"] = float(c)
        else:
            values[f"tan_{name}"] = float(c)
    model = LossModel.from_dict(values)
    predicted = np.array([model.smooth_rate(r, f) for r, f in zip(rows, fq)])
    return LossFit(
        model=model,
        free=names,
        covariance=cov,
        residuals=rate - predicted,
        design_ids=tuple(r.design_id for r in rows),
        reduced_chi2=red,
    )


def guide_curves(p_ms, *, tan_ms=TAN_MS_REFERENCE, tan_bulk=0.0, p_bulk=DEFAULT_P_BULK, f_q=5e9):
    """T1 guide lines versus MS participation.

    Returns a dict of arrays: ``constant_tangent`` (MS loss only),
    ``bulk`` (bulk loss only, flat in ``p_ms``) and ``combined`` (rates
    added). Zero rates map to ``inf``.
    """
    p_ms = as_float_array(p_ms, "p_ms")
    if np.any(p_ms <= 0):
        raise DomainError("p_ms must be positive")
    check_positive(f_q, "f_q")
    omega = 2 * math.pi * f_q
    rate_ms = omega * p_ms * tan_ms
    rate_bulk = np.full_like(p_ms, omega * p_bulk * tan_bulk)
    rate_all = rate_ms + rate_bulk
    with np.errstate(divide="ignore"):
        inv = lambda r: np.where(r > 0, 1.0 / r, np.inf)
        return {
            "p_ms": p_ms,
            "constant_tangent": inv(rate_ms),
            "bulk": inv(rate_bulk),
            "combined": inv(rate_all),
            "rate_constant_tangent": rate_ms,
            "rate_bulk": rate_bulk,
            "rate_combined": rate_all,
        }


class LossTangentRegressor(RegressorMixin, BaseEstimator):
    """Estimator wrapper around :func:`fit_loss_tangents`.

    ``X`` has columns ``p_ms, p_sa, p_ma, p_bulk, f_q``; ``y`` is T1 [s].
    ``predict`` returns smooth T1 limits.
    """

    def __init__(self, free=("ms", "bulk"), fit_other_rate=False):
        self.free = free
        self.fit_other_rate = fit_other_rate

    def fit(self, X, y, t1_rel_sigma=None):
        X = check_array(X, dtype=float)
        y = check_array(y, ensure_2d=False, dtype=float).reshape(-1)
        check_consistent_length(X, y)
        if X.shape[1] != 5:
            raise DomainError("X needs columns p_ms, p_sa, p_ma, p_bulk, f_q")
        rows = [ParticipationRow(f"row{i}", *x[:4]) for i, x in enumerate(X)]
        self.result_ = fit_loss_tangents(rows, y, X[:, 4], free=self.free,
                                         fit_other_rate=self.fit_other_rate,
                                         t1_rel_sigma=t1_rel_sigma)
        self.model_ = self.result_.model
        self.tangents_ = self.model_.tangents
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=float)
        rate = 2 * math.pi * X[:, 4] * (X[:, :4] @ self.tangents_) + self.model_.other_rate
        with np.errstate(divide="ignore"):
            return np.where(rate > 0, 1.0 / rate, np.inf)
