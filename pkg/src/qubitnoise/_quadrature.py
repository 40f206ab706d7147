"""Vectorised adaptive Gauss-Legendre quadrature.

``scipy.integrate.quad_vec`` evaluates the integrand one abscissa at a
time, which dominates the cost of the dephasing integral. Here every
active subinterval is evaluated in one call and the subintervals that
miss the tolerance are bisected.
"""

import numpy as np

from .errors import NumericalError

_ORDER = 16
_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(_ORDER)


def _panel(fun, a, b):
    """Gauss-Legendre estimate on each panel ``[a_i, b_i]``; shape (panels, T)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    z = (mid[:, None] + half[:, None] * _NODES[None, :]).ravel()
    vals = fun(z).reshape(a.size, _ORDER, -1)
    return half[:, None] * np.einsum("k,pkt->pt", _WEIGHTS, vals)


def integrate_panels(fun, edges, rtol, *, max_rounds=60, max_panels=200_000):
    """Integrate ``fun`` over ``[edges[0], edges[-1]]``.

    ``fun`` maps an array of abscissae of shape (K,) to values of shape
    (K, T). Each panel's error is estimated by comparing its estimate with
    the sum over its two halves. Panels are bisected until the summed
    error of every output component is below ``rtol`` times that
    component's integral.

    Returns ``(integral, error_estimate)``, both of shape (T,).
    """
    edges = np.unique(np.asarray(edges, dtype=float))
    a, b = edges[:-1], edges[1:]
    whole = _panel(fun, a, b)
    done = np.zeros(whole.shape[1])
    done_err = np.zeros(whole.shape[1])
    for _ in range(max_rounds):
        m = 0.5 * (a + b)
        left = _panel(fun, a, m)
        right = _panel(fun, m, b)
        refined = left + right
        err = np.abs(refined - whole)
        total = done + refined.sum(axis=0)
        scale = np.maximum(np.abs(total), np.finfo(float).tiny)
        budget = rtol * scale
        if np.all(done_err + err.sum(axis=0) <= budget):
            return total, done_err + err.sum(axis=0)
        # settle panels whose error is a small share of the remaining budget
        remaining = np.maximum(budget - done_err, np.finfo(float).tiny)
        share = np.max(err / remaining, axis=1)
        settle = share <= 1.0 / (2.0 * a.size)
        done += refined[settle].sum(axis=0)
        done_err += err[settle].sum(axis=0)
        keep = ~settle
        if 2 * keep.sum() > max_panels:
            break
        a = np.concatenate([a[keep], m[keep]])
        b = np.concatenate([m[keep], b[keep]])
        whole = np.concatenate([left[keep], right[keep]])
        if a.size == 0:
            return done, done_err
    raise NumericalError(
        "adaptive quadrature did not converge",
        {"panels": int(a.size), "relative_error": float(np.max((done_err + err.sum(axis=0)) / scale))},
    )
