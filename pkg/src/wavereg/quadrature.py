"""Uniform-grid Simpson quadrature, plain and with an analytic oscillatory weight.

Everything here integrates sampled data y_j = g(t_j) on t_j = j*dx. The
weighted rule computes

    I(t_n) = int_0^{t_n} e^{i*omega*t} g(t) dt

by replacing g with its piecewise quadratic interpolant (classic Simpson
panels spanning two intervals) and integrating t^n * e^{i*omega*t} exactly on
each panel. At omega = 0 this reduces to composite Simpson, cumulative
variant included, so the plain rule is the omega = 0 special case of the
weighted one. Odd nodes and an odd final interval are handled by integrating
the local quadratic over half a panel, which is the same policy
scipy.integrate.cumulative_simpson uses.

The phase moments int_a^b t^n e^{i*omega*t} dt are evaluated in closed form
for |omega*b| >= 1/4 and by a truncated power series below that, so small
phases lose no precision to cancellation. `omega` may be a scalar or a vector
(one frequency per column of `y`), which is how per-mode Schrodinger kernels
are applied to trajectories of Fourier coefficients.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "simpson_uniform",
    "cumulative_simpson_uniform",
    "cumulative_weighted_simpson",
    "weighted_simpson",
]

_SERIES_TERMS = 18
_SERIES_CUTOFF = 0.25


def _phase_moments(omega: np.ndarray, b: float) -> np.ndarray:
    """Moments M_n = int_0^b t^n e^{i*omega*t} dt for n = 0, 1, 2.

    Returns an array of shape (3,) + omega.shape.
    """
    omega = np.asarray(omega, dtype=float)
    shape = omega.shape
    om = omega.ravel()
    out = np.empty((3, om.size), dtype=complex)
    small = np.abs(om * b) < _SERIES_CUTOFF
    # Series: M_n = sum_m (i*omega)^m b^{n+m+1} / (m! (n+m+1))
    if np.any(small):
        w = om[small]
        for n in range(3):
            acc = np.zeros(w.shape, dtype=complex)
            term = np.ones(w.shape, dtype=complex)  # (i w)^m / m!
            for m in range(_SERIES_TERMS):
                acc = acc + term * (b ** (n + m + 1)) / (n + m + 1)
                term = term * (1j * w) / (m + 1)
            out[n, small] = acc
    big = ~small
    if np.any(big):
        w = om[big]
        iw = 1j * w
        e = np.exp(iw * b)
        m0 = (e - 1.0) / iw
        m1 = (b * e - m0) / iw
        m2 = (b * b * e - 2.0 * m1) / iw
        out[0, big] = m0
        out[1, big] = m1
        out[2, big] = m2
    return out.reshape((3,) + shape)


def _panel_coeffs(y0, y1, y2, h: float):
    """Monomial coefficients of the quadratic through (0,y0), (h,y1), (2h,y2)."""
    c0 = y0
    c1 = (-3.0 * y0 + 4.0 * y1 - y2) / (2.0 * h)
    c2 = (y0 - 2.0 * y1 + y2) / (2.0 * h * h)
    return c0, c1, c2


def cumulative_weighted_simpson(y: np.ndarray, omega, dx: float) -> np.ndarray:
    """Cumulative int_0^{t_j} e^{i*omega*t} g(t) dt for sampled g.

    Parameters
    ----------
    y : array, shape (n_samples, ...) with n_samples >= 3
        Samples of g along axis 0.
    omega : scalar or array broadcastable to y.shape[1:]
        Phase rate of the analytic weight.
    dx : positive sample spacing.

    Returns an array of y's shape (complex), cumulative integral at each node,
    starting at 0.
    """
    y = np.asarray(y)
    n = y.shape[0]
    if n < 3:
        raise ValueError("need at least 3 samples for a Simpson panel")
    if dx <= 0:
        raise ValueError("dx must be positive")
    omega = np.broadcast_to(np.asarray(omega, dtype=float), y.shape[1:]).copy()
    h = float(dx)
    mom_h = _phase_moments(omega, h)        # int_0^h
    mom_2h = _phase_moments(omega, 2 * h)   # int_0^{2h}
    mom_back = mom_2h - mom_h               # int_h^{2h}
    out = np.zeros(y.shape, dtype=complex)
    acc = np.zeros(y.shape[1:], dtype=complex)
    # e^{i*omega*t_j} carried explicitly per panel start.
    for j in range(0, n - 2, 2):
        phase = np.exp(1j * omega * (j * h))
        c0, c1, c2 = _panel_coeffs(y[j], y[j + 1], y[j + 2], h)
        out[j + 1] = acc + phase * (c0 * mom_h[0] + c1 * mom_h[1] + c2 * mom_h[2])
        acc = acc + phase * (c0 * mom_2h[0] + c1 * mom_2h[1] + c2 * mom_2h[2])
        out[j + 2] = acc
    if n % 2 == 0:
        # Odd final interval: quadratic through the last three nodes,
        # integrated over its second half.
        j = n - 3
        phase = np.exp(1j * omega * (j * h))
        c0, c1, c2 = _panel_coeffs(y[j], y[j + 1], y[j + 2], h)
        out[n - 1] = out[n - 2] + phase * (
            c0 * mom_back[0] + c1 * mom_back[1] + c2 * mom_back[2]
        )
    return out


def weighted_simpson(y: np.ndarray, omega, dx: float) -> np.ndarray:
    """int_0^{T} e^{i*omega*t} g(t) dt over the whole sampled interval."""
    return cumulative_weighted_simpson(y, omega, dx)[-1]


def cumulative_simpson_uniform(y: np.ndarray, dx: float) -> np.ndarray:
    """Cumulative composite Simpson along axis 0 (starts at 0)."""
    out = cumulative_weighted_simpson(y, 0.0, dx)
    if np.isrealobj(y):
        return out.real
    return out


def simpson_uniform(y: np.ndarray, dx: float):
    """Composite Simpson along axis 0."""
    return cumulative_simpson_uniform(y, dx)[-1]
