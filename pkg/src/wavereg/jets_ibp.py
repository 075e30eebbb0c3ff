"""Oscillatory integration by parts for the first reduced component.

The slow equation has the shape dw1/dt = (mu(t)/eps) f(w1) + R1 with
f(u) = (Id - mean) u^3 and mu(t) = -i lambda^2 exp(2it/eps).  Each
integration by parts against the explicit phase trades one power of the
small amplitude for a boundary term; iterating n times produces a
polynomial boundary expression P_n, a transported remainder operator
bold_R_n acting on R1, and one leftover integral carrying f_n, the n-th
iterate of the chain f_{k+1}(u) = f_k'(u)[f(u)].

f_n is not expanded symbolically.  Along the auxiliary flow du/dt = f(u)
every f_n(u) is the n-th time derivative of f(u(t)) at t = 0, so the Taylor
jet of that flow delivers the whole tower at once:

    f_n(u) = n! (n+1) u_{n+1},   (j+1) u_{j+1} = (Id - mean) sum_{a+b+c=j} u_a u_b u_c.

Directional derivatives f_n'(u)[v] ride along as tangent jets of the same
recurrence.  The residual evaluators at the bottom check the resulting
implicit representations against sampled trajectories; they are the
numerical arbiter for every sign in this file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadrature import simpson_uniform
from .spectral import (
    SpectralField,
    conjugate,
    multiply,
    norm,
    remove_mean,
    zeros,
)

_MAX_DEPTH = 16  # factorial growth of the coefficients overflows doubles near 20


def _cubic_level(levels: list, j: int) -> SpectralField:
    """sum_{a+b+c=j} u_a u_b u_c over ordered triples, computed over the
    a <= b <= c representatives with multiplicities."""
    grid = levels[0].grid
    total = zeros(grid)
    for a in range(j + 1):
        for b in range(a, (j - a) // 2 + 1):
            c = j - a - b
            term = multiply([levels[a], levels[b], levels[c]])
            if a == b == c:
                weight = 1
            elif a == b or b == c:
                weight = 3
            else:
                weight = 6
            total = total + weight * term
    return total


def _cubic_level_ordered(levels: list, j: int) -> SpectralField:
    """Literal ordered-triple evaluation of the same sum; the independent
    path used to verify a JetSequence on construction."""
    grid = levels[0].grid
    total = zeros(grid)
    for a in range(j + 1):
        for b in range(j + 1 - a):
            c = j - a - b
            total = total + multiply([levels[a], levels[b], levels[c]])
    return total


@dataclass(frozen=True)
class JetSequence:
    """Taylor coefficients u_0, ..., u_depth of the flow of du/dt = f(u)."""

    base: SpectralField
    coeffs: list

    def __post_init__(self) -> None:
        if not self.coeffs:
            raise ValueError("a jet needs at least the zeroth coefficient")
        if norm(self.coeffs[0] - self.base, "L2") > 1e-12 * max(
            1.0, norm(self.base, "L2")
        ):
            raise ValueError("coeffs[0] must equal the base field")
        for j in range(len(self.coeffs) - 1):
            expected = remove_mean(_cubic_level_ordered(self.coeffs, j))
            defect = (j + 1) * self.coeffs[j + 1] - expected
            scale = max(1.0, norm(expected, "L2"))
            if norm(defect, "L2") > 1e-12 * scale:
                raise ValueError(
                    f"jet coefficient {j + 1} violates the cubic recurrence"
                )

    @property
    def depth(self) -> int:
        return len(self.coeffs) - 1


def ode_jet(u: SpectralField, depth: int) -> JetSequence:
    """Jet of the auxiliary cubic flow to the requested depth."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if depth > _MAX_DEPTH:
        raise ValueError(f"depth {depth} exceeds the cap {_MAX_DEPTH}")
    levels = [u]
    for j in range(depth):
        s = remove_mean(_cubic_level(levels, j))
        levels.append(s * (1.0 / (j + 1)))
    return JetSequence(base=u, coeffs=levels)


def f_n(u: SpectralField, n: int) -> SpectralField:
    """n-th tower map: f_0(u) = (Id - mean) u^3, f_{k+1} = f_k'[f_0]."""
    jet = ode_jet(u, n + 1)
    return (math.factorial(n) * (n + 1)) * jet.coeffs[n + 1]


def _tangent_jet(u: SpectralField, v: SpectralField, depth: int) -> list:
    """Tangent coefficients delta u_0 = v, ..., delta u_depth along the jet
    of u: (j+1) delta u_{j+1} = (Id - mean) 3 sum_{a+b+c=j} u_a u_b delta u_c."""
    if depth > _MAX_DEPTH:
        raise ValueError(f"depth {depth} exceeds the cap {_MAX_DEPTH}")
    levels = [u]
    deltas = [v]
    grid = u.grid
    for j in range(depth):
        t = zeros(grid)
        for c in range(j + 1):
            for a in range(j + 1 - c):
                b = j - c - a
                t = t + multiply([levels[a], levels[b], deltas[c]])
        deltas.append(remove_mean(3.0 * t) * (1.0 / (j + 1)))
        s = remove_mean(_cubic_level(levels, j))
        levels.append(s * (1.0 / (j + 1)))
    return deltas


def f_n_directional(u: SpectralField, n: int, v: SpectralField) -> SpectralField:
    """f_n'(u)[v] via the tangent jet."""
    deltas = _tangent_jet(u, v, n + 1)
    return (math.factorial(n) * (n + 1)) * deltas[n + 1]


@dataclass(frozen=True)
class IbpCoefficients:
    """Bookkeeping for the integration-by-parts tower.

    lam is the datum amplitude (the spec's lambda; renamed because of the
    Python keyword), c_embed the sup-norm embedding constant used by the
    cutoff rule.  The k-th denominator is the exact product of the phase
    factors collected by k+1 integrations by parts.
    """

    n: int
    lam: float
    epsilon: float
    c_embed: float

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.lam < 0.0:
            raise ValueError("lam must be nonnegative")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie strictly between 0 and 1")
        if self.c_embed <= 0.0:
            raise ValueError("c_embed must be positive")

    def mu(self, t: float) -> complex:
        return -1j * self.lam**2 * complex(np.exp(2.0j * t / self.epsilon))

    def denominator(self, k: int) -> complex:
        # prod_{j=1}^{k+1} (2 i j) = (2i)^{k+1} (k+1)!  (exact closed form)
        return (2.0j) ** (k + 1) * math.factorial(k + 1)


def P_n_eval(
    w1_t: SpectralField, w1_0: SpectralField, t: float, coeffs: IbpCoefficients
) -> SpectralField:
    """Boundary-term polynomial after n integrations by parts:
    w1_0 + sum_{k<n} (-1)^k / ((2i)^{k+1}(k+1)!) (mu(t)^{k+1} f_k(w1_t)
    - mu(0)^{k+1} f_k(w1_0))."""
    n = coeffs.n
    jet_t = ode_jet(w1_t, n)
    jet_0 = ode_jet(w1_0, n)
    mu_t, mu_0 = coeffs.mu(t), coeffs.mu(0.0)
    out = w1_0
    for k in range(n):
        fk_scale = math.factorial(k) * (k + 1)
        fk_t = fk_scale * jet_t.coeffs[k + 1]
        fk_0 = fk_scale * jet_0.coeffs[k + 1]
        c_k = (-1.0) ** k / coeffs.denominator(k)
        out = out + c_k * (mu_t ** (k + 1) * fk_t - mu_0 ** (k + 1) * fk_0)
    return out


def bold_R_n(
    w1: SpectralField, R1: SpectralField, t: float, coeffs: IbpCoefficients
) -> SpectralField:
    """Transported remainder (1 + sum_{k<n} (-mu)^{k+1}/((2i)^{k+1}(k+1)!)
    f_k'(w1)[.]) applied to R1."""
    n = coeffs.n
    deltas = _tangent_jet(w1, R1, n)
    mu_t = coeffs.mu(t)
    out = R1
    for k in range(n):
        dfk = (math.factorial(k) * (k + 1)) * deltas[k + 1]
        out = out + ((-mu_t) ** (k + 1) / coeffs.denominator(k)) * dfk
    return out


def _check_uniform_sampling(times: np.ndarray, count: int) -> float:
    if count < 3:
        raise ValueError("insufficient sampling: need at least 3 samples")
    gaps = np.diff(times)
    if gaps[0] <= 0.0 or not np.allclose(gaps, gaps[0], rtol=1e-9, atol=0.0):
        raise ValueError("insufficient sampling: times must be uniform")
    return float(gaps[0])


def implicit_residual(
    times, w1_samples, r1_samples, coeffs: IbpCoefficients
) -> float:
    """H1 defect of the n-fold implicit representation at the final time:

        w1(T) - P_n - (-1)^n/(eps (2i)^n n!) int_0^T mu^{n+1} f_n(w1)
              - int_0^T bold_R_n(w1, R1).

    Phases are evaluated analytically at the nodes; only the fields are
    quadratured (composite Simpson on the uniform sample grid)."""
    times = np.asarray(times, dtype=float)
    if not (len(times) == len(w1_samples) == len(r1_samples)):
        raise ValueError("times, w1 samples, and R1 samples must align")
    dx = _check_uniform_sampling(times, len(times))
    n, eps = coeffs.n, coeffs.epsilon

    fn_rows = np.stack(
        [
            coeffs.mu(t) ** (n + 1) * f_n(w, n).coeffs
            for t, w in zip(times, w1_samples)
        ]
    )
    prefactor = (-1.0) ** n / (eps * (2.0j) ** n * math.factorial(n))
    integral_fn = prefactor * simpson_uniform(fn_rows, dx)

    rn_rows = np.stack(
        [
            bold_R_n(w, r, t, coeffs).coeffs
            for t, w, r in zip(times, w1_samples, r1_samples)
        ]
    )
    integral_rn = simpson_uniform(rn_rows, dx)

    grid = w1_samples[0].grid
    defect = (
        w1_samples[-1]
        - P_n_eval(w1_samples[-1], w1_samples[0], float(times[-1]), coeffs)
        - SpectralField(grid, integral_fn)
        - SpectralField(grid, integral_rn)
    )
    return norm(defect, "Hs", s=1)


def ibp_once_p2(times, w1_samples, r1_samples, alpha: float, epsilon: float) -> float:
    """H1 defect of the single integration by parts available for the
    conjugate-cube law, whose phase exp(-4it/eps) dies against its own
    conjugate after one pass (the leftover cubic-squared integral is
    resonant, so no second pass exists):

        w1(T) = w1(0) + (lam^2/4)(e^{-4iT/eps} P wbar1(T)^3 - P wbar1(0)^3)
              - (3 i lam^4 / 4 eps) int P(wbar1^2 P w1^3)
              - (3 lam^2 / 4) int e^{-4it/eps} P(wbar1^2 Rbar1)
              + int R1,        lam = eps^alpha,  P = Id - mean.
    """
    times = np.asarray(times, dtype=float)
    if not (len(times) == len(w1_samples) == len(r1_samples)):
        raise ValueError("times, w1 samples, and R1 samples must align")
    dx = _check_uniform_sampling(times, len(times))
    lam = epsilon**alpha
    grid = w1_samples[0].grid

    def boundary_cube(w):
        cw = conjugate(w)
        return remove_mean(multiply([cw, cw, cw]))

    phase_T = complex(np.exp(-4.0j * times[-1] / epsilon))
    boundary = (lam**2 / 4.0) * (
        phase_T * boundary_cube(w1_samples[-1]) - boundary_cube(w1_samples[0])
    )

    resonant_rows = []
    forcing_rows = []
    r1_rows = []
    for t, w, r in zip(times, w1_samples, r1_samples):
        cw = conjugate(w)
        cube = remove_mean(multiply([w, w, w]))
        resonant_rows.append(remove_mean(multiply([cw, cw, cube])).coeffs)
        phase = complex(np.exp(-4.0j * t / epsilon))
        forcing_rows.append(
            phase * remove_mean(multiply([cw, cw, conjugate(r)])).coeffs
        )
        r1_rows.append(r.coeffs)

    integral_resonant = (-3.0j * lam**4 / (4.0 * epsilon)) * simpson_uniform(
        np.stack(resonant_rows), dx
    )
    integral_forcing = (-3.0 * lam**2 / 4.0) * simpson_uniform(
        np.stack(forcing_rows), dx
    )
    integral_r1 = simpson_uniform(np.stack(r1_rows), dx)

    rep = (
        w1_samples[0]
        + boundary
        + SpectralField(grid, integral_resonant)
        + SpectralField(grid, integral_forcing)
        + SpectralField(grid, integral_r1)
    )
    return norm(w1_samples[-1] - rep, "Hs", s=1)


def choose_n(lam: float, epsilon: float, c_embed: float) -> int:
    """Smallest n >= 1 with (2n+1)(c lam)^{2(n+1)} <= epsilon."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    x = c_embed * lam
    if x < 0.0:
        raise ValueError("c_embed * lam must be nonnegative")
    if x >= 1.0:
        raise ValueError(
            f"c_embed * lam = {x} is not below 1; no cutoff order exists"
        )
    n = 1
    while (2 * n + 1) * x ** (2 * (n + 1)) > epsilon:
        n += 1
        if n > 100_000:
            raise RuntimeError("cutoff scan failed to terminate")
    return n


@dataclass(frozen=True)
class BoundReport:
    """Measured norm vs. claimed bound, ratio <= 1 on every valid input."""

    norm_fn: float
    bound_fn: float
    ratio_fn: float
    norm_dfn: float | None = None
    bound_dfn: float | None = None
    ratio_dfn: float | None = None


def verify_fn_bound(u: SpectralField, n: int, v: SpectralField | None = None) -> BoundReport:
    """Evaluate ||f_n(u)||_H1 against prod_{k=0}^{n+1}(2k+1)
    ||u||_inf^{2(n+1)} ||u||_H1, sharp on single modes; with a direction v,
    also f_n'(u)[v] against the mixed-norm analogue.  The products carry one
    factor more than a naive count of the derivative cascade suggests; the
    single-mode case attains equality, so the constant cannot be smaller."""
    if n > 8:
        raise ValueError("bound verification is specified for n <= 8")
    product = 1.0
    for k in range(n + 2):
        product *= 2 * k + 1
    sup_u = norm(u, "Linf")
    h1_u = norm(u, "Hs", s=1)
    value = norm(f_n(u, n), "Hs", s=1)
    bound = product * sup_u ** (2 * (n + 1)) * h1_u
    ratio = value / bound if bound > 0.0 else 0.0
    if v is None:
        return BoundReport(value, bound, ratio)
    dvalue = norm(f_n_directional(u, n, v), "Hs", s=1)
    dbound = product * (
        sup_u ** (2 * (n + 1)) * norm(v, "Hs", s=1)
        + (2 * n + 2) * sup_u ** (2 * n + 1) * norm(v, "Linf") * h1_u
    )
    dratio = dvalue / dbound if dbound > 0.0 else 0.0
    return BoundReport(value, bound, ratio, dvalue, dbound, dratio)
