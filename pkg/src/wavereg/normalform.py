"""Normal-form change of coordinates for the rescaled two-component systems.

The rescaled systems carry a transport term of size 1/eps^2 that obscures the
slow dynamics.  The cure is a near-identity change of unknown

    u_tilde = (Id + eps*M) v,

where M is an order -1 corrector built from the inverse-derivative multiplier:
for the regularized system M(v1, v2) = (-m v2, -m v1), and for the modified
(conjugation-coupled) system M(v1, v2) = (+m conj(v2), -m conj(v1)).  M is
chosen so that the commutator of the dispersive part with M cancels the stiff
transport exactly:

    [i D dx^2, M] + A dx = 0          (regularized)
    [i D dx^2, M] + C A dx = 0        (modified; C conjugates both slots)

with D = diag(0, 1) and A the rotation [[0, 1], [-1, 0]].  Because the
coefficients obey eps * (1/eps^3) = 1/eps^2, the identity removes the large
transport from the v-equation and leaves an order 1/eps linear part that a
scalar oscillation absorbs:

    w1 = exp(-i t/eps) v1,  w2 = exp(+i t/eps) v2     (regularized)
    w1 = exp(+i t/eps) v1,  w2 = exp(+i t/eps) v2     (modified)

What remains is the reduced system: a non-stiff cubic ODE for w1 with an
oscillatory scalar prefactor, and a semilinear Schroedinger equation for w2
forced by w1.  Both are assembled here exactly, with the closed-form
remainder so that the reduced right-hand side agrees with the full system's
to machine accuracy (the test suite checks the pullback identity directly).

All formulas below assume the rescaled coefficient pair (1/eps^2, 1/eps^3)
and zero-mean fields; the k = 0 block of M is zero and the mean is conserved
by both systems, so zero-mean data stay zero-mean.  The datum amplitude is an
explicit parameter here (the full solver absorbs it into the state instead):
the interaction operator and remainder depend on it through the combination
amplitude^2 * cubic terms.

The modified chain mirrors the regularized p0 chain under conjugation of the
first component; that mirror identity is exercised by the tests as an oracle,
but each operator below is implemented by its own formula.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import PressureLaw, State, q_apply
from .spectral import (
    SpectralField,
    apply_m,
    conjugate,
    derivative,
    multiply,
    norm,
    remove_mean,
    zeros,
)

_MEAN_TOL = 1e-12


@dataclass(frozen=True)
class NormalFormSetting:
    """Parameters of the change of coordinates.

    epsilon     dispersion parameter, 0 < epsilon < 1 (rescaled coefficients
                1/epsilon^2 and 1/epsilon^3 are implied throughout).
    conjugated  False for the regularized system, True for the modified one.
                The modified system only exists for the cubic law p0.
    law         pressure law of the underlying system.
    amplitude   datum amplitude multiplying the normalized state; enters the
                interaction operator and remainder as amplitude^2.
    """

    epsilon: float
    conjugated: bool = False
    law: PressureLaw = PressureLaw.P0
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.amplitude <= 0.0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if self.conjugated and self.law is not PressureLaw.P0:
            raise ValueError("the conjugated (modified) system requires law p0")

    @property
    def system_kind(self) -> str:
        return "modified" if self.conjugated else "regularized"

    @property
    def coefficients(self) -> tuple[float, float]:
        return 1.0 / self.epsilon**2, 1.0 / self.epsilon**3


@dataclass(frozen=True)
class ReducedState:
    """Oscillating-frame state (w1, w2) at time t.  Fields must be zero-mean."""

    w1: SpectralField
    w2: SpectralField
    t: float

    def __post_init__(self) -> None:
        if self.w1.grid != self.w2.grid:
            raise ValueError("w1 and w2 live on different grids")
        for name, field in (("w1", self.w1), ("w2", self.w2)):
            mean = abs(field.coeff(0))
            if mean > _MEAN_TOL * max(1.0, norm(field, "L2")):
                raise ValueError(f"{name} must be zero-mean, |mean| = {mean:.3e}")

    @property
    def grid(self):
        return self.w1.grid


def apply_M(setting: NormalFormSetting, u: State) -> State:
    """The order -1 corrector M.

    Regularized: (u1, u2) -> (-m u2, -m u1).
    Modified:    (u1, u2) -> (+m conj(u2), -m conj(u1)).
    Output is always zero-mean (the multiplier kills the mean)."""
    if setting.conjugated:
        return State(apply_m(conjugate(u.u2)), -apply_m(conjugate(u.u1)))
    return State(-apply_m(u.u2), -apply_m(u.u1))


def from_normal_coords(setting: NormalFormSetting, v: State) -> State:
    """u_tilde = (Id + eps*M) v."""
    return v + setting.epsilon * apply_M(setting, v)


def to_normal_coords(
    setting: NormalFormSetting, u_tilde: State, max_iterations: int = 1000
) -> State:
    """Invert (Id + eps*M).

    Regularized: M is complex-linear and block-diagonal per wavenumber, with
    2x2 blocks [[1, -eps/k], [-eps/k, 1]]; the inverse is closed-form and the
    determinant 1 - (eps/k)^2 >= 1 - eps^2 never degenerates for eps < 1.

    Modified: M conjugates, so the per-mode blocks couple k with -k through
    the conjugate coefficients; rather than assembling real-linear blocks we
    iterate the contraction v <- u_tilde - eps*M v (contraction rate at most
    eps) until the defect ||v + eps*M v - u_tilde|| stops improving, which
    lands at the rounding floor of a few ulps of the data size.  Raises
    RuntimeError if the defect is still above 1e-13 relative to the data when
    the iteration budget runs out; for eps < 1 that indicates a caller bug.
    """
    eps = setting.epsilon
    if not setting.conjugated:
        k = u_tilde.grid.wavenumbers.astype(float)
        fac = np.where(k == 0.0, 0.0, eps / np.where(k == 0.0, 1.0, k))
        det = 1.0 - fac * fac
        v1 = (u_tilde.u1.coeffs + fac * u_tilde.u2.coeffs) / det
        v2 = (fac * u_tilde.u1.coeffs + u_tilde.u2.coeffs) / det
        return State(
            SpectralField(u_tilde.grid, v1), SpectralField(u_tilde.grid, v2)
        )

    scale = max(1.0, norm(u_tilde.u1, "L2") + norm(u_tilde.u2, "L2"))
    v = u_tilde
    defect = np.inf
    for _ in range(max_iterations):
        v = u_tilde - eps * apply_M(setting, v)
        residual = v + eps * apply_M(setting, v) - u_tilde
        previous, defect = defect, norm(residual.u1, "L2") + norm(residual.u2, "L2")
        if defect <= 5e-16 * scale or defect >= previous:
            break
    if defect <= 1e-13 * scale:
        return v
    raise RuntimeError(
        f"coordinate inversion stalled at defect {defect:.3e} "
        f"(limit 1e-13 relative) after {max_iterations} iterations"
    )


def cancellation_residual(setting: NormalFormSetting, u: State) -> float:
    """L2 size of ([i D dx^2, M] + transport) u; zero for the correct M.

    The transport slot is A dx for the regularized system and its
    component-wise conjugate for the modified one.  Returns the root of the
    summed squared L2 norms of the two components."""
    mu = apply_M(setting, u)
    disp_m = State(zeros(u.grid), 1j * derivative(mu.u2, order=2))
    m_disp = apply_M(
        setting, State(zeros(u.grid), 1j * derivative(u.u2, order=2))
    )
    if setting.conjugated:
        transport = State(
            conjugate(derivative(u.u2)), -conjugate(derivative(u.u1))
        )
    else:
        transport = State(derivative(u.u2), -derivative(u.u1))
    res = disp_m - m_disp + transport
    return float(
        np.sqrt(norm(res.u1, "L2") ** 2 + norm(res.u2, "L2") ** 2)
    )


def oscillate(
    v: State,
    t: float,
    epsilon: float,
    direction: str,
    conjugated: bool = False,
) -> State:
    """Move between the slow frame v and the oscillating frame w.

    direction = "forward":  w1 = exp(s1*i*t/eps) v1, w2 = exp(+i*t/eps) v2,
    with s1 = -1 for the regularized system and s1 = +1 for the modified one.
    direction = "backward" applies the inverse phases.  The map is a
    componentwise unimodular scalar, so every norm is preserved."""
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    s1 = 1.0 if conjugated else -1.0
    sgn = 1.0 if direction == "forward" else -1.0
    phase1 = np.exp(sgn * s1 * 1j * t / epsilon)
    phase2 = np.exp(sgn * 1j * t / epsilon)
    return State(phase1 * v.u1, phase2 * v.u2)


def _cubic_by_law(law: PressureLaw, f: SpectralField) -> SpectralField:
    # p(u) + u, i.e. the cubic part of the pressure, evaluated at f.
    if law is PressureLaw.P0:
        return multiply([f, f, f])
    if law is PressureLaw.P1:
        return multiply([f, conjugate(f), f])
    return multiply([conjugate(f), conjugate(f), conjugate(f)])


def operator_E(setting: NormalFormSetting, v: State, u_tilde: State) -> State:
    """The order-one interaction operator of the v-equation.

    Regularized:
        (E v)1 = -i v1 + i a^2 P (p(v1) + v1)           (P kills the mean)
        (E v)2 = +i v2 + q(a u_tilde1) applied to (-i v2)
    Modified:
        (E v)1 = +i v1 - i a^2 P (v1^3)
        (E v)2 = +i v2 - 3 i a^2 conj(u_tilde1)^2 v2

    The v-equation reads  dt v + i c_d D dx^2 v + (1/eps) E v + kept forcing
    + R v = 0; E collects every term of size 1/eps.  Note the -i sits inside
    the q slot in the regularized (E v)2: for the laws p1 and p2 the operator
    q(c) is only real-linear, so scalar phases may not be pulled out."""
    a2 = setting.amplitude**2
    if setting.conjugated:
        e1 = 1j * v.u1 - 1j * a2 * remove_mean(_cubic_by_law(PressureLaw.P0, v.u1))
        cu = conjugate(u_tilde.u1)
        e2 = 1j * v.u2 - 3j * a2 * multiply([cu, cu, v.u2])
        return State(e1, e2)
    e1 = -1j * v.u1 + 1j * a2 * remove_mean(_cubic_by_law(setting.law, v.u1))
    e2 = 1j * v.u2 + q_apply(
        setting.law, setting.amplitude * u_tilde.u1, (-1j) * v.u2
    )
    return State(e1, e2)


def _r1_field(
    setting: NormalFormSetting, v: State, u_tilde: State
) -> SpectralField:
    """r1 = (1/eps) m[(q(a u_tilde1) - q(a v1)) dx v1], with the 1/eps
    divided out symbolically.

    u_tilde1 - v1 = eps * (M v)1, so writing delta := (M v)1 (computable
    without any division) each law factors the difference of coefficients:

        p0:  q0(a u~1) - q0(a v1) = 3 a^2 (u~1 + v1) * eps*delta
        p1:  2 a^2 eps (u~1 conj(delta) + delta conj(v1)) . + a^2 eps (u~1 + v1) delta conj(.)
        p2:  3 a^2 eps conj(u~1 + v1) conj(delta) conj(.)

    The modified case uses the p0 factoring with no conjugations: the
    conjugation of the forcing and the conjugation inside its M-lift cancel.
    Direct division by eps would lose roughly 16 + log10(eps) digits to
    cancellation; the factored forms are exact for every eps."""
    a2 = setting.amplitude**2
    delta = apply_M(setting, v).u1
    dv1 = derivative(v.u1)
    su = u_tilde.u1 + v.u1
    law = PressureLaw.P0 if setting.conjugated else setting.law
    if law is PressureLaw.P0:
        diff = 3.0 * a2 * multiply([su, delta, dv1])
    elif law is PressureLaw.P1:
        diff = a2 * (
            2.0 * multiply([u_tilde.u1, conjugate(delta), dv1])
            + 2.0 * multiply([delta, conjugate(v.u1), dv1])
            + multiply([su, delta, conjugate(dv1)])
        )
    else:
        diff = 3.0 * a2 * multiply(
            [conjugate(su), conjugate(delta), conjugate(dv1)]
        )
    return apply_m(diff)


def remainder_R(setting: NormalFormSetting, v: State, u_tilde: State) -> State:
    """The exact order-one remainder of the v-equation.

    With E = operator_E and r1 = _r1_field, the closed forms are

        regularized:  R v = (Id + eps M)^{-1} ((r1, 0) - M E v)
        modified:     R v = -(Id + eps M)^{-1} (M E v + (r1, 0))

    (note the relative sign of (r1, 0) flips, and in both cases the pair sits
    inside the inverse).  These make the split

        dt v = -i c_d D dx^2 v - (1/eps) E v - (0, c_t * kept forcing) - R v

    exact to rounding, where the kept forcing is q(a u~1) dx v1 for the
    regularized system and conj(q0(a u~1) dx v1) for the modified one."""
    ev = operator_E(setting, v, u_tilde)
    r1 = _r1_field(setting, v, u_tilde)
    zero = zeros(v.grid)
    mev = apply_M(setting, ev)
    if setting.conjugated:
        return -1.0 * to_normal_coords(setting, mev + State(r1, zero))
    return to_normal_coords(setting, State(r1, zero) - mev)


def _kept_forcing(
    setting: NormalFormSetting, v: State, u_tilde: State
) -> SpectralField:
    # The w2-equation forcing, in slow-frame variables: q(a u~1) dx v1,
    # conjugated as a whole for the modified system.
    f = q_apply(
        PressureLaw.P0 if setting.conjugated else setting.law,
        setting.amplitude * u_tilde.u1,
        derivative(v.u1),
    )
    return conjugate(f) if setting.conjugated else f


def reduced_rhs(setting: NormalFormSetting, w: ReducedState) -> State:
    """Time derivative (dt w1, dt w2) of the reduced system.

    The w1 equation is the cubic ODE

        dt w1 = mu(t) * P N(w1) - phase1 * (R v)1

    with (mu, N) depending on the law:  regularized p0, p1, p2 give
    mu = -i a^2/eps * exp(2it/eps), -i a^2/eps, -i a^2/eps * exp(-4it/eps)
    against N = w1^3, |w1|^2 w1, conj(w1)^3;  the modified system gives
    mu = +i a^2/eps * exp(-2it/eps) against N = w1^3.

    The w2 equation is the forced Schroedinger flow

        dt w2 = -i c_d dx^2 w2 - c_t phase2 F1 - (1/eps) phase2 (E v)2^q
                - phase2 (R v)2

    where F1 is the kept forcing above, (E v)2^q is the coupling part of the
    interaction operator (its +i v2 piece cancels against the frame phase
    exactly and is dropped symbolically, not numerically), and
    phase1, phase2 are the frame phases of oscillate.  Everything is built
    from the slow-frame state v = oscillate(w, backward) and the
    reconstructed u_tilde = (Id + eps M) v, so the result agrees with the
    full system's right-hand side to rounding."""
    eps = setting.epsilon
    ct, cd = setting.coefficients
    a2 = setting.amplitude**2
    v = oscillate(
        State(w.w1, w.w2), w.t, eps, "backward", conjugated=setting.conjugated
    )
    u_tilde = from_normal_coords(setting, v)
    ev = operator_E(setting, v, u_tilde)
    rv = remainder_R(setting, v, u_tilde)
    f1 = _kept_forcing(setting, v, u_tilde)

    s1 = 1.0 if setting.conjugated else -1.0
    phase1 = np.exp(s1 * 1j * w.t / eps)
    phase2 = np.exp(1j * w.t / eps)

    if setting.conjugated:
        mu = (1j * a2 / eps) * np.exp(-2j * w.t / eps)
        nw = multiply([w.w1, w.w1, w.w1])
    elif setting.law is PressureLaw.P0:
        mu = (-1j * a2 / eps) * np.exp(2j * w.t / eps)
        nw = multiply([w.w1, w.w1, w.w1])
    elif setting.law is PressureLaw.P1:
        mu = -1j * a2 / eps
        nw = multiply([w.w1, conjugate(w.w1), w.w1])
    else:
        mu = (-1j * a2 / eps) * np.exp(-4j * w.t / eps)
        nw = multiply([conjugate(w.w1), conjugate(w.w1), conjugate(w.w1)])

    dw1 = mu * remove_mean(nw) - phase1 * rv.u1
    coupling = ev.u2 - 1j * v.u2
    dw2 = (
        -1j * cd * derivative(w.w2, order=2)
        - ct * phase2 * f1
        - (1.0 / eps) * phase2 * coupling
        - phase2 * rv.u2
    )
    return State(dw1, dw2)
