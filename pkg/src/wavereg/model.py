"""Pressure laws, energies, and right-hand sides of the regularized systems.

The unknown is a pair (u1, u2) of fields on the torus, u1 a density
fluctuation and u2 a velocity.  The regularized system reads

    d/dt u1 + ct * d/dx u2                             = 0,
    d/dt u2 + ct * d/dx p(u1) + i * cd * d/dx^2 u2     = 0,

with cubic pressure laws

    p0(u) = -u + u^3,   p1(u) = -u + |u|^2 u,   p2(u) = -u + conj(u)^3,

and coefficients (ct, cd) = (1, eps) in original variables or
(1/eps^2, 1/eps^3) after the concentration rescaling (the amplitude
prefactor of concentrating data is applied to the datum, never here, so
right-hand sides stay stateless).  The "modified" kind conjugates the
first-order flux component-wise while leaving the dispersion alone:

    d/dt u1 + ct * d/dx conj(u2)                       = 0,
    d/dt u2 + ct * d/dx conj(p0(u1)) + i*cd*d/dx^2 u2  = 0.

Note that the substitution u1 -> conj(u1) maps solutions of the modified
system onto solutions of the plain p0 system with the same eps, so the two
kinds share their linear mode structure; the conjugated quartic energy
below is nevertheless a different functional from the plain-law energies
and is exactly invariant only under flows that pair the cubic term
bilinearly (see the energy-rate tests for the measured behaviour).

Energies are physical torus integrals (2*pi times the mean value),
evaluated through exact coefficient convolutions rather than sampled
quadrature, so quartic terms carry no aliasing error at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .spectral import (
    SpectralField,
    conjugate,
    derivative,
    multiply,
    pair_mean,
    quartic_mean,
)


class PressureLaw(Enum):
    """The three cubic pressure laws; all agree on real-valued fields."""

    P0 = "p0"
    P1 = "p1"
    P2 = "p2"


@dataclass(frozen=True)
class State:
    """A (u1, u2) pair on a common grid, with vector-space arithmetic."""

    u1: SpectralField
    u2: SpectralField

    def __post_init__(self) -> None:
        if self.u1.grid != self.u2.grid:
            raise ValueError("state components must live on the same grid")

    @property
    def grid(self):
        return self.u1.grid

    def __add__(self, other: "State") -> "State":
        return State(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "State") -> "State":
        return State(self.u1 - other.u1, self.u2 - other.u2)

    def __neg__(self) -> "State":
        return State(-self.u1, -self.u2)

    def __mul__(self, scalar: complex) -> "State":
        return State(self.u1 * scalar, self.u2 * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar: complex) -> "State":
        return State(self.u1 / scalar, self.u2 / scalar)


@dataclass(frozen=True)
class SystemSpec:
    """Which system to drive: kind, dispersion strength, scaling, amplitude.

    kind is "regularized" (plain flux) or "modified" (conjugated flux).
    amplitude records the datum prefactor (an eps**alpha or a lambda); it is
    bookkeeping for datum builders and the normal form, and is deliberately
    not consumed by rhs_full.
    """

    kind: str
    epsilon: float
    rescaled: bool = False
    amplitude: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("regularized", "modified"):
            raise ValueError(f"unknown system kind {self.kind!r}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie strictly between 0 and 1")
        if self.amplitude <= 0.0:
            raise ValueError("amplitude must be positive")

    @property
    def coefficients(self) -> tuple[float, float]:
        """(ct, cd): the transport and dispersion coefficients."""
        if self.rescaled:
            return 1.0 / self.epsilon**2, 1.0 / self.epsilon**3
        return 1.0, self.epsilon


@dataclass(frozen=True)
class EnergyReport:
    """An energy value split into its quartic and quadratic contributions."""

    value: float
    quartic_part: float
    quadratic_u1_part: float
    quadratic_u2_part: float


def pressure(law: PressureLaw, u: SpectralField) -> SpectralField:
    """Apply the selected pressure law, alias-free."""
    if law is PressureLaw.P0:
        cubic = multiply([u, u, u])
    elif law is PressureLaw.P1:
        cubic = multiply([u, conjugate(u), u])
    else:
        cu = conjugate(u)
        cubic = multiply([cu, cu, cu])
    return cubic - u


def q_apply(law: PressureLaw, u: SpectralField, v: SpectralField) -> SpectralField:
    """The quasilinear coefficient map q(u) acting on v.

    q0(u) v = 3 u^2 v; q1(u) v = 2|u|^2 v + u^2 conj(v);
    q2(u) v = 3 conj(u)^2 conj(v).  Each is the derivative of the cubic part
    of the matching pressure law, so d/dx p(u) = -d/dx u + q(u) d/dx u; the
    maps are real-linear (q1 and q2 conjugate their argument) and quadratic
    in the coefficient field u.
    """
    if law is PressureLaw.P0:
        return 3.0 * multiply([u, u, v])
    if law is PressureLaw.P1:
        return 2.0 * multiply([u, conjugate(u), v]) + multiply([u, u, conjugate(v)])
    cu = conjugate(u)
    return 3.0 * multiply([cu, cu, conjugate(v)])


def energy(law: PressureLaw, state: State, conjugated: bool = False) -> EnergyReport:
    """Physical-integral energy of a state.

        P1:  integral( |u1|^4/4      - |u1|^2/2    + |u2|^2/2 )
        P2:  integral( Re(u1^4)/4    - |u1|^2/2    + |u2|^2/2 )
        P0:  integral( Re(u1^4)/4    - Re(u1^2)/2  + |u2|^2/2 )

    The P0 form is the quartic functional attached to the modified system
    (conjugated=True demands law P0); it is also returned for plain P0 so
    the candidate can be monitored, but only the P1, P2 and conjugated
    cases are conserved-quantity claims.
    """
    if conjugated and law is not PressureLaw.P0:
        raise ValueError("the conjugated energy is only defined for law P0")
    u1, u2 = state.u1, state.u2
    two_pi = 2.0 * math.pi
    cu1 = conjugate(u1)
    if law is PressureLaw.P1:
        quart = 0.25 * two_pi * quartic_mean(u1, cu1, u1, cu1).real
        quad1 = -0.5 * two_pi * pair_mean(u1, cu1).real
    elif law is PressureLaw.P2:
        quart = 0.25 * two_pi * quartic_mean(u1, u1, u1, u1).real
        quad1 = -0.5 * two_pi * pair_mean(u1, cu1).real
    else:
        quart = 0.25 * two_pi * quartic_mean(u1, u1, u1, u1).real
        quad1 = -0.5 * two_pi * pair_mean(u1, u1).real
    quad2 = 0.5 * two_pi * pair_mean(u2, conjugate(u2)).real
    return EnergyReport(quart + quad1 + quad2, quart, quad1, quad2)


def rhs_full(
    spec: SystemSpec, law: PressureLaw, state: State, t: float = 0.0
) -> State:
    """Time derivative of the full system at a state.

    Autonomous; t is accepted so the signature matches time-steppers.  The
    modified kind is hard-wired to law P0 (its flux conjugates p0 only).
    """
    del t
    if spec.kind == "modified" and law is not PressureLaw.P0:
        raise ValueError("the modified system is defined with law P0 only")
    ct, cd = spec.coefficients
    u1, u2 = state.u1, state.u2
    dxp = derivative(pressure(law, u1))
    dispersion = (1j * cd) * derivative(u2, order=2)
    if spec.kind == "modified":
        r1 = (-ct) * derivative(conjugate(u2))
        r2 = (-ct) * conjugate(dxp) - dispersion
    else:
        r1 = (-ct) * derivative(u2)
        r2 = (-ct) * dxp - dispersion
    return State(r1, r2)


def linear_growth_rate(law: PressureLaw, u_star: complex, k: int) -> float:
    """Growth rate of mode k, linearized about the constant state (u*, 0).

    For the dispersionless first-order system the mode-k eigenvalues solve
    lambda^2 = -k^2 p'(u*); the rate is |k| sqrt(-p'(u*)) when p'(u*) < 0
    (elliptic zone) and 0 otherwise.  Along the real axis all three laws
    share p'(x) = -1 + 3 x^2, so the law argument only fixes the interface.
    """
    del law
    z = complex(u_star)
    if abs(z.imag) > 1e-12 * max(1.0, abs(z.real)):
        raise ValueError("linearization point must be real")
    dp = -1.0 + 3.0 * z.real**2
    if dp < 0.0:
        return abs(k) * math.sqrt(-dp)
    return 0.0
