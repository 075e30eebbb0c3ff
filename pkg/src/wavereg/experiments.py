"""Numerical studies: negative-energy data, existence-time sweeps, growth
rates, continuation schedules, and identity suites.

Everything here drives the lower-level modules (spectral, model, normalform,
integrate) and returns plain result records; nothing in this file integrates
a PDE by itself except through `integrate.solve`.

Conventions shared with the rest of the package:

  * data live on a fixed torus; the concentration scaling is absorbed into
    the rescaled coefficients (1/eps^2, 1/eps^3), never into the mesh;
  * datum amplitudes (an eps**alpha or a fixed lambda) multiply normalized
    profiles whose size is capped at 1/6, and blow-up thresholds are stated
    in units of the normalized profile;
  * every datum built here carries a negative-energy certificate that tests
    re-evaluate independently through `model.energy`.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .integrate import IntegratorConfig, Trajectory, solve
from .model import PressureLaw, State, energy, linear_growth_rate
from .normalform import NormalFormSetting, to_normal_coords
from .spectral import (
    Grid,
    SpectralField,
    apply_m,
    conjugate,
    derivative,
    norm,
    random_field,
    remove_mean,
)

_MAX_PROFILE_NORM = 1.0 / 6.0


# --------------------------------------------------------------------------
# Negative-energy data.


@dataclass(frozen=True)
class DatumSpec:
    """Recipe for a reproducible negative-energy datum.

    target_norm is the size of the normalized profile: the first component is
    scaled to exactly this H^1 norm, the second is capped at the same L^2
    norm and then damped until the energy is negative.  The cap 1/6 keeps the
    profile inside the contraction regime of the fixed-point arguments.
    """

    seed: int
    target_norm: float
    law: PressureLaw
    mode_band: tuple[int, int] = (1, 8)
    conjugated: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.target_norm < _MAX_PROFILE_NORM:
            raise ValueError(
                f"target_norm must lie in (0, 1/6), got {self.target_norm}"
            )
        lo, hi = self.mode_band
        if not 1 <= lo <= hi:
            raise ValueError(f"mode_band must satisfy 1 <= lo <= hi, got {self.mode_band}")
        if self.conjugated and self.law is not PressureLaw.P0:
            raise ValueError("conjugated data require law p0")


def make_datum(grid: Grid, spec: DatumSpec) -> State:
    """Build the real-valued zero-mean profile described by `spec`.

    The first component is drawn on the requested band and scaled to exactly
    target_norm in H^1.  The second is scaled to target_norm in L^2, then
    damped by the factor that makes the energy negative with a 10% margin.
    The energy is quadratic in the second component with no linear term, so
    the damping factor is exact, not iterative.

    Real-valued profiles make the quartic part of the energy nonnegative for
    every law, so the certificate survives any further damping of the datum:
    in particular eps**alpha * profile has negative energy for alpha >= 0.
    """
    lo, hi = spec.mode_band
    if hi > grid.n_modes:
        raise ValueError(f"mode_band {spec.mode_band} exceeds grid band {grid.n_modes}")
    rng = np.random.default_rng(spec.seed)
    u1 = random_field(grid, rng, band=spec.mode_band, real_valued=True)
    u1 = u1 * (spec.target_norm / norm(u1, "Hs", s=1.0))
    u2 = random_field(grid, rng, band=spec.mode_band, real_valued=True)
    u2 = u2 * (spec.target_norm / norm(u2, "L2"))

    base = energy(spec.law, State(u1, u2), conjugated=spec.conjugated)
    without_u2 = base.value - base.quadratic_u2_part
    if without_u2 >= 0.0:
        # Unreachable for target_norm < 1/6: the embedding constant ~2.07
        # keeps the quartic below 12% of the negative quadratic term.
        raise RuntimeError("profile violates its negative-energy certificate")
    sigma_sq = -without_u2 / base.quadratic_u2_part
    sigma = min(1.0, 0.95 * math.sqrt(sigma_sq))
    u2 = u2 * sigma

    report = energy(spec.law, State(u1, u2), conjugated=spec.conjugated)
    if report.value > 0.0:
        raise RuntimeError("negative-energy certificate failed after damping")
    return State(u1, u2)


# --------------------------------------------------------------------------
# Existence times and amplitude sweeps.


def existence_time(
    system,
    law: PressureLaw,
    datum: State,
    config: IntegratorConfig,
    rho_max: float = 1.0,
) -> tuple[float | None, str]:
    """First crossing of rho_max, in units of the normalized profile.

    The threshold handed to the integrator is rho_max * system.amplitude, so
    callers state rho_max on the same scale as the profile returned by
    make_datum regardless of the datum prefactor.  Returns (time, status)
    where time is the bisection-refined crossing time for status "blowup"
    and None otherwise; "diverged" (non-finite state) is kept distinct from
    "completed".
    """
    if rho_max <= 0.0:
        raise ValueError("rho_max must be positive")
    run_config = replace(config, blowup_threshold=rho_max * system.amplitude)
    trajectory = solve(system, law, datum, run_config)
    return trajectory.blowup_time, trajectory.terminal_status


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    time: float | None
    status: str
    final_norm1: float
    final_norm2: float


@dataclass(frozen=True)
class SweepResult:
    """Existence times across epsilon plus a log-log fit when it applies.

    slope/intercept/residual are None unless at least three runs ended in
    blow-up; residual is the root-mean-square misfit of log(time) around the
    fitted line.  message is empty when the fit ran, "no blow-up observed"
    when every run completed, and an explanatory count otherwise.
    """

    rows: tuple[SweepRow, ...]
    slope: float | None
    intercept: float | None
    residual: float | None
    message: str


def _sweep_single(args) -> SweepRow:
    (kind, law, eps, amp, spec, n_modes, dt, t_end, rho_max, store_every) = args
    from .model import SystemSpec  # local import keeps worker pickling trivial

    grid = Grid(n_modes)
    profile = make_datum(grid, spec)
    system = SystemSpec(kind, eps, rescaled=True, amplitude=amp)
    config = IntegratorConfig(
        dt=dt, t_end=t_end, blowup_threshold=rho_max * amp, store_every=store_every
    )
    trajectory = solve(system, law, amp * profile, config)
    last = trajectory.states[-1]
    return SweepRow(
        epsilon=eps,
        time=trajectory.blowup_time,
        status=trajectory.terminal_status,
        final_norm1=norm(last.u1, "Hs", s=1.0) / amp,
        final_norm2=norm(last.u2, "L2") / amp,
    )


def scaling_sweep(
    law: PressureLaw,
    kind: str,
    epsilons: Sequence[float],
    spec: DatumSpec,
    *,
    amplitude_exponent: float | None = None,
    amplitude: float | None = None,
    t_end: float = 0.5,
    dt: float = 1e-3,
    time_scale: str = "fixed",
    rho_max: float = 1.0,
    n_modes: int = 32,
    store_every: int = 16,
    jobs: int | None = None,
) -> SweepResult:
    """Existence times of one datum family across a list of epsilon.

    The datum is the same normalized profile for every run, multiplied by
    eps**amplitude_exponent (theorem scaling) or by a fixed amplitude
    (exactly one of the two must be given).  With time_scale="eps_squared"
    both dt and t_end are multiplied by eps**2, matching the natural time
    of the fast transport; "fixed" uses them as given.

    Runs are independent, so jobs > 1 dispatches them to a process pool;
    rows come back merged in the order of `epsilons` either way, and the
    result is bitwise reproducible for a fixed spec.
    """
    if len(epsilons) < 3:
        raise ValueError("need at least three epsilon values")
    if len(set(epsilons)) != len(epsilons):
        raise ValueError("epsilon values must be distinct")
    for eps in epsilons:
        if not 0.0 < eps < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {eps}")
    if (amplitude_exponent is None) == (amplitude is None):
        raise ValueError("give exactly one of amplitude_exponent and amplitude")
    if amplitude_exponent is not None and amplitude_exponent < 0.0:
        raise ValueError("amplitude_exponent must be nonnegative")
    if amplitude is not None and amplitude <= 0.0:
        raise ValueError("amplitude must be positive")
    if time_scale not in ("fixed", "eps_squared"):
        raise ValueError(f"unknown time_scale {time_scale!r}")

    tasks = []
    for eps in epsilons:
        amp = eps**amplitude_exponent if amplitude_exponent is not None else amplitude
        factor = eps**2 if time_scale == "eps_squared" else 1.0
        tasks.append(
            (kind, law, eps, amp, spec, n_modes, dt * factor, t_end * factor,
             rho_max, store_every)
        )

    if jobs is not None and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = tuple(pool.map(_sweep_single, tasks))
    else:
        rows = tuple(_sweep_single(task) for task in tasks)
    return SweepResult(rows, *fit_existence_times(rows))


def fit_existence_times(
    rows: Sequence[SweepRow],
) -> tuple[float | None, float | None, float | None, str]:
    """Least-squares line through (log eps, log crossing-time).

    Returns (slope, intercept, rms residual, message).  The fit needs at
    least three blow-up rows; with fewer the first three entries are None
    and the message says why ("no blow-up observed" when every run simply
    completed).
    """
    blowups = [row for row in rows if row.status == "blowup"]
    diverged = [row for row in rows if row.status == "diverged"]
    if len(blowups) >= 3:
        x = np.log([row.epsilon for row in blowups])
        y = np.log([row.time for row in blowups])
        slope, intercept = np.polyfit(x, y, 1)
        fit = slope * x + intercept
        residual = float(np.sqrt(np.mean((y - fit) ** 2)))
        return float(slope), float(intercept), residual, ""
    if not blowups and not diverged:
        return None, None, None, "no blow-up observed"
    return None, None, None, (
        f"{len(blowups)} blow-up run(s) and {len(diverged)} diverged run(s) "
        f"among {len(rows)}; slope not fitted"
    )


# --------------------------------------------------------------------------
# Continuation schedule.


@dataclass(frozen=True)
class ContinuationSchedule:
    """Step-by-step norm budgets and step lengths of the continuation.

    rho_sequence[j] is the norm budget entering step j; time_sequence[j] the
    guaranteed step length at that budget.  j_formula is the printed step
    count (so both sequences have j_formula + 1 entries) and t_star the total
    time they cover.  j_star <= j_formula is the last step through which the
    budget stays below twice the initial one; the per-step lower bound
    time_sequence[k] >= eps^(2(1-alpha)) / (2 * step_constant * (2 rho)^2)
    is only claimed for k <= j_star.
    """

    rho_sequence: tuple[float, ...]
    time_sequence: tuple[float, ...]
    j_formula: int
    j_star: int
    t_star: float


def continuation_schedule(
    rho: float,
    epsilon: float,
    alpha: float,
    growth_constant: float = 1.0,
    step_constant: float = 1.0,
) -> ContinuationSchedule:
    """Iterate the continuation recurrence and report its reach.

    Starting from rho_0 = rho, each step grants time
    T_j = eps^(2(1-alpha)) / (2 * step_constant * rho_j^2) and the budget for
    the next step is rho_j = (6/5) rho + 12 * growth_constant * rho * sum of
    the earlier T_k.  The step count is
    floor(step_constant * rho^2 / (2 * growth_constant * eps^(2(1-alpha)))) - 1;
    a count below 1 means the time grain is too coarse for these constants
    and raises ValueError.
    """
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if growth_constant <= 0.0 or step_constant <= 0.0:
        raise ValueError("constants must be positive")

    grain = epsilon ** (2.0 * (1.0 - alpha))
    j_formula = math.floor(step_constant * rho**2 / (2.0 * growth_constant * grain)) - 1
    if j_formula < 1:
        raise ValueError(
            f"step count {j_formula} is below 1; epsilon too large for these constants"
        )

    rhos: list[float] = []
    times: list[float] = []
    for j in range(j_formula + 1):
        if j == 0:
            rho_j = rho
        else:
            rho_j = 1.2 * rho + 12.0 * growth_constant * rho * sum(times)
        rhos.append(rho_j)
        times.append(grain / (2.0 * step_constant * rho_j**2))

    j_star = j_formula
    for j, rho_j in enumerate(rhos):
        if rho_j > 2.0 * rho:
            j_star = j - 1
            break
    return ContinuationSchedule(
        rho_sequence=tuple(rhos),
        time_sequence=tuple(times),
        j_formula=j_formula,
        j_star=j_star,
        t_star=float(sum(times)),
    )


# --------------------------------------------------------------------------
# Linear growth rates.


@dataclass(frozen=True)
class GrowthMeasurement:
    wavenumber: int
    measured: float
    predicted: float


def growth_experiment(
    law: PressureLaw,
    u_star: float,
    wavenumbers: Sequence[int],
    epsilon: float = 0.0,
    n_samples: int = 20001,
) -> list[GrowthMeasurement]:
    """Measure per-mode growth of the linearization about (u_star, 0).

    For each wavenumber the exact 2x2 mode system (transport coupling plus
    optional dispersion epsilon * k^2 on the second component) is advanced by
    its exponential, and the growth rate is read off the running maximum of
    the solution magnitude: rate = log(M(T)/M(T/2)) / (T/2).  On bounded
    orbits the running maximum saturates within the first revolution, so
    neutral and hyperbolic points measure as zero instead of as sampling
    noise.  The prediction column is the dispersionless symbol rate
    |k| sqrt(-p'(u_star)); with epsilon > 0 the measured rate falls below it.

    Exponential fit only: polynomially growing (Jordan-block) points read as
    near zero.
    """
    if epsilon < 0.0:
        raise ValueError("epsilon must be nonnegative")
    if n_samples < 101:
        raise ValueError("need at least 101 samples")
    results = []
    for k in wavenumbers:
        predicted = linear_growth_rate(law, u_star, k)
        dp = -1.0 + 3.0 * float(u_star) ** 2
        matrix = np.array(
            [[0.0, -1j * k], [-1j * k * dp, 1j * epsilon * k**2]], dtype=complex
        )
        if predicted > 0.0:
            horizon = 16.0 / predicted
        else:
            omega = float(np.max(np.abs(np.linalg.eigvals(matrix).imag)))
            horizon = 15.0 * math.pi / max(omega, 1e-3)
        dt = horizon / (n_samples - 1)
        propagator = expm(matrix * dt)
        z = np.array([1.0 + 0.0j, 0.5 + 0.5j])
        z /= np.linalg.norm(z)
        magnitudes = np.empty(n_samples)
        for i in range(n_samples):
            magnitudes[i] = np.linalg.norm(z)
            z = propagator @ z
        running = np.maximum.accumulate(magnitudes)
        half = (n_samples - 1) // 2
        measured = (math.log(running[-1]) - math.log(running[half])) / (
            dt * (n_samples - 1 - half)
        )
        results.append(GrowthMeasurement(int(k), float(measured), float(predicted)))
    return results


# --------------------------------------------------------------------------
# Identity suites and embedding constants.


@dataclass(frozen=True)
class IdentityReport:
    residuals: dict
    tolerance: float
    n_fields: int
    n_modes: int

    @property
    def passed(self) -> bool:
        return max(self.residuals.values()) < self.tolerance


def lemma_m_suite(
    seed: int,
    n_modes: int = 64,
    sobolev_indices: Sequence[float] = (0.0, 1.0, 2.0),
    n_fields: int = 100,
    tolerance: float = 1e-10,
    multiplier: Callable[[SpectralField], SpectralField] | None = None,
) -> IdentityReport:
    """Re-verify the antiderivative-multiplier identities on random fields.

    Checks, on complex fields with a deliberately nonzero mean (so the
    mean-removing projection is exercised):

      * -i d/dx (m u) = u - mean u   and   -i m (du/dx) = u - mean u,
      * -i d^2/dx^2 (m u) = du/dx   and   -i m (d^2 u/dx^2) = du/dx,
      * conj(m u) = - m (conj u),
      * || m u ||_{H^{s+1}} = || u - mean u ||_{H^s} for each index s,
      * || m u ||_inf <= (pi / sqrt 3) || u - mean u ||_{L^2}.

    Returns the worst residual per identity over n_fields draws.  The
    multiplier argument exists for fault injection in tests: a corrupted
    version (say one that drops a mode) must break the first-derivative
    identities at the size of the dropped coefficient.
    """
    if multiplier is None:
        multiplier = apply_m
    grid = Grid(n_modes)
    rng = np.random.default_rng(seed)
    pointwise_constant = math.pi / math.sqrt(3.0)
    keys = (
        "first_derivative_left",
        "first_derivative_right",
        "second_derivative_left",
        "second_derivative_right",
        "conjugation_parity",
        "sobolev_shift",
        "pointwise_bound",
    )
    worst = dict.fromkeys(keys, 0.0)
    for _ in range(n_fields):
        u = random_field(grid, rng, band=(1, n_modes))
        coeffs = u.coeffs.copy()
        coeffs[grid.index(0)] = complex(*rng.standard_normal(2))
        u = SpectralField(grid, coeffs)
        mu = multiplier(u)
        projected = remove_mean(u)

        residuals = {
            "first_derivative_left": norm(-1j * derivative(mu) - projected, "L2"),
            "first_derivative_right": norm(
                -1j * multiplier(derivative(u)) - projected, "L2"
            ),
            "second_derivative_left": norm(
                -1j * derivative(mu, 2) - derivative(u), "L2"
            ),
            "second_derivative_right": norm(
                -1j * multiplier(derivative(u, 2)) - derivative(u), "L2"
            ),
            "conjugation_parity": norm(conjugate(mu) + multiplier(conjugate(u)), "L2"),
            "sobolev_shift": max(
                abs(norm(mu, "Hs", s=s + 1.0) - norm(projected, "Hs", s=s))
                for s in sobolev_indices
            ),
            "pointwise_bound": max(
                0.0, norm(mu, "Linf") - pointwise_constant * norm(projected, "L2")
            ),
        }
        for key, value in residuals.items():
            worst[key] = max(worst[key], value)
    return IdentityReport(worst, tolerance, n_fields, n_modes)


def sobolev_constant(max_wavenumber: int) -> float:
    """Best constant of |u(x)| <= c_K ||u||_{H^1} on the band |k| <= K.

    c_K^2 sums max(1, |k|)^(-2) over the band; c_0 = 1 and c_K increases to
    sqrt(1 + pi^2 / 3) as the band widens.
    """
    if max_wavenumber < 0:
        raise ValueError("max_wavenumber must be nonnegative")
    ks = np.arange(1, max_wavenumber + 1, dtype=float)
    return math.sqrt(1.0 + 2.0 * float(np.sum(ks**-2.0)))


# --------------------------------------------------------------------------
# Second-component control along negative-energy runs.


def normal_history(setting: NormalFormSetting, trajectory: Trajectory) -> list[State]:
    """Normalized-profile coordinates of every stored sample.

    Divides each stored state by the datum amplitude and inverts the
    near-identity change of coordinates, returning the history in the frame
    where the norm-domination certificates are stated.
    """
    return [
        to_normal_coords(setting, state / setting.amplitude)
        for state in trajectory.states
    ]


def norm_domination_margin(
    setting: NormalFormSetting, states: Sequence[State]
) -> float:
    """Worst signed margin of the second-component bound over the samples.

    For the law p1 the bound is ||v2|| <= (1+eps)/(1-eps) ||v1|| in L^2 and
    the margin is the difference of the two sides; for p2 and for the
    conjugated system the squared bound

        ||v2||^2 <= (1 + a^2 (||v1||_inf + eps ||v2||)^2)
                    / (1 - 4 eps (1 + a^2 (||v1||_inf + eps ||v2||)^2))
                    * (1 + 5 eps) * ||v1||^2

    applies, with a the datum amplitude; the margin compares the squares.
    A nonpositive return value means the bound held at every sample.  Raises
    when the denominator is not positive (the certificate is vacuous there)
    and for the plain p0 law, which has no such bound.
    """
    eps = setting.epsilon
    amp_sq = setting.amplitude**2
    if setting.law is PressureLaw.P0 and not setting.conjugated:
        raise ValueError("no second-component bound holds for the plain p0 law")
    margins = []
    for v in states:
        n1 = norm(v.u1, "L2")
        n2 = norm(v.u2, "L2")
        if setting.law is PressureLaw.P1:
            margins.append(n2 - (1.0 + eps) / (1.0 - eps) * n1)
        else:
            amplification = 1.0 + amp_sq * (norm(v.u1, "Linf") + eps * n2) ** 2
            denominator = 1.0 - 4.0 * eps * amplification
            if denominator <= 0.0:
                raise ValueError(
                    "second-component certificate is vacuous: denominator "
                    f"{denominator:.3e} is not positive"
                )
            bound_sq = amplification / denominator * (1.0 + 5.0 * eps) * n1**2
            margins.append(n2**2 - bound_sq)
    if not margins:
        raise ValueError("no samples to check")
    return float(max(margins))
