"""Time integration, blow-up detection, and the Duhamel fixed-point solver.

The stiff linear parts are never discretized.  For the full systems the
linear symbol of each Fourier mode is a small matrix (2x2 complex for the
regularized system; the modified system couples the modes k and -k through
conjugation, giving a 4x4 complex-linear block on (u1_k, u2_k, conj u1_{-k},
conj u2_{-k})), and its exponential is applied exactly once per step.  For
the reduced system the only stiff piece is the free Schroedinger factor on
w2, a unimodular per-mode phase.  The nonlinear remainder is advanced by a
Lawson-type exponential scheme: midpoint Runge-Kutta (order 2, the default)
or Euler (order 1).

Blow-up detection monitors max(H1 of the first component, L2 of the second)
against a threshold; when a step crosses it, the crossing time is refined by
bisection on the step length to 1e-3 relative accuracy.

The Picard solver iterates the integral maps whose fixed point is the
reduced solution: the w1 map accumulates the cubic/remainder integrand by
cumulative Simpson, and the w2 map is a Duhamel integral against the free
Schroedinger kernel, evaluated with the oscillatory-weight Simpson rule so
that arbitrarily fast phases cost no accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .model import PressureLaw, State, SystemSpec, energy, q_apply, rhs_full
from .normalform import (
    NormalFormSetting,
    ReducedState,
    from_normal_coords,
    oscillate,
    reduced_rhs,
)
from .quadrature import cumulative_simpson_uniform, cumulative_weighted_simpson
from .spectral import Grid, SpectralField, conjugate, derivative, norm, zeros

_SCHEMES = ("exp_rk2", "exp_euler")


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    t_end: float
    scheme: str = "exp_rk2"
    blowup_threshold: float = 1.0
    store_every: int = 1

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        if self.t_end <= 0.0:
            raise ValueError("t_end must be positive")
        if self.scheme not in _SCHEMES:
            raise ValueError(f"scheme must be one of {_SCHEMES}, got {self.scheme!r}")
        if self.blowup_threshold <= 0.0:
            raise ValueError("blowup_threshold must be positive")
        if self.store_every < 1:
            raise ValueError("store_every must be at least 1")


@dataclass(frozen=True)
class Trajectory:
    times: list
    states: list
    diagnostics: list
    terminal_status: str  # "completed" | "blowup" | "diverged"
    blowup_time: float | None = None


@dataclass(frozen=True)
class PicardReport:
    iterates: int
    final_residual: float
    contraction_ratios: list

    @property
    def converged(self) -> bool:
        return self.final_residual < 1e-10


# --------------------------------------------------------------------------
# Exact per-mode propagators for the full systems.

_PLAIN_CACHE: dict = {}
_MODIFIED_CACHE: dict = {}


def _plain_propagator(grid: Grid, ct: float, cd: float, dt: float):
    """Entrywise arrays (p11, p12, p21, p22) of exp(dt * L_k) over all modes,
    where L_k = [[0, -ik ct], [ik ct, i cd k^2]].

    Generic modes use the closed-form eigen-decomposition; when the two
    eigenvalues collide within 1e-8 (discriminant zero, e.g. the unrescaled
    system at eps|k| = 2) the Cayley-Hamilton limit exp(lam dt)(I + dt(L -
    lam I)) replaces it, avoiding the 0/0 in the spectral formula."""
    key = (grid.n_modes, ct, cd, dt)
    hit = _PLAIN_CACHE.get(key)
    if hit is not None:
        return hit
    k = grid.wavenumbers.astype(float)
    l12 = -1j * k * ct
    l21 = 1j * k * ct
    l22 = 1j * cd * k * k
    half = 0.5 * l22
    s = np.sqrt(half * half + (k * ct) ** 2)  # half-gap of the spectrum
    lam_p, lam_m = half + s, half - s
    degenerate = np.abs(2.0 * s) < 1e-8 * np.maximum(1.0, np.abs(l22))
    gap = np.where(degenerate, 1.0, 2.0 * s)
    ep, em = np.exp(lam_p * dt), np.exp(lam_m * dt)
    p11 = (-lam_m * ep + lam_p * em) / gap
    p12 = l12 * (ep - em) / gap
    p21 = l21 * (ep - em) / gap
    p22 = ((l22 - lam_m) * ep - (l22 - lam_p) * em) / gap
    el = np.exp(half * dt)
    p11 = np.where(degenerate, el * (1.0 - half * dt), p11)
    p12 = np.where(degenerate, el * dt * l12, p12)
    p21 = np.where(degenerate, el * dt * l21, p21)
    p22 = np.where(degenerate, el * (1.0 + dt * (l22 - half)), p22)
    out = (p11, p12, p21, p22)
    _PLAIN_CACHE[key] = out
    return out


def _mode_matrix_modified(k: int, ct: float, cd: float) -> np.ndarray:
    """Linear symbol of the modified system on (u1_k, u2_k, conj u1_{-k},
    conj u2_{-k}); the conjugated transport couples k with -k."""
    kk = float(k)
    return np.array(
        [
            [0.0, 0.0, 0.0, -1j * kk * ct],
            [0.0, 1j * kk * kk * cd, 1j * kk * ct, 0.0],
            [0.0, -1j * kk * ct, 0.0, 0.0],
            [1j * kk * ct, 0.0, 0.0, -1j * kk * kk * cd],
        ],
        dtype=complex,
    )


def _modified_propagator(grid: Grid, ct: float, cd: float, dt: float):
    key = (grid.n_modes, ct, cd, dt)
    hit = _MODIFIED_CACHE.get(key)
    if hit is not None:
        return hit
    blocks = [expm(dt * _mode_matrix_modified(k, ct, cd)) for k in range(1, grid.n_modes + 1)]
    _MODIFIED_CACHE[key] = blocks
    return blocks


def _apply_linear(spec: SystemSpec, state: State, dt: float) -> State:
    ct, cd = spec.coefficients
    grid = state.grid
    if spec.kind == "modified":
        blocks = _modified_propagator(grid, ct, cd, dt)
        c1 = state.u1.coeffs.copy()
        c2 = state.u2.coeffs.copy()
        for k in range(1, grid.n_modes + 1):
            ip, im = grid.index(k), grid.index(-k)
            z = np.array(
                [c1[ip], c2[ip], np.conj(c1[im]), np.conj(c2[im])], dtype=complex
            )
            z = blocks[k - 1] @ z
            c1[ip], c2[ip] = z[0], z[1]
            c1[im], c2[im] = np.conj(z[2]), np.conj(z[3])
        return State(SpectralField(grid, c1), SpectralField(grid, c2))
    p11, p12, p21, p22 = _plain_propagator(grid, ct, cd, dt)
    c1 = p11 * state.u1.coeffs + p12 * state.u2.coeffs
    c2 = p21 * state.u1.coeffs + p22 * state.u2.coeffs
    return State(SpectralField(grid, c1), SpectralField(grid, c2))


def _nonlinear_full(spec: SystemSpec, law: PressureLaw, state: State) -> State:
    """rhs_full minus its linear part: the cubic transport forcing in the
    second component (conjugated as a whole for the modified system)."""
    ct, _ = spec.coefficients
    if spec.kind == "modified":
        f = conjugate(q_apply(PressureLaw.P0, state.u1, derivative(state.u1)))
    else:
        f = q_apply(law, state.u1, derivative(state.u1))
    return State(zeros(state.grid), (-ct) * f)


def step_full(
    spec: SystemSpec,
    law: PressureLaw,
    state: State,
    t: float,
    dt: float,
    scheme: str = "exp_rk2",
) -> State:
    """One exponential-integrator step of the full system."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if scheme == "exp_euler":
        k1 = _nonlinear_full(spec, law, state)
        return _apply_linear(spec, state + dt * k1, dt)
    if scheme != "exp_rk2":
        raise ValueError(f"unknown scheme {scheme!r}")
    k1 = _nonlinear_full(spec, law, state)
    mid = _apply_linear(spec, state + (0.5 * dt) * k1, 0.5 * dt)
    k2 = _nonlinear_full(spec, law, mid)
    return _apply_linear(spec, state, dt) + dt * _apply_linear(spec, k2, 0.5 * dt)


def _w2_phase(grid: Grid, cd: float, dt: float) -> np.ndarray:
    """Free Schroedinger factor on w2: per-mode phase exp(i dt cd k^2)."""
    k = grid.wavenumbers.astype(float)
    return np.exp(1j * dt * cd * k * k)


def _nonlinear_reduced(setting: NormalFormSetting, w: ReducedState) -> State:
    full = reduced_rhs(setting, w)
    _, cd = setting.coefficients
    n2 = full.u2 + 1j * cd * derivative(w.w2, order=2)
    return State(full.u1, n2)


def step_reduced(
    setting: NormalFormSetting, w: ReducedState, dt: float, scheme: str = "exp_rk2"
) -> ReducedState:
    """One exponential-integrator step of the reduced system.

    dt is capped at epsilon/20: the oscillatory prefactors are evaluated
    analytically at stage times, but the amplitudes they multiply must stay
    resolved."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if dt > setting.epsilon / 20.0 * (1.0 + 1e-9):
        raise ValueError(
            f"dt = {dt} exceeds the oscillatory cap epsilon/20 = {setting.epsilon / 20}"
        )
    _, cd = setting.coefficients
    grid = w.grid
    if scheme == "exp_euler":
        k1 = _nonlinear_reduced(setting, w)
        phase = _w2_phase(grid, cd, dt)
        return ReducedState(
            w.w1 + dt * k1.u1,
            SpectralField(grid, phase * (w.w2 + dt * k1.u2).coeffs),
            w.t + dt,
        )
    if scheme != "exp_rk2":
        raise ValueError(f"unknown scheme {scheme!r}")
    k1 = _nonlinear_reduced(setting, w)
    phase_half = _w2_phase(grid, cd, 0.5 * dt)
    mid = ReducedState(
        w.w1 + (0.5 * dt) * k1.u1,
        SpectralField(grid, phase_half * (w.w2 + (0.5 * dt) * k1.u2).coeffs),
        w.t + 0.5 * dt,
    )
    k2 = _nonlinear_reduced(setting, mid)
    phase_full = _w2_phase(grid, cd, dt)
    return ReducedState(
        w.w1 + dt * k2.u1,
        SpectralField(
            grid, phase_full * w.w2.coeffs + dt * phase_half * k2.u2.coeffs
        ),
        w.t + dt,
    )


# --------------------------------------------------------------------------
# Driving loop with blow-up detection.


def _monitor_full(state: State) -> float:
    return max(norm(state.u1, "Hs", s=1), norm(state.u2, "L2"))


def _monitor_reduced(w: ReducedState) -> float:
    return max(norm(w.w1, "Hs", s=1), norm(w.w2, "L2"))


def _finite(coeff_holder) -> bool:
    a = coeff_holder[0].coeffs
    b = coeff_holder[1].coeffs
    return bool(np.all(np.isfinite(a)) and np.all(np.isfinite(b)))


def _diagnostics_full(spec: SystemSpec, law: PressureLaw, state: State) -> dict:
    report = energy(law, state, conjugated=(spec.kind == "modified"))
    return {
        "norm1_h1": norm(state.u1, "Hs", s=1),
        "norm2_l2": norm(state.u2, "L2"),
        "energy": report.value,
        "mean_abs_1": abs(state.u1.coeff(0)),
        "mean_abs_2": abs(state.u2.coeff(0)),
    }


def _diagnostics_reduced(setting: NormalFormSetting, w: ReducedState) -> dict:
    v = oscillate(
        State(w.w1, w.w2), w.t, setting.epsilon, "backward", conjugated=setting.conjugated
    )
    physical = setting.amplitude * from_normal_coords(setting, v)
    report = energy(setting.law, physical, conjugated=setting.conjugated)
    return {
        "norm1_h1": norm(w.w1, "Hs", s=1),
        "norm2_l2": norm(w.w2, "L2"),
        "energy": report.value,
        "mean_abs_1": abs(w.w1.coeff(0)),
        "mean_abs_2": abs(w.w2.coeff(0)),
    }


def _require_zero_mean_state(state: State) -> None:
    for name, f in (("u1", state.u1), ("u2", state.u2)):
        if abs(f.coeff(0)) > 1e-12 * max(1.0, norm(f, "L2")):
            raise ValueError(f"solve requires a zero-mean datum; {name} has a mean")


def solve(system, law: PressureLaw, datum, config: IntegratorConfig) -> Trajectory:
    """Integrate to t_end, stopping early on threshold crossing or NaN/Inf.

    `system` selects the path: a SystemSpec integrates the full system from a
    State datum; a NormalFormSetting integrates the reduced system from a
    ReducedState datum (whose law must match).  The blow-up proxy is
    max(H1 of the first component, L2 of the second) against
    config.blowup_threshold; a crossing is refined by bisecting the final
    step until the bracket is below 1e-3 of the crossing time."""
    if isinstance(system, SystemSpec):
        if not isinstance(datum, State):
            raise TypeError("full-system solve expects a State datum")
        _require_zero_mean_state(datum)
        stepper = lambda st, t, dt: step_full(system, law, st, t, dt, config.scheme)
        monitor = _monitor_full
        diags = lambda st: _diagnostics_full(system, law, st)
        unpack = lambda st: (st.u1, st.u2)
        t0 = 0.0
        current = datum
    elif isinstance(system, NormalFormSetting):
        if not isinstance(datum, ReducedState):
            raise TypeError("reduced-system solve expects a ReducedState datum")
        if law is not system.law:
            raise ValueError("law argument disagrees with the setting's law")
        stepper = lambda st, t, dt: step_reduced(system, st, dt, config.scheme)
        monitor = _monitor_reduced
        diags = lambda st: _diagnostics_reduced(system, st)
        unpack = lambda st: (st.w1, st.w2)
        t0 = datum.t
        current = datum
    else:
        raise TypeError(f"cannot integrate a {type(system).__name__}")

    rho = config.blowup_threshold
    times = [t0]
    states = [current]
    diagnostics = [diags(current)]

    if monitor(current) > rho:
        return Trajectory(times, states, diagnostics, "blowup", blowup_time=t0)

    t = t0
    step_index = 0
    status = "completed"
    blowup_time = None
    while t < config.t_end - 1e-12 * max(1.0, config.t_end):
        dt = min(config.dt, config.t_end - t)
        nxt = stepper(current, t, dt)
        step_index += 1
        if not _finite(unpack(nxt)):
            status = "diverged"
            break
        if monitor(nxt) > rho:
            lo, hi = 0.0, dt
            crossing = nxt
            while (hi - lo) > 1e-3 * max(t + hi, 1e-12):
                mid = 0.5 * (lo + hi)
                trial = stepper(current, t, mid)
                if monitor(trial) > rho:
                    hi, crossing = mid, trial
                else:
                    lo = mid
            status = "blowup"
            blowup_time = t + 0.5 * (lo + hi)
            times.append(t + hi)
            states.append(crossing)
            diagnostics.append(diags(crossing))
            break
        current = nxt
        t += dt
        if step_index % config.store_every == 0 or t >= config.t_end - 1e-12:
            times.append(t)
            states.append(current)
            diagnostics.append(diags(current))

    if status != "blowup" and (not times or times[-1] != t):
        times.append(t)
        states.append(current)
        diagnostics.append(diags(current))
    return Trajectory(times, states, diagnostics, status, blowup_time=blowup_time)


# --------------------------------------------------------------------------
# Picard iteration of the Duhamel maps.


def _trajectory_distance(grid: Grid, a1, a2, b1, b2) -> float:
    """Sampled sup over time of max(H1 distance of w1, L2 distance of w2)."""
    k = grid.wavenumbers.astype(float)
    wh1 = np.maximum(1.0, k * k)
    d1 = np.sqrt(np.sum(wh1 * np.abs(a1 - b1) ** 2, axis=1))
    d2 = np.sqrt(np.sum(np.abs(a2 - b2) ** 2, axis=1))
    return float(np.max(np.maximum(d1, d2)))


def picard_solve(
    w1_0: SpectralField,
    w2_0: SpectralField,
    law: PressureLaw,
    setting: NormalFormSetting,
    T: float,
    max_iter: int = 50,
    n_nodes: int = 512,
):
    """Iterate the integral maps of the reduced system to their fixed point.

    Returns (trajectory, report) where trajectory is a list of ReducedState
    at n_nodes uniform times on [0, T].  Successive iterates must approach
    each other in the sampled sup of max(H1, L2); three consecutive
    non-contracting ratios abort the iteration (the report carries the
    measured ratios either way)."""
    if law is not setting.law:
        raise ValueError("law argument disagrees with the setting's law")
    if T <= 0.0:
        raise ValueError("T must be positive")
    if max(norm(w1_0, "Hs", s=1), norm(w2_0, "L2")) >= 1.0 / 6.0:
        raise ValueError("datum norms must be below 1/6 in H1 x L2")
    grid = w1_0.grid
    _, cd = setting.coefficients
    k = grid.wavenumbers.astype(float)
    omega = -cd * k * k  # Duhamel kernel phase on w2
    times = np.linspace(0.0, T, n_nodes)
    dx = times[1] - times[0]

    w1_flat = np.tile(w1_0.coeffs, (n_nodes, 1))
    w2_flat = np.tile(w2_0.coeffs, (n_nodes, 1))
    ratios: list[float] = []
    residual = np.inf
    previous_diff = None
    iterates = 0
    stalls = 0

    for _ in range(max_iter):
        g1 = np.empty_like(w1_flat)
        n2 = np.empty_like(w2_flat)
        for j, tj in enumerate(times):
            w = ReducedState(
                SpectralField(grid, w1_flat[j].copy()),
                SpectralField(grid, w2_flat[j].copy()),
                float(tj),
            )
            nl = _nonlinear_reduced(setting, w)
            g1[j] = nl.u1.coeffs
            n2[j] = nl.u2.coeffs
        new_w1 = w1_0.coeffs[None, :] + cumulative_simpson_uniform(g1, dx)
        duhamel = cumulative_weighted_simpson(n2, omega, dx)
        forward = np.exp(1j * cd * (k * k)[None, :] * times[:, None])
        new_w2 = forward * (w2_0.coeffs[None, :] + duhamel)
        diff = _trajectory_distance(grid, new_w1, new_w2, w1_flat, w2_flat)
        w1_flat, w2_flat = new_w1, new_w2
        iterates += 1
        if previous_diff is not None and previous_diff > 0.0:
            ratio = diff / previous_diff
            ratios.append(ratio)
            stalls = stalls + 1 if ratio >= 1.0 else 0
        previous_diff = diff
        residual = diff
        if residual < 1e-10:
            break
        if stalls >= 3:
            break

    trajectory = [
        ReducedState(
            SpectralField(grid, w1_flat[j].copy()),
            SpectralField(grid, w2_flat[j].copy()),
            float(times[j]),
        )
        for j in range(n_nodes)
    ]
    report = PicardReport(
        iterates=iterates, final_residual=float(residual), contraction_ratios=ratios
    )
    return trajectory, report
