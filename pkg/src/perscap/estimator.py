"""Persistent-capacity estimation, bounds, and the Dinkelbach-type optimizer.

Monte Carlo runs are split into two stages so that capacity can be
re-evaluated cheaply at different transmit SNRs on frozen geometry:
``generate_geometry_events`` draws visible sets and per-candidate path-loss
tracks, ``evaluate_events`` turns them into per-candidate (C, N) records.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .channel import CapacityTable, FadingParams, frame_capacity
from .constellation import ConstellationParams, sample_visible_set
from .geometry import SatelliteInit, cap_bounds, visibility_time
from .handover import OPT, RAND, StrategyKind, decide
from .scenario import ScenarioModel
from .serving import ServeRecord, frame_count, serving_time, track_path_losses


class NonConvergenceError(RuntimeError):
    """Dinkelbach iteration cap exceeded; carries the trace so far."""

    def __init__(self, trace: "DinkelbachTrace"):
        super().__init__(f"no convergence within {trace.iterations} iterations")
        self.trace = trace


class InstanceTooLargeError(ValueError):
    """Brute-force enumeration would exceed the selection-combination cap."""


@dataclass(frozen=True)
class CapacityEstimate:
    """A capacity value (bits per channel use) with its standard error."""

    value: float
    std_error: float
    n_renewals: int


@dataclass
class DinkelbachTrace:
    """Iterates of the Dinkelbach-type run: (capacity guess, q value) pairs."""

    iterates: list[tuple[float, float]] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.iterates)

    @property
    def c_star(self) -> float:
        return self.iterates[-1][0]


@dataclass
class GeometryEvent:
    """One renewal's visible satellites with frame counts and path-loss tracks."""

    sats: list[SatelliteInit]
    frames: np.ndarray
    path_losses: list[np.ndarray]


@dataclass
class EventRecords:
    """Per-candidate serving records of one renewal, as arrays."""

    sats: list[SatelliteInit]
    caps: np.ndarray
    frames: np.ndarray
    first_frame: np.ndarray

    def serve_records(self) -> list[ServeRecord]:
        return [
            ServeRecord(s, float(c), int(n))
            for s, c, n in zip(self.sats, self.caps, self.frames)
        ]


def event_streams(seed: int, n: int) -> list[np.random.Generator]:
    """Independent counter-based RNG streams, one per Monte Carlo renewal."""
    return [
        np.random.Generator(np.random.Philox(ss))
        for ss in np.random.SeedSequence(seed).spawn(n)
    ]


def capacity_table_for(
    model: ScenarioModel, gamma_lo: float | None = None, gamma_hi: float | None = None
) -> CapacityTable:
    """Capacity table spanning every SNR the scenario's tracks can produce."""
    gamma_lo = model.gamma if gamma_lo is None else gamma_lo
    gamma_hi = model.gamma if gamma_hi is None else gamma_hi
    shell, cap, policy = model.shell, model.cap, model.policy
    # Fixed serving can carry a track beyond the cap edge; widen accordingly.
    overshoot = shell.omega_sat * policy.t_max if math.isfinite(policy.t_max) else 0.0
    sigma_far = min(cap.sigma1 + overshoot + 0.05, math.pi / 2)
    r, R = model.user.r, shell.R
    ell_max = r * r + R * R - 2.0 * r * R * math.cos(sigma_far)
    ell_min = shell.h * shell.h
    return CapacityTable(model.fading, gamma_lo / ell_max, gamma_hi / ell_min)


def generate_geometry_events(
    model: ScenarioModel, n_renewals: int, seed: int
) -> list[GeometryEvent]:
    """Draw ``n_renewals`` i.i.d. visible sets with per-candidate tracks.

    Candidates whose clamped serving time is shorter than one frame cannot
    carry a frame and are dropped; a renewal left with no servable candidate
    is redrawn from its own stream.
    """
    policy, shell, cap, user = model.policy, model.shell, model.cap, model.user
    events: list[GeometryEvent] = []
    for rng in event_streams(seed, n_renewals):
        while True:
            v = sample_visible_set(user, model.params, rng, cap)
            sats, frames, tracks = [], [], []
            for sat in v.sats:
                if policy.fixed_serving:
                    t_serv = policy.t_min
                else:
                    t_serv = serving_time(visibility_time(sat, shell, cap), policy)
                if t_serv < policy.dt:
                    continue
                n = frame_count(t_serv, policy.dt)
                sats.append(sat)
                frames.append(n)
                tracks.append(track_path_losses(sat, user, shell, n, policy.dt))
            if sats:
                break
        events.append(GeometryEvent(sats, np.array(frames), tracks))
    return events


def evaluate_events(
    geo_events: list[GeometryEvent],
    gamma: float,
    fading: FadingParams,
    capacity_fn=None,
) -> list[EventRecords]:
    """Capacity records for frozen geometry at transmit SNR ``gamma``."""
    out = []
    for ev in geo_events:
        if capacity_fn is not None:
            caps = np.array(
                [float(np.sum(capacity_fn(gamma / ell))) for ell in ev.path_losses]
            )
            first = np.array(
                [float(capacity_fn(gamma / ell[0])) for ell in ev.path_losses]
            )
        else:
            caps = np.array(
                [
                    sum(frame_capacity(gamma, li, fading) for li in ell)
                    for ell in ev.path_losses
                ]
            )
            first = np.array(
                [frame_capacity(gamma, ell[0], fading) for ell in ev.path_losses]
            )
        out.append(EventRecords(ev.sats, caps, ev.frames.astype(float), first))
    return out


def _ratio_estimate(chosen_c: np.ndarray, chosen_n: np.ndarray) -> CapacityEstimate:
    m = len(chosen_c)
    value = float(np.sum(chosen_c) / np.sum(chosen_n))
    if m > 1:
        resid = chosen_c - value * chosen_n
        se = float(np.std(resid, ddof=1) / (math.sqrt(m) * np.mean(chosen_n)))
    else:
        se = 0.0
    return CapacityEstimate(value, se, m)


def estimate_from_events(
    kind: StrategyKind, events: list[EventRecords], rng: np.random.Generator
) -> CapacityEstimate:
    """Persistent-capacity ratio estimate for one strategy over shared events."""
    chosen_c = np.empty(len(events))
    chosen_n = np.empty(len(events))
    for i, ev in enumerate(events):
        if kind.kind == RAND:
            k = int(rng.integers(len(ev.sats)))
        else:
            from .constellation import VisibleSet

            k = decide(
                kind,
                VisibleSet(ev.sats),
                ev.serve_records(),
                rng,
                first_frame=ev.first_frame,
            )
        chosen_c[i] = ev.caps[k]
        chosen_n[i] = ev.frames[k]
    return _ratio_estimate(chosen_c, chosen_n)


def persistent_capacity_mc(
    kind: StrategyKind, model: ScenarioModel, n_renewals: int, seed: int
) -> CapacityEstimate:
    """End-to-end Monte Carlo estimate of the persistent capacity."""
    geo = generate_geometry_events(model, n_renewals, seed)
    table = capacity_table_for(model)
    events = evaluate_events(geo, model.gamma, model.fading, table)
    return estimate_from_events(kind, events, np.random.default_rng(seed))


def nonpersistent_capacity(
    kind: StrategyKind, model: ScenarioModel, n_samples: int, seed: int
) -> CapacityEstimate:
    """Mean first-frame capacity of the chosen satellite (one-frame policy)."""
    from .serving import ServingPolicy

    dt = model.policy.dt
    one_frame = model.with_policy(ServingPolicy(dt, dt, dt))
    return persistent_capacity_mc(kind, one_frame, n_samples, seed)


def _serving_ratio_at(sat: SatelliteInit, model: ScenarioModel, capacity_fn) -> float:
    """C/N for serving from one cap position, or 0 when no frame fits."""
    shell, policy = model.shell, model.policy
    if policy.fixed_serving:
        t_serv = policy.t_min
    else:
        try:
            t_serv = serving_time(visibility_time(sat, shell, model.cap), policy)
        except Exception:
            return 0.0
    if t_serv < policy.dt:
        return 0.0
    n = frame_count(t_serv, policy.dt)
    ell = track_path_losses(sat, model.user, shell, n, policy.dt)
    return float(np.sum(capacity_fn(model.gamma / ell))) / n


def upper_bound(
    model: ScenarioModel, grid_resolution: int = 48, capacity_fn=None
) -> float:
    """Strategy-independent bound: max of C/N over the cap and both directions.

    Coarse grid on the cap's (phi, theta) parameterization, then bounded 1-D
    refinement along phi and theta around the best cell.
    """
    if grid_resolution < 32:
        raise ValueError(f"grid_resolution must be >= 32, got {grid_resolution}")
    if capacity_fn is None:
        capacity_fn = capacity_table_for(model)
    user, shell, cap = model.user, model.shell, model.cap
    band_lo = math.pi / 2 - shell.b
    band_hi = math.pi / 2 + shell.b
    eps = 1e-7
    phi_lo = max(cap.phi_lo, band_lo) + eps
    phi_hi = min(cap.phi_hi, band_hi) - eps

    def ratio(phi: float, tau: float, a: int) -> float:
        lo, hi = cap_bounds(phi, user, cap.sigma1)
        theta = lo + tau * (hi - lo)
        return _serving_ratio_at(
            SatelliteInit(theta % (2 * math.pi), phi, a), model, capacity_fn
        )

    phis = np.linspace(phi_lo, phi_hi, grid_resolution)
    taus = np.linspace(0.02, 0.98, grid_resolution)
    best = (0.0, phis[0], taus[0], 1)
    for a in (-1, 1):
        for phi in phis:
            for tau in taus:
                val = ratio(phi, tau, a)
                if val > best[0]:
                    best = (val, phi, tau, a)
    _, phi_b, tau_b, a_b = best
    dphi = (phi_hi - phi_lo) / (grid_resolution - 1)
    res = minimize_scalar(
        lambda p: -ratio(p, tau_b, a_b),
        bounds=(max(phi_lo, phi_b - dphi), min(phi_hi, phi_b + dphi)),
        method="bounded",
    )
    phi_b = float(res.x)
    dtau = 1.0 / (grid_resolution - 1)
    res = minimize_scalar(
        lambda t: -ratio(phi_b, t, a_b),
        bounds=(max(0.0, tau_b - dtau), min(1.0, tau_b + dtau)),
        method="bounded",
    )
    return max(best[0], -float(res.fun))


def _gauss_legendre(n: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = (hi + lo) / 2.0, (hi - lo) / 2.0
    return mid + half * x, half * w


def rand_capacity_quadrature(
    model: ScenarioModel,
    time_step: float = 1.0,
    n_phi: int = 64,
    n_theta: int = 32,
    capacity_fn=None,
) -> float:
    """Random-handover persistent capacity by direct numerical integration.

    Expectations of the track capacity integral and of the serving time are
    taken over the cap with the polar-angle law absorbed by the inverse-CDF
    substitution (which also removes the band-edge density singularity);
    the track integral uses the trapezoid rule at ``time_step``.
    """
    if time_step > 1.0:
        raise ValueError(f"time_step must be <= 1 s, got {time_step}")
    if capacity_fn is None:
        capacity_fn = capacity_table_for(model)
    user, shell, cap, policy = model.user, model.shell, model.cap, model.policy
    band_lo = math.pi / 2 - shell.b
    band_hi = math.pi / 2 + shell.b
    eps = 1e-9
    phi_lo = max(cap.phi_lo, band_lo) + eps
    phi_hi = min(cap.phi_hi, band_hi) - eps
    if phi_lo >= phi_hi:
        raise ValueError("visibility cap does not intersect the satellite band")

    def u_of(phi: float) -> float:
        return math.acos(
            max(-1.0, min(1.0, math.cos(phi) / math.sin(shell.b)))
        ) / math.pi

    us, wu = _gauss_legendre(n_phi, u_of(phi_lo), u_of(phi_hi))
    num_c = 0.0
    num_t = 0.0
    for u, w_phi in zip(us, wu):
        phi = math.acos(math.sin(shell.b) * math.cos(math.pi * u))
        lo, hi = cap_bounds(phi, user, cap.sigma1)
        if hi - lo < 1e-12:
            continue
        thetas, wt = _gauss_legendre(n_theta, lo, hi)
        for theta, w_theta in zip(thetas, wt):
            weight = w_phi * w_theta / (2.0 * math.pi)
            for a in (-1, 1):
                sat = SatelliteInit(theta % (2 * math.pi), phi, a)
                if policy.fixed_serving:
                    t_serv = policy.t_min
                else:
                    t_serv = serving_time(visibility_time(sat, shell, cap), policy)
                times = np.arange(0.0, t_serv, time_step)
                if times[-1] < t_serv:
                    times = np.append(times, t_serv)
                ell = _path_loss_at_times(sat, model, times)
                c_t = float(np.trapezoid(capacity_fn(model.gamma / ell), times))
                num_c += 0.5 * weight * c_t
                num_t += 0.5 * weight * t_serv
    return num_c / num_t


def _path_loss_at_times(sat: SatelliteInit, model: ScenarioModel, times) -> np.ndarray:
    from .geometry import orbit_rotation, slant_range

    M = orbit_rotation(sat, model.shell)
    ang = model.shell.omega_sat * np.asarray(times)
    pos = np.stack([np.cos(ang), np.sin(ang), np.zeros_like(ang)], axis=-1) @ M.T
    user = model.user
    cos_sigma = (
        math.cos(user.phi_u) * pos[:, 2]
        + math.sin(user.phi_u)
        * (math.cos(user.theta_u) * pos[:, 0] + math.sin(user.theta_u) * pos[:, 1])
    )
    d = slant_range(user, model.shell.R, np.arccos(np.clip(cos_sigma, -1.0, 1.0)))
    return d * d


def _event_arrays(event) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(event, EventRecords):
        return event.caps, event.frames
    pairs = np.asarray(event, dtype=float)
    return pairs[:, 0], pairs[:, 1]


def q_function(c: float, events) -> float:
    """Sample average of per-event residual maxima, (1/N) sum_n max_k (C - c N)."""
    total = 0.0
    for ev in events:
        caps, frames = _event_arrays(ev)
        if len(caps) == 0:
            raise ValueError("q_function requires non-empty events")
        total += float(np.max(caps - c * frames))
    return total / len(events)


def dinkelbach_estimate(
    events,
    c0: float = 0.0,
    epsilon: float | None = None,
    max_iter: int = 100,
) -> DinkelbachTrace:
    """Dinkelbach-type iteration for the optimal persistent capacity.

    Per event, select argmax_k (C_k - c N_k); update c to the selected
    ratio sum C / sum N; stop when the residual maximum average drops
    below ``epsilon`` (default 1e-6 of the best single-candidate ratio).
    """
    if not events:
        raise ValueError("dinkelbach_estimate requires at least one event")
    if c0 < 0:
        raise ValueError(f"initial guess must be nonnegative, got {c0}")
    arrays = [_event_arrays(ev) for ev in events]
    if epsilon is None:
        scale = max(float(np.max(c / n)) for c, n in arrays)
        epsilon = 1e-6 * max(scale, 1e-30)
    elif epsilon < 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")

    trace = DinkelbachTrace()
    c = c0
    for _ in range(max_iter):
        num = 0.0
        den = 0.0
        for caps, frames in arrays:
            k = int(np.argmax(caps - c * frames))
            num += caps[k]
            den += frames[k]
        c = num / den
        q = q_function(c, events)
        trace.iterates.append((c, q))
        # With epsilon == 0 the loop is deliberately never satisfied: rounding
        # can push q a hair below zero at the fixed point, which would
        # otherwise count as convergence.
        if epsilon > 0 and q < epsilon:
            trace.converged = True
            return trace
    raise NonConvergenceError(trace)


def brute_force_optimal(events) -> tuple[float, tuple[int, ...]]:
    """Exhaustive maximization of sum C / sum N over all per-event selections."""
    arrays = [_event_arrays(ev) for ev in events]
    n_comb = 1
    for caps, _ in arrays:
        n_comb *= len(caps)
        if n_comb > 1_000_000:
            raise InstanceTooLargeError(
                "more than 10^6 selection combinations; use dinkelbach_estimate"
            )
    best = (-math.inf, ())
    for sel in itertools.product(*(range(len(c)) for c, _ in arrays)):
        num = sum(arrays[i][0][k] for i, k in enumerate(sel))
        den = sum(arrays[i][1][k] for i, k in enumerate(sel))
        val = num / den
        if val > best[0]:
            best = (val, sel)
    return best


def db_gain(
    better: StrategyKind,
    worse: StrategyKind,
    geo_events: list[GeometryEvent],
    model: ScenarioModel,
    table,
    seed: int,
    max_gain_db: float = 4.0,
) -> float:
    """Horizontal (dB) shift by which ``worse`` must boost its SNR to match ``better``.

    Both strategies are evaluated on the same frozen geometry with common
    random numbers; ``table`` must cover SNRs up to gamma + max_gain_db.
    """

    def estimate(kind: StrategyKind, gamma: float) -> float:
        events = evaluate_events(geo_events, gamma, model.fading, table)
        if kind.kind == OPT:
            return dinkelbach_estimate(events).c_star
        return estimate_from_events(kind, events, np.random.default_rng(seed)).value

    target = estimate(better, model.gamma)

    def gap(delta_db: float) -> float:
        return estimate(worse, model.gamma * 10.0 ** (delta_db / 10.0)) - target

    lo, hi = 0.0, max_gain_db
    if gap(lo) >= 0.0:
        return 0.0
    if gap(hi) <= 0.0:
        raise ValueError(f"gain exceeds the search window of {max_gain_db} dB")
    return float(brentq(gap, lo, hi, xtol=1e-3))
