"""Satellite position generation: stochastic (NBPP) and deterministic grid.

The NBPP draws i.i.d. satellite positions with uniform longitude, the
inclination-band polar-angle law, and a fair ascending/descending mark.
The deterministic grid places equally spaced planes of equally spaced
satellites for circular-orbit (CIRC) validation runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    GroundUser,
    OrbitShell,
    SatelliteInit,
    VisibilityCap,
    central_angle,
)


class ConfigurationError(ValueError):
    """Constellation parameters inconsistent with the requested operation."""


@dataclass(frozen=True)
class ConstellationParams:
    """Satellite count and shell; optional grid layout (planes x per-plane)."""

    n_sat: int
    shell: OrbitShell
    s_orb: float | None = None  # ascending-node spacing (rad), grid runs only
    n_orb: int | None = None  # satellites per plane, grid runs only

    def __post_init__(self) -> None:
        if self.n_sat < 1:
            raise ConfigurationError(f"n_sat must be >= 1, got {self.n_sat}")


@dataclass
class VisibleSet:
    """The satellites inside a user's visibility cap at a handover event."""

    sats: list[SatelliteInit] = field(default_factory=list)

    @property
    def n_vis(self) -> int:
        return len(self.sats)


def sample_polar_angle(u, b: float):
    """Inverse-CDF draw of the polar angle for inclination b.

    Phi = arccos(sin b * cos(pi u)) maps uniform u in [0, 1] onto the
    band [pi/2 - b, pi/2 + b] with the in-band density
    sin(phi) / (pi sqrt(sin^2 phi - cos^2 b)).
    """
    u = np.asarray(u, dtype=float)
    out = np.arccos(np.sin(b) * np.cos(np.pi * u))
    return float(out) if out.ndim == 0 else out


_MAX_EMPTY_REDRAWS = 1_000_000


def sample_visible_set(
    user: GroundUser,
    params: ConstellationParams,
    rng: np.random.Generator,
    cap: VisibilityCap | None = None,
) -> VisibleSet:
    """One NBPP realization conditioned on at least one visible satellite.

    Draws n_sat i.i.d. marked positions and keeps those inside the cap;
    empty realizations are redrawn wholesale, which implements the
    N_vis >= 1 conditioning without reweighting.
    """
    if cap is None:
        cap = VisibilityCap.for_user(user, params.shell)
    b = params.shell.b
    for _ in range(_MAX_EMPTY_REDRAWS):
        theta = rng.uniform(0.0, 2.0 * math.pi, params.n_sat)
        phi = sample_polar_angle(rng.uniform(0.0, 1.0, params.n_sat), b)
        marks = np.where(rng.uniform(size=params.n_sat) < 0.5, 1, -1)
        mask = central_angle(user, theta, phi) <= cap.sigma1
        if mask.any():
            idx = np.nonzero(mask)[0]
            return VisibleSet(
                [SatelliteInit(theta[i], phi[i], int(marks[i])) for i in idx]
            )
    raise ConfigurationError(
        "10^6 consecutive empty realizations; the cap is too small for n_sat"
    )


def grid_constellation(
    params: ConstellationParams, phase_offsets=None
) -> list[tuple[SatelliteInit, float]]:
    """Deterministic grid of N_sat satellites as (init, in-plane epoch phase).

    Planes sit at ascending-node longitudes k*s_orb, each holding n_orb
    equally spaced arguments of latitude; ``phase_offsets`` (one per plane,
    rad) staggers the in-plane phases Walker style.
    """
    if params.s_orb is None or params.n_orb is None:
        raise ConfigurationError("grid generation requires s_orb and n_orb")
    n_planes_f = 2.0 * math.pi / params.s_orb
    n_planes = round(n_planes_f)
    if abs(n_planes_f - n_planes) > 1e-9 or n_planes < 1:
        raise ConfigurationError(f"s_orb={params.s_orb} does not divide 2*pi")
    if n_planes * params.n_orb != params.n_sat:
        raise ConfigurationError(
            f"n_sat={params.n_sat} != planes({n_planes}) x n_orb({params.n_orb})"
        )
    if phase_offsets is None:
        phase_offsets = np.zeros(n_planes)
    phase_offsets = np.asarray(phase_offsets, dtype=float)
    if phase_offsets.shape != (n_planes,):
        raise ConfigurationError(
            f"need one phase offset per plane ({n_planes}), got {phase_offsets.shape}"
        )

    b = params.shell.b
    out: list[tuple[SatelliteInit, float]] = []
    for k in range(n_planes):
        raan = k * params.s_orb
        for j in range(params.n_orb):
            w = (j * 2.0 * math.pi / params.n_orb + phase_offsets[k]) % (2.0 * math.pi)
            # Argument of latitude w -> spherical position on the inclined plane.
            phi = math.pi / 2 - math.asin(math.sin(b) * math.sin(w))
            theta = (raan + math.atan2(math.cos(b) * math.sin(w), math.cos(w))) % (
                2.0 * math.pi
            )
            a = 1 if math.cos(w) >= 0.0 else -1
            out.append((SatelliteInit(theta, phi, a), w))
    return out


def visible_snapshot(
    positions, user: GroundUser, cap: VisibilityCap
) -> VisibleSet:
    """Filter instantaneous deterministic positions into a VisibleSet.

    ``positions`` is an iterable of (theta, phi, a).  An empty result is
    returned as-is (n_vis = 0); the caller skips the handover event.
    """
    sats = [
        SatelliteInit(theta, phi, int(a))
        for theta, phi, a in positions
        if central_angle(user, theta, phi) <= cap.sigma1
    ]
    return VisibleSet(sats)
