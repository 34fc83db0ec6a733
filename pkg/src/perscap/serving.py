"""Serving-time clamp, frame counting, and the serving capacity of one renewal."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import FadingParams, frame_capacity
from .geometry import (
    GroundUser,
    OrbitShell,
    SatelliteInit,
    VisibilityCap,
    orbit_rotation,
    slant_range,
    visibility_time,
)


class DegenerateServeError(ValueError):
    """Serving time shorter than one frame."""


@dataclass(frozen=True)
class ServingPolicy:
    """Clamp (t_min, t_max) on the visibility time, plus the frame duration dt."""

    t_min: float
    t_max: float  # math.inf allowed
    dt: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.t_min <= self.t_max:
            raise ValueError(f"need 0 <= t_min <= t_max, got {self}")
        if not 0.0 < self.dt <= self.t_max:
            raise ValueError(f"need 0 < dt <= t_max, got {self}")

    @property
    def fixed_serving(self) -> bool:
        """True when t_min == t_max, so the clamp ignores the visibility time."""
        return self.t_min == self.t_max


def serving_time(t_vis: float, policy: ServingPolicy) -> float:
    """Clamp the visibility time into [t_min, t_max]."""
    return min(max(t_vis, policy.t_min), policy.t_max)


def frame_count(t_serv: float, dt: float) -> int:
    """Number of whole frames in a serve; a serve shorter than one frame is an error."""
    if t_serv < dt:
        raise DegenerateServeError(f"t_serv={t_serv} shorter than one frame dt={dt}")
    return int(math.floor(t_serv / dt))


@dataclass(frozen=True)
class ServeRecord:
    """One renewal: the chosen satellite, total serving capacity, frame count."""

    sat: SatelliteInit
    capacity_sum: float
    frames: int


def track_path_losses(
    sat: SatelliteInit,
    user: GroundUser,
    shell: OrbitShell,
    n_frames: int,
    dt: float,
) -> np.ndarray:
    """Path loss d^2 at each frame start along the satellite's orbit track."""
    M = orbit_rotation(sat, shell)
    ang = shell.omega_sat * dt * np.arange(n_frames)
    pos = np.stack([np.cos(ang), np.sin(ang), np.zeros_like(ang)], axis=-1) @ M.T
    cos_sigma = (
        math.cos(user.phi_u) * pos[:, 2]
        + math.sin(user.phi_u)
        * (math.cos(user.theta_u) * pos[:, 0] + math.sin(user.theta_u) * pos[:, 1])
    )
    sigma = np.arccos(np.clip(cos_sigma, -1.0, 1.0))
    d = slant_range(user, shell.R, sigma)
    return d * d


def serving_capacity(
    sat: SatelliteInit,
    user: GroundUser,
    shell: OrbitShell,
    cap: VisibilityCap,
    policy: ServingPolicy,
    gamma: float,
    fading: FadingParams,
    capacity_fn=None,
) -> ServeRecord:
    """Total capacity and frame count for serving ``sat`` from its current position.

    Path loss is held constant within each frame, sampled at the frame start.
    ``capacity_fn(snr_array) -> capacities`` may replace the default memoized
    exact evaluation (e.g. with a precomputed table) in bulk runs.
    """
    if policy.fixed_serving:
        t_serv = policy.t_min
    else:
        t_serv = serving_time(visibility_time(sat, shell, cap), policy)
    n = frame_count(t_serv, policy.dt)
    ell = track_path_losses(sat, user, shell, n, policy.dt)
    if capacity_fn is None:
        total = sum(frame_capacity(gamma, li, fading) for li in ell)
    else:
        total = float(np.sum(capacity_fn(gamma / ell)))
    return ServeRecord(sat, total, n)
