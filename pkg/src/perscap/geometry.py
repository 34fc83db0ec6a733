"""Spherical visibility-cap geometry and circular-orbit propagation.

Conventions: spherical coordinates (radius, longitude theta, polar angle phi)
with phi measured from the north pole.  All angles are radians, lengths
metres, times seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.optimize import bisect

EARTH_RADIUS_M = 6_371_000.0
MU_EARTH = 3.986004418e14  # m^3/s^2


class GeometryError(ValueError):
    """Input outside the valid domain of a geometry operation."""


class RootNotFoundError(RuntimeError):
    """No sign change found when bracketing the cap-exit time."""


@dataclass(frozen=True)
class GroundUser:
    """A ground user on the Earth sphere.

    Parameters
    ----------
    r : float
        Earth radius (m).
    theta_u : float
        User longitude (rad, [0, 2pi)).
    phi_u : float
        User polar angle (rad, strictly inside (0, pi)).
    psi_min : float
        Minimum elevation angle above the horizon (rad, [0, pi/2)).
    """

    r: float
    theta_u: float
    phi_u: float
    psi_min: float

    def __post_init__(self) -> None:
        if not self.r > 0:
            raise GeometryError(f"Earth radius must be positive, got {self.r}")
        if not 0.0 < self.phi_u < math.pi:
            raise GeometryError(f"phi_u must lie strictly in (0, pi), got {self.phi_u}")
        if not 0.0 <= self.psi_min < math.pi / 2:
            raise GeometryError(f"psi_min must lie in [0, pi/2), got {self.psi_min}")


@dataclass(frozen=True)
class OrbitShell:
    """A circular LEO shell: altitude, inclination, and derived orbital rates."""

    h: float
    b: float
    r: float = EARTH_RADIUS_M

    def __post_init__(self) -> None:
        if not self.h > 0:
            raise GeometryError(f"altitude must be positive, got {self.h}")
        if not 0.0 < self.b <= math.pi / 2:
            raise GeometryError(f"inclination must lie in (0, pi/2], got {self.b}")

    @property
    def R(self) -> float:
        """Shell radius r + h (m)."""
        return self.r + self.h

    @cached_property
    def v_sat(self) -> float:
        """Circular-orbit speed sqrt(mu/R) (m/s)."""
        return math.sqrt(MU_EARTH / self.R)

    @cached_property
    def omega_sat(self) -> float:
        """Orbital angular velocity (rad/s)."""
        return self.v_sat / self.R

    @cached_property
    def T_sat(self) -> float:
        """Orbital period (s)."""
        return 2.0 * math.pi / self.omega_sat


@dataclass(frozen=True)
class SatelliteInit:
    """Initial satellite position plus ascending (+1) / descending (-1) mark."""

    theta0: float
    phi0: float
    a: int

    def __post_init__(self) -> None:
        if self.a not in (-1, +1):
            raise GeometryError(f"direction mark must be -1 or +1, got {self.a}")


def central_angle(user: GroundUser, theta, phi):
    """Great-circle angle between the user's sub-point and (theta, phi).

    Accepts scalars or arrays; the arccos argument is clamped to [-1, 1]
    against floating-point drift.
    """
    arg = np.cos(user.phi_u) * np.cos(phi) + np.sin(user.phi_u) * np.sin(phi) * np.cos(
        user.theta_u - theta
    )
    return np.arccos(np.clip(arg, -1.0, 1.0))


def max_central_angle(psi_min: float, r: float, R: float) -> float:
    """Maximum central angle of the visibility cap for elevation mask psi_min."""
    if not 0.0 <= psi_min < math.pi / 2:
        raise GeometryError(f"psi_min must lie in [0, pi/2), got {psi_min}")
    if not R > r > 0:
        raise GeometryError(f"need R > r > 0, got r={r}, R={R}")
    return math.acos((r / R) * math.cos(psi_min)) - psi_min


def slant_range(user: GroundUser, R: float, sigma):
    """User-to-satellite distance at central angle sigma (law of cosines)."""
    r = user.r
    return np.sqrt(r * r + R * R - 2.0 * r * R * np.cos(sigma))


@dataclass(frozen=True)
class VisibilityCap:
    """The cap of satellite positions visible to a ground user."""

    sigma1: float
    owner: GroundUser

    def __post_init__(self) -> None:
        if not 0.0 < self.sigma1 < math.pi / 2:
            raise GeometryError(f"sigma1 must lie in (0, pi/2), got {self.sigma1}")

    @classmethod
    def for_user(cls, user: GroundUser, shell: OrbitShell) -> "VisibilityCap":
        return cls(max_central_angle(user.psi_min, user.r, shell.R), user)

    @property
    def phi_lo(self) -> float:
        return self.owner.phi_u - self.sigma1

    @property
    def phi_hi(self) -> float:
        return self.owner.phi_u + self.sigma1

    def contains(self, theta, phi):
        return central_angle(self.owner, theta, phi) <= self.sigma1


def cap_arc_length(phi: float, user: GroundUser, sigma1: float) -> float:
    """Arc length (rad) of the cap's latitude line at polar angle phi.

    Zero at both edges of the polar-angle span [phi_u - sigma1, phi_u + sigma1];
    phi outside the span is a domain error.
    """
    if not user.phi_u - sigma1 - 1e-12 <= phi <= user.phi_u + sigma1 + 1e-12:
        raise GeometryError(
            f"phi={phi} outside cap span [{user.phi_u - sigma1}, {user.phi_u + sigma1}]"
        )
    arg = (1.0 / math.sin(phi)) * (
        math.cos(user.phi_u) / math.sin(user.phi_u) * math.cos(phi)
        - math.cos(sigma1) / math.sin(user.phi_u)
    )
    return math.pi + 2.0 * math.asin(max(-1.0, min(1.0, arg)))


def cap_bounds(phi: float, user: GroundUser, sigma1: float) -> tuple[float, float]:
    """Longitude interval [theta_L, theta_U] of the cap at polar angle phi."""
    half = cap_arc_length(phi, user, sigma1) / 2.0
    return user.theta_u - half, user.theta_u + half


def direction_angle(phi: float, b: float, a: int):
    """Angle between the satellite velocity and the local latitude line.

    Positive for ascending satellites (a = +1), negative for descending.
    """
    c = math.cos(b) / math.sin(phi)
    if c > 1.0 + 1e-12:
        raise GeometryError(
            f"phi={phi} outside the inclination band (sin phi < cos b for b={b})"
        )
    return a * math.acos(min(1.0, c))


def _rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def _rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def orbit_rotation(init: SatelliteInit, shell: OrbitShell) -> np.ndarray:
    """Rotation taking the flat-plane orbit into the satellite's true orbit.

    Composition: tilt by the velocity direction about x, then clockwise about
    y by pi/2 - phi0, then counter-clockwise about z by theta0.
    """
    beta = direction_angle(init.phi0, shell.b, init.a)
    return _rot_z(init.theta0) @ _rot_y(-(math.pi / 2 - init.phi0)) @ _rot_x(beta)


def propagate(init: SatelliteInit, shell: OrbitShell, t):
    """Satellite position (theta, phi) after t seconds on its circular orbit.

    Accepts scalar or array t.  propagate(init, shell, 0) recovers
    (theta0, phi0) up to rounding.
    """
    M = orbit_rotation(init, shell)
    ang = shell.omega_sat * np.asarray(t, dtype=float)
    flat = np.stack(
        [np.cos(ang), np.sin(ang), np.zeros_like(ang)], axis=-1
    )  # unit vectors, shape (..., 3)
    pos = flat @ M.T
    theta = np.mod(np.arctan2(pos[..., 1], pos[..., 0]), 2.0 * math.pi)
    phi = np.arccos(np.clip(pos[..., 2], -1.0, 1.0))
    if np.ndim(t) == 0:
        return float(theta), float(phi)
    return theta, phi


_BRACKET_STEPS = 720
_VIS_TIME_TOL = 1e-3  # s


def visibility_time(
    init: SatelliteInit, shell: OrbitShell, cap: VisibilityCap
) -> float:
    """Time until the satellite leaves the visibility cap.

    The satellite must start inside the cap.  The exit time is the first root
    of sigma(t) - sigma1 on (0, T_sat/2], bracketed by marching in steps of
    T_sat/720 and then bisected to 1e-3 s.
    """
    M = orbit_rotation(init, shell)
    user = cap.owner
    omega = shell.omega_sat

    def excess(t: float) -> float:
        ang = omega * t
        pos = M @ (math.cos(ang), math.sin(ang), 0.0)
        theta = math.atan2(pos[1], pos[0])
        phi = math.acos(max(-1.0, min(1.0, pos[2])))
        return float(central_angle(user, theta, phi)) - cap.sigma1

    f0 = excess(0.0)
    if f0 > 1e-9:
        raise GeometryError("satellite starts outside the visibility cap")

    step = shell.T_sat / _BRACKET_STEPS
    t_max = shell.T_sat / 2.0
    t_lo, f_lo = 0.0, f0
    t_hi = step
    while t_hi <= t_max + step / 2:
        t_hi = min(t_hi, t_max)
        f_hi = excess(t_hi)
        if f_hi >= 0.0:
            return float(bisect(excess, t_lo, t_hi, xtol=_VIS_TIME_TOL))
        t_lo, f_lo = t_hi, f_hi
        if t_hi >= t_max:
            break
        t_hi += step
    raise RootNotFoundError(
        "no cap exit found on (0, T_sat/2]; cap may span the whole half-orbit"
    )
