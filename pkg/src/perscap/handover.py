"""Handover decision rules: random, first-frame greedy, serving-capacity, optimal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import FadingParams, LinkBudget, instantaneous_capacity
from .constellation import VisibleSet
from .geometry import GroundUser, OrbitShell, SatelliteInit, central_angle, slant_range
from .serving import ServeRecord

RAND = "rand"
MSC0 = "msc0"
MSC = "msc"
OPT = "opt"

_KINDS = (RAND, MSC0, MSC, OPT)


@dataclass(frozen=True)
class StrategyKind:
    """A handover strategy tag; Opt carries the capacity guess it subtracts per frame."""

    kind: str
    c_star: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.kind == OPT and not (np.isfinite(self.c_star) and self.c_star >= 0):
            raise ValueError(f"Opt requires a finite nonnegative c_star, got {self.c_star}")

    @classmethod
    def parse(cls, text: str) -> "StrategyKind":
        text = text.strip().lower()
        if text.startswith("opt:"):
            return cls(OPT, float(text.split(":", 1)[1]))
        if text == "opt":
            return cls(OPT, 0.0)
        return cls(text)


def decide(
    kind: StrategyKind,
    v: VisibleSet,
    records: list[ServeRecord] | None,
    rng: np.random.Generator,
    first_frame: np.ndarray | None = None,
) -> int:
    """Index of the chosen satellite in ``v``; ties break to the lowest index.

    Rand ignores all records; MSC0 consults only the first-frame capacities;
    MSC maximises C_k / N_k; Opt maximises C_k - c_star * N_k.
    """
    if v.n_vis < 1:
        raise ValueError("decide requires a non-empty VisibleSet")
    if kind.kind == RAND:
        return int(rng.integers(v.n_vis))
    if kind.kind == MSC0:
        if first_frame is None:
            raise ValueError("MSC0 requires per-candidate first-frame capacities")
        return int(np.argmax(first_frame[: v.n_vis]))
    if records is None or len(records) != v.n_vis:
        raise ValueError("MSC/Opt require one ServeRecord per visible satellite")
    caps = np.array([rec.capacity_sum for rec in records])
    frames = np.array([rec.frames for rec in records], dtype=float)
    if kind.kind == MSC:
        return int(np.argmax(caps / frames))
    return int(np.argmax(caps - kind.c_star * frames))


def msc0_metric(
    sat: SatelliteInit,
    user: GroundUser,
    shell: OrbitShell,
    gamma: float,
    fading: FadingParams,
) -> float:
    """First-frame capacity of ``sat`` at its initial position (the MSC0 score)."""
    d = slant_range(user, shell.R, central_angle(user, sat.theta0, sat.phi0))
    return instantaneous_capacity(LinkBudget(gamma, float(d) ** 2), fading)
