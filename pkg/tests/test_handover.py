"""Handover decision rules: argmax metrics, tie-breaking, randomness."""

from __future__ import annotations

import math

import numpy as np
import pytest

from perscap.channel import AVERAGE_SHADOWING
from perscap.constellation import VisibleSet
from perscap.geometry import GroundUser, OrbitShell, SatelliteInit
from perscap.handover import MSC, MSC0, OPT, RAND, StrategyKind, decide, msc0_metric
from perscap.serving import ServeRecord


def records_from(pairs):
    return [
        ServeRecord(SatelliteInit(0.01 * i, 1.0, 1), c, n)
        for i, (c, n) in enumerate(pairs)
    ]


def vset(n):
    return VisibleSet([SatelliteInit(0.01 * i, 1.0, 1) for i in range(n)])


class TestStrategyKind:
    def test_parse_plain_kinds(self):
        for text, kind in (("rand", RAND), ("msc0", MSC0), ("MSC", MSC)):
            assert StrategyKind.parse(text).kind == kind

    def test_parse_opt_with_guess(self):
        k = StrategyKind.parse("opt:1.5")
        assert k.kind == OPT
        assert k.c_star == 1.5

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            StrategyKind.parse("nearest")

    def test_opt_requires_nonnegative_guess(self):
        with pytest.raises(ValueError):
            StrategyKind(OPT, -1.0)


class TestDecide:
    def test_singleton_for_every_kind(self, rng):
        recs = records_from([(5.0, 2)])
        ff = np.array([1.0])
        for kind in (StrategyKind(RAND), StrategyKind(MSC0), StrategyKind(MSC),
                     StrategyKind(OPT, 0.7)):
            assert decide(kind, vset(1), recs, rng, first_frame=ff) == 0

    def test_msc_and_opt_arithmetic(self, rng):
        recs = records_from([(10.0, 5), (9.0, 3)])
        v = vset(2)
        assert decide(StrategyKind(MSC), v, recs, rng) == 1  # 3.0 > 2.0
        # c_star = 0.5 gives 7.5 vs 7.5, a tie broken to the lowest index
        assert decide(StrategyKind(OPT, 0.5), v, recs, rng) == 0
        assert decide(StrategyKind(OPT, 1.0), v, recs, rng) == 1  # 6 > 5

    def test_msc0_uses_first_frames_only(self, rng):
        recs = records_from([(100.0, 50), (1.0, 1)])
        ff = np.array([0.3, 0.9])
        assert decide(StrategyKind(MSC0), vset(2), recs, rng, first_frame=ff) == 1

    def test_rand_frequencies(self):
        rng = np.random.default_rng(9)
        recs = records_from([(1.0, 1), (2.0, 1), (3.0, 1)])
        counts = np.zeros(3)
        for _ in range(100_000):
            counts[decide(StrategyKind(RAND), vset(3), recs, rng)] += 1
        assert np.all(np.abs(counts / 100_000 - 1 / 3) < 0.01)

    def test_rand_ignores_records(self):
        recs_a = records_from([(1.0, 1), (100.0, 1)])
        recs_b = records_from([(100.0, 1), (1.0, 1)])
        picks_a = [
            decide(StrategyKind(RAND), vset(2), recs_a, np.random.default_rng(s))
            for s in range(50)
        ]
        picks_b = [
            decide(StrategyKind(RAND), vset(2), recs_b, np.random.default_rng(s))
            for s in range(50)
        ]
        assert picks_a == picks_b

    def test_empty_set_rejected(self, rng):
        with pytest.raises(ValueError):
            decide(StrategyKind(RAND), VisibleSet([]), [], rng)

    def test_constant_frames_collapses_opt_to_msc(self, rng):
        pairs = [(3.0, 4), (7.0, 4), (6.5, 4)]
        recs = records_from(pairs)
        v = vset(3)
        msc_pick = decide(StrategyKind(MSC), v, recs, rng)
        for c in (0.0, 0.3, 1.0, 5.0):
            assert decide(StrategyKind(OPT, c), v, recs, rng) == msc_pick

    def test_permutation_equivariance(self, rng):
        pairs = [(3.0, 2), (9.0, 4), (5.0, 1)]
        recs = records_from(pairs)
        pick = decide(StrategyKind(MSC), vset(3), recs, rng)
        perm = [2, 0, 1]
        recs_p = records_from([pairs[i] for i in perm])
        pick_p = decide(StrategyKind(MSC), vset(3), recs_p, rng)
        assert perm[pick_p] == pick

    def test_opt_breakpoints_finite(self, rng):
        recs = records_from([(10.0, 5), (9.0, 3), (4.0, 1)])
        v = vset(3)
        picks = [
            decide(StrategyKind(OPT, float(c)), v, recs, rng)
            for c in np.linspace(0.0, 6.0, 400)
        ]
        changes = sum(1 for a, b in zip(picks, picks[1:]) if a != b)
        assert changes <= len(recs) - 1


class TestMsc0Metric:
    def test_overhead_beats_edge(self):
        user = GroundUser(
            r=6_371_000.0, theta_u=0.5, phi_u=1.2, psi_min=math.radians(30.0)
        )
        shell = OrbitShell(h=550e3, b=math.radians(53.0))
        overhead = msc0_metric(
            SatelliteInit(user.theta_u, user.phi_u, 1), user, shell, 1e12,
            AVERAGE_SHADOWING,
        )
        edge = msc0_metric(
            SatelliteInit(user.theta_u + 0.09, user.phi_u, 1), user, shell, 1e12,
            AVERAGE_SHADOWING,
        )
        assert overhead > edge
