import random
from datetime import date
from decimal import Decimal

import pytest

from generators import random_scenario
from oracle import oracle_settlements
from platoon_dsr.domain import DriverProfile, Rank
from platoon_dsr.earnings import (
    Settlement,
    daily_settlement,
    episode_earnings,
    join_earnings_follower,
    join_earnings_leader,
    leave_earnings_follower,
    leave_earnings_leader,
    out_platoon_earnings,
    penalty,
    settle_day,
    state_value,
)
from platoon_dsr.errors import InvalidSegment, RoleMismatch
from platoon_dsr.scenario import scenario_from_dict
from platoon_dsr.simulation import run
from util import episode, seg

D = Decimal
DAY = date(2022, 5, 1)


class TestStateValue:
    def test_two_by_five(self):
        assert state_value(2, D(5)) == D(10)

    def test_zero_distance(self):
        assert state_value(3, D(0)) == D(0)

    def test_fractional(self):
        assert state_value(5, D("2.5")) == D("12.5")

    def test_single_car_rejected(self):
        with pytest.raises(InvalidSegment):
            state_value(1, D(5))

    def test_negative_distance_rejected(self):
        with pytest.raises(InvalidSegment):
            state_value(2, D(-1))


class TestOutPlatoonEarnings:
    def test_basic(self):
        assert out_platoon_earnings(D("0.09"), D(20)) == D("1.8")

    def test_zero_distance(self):
        assert out_platoon_earnings(D("0.12"), D(0)) == D(0)

    def test_zero_rate(self):
        assert out_platoon_earnings(D(0), D(100)) == D(0)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            out_platoon_earnings(D("-0.1"), D(1))


class TestPenalty:
    def test_below_threshold(self):
        assert penalty(D(8), D(10), D("0.01")) == D("-0.02")

    def test_at_threshold(self):
        assert penalty(D(10), D(10), D("0.01")) == D(0)

    def test_above_threshold(self):
        assert penalty(D(19), D(10), D("0.01")) == D(0)

    def test_boundary_just_below(self):
        assert penalty(D("9.99"), D(10), D("0.01")) == D("-0.0001")

    def test_never_positive_and_zero_iff_at_least_eta(self):
        rng = random.Random(8)
        for _ in range(500):
            d_in = D(rng.randrange(0, 4000)) / 100
            eta = D(rng.randrange(1, 2000)) / 100
            value = penalty(d_in, eta, D("0.01"))
            assert value <= 0
            assert (value == 0) == (d_in >= eta)


JOIN_SEGS = [seg("formation", 2, 5), seg("join", 3, 10, cars_delta=1)]


class TestJoinEarnings:
    def test_leader_with_one_join(self):
        ep = episode("leader", JOIN_SEGS)
        assert ep.join_count == 1
        assert join_earnings_leader(ep, D("0.12"), D("0.01")) == D("5.2")

    def test_leader_no_join_segments(self):
        ep = episode("leader", [seg("leave", 2, 4, cars_delta=1)])
        assert join_earnings_leader(ep, D("0.12"), D("0.01")) == D(0)

    def test_leader_formation_only_no_bonus(self):
        ep = episode("leader", JOIN_SEGS, join_count=0)
        assert join_earnings_leader(ep, D("0.12"), D("0.01")) == D("4.8")

    def test_follower_distance_only(self):
        ep = episode("follower", JOIN_SEGS)
        assert join_earnings_follower(ep, D("0.03"), D("0.01")) == D("0.6")

    def test_follower_empty(self):
        ep = episode("follower", [seg("leave", 2, 4, cars_delta=1)])
        assert join_earnings_follower(ep, D("0.03"), D("0.01")) == D(0)

    def test_follower_higher_rate(self):
        ep = episode("follower", JOIN_SEGS)
        assert join_earnings_follower(ep, D("0.12"), D("0.01")) == D("1.95")

    def test_role_mismatch(self):
        ep = episode("follower", JOIN_SEGS)
        with pytest.raises(RoleMismatch):
            join_earnings_leader(ep, D("0.12"))
        with pytest.raises(RoleMismatch):
            leave_earnings_leader(ep, D("0.12"))


FULL_SEGS = JOIN_SEGS + [seg("leave", 2, 4, cars_delta=1)]


class TestLeaveEarnings:
    def test_leader_with_one_leave(self):
        ep = episode("leader", FULL_SEGS)  # d_in = 19 >= eta
        assert leave_earnings_leader(ep, D("0.12"), D("0.01"), D(10)) == D("0.88")

    def test_leader_empty_partition_no_penalty(self):
        ep = episode("leader", [seg("formation", 2, 12)])
        assert leave_earnings_leader(ep, D("0.12"), D("0.01"), D(10)) == D(0)

    def test_leader_penalized(self):
        segs = [seg("formation", 2, 4), seg("leave", 2, 4, cars_delta=1)]
        ep = episode("leader", segs)  # d_in = 8 < eta
        assert leave_earnings_leader(ep, D("0.12"), D("0.01"), D(10)) == D("0.86")

    def test_leader_rate_not_clamped(self):
        # heavy leaves can push the effective rate negative
        segs = [seg("formation", 2, 20)] + \
            [seg("leave", 2, 10, cars_delta=1) for _ in range(3)]
        ep = episode("leader", segs)
        value = leave_earnings_leader(ep, D("0.01"), D("0.01"), D(10))
        assert value == D(30) * 2 * (D("0.01") - 3 * D("0.01"))
        assert value < 0

    def test_follower_with_leave(self):
        ep = episode("follower", FULL_SEGS)
        assert leave_earnings_follower(ep, D("0.03"), D("0.01"), D(10)) == D("0.16")

    def test_follower_left_early_gets_penalty(self):
        ep = episode("follower", [seg("join", 3, 8, cars_delta=1)], terminal="leave")
        assert leave_earnings_follower(ep, D("0.03"), D("0.01"), D(10)) == D("-0.02")

    def test_follower_empty_partition(self):
        ep = episode("follower", [seg("formation", 2, 15)])
        assert leave_earnings_follower(ep, D("0.03"), D("0.01"), D(10)) == D(0)


class TestEpisodeEarnings:
    def test_day_end_episode_has_zero_leave_part(self):
        ep = episode("leader", [seg("formation", 2, 15)], terminal="day-end")
        join_part, leave_part = episode_earnings(ep, D("0.12"))
        assert leave_part == D(0)
        assert join_part == D("3.6")

    def test_merge_dispatch_through_simulation(self):
        # B(2 cars) merges into A(3 cars): A's leader is paid with j=2,
        # B's old leader is paid as a follower afterwards
        spec = scenario_from_dict({
            "day_length": 40,
            "vehicle_speed": "1",
            "drivers": [
                {"driver_id": "a1", "rank": 5}, {"driver_id": "a2", "rank": 1},
                {"driver_id": "a3", "rank": 2}, {"driver_id": "b1", "rank": 4},
                {"driver_id": "b2", "rank": 3},
            ],
            "initial_platoons": [
                {"leader": "a1", "followers": ["a2", "a3"]},
                {"leader": "b1", "followers": ["b2"]},
            ],
            "events": [{"time": 10, "kind": "merge", "platoon_a": "P1",
                        "platoon_b": "P2"}],
        })
        trace = run(spec)
        settlements = {s.driver_id: s for s in settle_day(trace, DAY)}
        # a1 (rank 5, rate 0.15) leads throughout:
        # join partition state values (3*10 + 5*30) at 0.15 + 2*0.01
        assert settlements["a1"].er_join == (D(30) + D(150)) * D("0.17")
        # b1 (rank 4, rate 0.12) led P2 for 10 miles (state value 2*10, j=0),
        # then is settled as a follower: merge segment distance 30 at 0.12+0.01
        b1 = settlements["b1"]
        assert b1.episode_count == 2
        assert b1.er_join == D(20) * D("0.12") + D(30) * D("0.13")

    def test_split_dispatch_through_simulation(self):
        # both post-split episodes open with a split segment settled through
        # the penalized leave operations
        spec = scenario_from_dict({
            "day_length": 40,
            "vehicle_speed": "1",
            "drivers": [
                {"driver_id": "v1", "rank": 5}, {"driver_id": "v2", "rank": 1},
                {"driver_id": "v3", "rank": 4}, {"driver_id": "v4", "rank": 2},
            ],
            "initial_platoons": [
                {"leader": "v1", "followers": ["v2", "v3", "v4"]}],
            "events": [{"time": 25, "kind": "split", "platoon": "P1", "index": 2}],
        })
        trace = run(spec)
        settlements = {s.driver_id: s for s in settle_day(trace, DAY)}
        # v1 leads P2 (2 cars, 15 miles, l = 2 cars departed): penalty-free
        v1 = settlements["v1"]
        assert v1.episode_count == 2
        p2_leave = D(30) * (D("0.15") - 2 * D("0.01"))
        assert v1.er_leave == p2_leave
        # v3 leads P3: same shape at its own rate
        v3 = settlements["v3"]
        p3_leave = D(30) * (D("0.12") - 2 * D("0.01"))
        assert v3.er_leave == p3_leave
        # v4 follows P3: split segment distance at rate + delta
        assert settlements["v4"].er_leave == D(15) * (D("0.03") + D("0.01"))


class TestDailySettlement:
    def test_canonical_leader(self):
        alice = DriverProfile("alice", Rank(5), D("0.12"))
        ep = episode("leader", FULL_SEGS, terminal="leave")
        settlement = daily_settlement(alice, [ep], D(20), DAY)
        assert settlement.er_join == D("5.2")
        assert settlement.er_leave == D("0.88")
        assert settlement.er_out == D("2.4")
        assert settlement.er_total == D("8.48")
        assert settlement.penalty_total == D(0)
        assert settlement.episode_count == 1

    def test_out_platoon_only(self):
        driver = DriverProfile("solo", Rank(3), D("0.09"))
        settlement = daily_settlement(driver, [], D(30), DAY)
        assert settlement.er_total == D("2.7")
        assert settlement.er_in == D(0)

    def test_canonical_follower(self):
        carol = DriverProfile("carol", Rank(2), D("0.03"))
        ep = episode("follower", FULL_SEGS, terminal="leave")
        settlement = daily_settlement(carol, [ep], D(0), DAY)
        assert settlement.er_join == D("0.6")
        assert settlement.er_leave == D("0.16")
        assert settlement.er_total == D("0.76")

    def test_decomposition_identities_enforced(self):
        with pytest.raises(ValueError, match="er_in"):
            Settlement(driver_id="x", earning_date=DAY, er_join=D(1),
                       er_leave=D(1), er_in=D(3), er_out=D(0), er_total=D(3),
                       penalty_total=D(0), episode_count=0)
        with pytest.raises(ValueError, match="er_total"):
            Settlement(driver_id="x", earning_date=DAY, er_join=D(1),
                       er_leave=D(1), er_in=D(2), er_out=D(1), er_total=D(2),
                       penalty_total=D(0), episode_count=0)
        with pytest.raises(ValueError, match="penalty_total"):
            Settlement(driver_id="x", earning_date=DAY, er_join=D(1),
                       er_leave=D(1), er_in=D(2), er_out=D(0), er_total=D(2),
                       penalty_total=D(1), episode_count=0)


class TestAlgebraicProperties:
    def test_leader_join_strictly_increasing_in_j(self):
        values = [
            join_earnings_leader(episode("leader", JOIN_SEGS, join_count=j),
                                 D("0.12"), D("0.01"))
            for j in range(6)
        ]
        assert all(b > a for a, b in zip(values, values[1:]))

    def test_leader_leave_strictly_decreasing_in_l(self):
        values = [
            leave_earnings_leader(episode("leader", FULL_SEGS, leave_count=l),
                                  D("0.12"), D("0.01"), D(10))
            for l in range(6)
        ]
        assert all(b < a for a, b in zip(values, values[1:]))

    def test_leader_dominance_sufficient_condition(self):
        # with shared segments, d_in, and rate, a leader strictly out-earns a
        # follower whenever rate > delta*(2l + 1) and some join-partition
        # distance is positive (each state value is at least twice the bare
        # distance, which absorbs the follower's +delta edge)
        rng = random.Random(616)
        delta = D("0.01")
        checked = 0
        while checked < 400:
            segs = [seg("formation", rng.randint(2, 6),
                        D(rng.randrange(1, 300)) / 10)]
            for _ in range(rng.randrange(0, 5)):
                kind = rng.choice(["join", "leave"])
                segs.append(seg(kind, rng.randint(2, 6),
                                D(rng.randrange(0, 300)) / 10, cars_delta=1))
            leader_ep = episode("leader", segs)
            follower_ep = episode("follower", segs)
            rate = D(rng.randrange(0, 30)) / 100
            if rate <= delta * (2 * leader_ep.leave_count + 1):
                continue
            checked += 1
            leader_total = sum(episode_earnings(leader_ep, rate, delta, D(10)))
            follower_total = sum(episode_earnings(follower_ep, rate, delta, D(10)))
            assert leader_total > follower_total

    def test_scale_property(self, six_car_scenario):
        # scaling all distances by k scales every penalty-free component by k
        base = run(scenario_from_dict(six_car_scenario)).to_dict()
        for settlement in oracle_settlements(base).values():
            assert settlement["penalty_total"] == 0
        for k in (D(2), D("2.5"), D(7)):
            scaled = scale_trace(base, k)
            base_result = oracle_settlements(base)
            scaled_result = oracle_settlements(scaled)
            from platoon_dsr.trace import PlatoonTrace
            engine = {s.driver_id: s
                      for s in settle_day(PlatoonTrace.from_dict(scaled), DAY)}
            for driver_id, before in base_result.items():
                after = engine[driver_id]
                assert after.er_join == k * before["er_join"]
                assert after.er_leave == k * before["er_leave"]
                assert after.er_out == k * before["er_out"]
                assert after.er_total == k * before["er_total"]
                assert scaled_result[driver_id]["er_total"] == after.er_total

    def test_oracle_equivalence_sample(self):
        rng = random.Random(100)
        for _ in range(200):
            scenario, _ = random_scenario(rng)
            trace = run(scenario_from_dict(scenario))
            expected = oracle_settlements(trace.to_dict())
            for settlement in settle_day(trace, DAY):
                want = expected[settlement.driver_id]
                assert settlement.er_join == want["er_join"]
                assert settlement.er_leave == want["er_leave"]
                assert settlement.er_in == want["er_in"]
                assert settlement.er_out == want["er_out"]
                assert settlement.er_total == want["er_total"]
                assert settlement.penalty_total == want["penalty_total"]
                assert settlement.episode_count == want["episode_count"]


def scale_trace(trace: dict, k: Decimal) -> dict:
    import copy

    scaled = copy.deepcopy(trace)
    for platoon in scaled["platoons"]:
        for segment in platoon["segments"]:
            segment["distance"] = str(D(str(segment["distance"])) * k)
    scaled["out_platoon_distance"] = {
        driver: str(D(str(distance)) * k)
        for driver, distance in scaled["out_platoon_distance"].items()
    }
    return scaled
