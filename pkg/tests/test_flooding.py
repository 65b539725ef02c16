"""Tests for coded_gossip.flooding module."""

import pytest

from coded_gossip import flooding
from coded_gossip.errors import SimulationTimeout
from coded_gossip.flooding import (
    FloodParams,
    TailPoint,
    check_flood_params,
    estimate_flood_params,
    flood,
    flood_tail,
)
from coded_gossip.netmodel import complete_edges, path_edges
from coded_gossip.netmodel.gossip import RandomPhoneCall
from coded_gossip.netmodel.static import StaticGraph
from coded_gossip.streams import Stream

# ---------------------------------------------------------------------------
# flood
# ---------------------------------------------------------------------------


@pytest.mark.unit
class TestFlood:
    def test_directed_path_without_faults(self, stream):
        model = StaticGraph(n=4, edges=path_edges(4))
        traj = flood(model, 0.0, {0}, 100, stream)
        assert traj.stop_time == 4
        assert traj.sizes == [1, 2, 3, 4]

    def test_complete_graph_without_faults(self, stream):
        model = StaticGraph(n=6, edges=complete_edges(6))
        assert flood(model, 0.0, {3}, 10, stream).stop_time == 2

    def test_everyone_informed_at_start(self, stream):
        model = StaticGraph(n=3, edges=frozenset())
        assert flood(model, 0.5, {0, 1, 2}, 10, stream).stop_time == 1

    def test_single_node(self, stream):
        assert flood(RandomPhoneCall(n=1), 0.5, {0}, 5, stream).stop_time == 1

    def test_sets_only_grow(self, stream):
        traj = flood(RandomPhoneCall(n=12, mode="push"), 0.5, {0}, 500, stream)
        for before, after in zip(traj.sets, traj.sets[1:]):
            assert before <= after
        assert len(traj.sets[-1]) == 12

    def test_timeout_carries_partial_trajectory(self, stream):
        model = StaticGraph(n=3, edges=complete_edges(3))
        with pytest.raises(SimulationTimeout) as exc_info:
            flood(model, 1.0, {0}, 7, stream)
        partial = exc_info.value.partial
        assert exc_info.value.rounds == 7
        assert partial.stop_time is None
        assert partial.sizes == [1] * 7

    def test_disconnected_graph_times_out(self, stream):
        model = StaticGraph(n=3, edges=frozenset({(0, 1), (1, 0)}))
        with pytest.raises(SimulationTimeout):
            flood(model, 0.0, {0}, 20, stream)

    @pytest.mark.parametrize(
        "start,p_fault",
        [(set(), 0.1), ({0}, -0.1), ({0}, 1.5), ({9}, 0.1)],
    )
    def test_invalid_arguments(self, stream, start, p_fault):
        with pytest.raises(ValueError):
            flood(RandomPhoneCall(n=4), p_fault, start, 10, stream)

    def test_same_stream_same_trajectory(self):
        model = RandomPhoneCall(n=10, mode="exchange")
        a = flood(model, 0.3, {2}, 200, Stream(5))
        b = flood(model, 0.3, {2}, 200, Stream(5))
        assert a.sets == b.sets


@pytest.mark.unit
class TestFloodMonotonicity:
    def test_superset_start_is_never_behind(self):
        model = RandomPhoneCall(n=10, mode="push")
        root = Stream(77)
        for i in range(200):
            small = flood(model, 0.5, {0}, 500, root.child(i))
            large = flood(model, 0.5, {0, 5}, 500, root.child(i))
            assert large.stop_time <= small.stop_time
            for t, informed in enumerate(large.sets):
                if t < len(small.sets):
                    assert small.sets[t] <= informed


# ---------------------------------------------------------------------------
# Tail estimation
# ---------------------------------------------------------------------------


@pytest.mark.unit
class TestFloodTail:
    def test_counts(self):
        tail = flood_tail([3, 3, 4, 6], 3)
        assert tail == [
            TailPoint(k=0, t=3, count=4, probability=1.0),
            TailPoint(k=1, t=4, count=2, probability=0.5),
            TailPoint(k=2, t=5, count=1, probability=0.25),
            TailPoint(k=3, t=6, count=1, probability=0.25),
        ]

    def test_empty(self):
        assert flood_tail([], 1) == []


@pytest.mark.unit
class TestFitAlpha:
    def _geometric_tail(self, trials=1024, points=5):
        return [TailPoint(k=0, t=5, count=trials, probability=1.0)] + [
            TailPoint(k=k, t=5 + k, count=trials >> k, probability=(trials >> k) / trials)
            for k in range(1, points + 1)
        ]

    def test_exact_geometric_tail(self):
        alpha, residual, insufficient = flooding._fit_alpha(self._geometric_tail(), 2, 16.0, 5)
        assert not insufficient
        assert residual == pytest.approx(0.0, abs=1e-12)
        assert alpha == pytest.approx(1.0, rel=1e-5)
        assert alpha < 1.0

    def test_base_q(self):
        alpha, _, _ = flooding._fit_alpha(self._geometric_tail(), 4, 16.0, 5)
        assert alpha == pytest.approx(0.5, rel=1e-5)

    def test_too_few_points_gives_cap(self):
        tail = self._geometric_tail(points=2)
        alpha, residual, insufficient = flooding._fit_alpha(tail, 2, 9.0, 5)
        assert insufficient
        assert alpha == 9.0
        assert residual == 0.0

    def test_sparse_points_are_left_out_of_the_fit(self):
        tail = self._geometric_tail(trials=64, points=6)
        # counts 32, 16, 8, 4, 2, 1: three points reach min_tail_count = 8
        alpha, _, insufficient = flooding._fit_alpha(tail, 2, 16.0, 8)
        assert not insufficient
        assert alpha == pytest.approx(1.0, rel=1e-5)

    def test_alpha_below_every_observed_point(self):
        tail = [
            TailPoint(0, 4, 1000, 1.0),
            TailPoint(1, 5, 300, 0.3),
            TailPoint(2, 6, 200, 0.2),
            TailPoint(3, 7, 20, 0.02),
            TailPoint(4, 8, 2, 0.002),
        ]
        alpha, _, _ = flooding._fit_alpha(tail, 2, 16.0, 5)
        for pt in tail[1:]:
            assert pt.probability < 2.0 ** (-alpha * pt.k)


@pytest.mark.integration
class TestEstimateFloodParams:
    def test_nearly_deterministic_flood_hits_cap(self):
        model = StaticGraph(n=4, edges=complete_edges(4))
        params = estimate_flood_params(model, 2**16, 200, 50, Stream(3), alpha_cap=12.0)
        assert params.T == 2
        assert params.alpha == 12.0
        assert params.insufficient_tail
        assert params.starts == (0, 1, 2, 3)

    def test_phone_call_parameters_hold_on_their_own_trials(self):
        model = RandomPhoneCall(n=16, mode="push")
        root = Stream(21)
        params = estimate_flood_params(model, 2, 400, 200, root, max_starts=3)
        assert params.T >= 4
        assert 0 < params.alpha < 16
        assert not params.insufficient_tail
        assert len(params.starts) == 3
        assert params.worst_start in params.starts
        assert params.tail[0].probability == 1.0
        check = check_flood_params(params, model, 400, root, max_rounds=200)
        assert check.passed, check.violations

    def test_thread_count_does_not_change_result(self):
        model = RandomPhoneCall(n=8, mode="exchange")
        one = estimate_flood_params(model, 2, 120, 100, Stream(8), max_starts=2, threads=1)
        four = estimate_flood_params(model, 2, 120, 100, Stream(8), max_starts=2, threads=4)
        assert (one.T, one.alpha, one.starts) == (four.T, four.alpha, four.starts)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            estimate_flood_params(RandomPhoneCall(n=4), 1, 10, 10, Stream(0))
        with pytest.raises(ValueError):
            estimate_flood_params(RandomPhoneCall(n=4), 2, 0, 10, Stream(0))

    def test_start_that_never_finishes_times_out(self):
        model = StaticGraph(n=3, edges=frozenset())
        with pytest.raises(SimulationTimeout, match="No flood from node 0"):
            estimate_flood_params(model, 2, 20, 10, Stream(0), max_starts=None)


@pytest.mark.integration
class TestCheckFloodParams:
    def test_overconfident_parameters_fail(self):
        model = RandomPhoneCall(n=8, mode="push")
        params = FloodParams(T=1, alpha=50.0, q=2, trials=200, starts=(0,))
        check = check_flood_params(params, model, 200, Stream(4), max_rounds=100)
        assert not check.passed
        start, k, observed, bound = check.violations[0]
        assert start == 0
        assert observed >= bound

    def test_to_dict(self):
        params = FloodParams(T=3, alpha=1.5, q=4, trials=10, residual=0.1)
        assert params.to_dict() == {
            "T": 3,
            "alpha": 1.5,
            "q": 4,
            "trials": 10,
            "residual": 0.1,
            "insufficient_tail": False,
            "worst_start": 0,
        }
