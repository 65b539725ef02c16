"""Tests for coded_gossip.streams module."""

import threading

import pytest

from coded_gossip.streams import AUX_BASE, NODE_BASE, Stream, map_trials


@pytest.mark.unit
class TestStream:
    def test_same_path_same_draws(self):
        a = Stream(5).child(3).round(2).random(4)
        b = Stream(5).child(3).round(2).random(4)
        assert a.tolist() == b.tolist()

    def test_siblings_differ(self):
        root = Stream(5)
        assert root.child(0).generator().random() != root.child(1).generator().random()

    def test_seed_matters(self):
        assert Stream(1).generator().random() != Stream(2).generator().random()

    def test_node_and_aux_offsets(self):
        root = Stream(7)
        assert root.node(2).spawn_key == (NODE_BASE + 2,)
        assert root.aux(1).spawn_key == (AUX_BASE + 1,)

    def test_generator_restarts(self):
        s = Stream(9)
        assert s.generator().random() == s.generator().random()

    def test_fresh_entropy(self):
        assert Stream().seed >= 0

    def test_repr(self):
        assert repr(Stream(3).child(1)) == "Stream(seed=3, spawn_key=(1,))"


@pytest.mark.unit
class TestMapTrials:
    def test_ordered_by_index(self):
        assert map_trials(lambda i: i * i, 6, threads=3) == [0, 1, 4, 9, 16, 25]

    def test_serial(self):
        seen = []
        map_trials(seen.append, 3, threads=1)
        assert seen == [0, 1, 2]

    def test_uses_worker_threads(self):
        names = set(map_trials(lambda i: threading.current_thread().name, 8, threads=4))
        assert threading.main_thread().name not in names

    def test_zero_trials(self):
        assert map_trials(lambda i: i, 0, threads=4) == []
