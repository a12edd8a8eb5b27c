from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from evoclust import gsemo, objectives as ob
from evoclust.geometry import Dataset, InputError, build_table
from evoclust.objectives import ObjectiveVector as V


class StubRng:
    """Returns fixed uniforms so exactly the chosen bits fall below 1/g."""

    def __init__(self, flip=()):
        self.flip = set(flip)

    def random(self, g):
        return np.array([0.0 if i in self.flip else 0.99 for i in range(g)])


@pytest.mark.parametrize("a, b, expected", [((5, 2), (5, 2), True), ((5, 3), (5, 2), True), ((4, 3), (5, 2), False)])
def test_weakly_dominates(a, b, expected):
    assert gsemo.weakly_dominates(V(*a), V(*b)) is expected


@pytest.mark.parametrize("a, b, expected", [
    ((5, 3), (5, 2), True), ((5, 2), (5, 2), False), ((math.inf, 1), (math.inf, 0), True),
])
def test_dominates(a, b, expected):
    assert gsemo.dominates(V(*a), V(*b)) is expected


def test_mutate_no_flip():
    x = np.array([1, 0, 1, 0, 0], bool)
    np.testing.assert_array_equal(gsemo.mutate(x, StubRng()), x)


def test_mutate_single_flip():
    x = np.zeros(8, bool)
    y = gsemo.mutate(x, StubRng({3}))
    assert np.flatnonzero(y != x).tolist() == [3]


def test_mutate_mean_popcount():
    rng = np.random.default_rng(0)
    x = np.zeros(20, bool)
    mean = np.mean([gsemo.mutate(x, rng).sum() for _ in range(100_000)])
    assert abs(mean - 1.0) <= 0.05


def _vecs(pop):
    return [tuple(v) for _, v in pop]


def test_update_replaces_on_improvement():
    pop = [(None, V(5, 2))]
    assert _vecs(gsemo.update_population(pop, None, V(6, 2), 3)) == [(6, 2)]


def test_update_rejects_dominated():
    pop = [(None, V(5, 2))]
    assert gsemo.update_population(pop, None, V(4, 2), 3) is pop


def test_update_keeps_incomparable():
    pop = [(None, V(5, 2))]
    assert _vecs(gsemo.update_population(pop, None, V(4, 3), 3)) == [(5, 2), (4, 3)]


def test_update_rejects_oversized():
    pop = [(None, V(5, 2))]
    assert gsemo.update_population(pop, None, V(9, 4), 3) is pop


def test_update_equal_vector_replaces_incumbent():
    old, new = np.array([1, 0], bool), np.array([0, 1], bool)
    out = gsemo.update_population([(old, V(1, 1))], new, V(1, 1), 2)
    assert len(out) == 1 and out[0][0] is new


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(0, 4)), min_size=1, max_size=40))
def test_update_keeps_antichain(stream):
    pop = [(None, V(0, 0))]
    for f1, f2 in stream:
        pop = gsemo.update_population(pop, None, V(f1, f2), 4)
        vs = [v for _, v in pop]
        assert len({v.f2 for v in vs}) == len(vs)
        for i, a in enumerate(vs):
            for j, b in enumerate(vs):
                if i != j:
                    assert not gsemo.weakly_dominates(a, b)


def test_select_output():
    pop = [(f"x{j}", V(0, j)) for j in range(4)]
    assert gsemo.select_output(pop, 3) == "x3"
    assert gsemo.select_output(pop[:3], 3) is None
    assert gsemo.select_output([("only", V(0, 3))], 3) == "only"


def test_k1_two_points():
    t = build_table(Dataset(np.array([0.0, 1.0])))
    seen = []

    def watch(it, pop):
        if any(v.f2 > 0 for _, v in pop):
            seen.append(len(pop))

    res = gsemo.run(ob.kmedian(t, 1), gsemo.RunConfig(k=1, budget=2_000, seed=4), observer=watch)
    assert res.output is not None and res.output.sum() == 1
    assert seen and max(seen) <= 2


def test_seed_determinism(line4_table):
    form = ob.kmedian(line4_table, 2)
    a = gsemo.run(form, gsemo.RunConfig(k=2, budget=500, seed=11))
    b = gsemo.run(form, gsemo.RunConfig(k=2, budget=500, seed=11))
    assert a.trace == b.trace
    np.testing.assert_array_equal(a.output, b.output)
    assert gsemo.trace_to_jsonl(a.trace) == gsemo.trace_to_jsonl(b.trace)


@pytest.mark.parametrize("seed", range(5))
def test_ktmm_line_reaches_opt(line4_table, seed):
    form = ob.ktmm(line4_table, 2)
    res = gsemo.run(form, gsemo.RunConfig(k=2, budget=10_000, seed=seed))
    assert ob.original_cost(form, res.output) == 1


def test_first_hit_stops_early(line4_table):
    form = ob.ktmm(line4_table, 2)
    res = gsemo.run(form, gsemo.RunConfig(k=2, budget=10_000, seed=0, stop_rule=gsemo.FirstHit()))
    assert res.stopped_early and res.iterations == res.first_hit_iteration
    assert res.hit_iteration(lambda r: r["j_max"] >= 2) == res.first_hit_iteration


def test_threshold_first_hit(line4_table):
    form = ob.kmedian(line4_table, 2)
    res = gsemo.run(form, gsemo.RunConfig(k=2, budget=10_000, seed=1, stop_rule=gsemo.FirstHit(2.0)))
    assert res.stopped_early and ob.original_cost(form, res.output) <= 2


def test_trace_jsonl_infinities(line4_table):
    res = gsemo.run(ob.kmedian(line4_table, 2), gsemo.RunConfig(k=2, budget=5, seed=0))
    assert '"f1": "-inf"' in gsemo.trace_to_jsonl(res.trace).splitlines()[0]


def test_run_rejects_mismatched_k(line4_table):
    with pytest.raises(InputError):
        gsemo.run(ob.kmedian(line4_table, 2), gsemo.RunConfig(k=3, budget=5))
    with pytest.raises(InputError):
        gsemo.run(ob.kmedian(line4_table, 4), gsemo.RunConfig(k=4, budget=5))
    with pytest.raises(InputError):
        gsemo.RunConfig(k=2, budget=0)
