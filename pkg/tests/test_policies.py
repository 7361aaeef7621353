import itertools
import zlib

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from leoroute.geometry import TopologySnapshot
from leoroute.policies import (POLICY_NAMES, PolicyInput, backpressure_schedule, backpressure_scores,
                               equalize_schedule, lg_backpressure_schedule, lg_bp_scores, make_policy,
                               maxweight_schedule, no_isl_schedule, random_schedule)
from leoroute.queueing import check_schedule, clamp_schedule, gateway_offload


def make_input(q, neighbors, isl_caps=None, lg_caps=None):
    K = len(q)
    lg = np.zeros(K) if lg_caps is None else np.asarray(lg_caps, float)
    vis = lg > 0
    snap = TopologySnapshot(0, tuple(tuple(n) for n in neighbors),
                            tuple(0 if v else None for v in vis), vis)
    L = len(snap.links)
    caps = np.full(L, 10.0) if isl_caps is None else np.asarray(isl_caps, float)
    return PolicyInput(np.asarray(q, dtype=np.int64), snap, caps, lg)


def random_input(rng, K=6, M=3):
    neighbors = [[int(m) for m in rng.permutation([j for j in range(K) if j != k])[:rng.integers(0, M + 1)]]
                 for k in range(K)]
    lg = np.where(rng.random(K) < 0.4, rng.uniform(0, 50, K), 0.0)
    inp = make_input(rng.integers(0, 100, K), neighbors, None, lg)
    return PolicyInput(inp.q, inp.topo, rng.uniform(0, 40, len(inp.links)), lg)


def test_bp_score_examples():
    inp = make_input([10, 4], [[1], [0]], [3.0, 5.0])
    assert backpressure_scores(inp).tolist() == [18.0, -30.0]
    inp = make_input([2, 9], [[1], []], [5.0])
    assert backpressure_scores(inp).tolist() == [-35.0]
    assert backpressure_scores(make_input([4, 4], [[1], [0]])).tolist() == [0.0, 0.0]


def test_bp_schedule_equal_queues_idle():
    d = backpressure_schedule(make_input([7, 7, 7], [[1, 2], [0], [0]]))
    assert not d.demand.any()


def test_bp_congested_center():
    inp = make_input([100, 0, 0, 0, 0], [[1, 2, 3, 4], [], [], [], []], [30.0] * 4)
    d = backpressure_schedule(inp)
    assert d.demand.tolist() == [30.0] * 4
    s = clamp_schedule(d.demand, inp.q, inp.isl_caps, np.zeros(5, int), inp.links, d.priority)
    assert s.isl_packets.sum() == 100


def test_bp_activation_matches_oracle():
    rng = np.random.default_rng(0)
    for _ in range(100):
        inp = random_input(rng)
        d = backpressure_schedule(inp)
        want = [(inp.q[k] - inp.q[m]) * c > 0 for (k, m), c in zip(inp.links, inp.isl_caps)]
        assert ((d.demand > 0) | (np.floor(inp.isl_caps) == 0)).tolist() == \
            [w or np.floor(c) == 0 for w, c in zip(want, inp.isl_caps)]
        assert np.all((d.demand > 0) <= np.array(want, dtype=bool))


def test_lg_bp_examples():
    inp = make_input([0, 5], [[1], []], [1.0], [0.0, 8.0])
    assert backpressure_scores(inp).tolist() == [-5.0]
    assert lg_bp_scores(inp, 1.0).tolist() == [3.0]
    assert lg_backpressure_schedule(inp, 1.0).demand.tolist() == [1.0]
    assert lg_bp_scores(inp, 0.0).tolist() == backpressure_scores(inp).tolist()
    no_gw = make_input([0, 5], [[1], []], [1.0], [0.0, 0.0])
    assert lg_bp_scores(no_gw, 7.0).tolist() == backpressure_scores(no_gw).tolist()
    with pytest.raises(ValueError):
        lg_bp_scores(inp, float("nan"))


@given(seed=st.integers(0, 2 ** 32 - 1), lam=st.floats(0, 100))
def test_lg_bp_decomposition(seed, lam):
    inp = random_input(np.random.default_rng(seed))
    s_lg, s_bp = lg_bp_scores(inp, lam), backpressure_scores(inp)
    want = lam * inp.lg_caps[inp.links[:, 1]]
    # exact up to one rounding of the float sum
    assert np.all(np.abs((s_lg - s_bp) - want) <= 4 * np.finfo(float).eps * np.maximum(np.abs(s_lg), np.abs(s_bp)))


@given(seed=st.integers(0, 2 ** 32 - 1), c=st.integers(1, 1000))
def test_bp_scale_equivariance(seed, c):
    inp = random_input(np.random.default_rng(seed))
    scaled = PolicyInput(inp.q * c, inp.topo, inp.isl_caps, inp.lg_caps)
    assert np.array_equal(backpressure_schedule(inp).demand > 0, backpressure_schedule(scaled).demand > 0)


@given(seed=st.integers(0, 2 ** 32 - 1))
def test_bp_never_uphill(seed):
    inp = random_input(np.random.default_rng(seed))
    on = backpressure_schedule(inp).demand > 0
    k, m = inp.links[on, 0], inp.links[on, 1]
    assert np.all(inp.q[k] > inp.q[m])


def test_maxweight_examples():
    inp = make_input([10, 3], [[1], []], [4.0])
    assert maxweight_schedule(inp).demand.tolist() == [4.0]
    inp = make_input([3, 5, 3], [[1, 2], [], []])
    assert not maxweight_schedule(inp).demand.any()


def test_maxweight_matches_argmax():
    rng = np.random.default_rng(4)
    for _ in range(100):
        inp = make_input(rng.integers(0, 50, 6), [[1, 2, 3, 4, 5], [], [], [], [], []],
                         rng.uniform(0.5, 30, 5))
        d = maxweight_schedule(inp)
        down = [i for i in range(5) if inp.q[0] > inp.q[i + 1]]
        if not down:
            assert not d.demand.any()
            continue
        best = max(down, key=lambda i: (inp.q[0] * inp.isl_caps[i], -i))
        assert np.flatnonzero(d.demand).tolist() == [best] or np.floor(inp.isl_caps[best]) == 0


def test_equalize_examples():
    assert not equalize_schedule(make_input([5, 5], [[1], [0]])).demand.any()
    assert equalize_schedule(make_input([100, 0], [[1], []], [30.0])).demand.tolist() == [30.0]
    assert equalize_schedule(make_input([10, 4], [[1], []], [30.0])).demand.tolist() == [3.0]


def test_no_isl_and_random():
    rng = np.random.default_rng(1)
    inp = random_input(rng)
    assert not no_isl_schedule(inp).demand.any()
    assert not random_schedule(inp, rng, 0.0).demand.any()
    full = random_schedule(inp, rng, 1.0)
    assert np.array_equal(full.demand, np.floor(inp.isl_caps))
    big = make_input(np.zeros(2, int), [[1], [0]], [5.0, 5.0])
    frac = np.mean([random_schedule(big, rng, 0.5).demand > 0 for _ in range(50_000)])
    assert abs(frac - 0.5) < 0.01


@pytest.mark.parametrize("name", [n for n in POLICY_NAMES if n != "rl-residual"])
def test_all_policies_feasible_after_clamp(name):
    rng = np.random.default_rng(zlib.crc32(name.encode()))
    pol = make_policy(name, lg_bp_weight=3.0)
    for _ in range(200):
        inp = random_input(rng)
        d = pol(inp, rng)
        v = gateway_offload(inp.q, inp.topo.visible, inp.lg_caps)
        s = clamp_schedule(d.demand, inp.q, inp.isl_caps, v, inp.links, d.priority)
        check_schedule(s, inp.q, inp.isl_caps)


def test_make_policy_errors():
    with pytest.raises(ValueError):
        make_policy("rl-residual")
    with pytest.raises(ValueError):
        make_policy("bogus")


def test_policy_input_validation():
    inp = make_input([1, 2], [[1], []])
    with pytest.raises(ValueError):
        PolicyInput(inp.q, inp.topo, np.zeros(3), inp.lg_caps)
    with pytest.raises(ValueError):
        PolicyInput(inp.q, inp.topo, -np.ones(1), inp.lg_caps)


def test_exhaustive_small_bp_sets():
    # every sign pattern of queue differentials on a 3-node path
    for qs in itertools.product(range(3), repeat=3):
        inp = make_input(list(qs), [[1], [0, 2], [1]])
        on = backpressure_schedule(inp).demand > 0
        want = [qs[k] > qs[m] for k, m in inp.links]
        assert on.tolist() == want
