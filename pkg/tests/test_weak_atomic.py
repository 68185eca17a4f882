import random
import threading
from collections import Counter

import pytest

from acqret import AcquireRetire, Collector, CountedHandlePolicy, CountedObject, CopyDestruct, WeakAtomic
from acqret import weak_atomic as wa

from _policies import BufferPolicy, TrackingPolicy
from _util import run_threads


def dom(P=4):
    return AcquireRetire(P, 1)


def test_new_empty_and_value():
    assert WeakAtomic(domain=dom()).load() is None
    assert WeakAtomic(5, domain=dom()).load() == 5


def test_boxed_wide_value_round_trips():
    big = (1, "two", [3.0], {"k": b"v" * 100})
    assert WeakAtomic(big, domain=dom()).load() is big


def test_equal_values_stay_distinct():
    pol = TrackingPolicy()
    d = dom()
    a = pol.make()
    m = WeakAtomic(a, pol, d)
    m.store(a)  # the same object stored twice is two ownerships
    wa.drain(d)
    assert a.destructs == 1
    m.drop()
    assert a.destructs == 2


def test_counted_policy_load_bumps_count():
    rc = Collector(1)
    pol = CountedHandlePolicy(rc)
    o = CountedObject()
    o.add_counter(1)
    m = WeakAtomic(o, pol, dom())
    got = m.load()
    assert got is o and o.count == 2
    assert WeakAtomic(policy=pol, domain=dom()).load() is pol.empty


def test_store_over_empty_retires_nothing():
    d = dom()
    m = WeakAtomic(domain=d)
    m.store(1)
    assert d.handle().rlist == [] and d.handle().flist == type(d.handle().flist)()


def test_store_then_drain_destructs_once():
    pol = TrackingPolicy()
    d = dom()
    a, b = pol.make(), pol.make()
    m = WeakAtomic(a, pol, d)
    m.store(b)
    wa.drain(d)
    assert a.destructs == 1 and b.destructs == 0
    m.drop()
    assert b.destructs == 1


def test_exchange_and_move():
    d = dom()
    m = WeakAtomic("v", domain=d)
    assert m.move() == "v"
    assert m.load() is None
    assert m.exchange("a") is None
    assert m.exchange("b") == "a"
    assert m.exchange("a") == "b"


def test_compare_exchange():
    pol = TrackingPolicy()
    d = dom()
    a, b, c = pol.make(), pol.make(), pol.make()
    m = WeakAtomic(a, pol, d)
    assert not m.compare_exchange(b, c)
    assert m.compare_exchange(a, b)
    assert m.peek_raw() is b
    wa.drain(d)
    assert a.destructs == 1 and c.destructs == 0


def test_drop():
    pol = TrackingPolicy()
    WeakAtomic(policy=pol, domain=dom()).drop()
    v = pol.make()
    m = WeakAtomic(v, pol, dom())
    m.drop()
    assert v.destructs == 1
    m.drop()
    assert v.destructs == 1


def test_default_domain_shared():
    assert wa.default_domain() is wa.default_domain()
    m = WeakAtomic(3)
    m.store(4)
    assert m.load() == 4
    wa.detach()


@pytest.mark.stress
def test_concurrent_stores_destruct_each_once(fast_switch):
    pol = TrackingPolicy()
    d = dom(4)
    m = WeakAtomic(pol.make(), pol, d)

    def storer():
        for _ in range(2000):
            m.store(pol.make())
        wa.detach(d)

    run_threads([storer, storer])
    m.drop()
    assert all(v.destructs == 1 for v in pol.owned)
    assert pol.overlaps == 0 and pol.dead_copies == 0


@pytest.mark.stress
def test_concurrent_exchanges_permutation(fast_switch):
    d = dom(4)
    m = WeakAtomic(("init",), domain=d)
    outs = []

    def ex(t):
        got = []
        for k in range(3000):
            got.append(m.exchange((t, k)))
        return got

    res = run_threads([lambda t=t: ex(t) for t in range(3)])
    returned = [v for r in res for v in r] + [m.peek_raw()]
    stored = [("init",)] + [(t, k) for t in range(3) for k in range(3000)]
    assert Counter(returned) == Counter(stored)


@pytest.mark.stress
def test_deep_copy_buffers_consistent(fast_switch):
    pol = BufferPolicy(32)
    d = dom(5)
    m = WeakAtomic(pol.make(0), pol, d)
    stop = threading.Event()
    gens = iter(range(1, 10**9))
    lock = threading.Lock()

    def writer():
        for _ in range(3000):
            with lock:
                g = next(gens)
            m.store(pol.make(g))
        wa.detach(d)

    def loader():
        bad = 0
        while not stop.is_set():
            buf = m.load()
            if len(set(buf)) != 1 or buf[0] < 0:
                bad += 1
        wa.detach(d)
        return bad

    def writers():
        run_threads([writer, writer])
        stop.set()

    res = run_threads([writers, loader, loader])
    assert res[1:] == [0, 0]


@pytest.mark.stress
def test_tracking_policy_mixed_ops(fast_switch):
    pol = TrackingPolicy()
    d = dom(5)
    cells = [WeakAtomic(pol.make(), pol, d) for _ in range(4)]
    taken = []
    lock = threading.Lock()

    def worker(seed):
        rng = random.Random(seed)
        mine = []
        for _ in range(3000):
            m = cells[rng.randrange(4)]
            r = rng.random()
            if r < 0.5:
                m.load()
            elif r < 0.8:
                m.store(pol.make())
            else:
                old = m.exchange(pol.make())
                mine.append(old)
        wa.detach(d)
        with lock:
            taken.extend(mine)

    run_threads([lambda s=s: worker(s) for s in range(4)])
    for v in taken:  # exchange handed the destruct duty to us
        pol.destruct(v)
    for m in cells:
        m.drop()
    assert Counter(v.destructs for v in pol.owned) == {1: len(pol.owned)}
    assert pol.overlaps == 0 and pol.dead_copies == 0


def test_counted_handles_reproduce_refcount_census():
    rc = Collector(1)
    pol = CountedHandlePolicy(rc)
    d = dom(2)
    objs = [CountedObject() for _ in range(5)]
    cells = []
    for o in objs[:2]:
        o.add_counter(1)
        cells.append(WeakAtomic(o, pol, d))
    for o in objs[2:]:
        o.add_counter(1)
        cells[0].store(o)
    copies = [cells[1].load() for _ in range(3)]
    wa.drain(d)
    assert objs[1].count == 1 + len(copies)
    assert objs[4].count == 1
    assert all(o.destroyed for o in objs[:1] + objs[2:4])
    for c in copies:
        rc.decrement(c)
    for m in cells:
        m.drop()
    assert all(o.destroyed for o in objs) and rc.destructed.load() == 5
