import random
import threading
from collections import Counter

import pytest

from acqret import EMPTY, AcquireRetire, Heap, Queue, Reclaimer, Stack, _atomics
from acqret.containers import NEXT, VALUE

from _lincheck import QueueModel, StackModel, container_world, programs
from _sched import explore, random_schedules
from _steps import StepCounter, peek_budgets
from _util import run_threads


# -- sequential examples -----------------------------------------------------


def test_stack_lifo():
    s = Stack()
    s.push(1)
    assert s.pop() == 1
    for v in (1, 2, 3):
        s.push(v)
    assert [s.pop(), s.pop(), s.pop()] == [3, 2, 1]
    assert s.pop() is None


def test_stack_peek():
    s = Stack()
    assert s.peek() is None
    s.push(7)
    assert s.peek() == 7
    assert s.pop() == 7


def test_stack_popped_cell_actually_freed():
    s = Stack(max_processes=1)
    s.push("a")
    assert s.heap.live == 1
    assert s.pop() == "a"
    s.reclaimer.drain()
    assert s.heap.live == 0 and s.heap.frees == 1


def test_queue_fifo():
    q = Queue()
    assert q.dequeue() is None
    q.enqueue(1)
    q.enqueue(2)
    assert q.peek() == 1
    assert [q.dequeue(), q.dequeue()] == [1, 2]
    assert q.dequeue() is None and q.peek() is None


def test_queue_cells_freed_after_gates_open():
    q = Queue(max_processes=1)
    for v in range(10):
        q.enqueue(v)
    for v in range(10):
        assert q.dequeue() == v
    q.reclaimer.drain()
    # the current dummy stays; every earlier dummy is gone
    assert q.heap.live == 1
    assert q.heap.violations == 0


def test_queue_needs_two_slots():
    with pytest.raises(ValueError):
        Queue(domain=AcquireRetire(2, 1))


def test_stack_on_block_pool():
    from acqret import BlockPool

    heap = Heap(2)
    pool = BlockPool(2, 64, heap=heap)
    s = Stack(heap=heap, allocator=pool, max_processes=2)
    for v in range(50):
        s.push(v)
    assert [s.pop() for _ in range(50)] == list(range(49, -1, -1))
    s.reclaimer.drain()
    assert pool.live == 0 and heap.violations == 0


# -- linearizability ---------------------------------------------------------


def _stack():
    return Stack(max_processes=2)


def _queue():
    return Queue(max_processes=2)


@pytest.mark.parametrize("prog", programs("push", "pop", 2, ["push", "pop", "peek"])[:12])
def test_stack_small_histories_linearize(prog):
    explore(container_world(_stack, StackModel, prog), preemptions=1)


@pytest.mark.parametrize("prog", programs("enqueue", "dequeue", 2, ["enqueue", "dequeue", "peek"])[:12])
def test_queue_small_histories_linearize(prog):
    explore(container_world(_queue, QueueModel, prog), preemptions=1)


def test_stack_length8_history_two_preemptions():
    prog = [[("push", 1), ("pop", None), ("push", 2), ("pop", None)],
            [("push", 11), ("peek", None), ("pop", None), ("pop", None)]]
    assert explore(container_world(_stack, StackModel, prog), preemptions=2) > 1000


def test_queue_random_schedules():
    prog = [[("enqueue", 1), ("dequeue", None), ("enqueue", 2), ("peek", None)],
            [("dequeue", None), ("enqueue", 11), ("dequeue", None), ("dequeue", None)]]
    random_schedules(container_world(_queue, QueueModel, prog), 300, seed=5)


class _UnsafeStack(Stack):
    """Pops free the cell immediately: the textbook ABA setup."""

    def pop(self):
        heap, head = self.heap, self.head
        while True:
            p = head.load()
            if p == EMPTY:
                return None
            gen = heap.generation(p)
            nxt = heap.load(p, NEXT)
            if head.compare_and_swap(p, nxt):
                if heap.generation(p) != gen:
                    self.aba_violations += 1
                v = heap.load(p, VALUE)
                heap.free(p)
                return v


def test_checker_finds_aba_without_reclamation():
    prog = [[("pop", None)], [("pop", None), ("push", 3)]]

    def factory():
        s = _UnsafeStack(max_processes=2)
        s.push(1)
        s.push(2)
        return s

    class Pre(StackModel):
        def __init__(self, items=(1, 2)):
            super().__init__(items)

        def clone(self):
            return Pre(self.items)

    with pytest.raises(AssertionError):
        explore(container_world(factory, Pre, prog), preemptions=2)


# -- peek step budget --------------------------------------------------------


@pytest.mark.parametrize("kind", ["stack", "queue"])
def test_peek_step_count_constant_under_contention(kind, fast_switch):
    if kind == "stack":
        make, up, down = (lambda: Stack(max_processes=4)), "push", "pop"
    else:
        make, up, down = (lambda: Queue(max_processes=4)), "enqueue", "dequeue"
    allowed = peek_budgets(make, lambda s: getattr(s, up)(1))
    s = make()
    c = StepCounter()
    stop = threading.Event()
    seen = Counter()

    def updater(seed):
        rng = random.Random(seed)
        while not stop.is_set():
            if rng.random() < 0.5:
                getattr(s, up)(rng.random())
            else:
                getattr(s, down)()

    def peeker():
        s.reclaimer.domain.handle()
        for _ in range(3000):
            seen[c.measure(s.peek)] += 1
        stop.set()

    prev = _atomics.set_schedule_hook(c)
    try:
        run_threads([peeker, lambda: updater(1), lambda: updater(2)])
    finally:
        _atomics.set_schedule_hook(prev)
    assert set(seen) <= allowed, (seen, allowed)
    assert max(allowed) <= 8


@pytest.mark.parametrize("kind", ["stack", "queue"])
def test_peek_steps_fixed_in_every_schedule(kind):
    # three processes: the setup thread plus the two scheduled ones
    if kind == "stack":
        make, up, down = (lambda: Stack(max_processes=3)), "push", "pop"
    else:
        make, up, down = (lambda: Queue(max_processes=3)), "enqueue", "dequeue"
    allowed = peek_budgets(make, lambda s: getattr(s, up)(1))
    c = StepCounter()
    counts = set()

    def world():
        s = make()
        getattr(s, up)(5)
        res = {}

        def peeker():
            s.reclaimer.domain.handle()
            res["n"] = c.measure(s.peek)

        def updater():
            getattr(s, up)(6)
            getattr(s, down)()
            getattr(s, down)()

        def check(_):
            counts.add(res["n"])

        return [peeker, updater], check

    explore(world, preemptions=2, observer=c)
    assert counts <= allowed, (counts, allowed)


# -- stress ------------------------------------------------------------------


@pytest.mark.stress
def test_stack_conservation(fast_switch):
    s = Stack(max_processes=8)
    popped = [[] for _ in range(8)]
    pushed = [[] for _ in range(8)]

    def worker(t):
        rng = random.Random(t)
        for k in range(2000):
            if rng.random() < 0.5:
                s.push((t, k))
                pushed[t].append((t, k))
            else:
                v = s.pop()
                if v is not None:
                    popped[t].append(v)
        s.detach()

    run_threads([lambda t=t: worker(t) for t in range(8)])
    rest = []
    while (v := s.pop()) is not None:
        rest.append(v)
    s.reclaimer.drain()
    out = Counter(v for lst in popped for v in lst) + Counter(rest)
    assert out == Counter(v for lst in pushed for v in lst)
    assert s.heap.live == 0 and s.heap.violations == 0 and s.aba_violations == 0
    assert s.heap.allocs == s.heap.frees == sum(out.values())


@pytest.mark.stress
def test_queue_conservation_and_producer_order(fast_switch):
    q = Queue(max_processes=8)
    got = [[] for _ in range(8)]
    sent = [0] * 8

    def worker(t):
        rng = random.Random(t)
        for k in range(2000):
            if rng.random() < 0.5:
                q.enqueue((t, sent[t]))
                sent[t] += 1
            else:
                v = q.dequeue()
                if v is not None:
                    got[t].append(v)
        q.detach()

    run_threads([lambda t=t: worker(t) for t in range(8)])
    rest = []
    while (v := q.dequeue()) is not None:
        rest.append(v)
    q.reclaimer.drain()
    everything = [v for lst in got for v in lst] + rest
    assert Counter(everything) == Counter((t, k) for t in range(8) for k in range(sent[t]))
    # each consumer sees each producer's items in production order
    for lst in got + [rest]:
        last = {}
        for t, k in lst:
            assert k > last.get(t, -1)
            last[t] = k
    assert q.heap.live == 1 and q.heap.violations == 0
