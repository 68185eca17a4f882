"""Lock-free stack and queue with constant-step peek.

Both structures keep their links in :class:`~acqret.heap.Heap` blocks and
reclaim popped cells with a :class:`~acqret.reclamation.Reclaimer`, which is
what keeps a recycled address from satisfying a stale CAS (ABA).

``peek`` is a single protected read with no retry loop.
"""

from __future__ import annotations

from ._atomics import EMPTY, AtomicWord
from .acquire_retire import AcquireRetire
from .heap import Heap
from .reclamation import Reclaimer

VALUE = 0
NEXT = 1
GATE = 2


class Stack:
    """Treiber stack. Uses announcement slot 0 only.

    ``allocator`` provides ``allocate()``/``free(addr)`` for cells living in
    ``heap`` (defaults to the heap itself; a :class:`~acqret.block_pool.BlockPool`
    also fits).
    """

    def __init__(self, *, heap: Heap | None = None, allocator=None, max_processes: int = 8,
                 domain: AcquireRetire | None = None):
        self.heap = heap if heap is not None else Heap(2)
        self.allocator = allocator if allocator is not None else self.heap
        if domain is None:
            domain = AcquireRetire(max_processes, 1)
        self.reclaimer = Reclaimer(self.allocator.free, domain)
        self.head = AtomicWord(EMPTY)
        self.aba_violations = 0

    def push(self, v) -> None:
        heap = self.heap
        head = self.head
        a = self.allocator.allocate()
        heap.store(a, VALUE, v)

        def attempt(p):
            heap.store(a, NEXT, p)
            return head.compare_and_swap(p, a)

        protected_read = self.reclaimer.protected_read
        while not protected_read(head, attempt):
            pass

    def pop(self):
        """Remove and return the top value, or ``None`` if the stack is empty."""
        heap = self.heap
        head = self.head
        r = EMPTY

        def attempt(p):
            nonlocal r
            r = p
            if p == EMPTY:
                return True
            gen = heap.generation(p)
            ok = head.compare_and_swap(p, heap.load(p, NEXT))
            if ok and heap.generation(p) != gen:
                self.aba_violations += 1
            return ok

        protected_read = self.reclaimer.protected_read
        while not protected_read(head, attempt):
            pass
        if r == EMPTY:
            return None
        # r is unlinked and only this thread will retire it.
        v = heap.load(r, VALUE)
        self.reclaimer.safe_free(r)
        return v

    def peek(self):
        return self.reclaimer.protected_read(self.head, self._top_value)

    def _top_value(self, p):
        if p == EMPTY:
            return None
        return self.heap.load(p, VALUE)

    def detach(self) -> int:
        """Drain and deregister the calling thread's reclamation handle."""
        return self.reclaimer.detach()


class Queue:
    """Michael-Scott queue with a permanent dummy cell.

    Enqueue protects the tail in slot 1, dequeue and peek protect the head in
    slot 0. The value at the front lives in ``head.next``, which the head's
    protection does not cover by itself; so a cell is actually freed only
    after both it and its predecessor have been ejected (the ``GATE`` field
    counts those two events). With that, reading ``head.next.value`` under
    the head's protection is safe and peek needs one protected read.
    """

    def __init__(self, *, heap: Heap | None = None, allocator=None, max_processes: int = 8,
                 domain: AcquireRetire | None = None):
        self.heap = heap if heap is not None else Heap(3)
        if self.heap.block_words < 3:
            raise ValueError("queue cells need three words")
        self.allocator = allocator if allocator is not None else self.heap
        if domain is None:
            domain = AcquireRetire(max_processes, 2)
        if domain.slots < 2:
            raise ValueError("queue needs two announcement slots per process")
        self.reclaimer = Reclaimer(self._on_eject, domain)
        dummy = self.allocator.allocate()
        self.heap.store(dummy, NEXT, EMPTY)
        self.heap.store(dummy, GATE, 1)  # no predecessor to wait for
        self.head = AtomicWord(dummy)
        self.tail = AtomicWord(dummy)

    def enqueue(self, v) -> None:
        heap = self.heap
        tail = self.tail
        n = self.allocator.allocate()
        heap.store(n, VALUE, v)
        heap.store(n, NEXT, EMPTY)
        heap.store(n, GATE, 0)
        h = self.reclaimer.domain.handle()
        while True:
            t = h.acquire(tail, 1)
            nxt = heap.load(t, NEXT)
            if nxt == EMPTY:
                if heap.compare_and_swap(t, NEXT, EMPTY, n):
                    tail.compare_and_swap(t, n)
                    h.release(1)
                    return
            else:
                tail.compare_and_swap(t, nxt)

    def dequeue(self):
        """Remove and return the front value, or ``None`` if empty."""
        heap = self.heap
        head = self.head
        tail = self.tail
        h = self.reclaimer.domain.handle()
        while True:
            hd = h.acquire(head, 0)
            nxt = heap.load(hd, NEXT)
            if nxt == EMPTY:
                h.release(0)
                return None
            t = tail.load()
            if hd == t:
                tail.compare_and_swap(t, nxt)
                continue
            v = heap.load(nxt, VALUE)
            if head.compare_and_swap(hd, nxt):
                h.release(0)
                self.reclaimer.safe_free(hd)
                return v

    def peek(self):
        return self.reclaimer.protected_read(self.head, self._front_value)

    def _front_value(self, hd):
        nxt = self.heap.load(hd, NEXT)
        if nxt == EMPTY:
            return None
        return self.heap.load(nxt, VALUE)

    def _on_eject(self, x) -> None:
        # x was dequeued, so x.next is set and x itself is still allocated
        # until its own gate opens below.
        nxt = self.heap.load(x, NEXT)
        self._open_gate(nxt)
        self._open_gate(x)

    def _open_gate(self, x) -> None:
        if self.heap.fetch_add(x, GATE, 1) == 1:
            self.allocator.free(x)

    def detach(self) -> int:
        return self.reclaimer.detach()
