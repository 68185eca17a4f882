"""Constant-time allocate/free of fixed-size blocks.

Each process keeps a private pool: up to two full batches of ``l`` blocks
plus a partially filled current batch. Only when the current batch runs dry
(or overflows) with the wrong number of full batches in hand does a process
touch the shared pool, and even then the shared push or pop is split into
O(1) sub-steps, one run per allocate/free.

The shared pool is a stack of batches whose head is an immutable record. A
push or pop is announced in a per-process slot; every sub-step makes one CAS
attempt that applies the announced operation of the process whose turn the
head record names (or the caller's own if that slot is idle), so an
announced operation lands within ``p + 1`` sub-steps of its owner.
"""

from __future__ import annotations

import heapq
import math
import threading

from ._atomics import AtomicWord
from .heap import DoubleFreeError, Heap

__all__ = ["BlockPool", "LocalPool", "PoolExhausted", "SharedPool"]

_PUSH = 0
_POP = 1


class PoolExhausted(RuntimeError):
    pass


class _Record:
    __slots__ = ("top", "size", "turn", "applied", "result")

    def __init__(self, top, size, turn, applied, result):
        self.top = top  # (batch, rest) cons cells, or None
        self.size = size
        self.turn = turn
        self.applied = applied
        self.result = result


class _Op:
    __slots__ = ("kind", "batch", "done", "result")

    def __init__(self, kind, batch=None):
        self.kind = kind
        self.batch = batch
        self.done = False
        self.result = None


class SharedPool:
    """Wait-free stack of batches for ``nprocs`` processes."""

    def __init__(self, nprocs: int, batches=()):
        self.nprocs = nprocs
        top = None
        for b in batches:
            top = (tuple(b), top)
        self.head = AtomicWord(_Record(top, len(batches), 0, None, None))
        self.announce = [AtomicWord(None) for _ in range(nprocs)]

    @property
    def steps_bound(self) -> int:
        return self.nprocs + 1

    def __len__(self) -> int:
        return self.head.load().size

    def begin(self, pid: int, op: _Op) -> None:
        self.announce[pid].store(op)

    def end(self, pid: int) -> None:
        self.announce[pid].store(None)

    def step(self, pid: int, op: _Op) -> bool:
        """One O(1) attempt on behalf of ``op``; returns whether it is done."""
        if op.done:
            return True
        rec = self.head.load()
        _settle(rec)
        if op.done:
            return True
        target = self.announce[rec.turn].load()
        if target is None or target.done:
            target = op
        new = self._apply(rec, target)
        if self.head.compare_and_swap(rec, new):
            _settle(new)
        return op.done

    def _apply(self, rec: _Record, op: _Op) -> _Record:
        turn = (rec.turn + 1) % self.nprocs
        if op.kind == _PUSH:
            return _Record((op.batch, rec.top), rec.size + 1, turn, op, None)
        if rec.top is None:
            return _Record(None, 0, turn, op, None)
        batch, rest = rec.top
        return _Record(rest, rec.size - 1, turn, op, batch)


def _settle(rec: _Record) -> None:
    # Publish the outcome of the op a record applied. Anyone replacing the
    # record settles it first, so an op not yet marked done was never applied.
    op = rec.applied
    if op is not None and not op.done:
        op.result = rec.result
        op.done = True


class LocalPool:
    """One process's private pool. Not thread-safe; bound to its owner."""

    def __init__(self, pool: "BlockPool", pid: int, full, current):
        self.pool = pool
        self.pid = pid
        self.l = pool.batch_size
        self.local_batches: list[list] = [list(b) for b in full]
        self.current: list = list(current)
        self.num_batches = len(self.local_batches)
        self.pending: _Op | None = None
        self.pending_steps = 0
        self.stalls = 0
        self.exhausted_pops = 0
        self.live = False

    @property
    def held(self) -> int:
        """Blocks held locally, counting a batch on its way to the shared pool."""
        n = len(self.current) + self.l * len(self.local_batches)
        op = self.pending
        if op is not None and op.kind == _PUSH:
            n += self.l
        return n

    def allocate(self) -> int:
        if not self.current:
            if not self.local_batches:
                self._stall()
                if not self.local_batches:
                    raise PoolExhausted("no free block in the local or shared pool")
            self.current = self.local_batches.pop()
            if self.num_batches <= 1:
                self._schedule(_POP)
            else:
                self.num_batches -= 1
        self.delayed_step()
        b = self.current.pop()
        self.pool._mark_live(b)
        return b

    def free(self, b: int) -> None:
        self.pool._mark_free(b)
        if len(self.current) == self.l:
            if self.num_batches >= 2:
                self._schedule(_PUSH, tuple(self.current))
            else:
                self.num_batches += 1
                self.local_batches.append(self.current)
            self.current = []
        self.delayed_step()
        self.current.append(b)

    def delayed_step(self) -> None:
        op = self.pending
        if op is None:
            return
        if not op.done:
            self.pool.shared.step(self.pid, op)
        self.pending_steps += 1
        if self.pending_steps >= self.pool.shared.steps_bound:
            self._complete()

    def _schedule(self, kind, batch=None) -> None:
        if self.pending is not None:
            self._stall()
        op = _Op(kind, batch)
        self.pool.shared.begin(self.pid, op)
        self.pending = op
        self.pending_steps = 0

    def _stall(self) -> None:
        if self.pending is None:
            return
        self.stalls += 1
        while self.pending is not None:
            self.delayed_step()

    def _complete(self) -> None:
        op = self.pending
        shared = self.pool.shared
        while not op.done:  # unreachable while the helping bound holds
            shared.step(self.pid, op)
        shared.end(self.pid)
        self.pending = None
        if op.kind == _POP:
            if op.result is None:
                # Shared pool ran dry (more than n blocks live). The count
                # included this pop; allocate raises once nothing is left.
                self.num_batches -= 1
                self.exhausted_pops += 1
            else:
                self.local_batches.append(list(op.result))

    def finish_pending(self) -> None:
        """Run the pending shared operation to completion now."""
        while self.pending is not None:
            self.delayed_step()


class BlockPool:
    """Fixed-size block allocator shared by up to ``p`` processes.

    Parameters
    ----------
    p:
        Process capacity.
    n:
        Expected high-water mark of live blocks.
    batch_size:
        Blocks per batch ``l``; defaults to ``p + 1``, the number of
        sub-steps a shared operation takes.
    """

    # total blocks <= n + TOTAL_SLACK * p**2
    TOTAL_SLACK = 11

    def __init__(self, p: int, n: int, *, batch_size: int | None = None, block_words: int = 2,
                 heap: Heap | None = None):
        if p < 1 or n < 0:
            raise ValueError("need p >= 1 and n >= 0")
        l = batch_size if batch_size is not None else p + 1
        if l < 2:
            raise ValueError("batch_size must be at least 2")
        self.p = p
        self.batch_size = l
        self.heap = heap if heap is not None else Heap(block_words)
        self._live: set[int] = set()
        self.reuse_violations = 0

        shared_batches = math.ceil(n / l) + 2 * p
        per_proc = 2 * l + max(1, l // 2)
        self.total_blocks = shared_batches * l + p * per_proc
        blocks = [self.heap.allocate() for _ in range(self.total_blocks)]
        for b in blocks:
            self.heap.mark_free(b)
        it = iter(blocks)
        self.shared = SharedPool(p, [[next(it) for _ in range(l)] for _ in range(shared_batches)])
        self._locals = []
        for pid in range(p):
            full = [[next(it) for _ in range(l)] for _ in range(2)]
            cur = [next(it) for _ in range(max(1, l // 2))]
            self._locals.append(LocalPool(self, pid, full, cur))
        self._free_pids = list(range(p))
        self._lock = threading.Lock()
        self._tls = threading.local()

    def register(self) -> LocalPool:
        with self._lock:
            if not self._free_pids:
                raise RuntimeError(f"all {self.p} pool slots in use")
            lp = self._locals[heapq.heappop(self._free_pids)]
            lp.live = True
            return lp

    def deregister(self, lp: LocalPool) -> None:
        lp.finish_pending()
        with self._lock:
            lp.live = False
            heapq.heappush(self._free_pids, lp.pid)

    def local(self) -> LocalPool:
        lp = getattr(self._tls, "lp", None)
        if lp is None or not lp.live:
            lp = self._tls.lp = self.register()
        return lp

    def detach(self) -> None:
        lp = getattr(self._tls, "lp", None)
        if lp is not None and lp.live:
            self.deregister(lp)
        self._tls.lp = None

    # Thread-bound allocator interface (what containers and reclaimers expect).
    def allocate(self) -> int:
        return self.local().allocate()

    def free(self, b: int) -> None:
        self.local().free(b)

    def _mark_live(self, b: int) -> None:
        if b in self._live:
            self.reuse_violations += 1
        self._live.add(b)
        self.heap.mark_live(b)

    def _mark_free(self, b: int) -> None:
        if b not in self._live:
            raise DoubleFreeError(hex(b))
        self._live.discard(b)
        self.heap.mark_free(b)

    @property
    def live(self) -> int:
        return len(self._live)

    def holdings(self) -> list[int]:
        return [lp.held for lp in self._locals]
