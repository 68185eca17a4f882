"""Word-addressed block memory with use-after-free canaries.

Blocks are fixed-size arrays of atomic words named by integer addresses.
Freed addresses go on a LIFO free list, so they are recycled as soon as
possible; that is what exposes ABA bugs. Freeing pattern-fills the block with
``POISON`` and bumps its generation. Reading a block that is not live is
recorded as a violation rather than raised, because the reading thread is
usually deep inside a stress worker.
"""

from __future__ import annotations

import threading

from ._atomics import EMPTY, AtomicWord

POISON = 0xDEAD_BEEF_DEAD_BEEF


class DoubleFreeError(RuntimeError):
    pass


class Heap:
    """Ambient allocator for fixed-size blocks of ``block_words`` words."""

    def __init__(self, block_words: int = 2, *, base: int = 0x1000):
        self.block_words = block_words
        self._stride = 8 * block_words
        self._next_addr = base
        self._blocks: dict[int, list[AtomicWord]] = {}
        # Even generation: free (or never used); odd: live.
        self._gen: dict[int, int] = {}
        self._free: list[int] = []
        self._lock = threading.Lock()
        self.violations = 0
        self.violation_log: list[tuple[int, str]] = []
        self.allocs = 0
        self.frees = 0
        self.peak_live = 0

    # -- allocation -------------------------------------------------------

    def allocate(self) -> int:
        with self._lock:
            if self._free:
                addr = self._free.pop()
            else:
                addr = self._next_addr
                self._next_addr += self._stride
                self._blocks[addr] = [AtomicWord(EMPTY) for _ in range(self.block_words)]
                self._gen[addr] = 0
            for w in self._blocks[addr]:
                w._value = EMPTY
            self._gen[addr] += 1
            self.allocs += 1
            live = self.allocs - self.frees
            if live > self.peak_live:
                self.peak_live = live
            return addr

    def free(self, addr: int) -> None:
        with self._lock:
            gen = self._gen.get(addr)
            if gen is None or not gen & 1:
                self._record(addr, "double free" if gen is not None else "wild free")
                raise DoubleFreeError(hex(addr))
            for w in self._blocks[addr]:
                w._value = POISON
            self._gen[addr] = gen + 1
            self.frees += 1
            self._free.append(addr)

    # Sub-allocators that keep their own free lists (e.g. a block pool) flip
    # liveness with these so the canaries still apply to their blocks.
    def mark_free(self, addr: int) -> None:
        for w in self._blocks[addr]:
            w._value = POISON
        self._gen[addr] += 1

    def mark_live(self, addr: int) -> None:
        for w in self._blocks[addr]:
            w._value = EMPTY
        self._gen[addr] += 1

    @property
    def live(self) -> int:
        return self.allocs - self.frees

    def is_live(self, addr: int) -> bool:
        return bool(self._gen.get(addr, 0) & 1)

    def generation(self, addr: int) -> int:
        return self._gen.get(addr, 0)

    # -- access -----------------------------------------------------------

    def load(self, addr: int, field: int):
        v = self._blocks[addr][field].load()
        if not self._gen[addr] & 1:
            self._record(addr, "read of freed block")
        return v

    def store(self, addr: int, field: int, value) -> None:
        if not self._gen[addr] & 1:
            self._record(addr, "write to freed block")
        self._blocks[addr][field].store(value)

    def compare_and_swap(self, addr: int, field: int, expected, new) -> bool:
        if not self._gen[addr] & 1:
            self._record(addr, "cas on freed block")
        return self._blocks[addr][field].compare_and_swap(expected, new)

    def fetch_add(self, addr: int, field: int, delta: int) -> int:
        if not self._gen[addr] & 1:
            self._record(addr, "faa on freed block")
        return self._blocks[addr][field].fetch_add(delta)

    def _record(self, addr: int, what: str) -> None:
        self.violations += 1
        if len(self.violation_log) < 32:
            self.violation_log.append((addr, what))
