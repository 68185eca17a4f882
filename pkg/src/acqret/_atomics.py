"""Word-sized atomic cells.

CPython offers no user-level CAS, so read-modify-write operations are
serialised by a per-cell lock. Plain loads rely on reference reads being
atomic under the interpreter; stores still take the lock so they cannot
land between the compare and the set of a concurrent CAS.

Every shared-memory access calls the scheduling hook when one is installed.
Tests use this to drive threads through chosen interleavings; in normal runs
the hook is ``None`` and costs one global lookup.
"""

from __future__ import annotations

import threading

EMPTY = 0xFFFF_FFFF_FFFF_FFFF
"""Reserved all-ones word: the cleared slot / null handle. Never a live handle."""

_hook = None


def set_schedule_hook(fn):
    """Install ``fn`` to be called before every shared access (``None`` clears)."""
    global _hook
    prev = _hook
    _hook = fn
    return prev


def schedule_point():
    h = _hook
    if h is not None:
        h()


class AtomicWord:
    """A shared location holding one word (any Python value treated as a word)."""

    __slots__ = ("_value", "_lock", "__weakref__")

    def __init__(self, value=EMPTY):
        self._value = value
        self._lock = threading.Lock()

    def load(self):
        if _hook is not None:
            _hook()
        return self._value

    def store(self, value) -> None:
        if _hook is not None:
            _hook()
        with self._lock:
            self._value = value

    def compare_and_swap(self, expected, new) -> bool:
        if _hook is not None:
            _hook()
        with self._lock:
            cur = self._value
            if cur is expected or cur == expected:
                self._value = new
                return True
            return False

    def exchange(self, value):
        """Fetch-and-store: write ``value``, return the previous content."""
        if _hook is not None:
            _hook()
        with self._lock:
            old = self._value
            self._value = value
            return old

    def fetch_add(self, delta: int) -> int:
        if _hook is not None:
            _hook()
        with self._lock:
            old = self._value
            self._value = old + delta
            return old

    def __repr__(self) -> str:
        return f"AtomicWord({self._value!r})"


class AtomicCounter:
    """Integer supporting only fetch-and-add and load.

    There is deliberately no compare-and-swap here: counters built on this
    type cannot fall back to a CAS retry loop.
    """

    __slots__ = ("_value", "_lock")

    def __init__(self, value: int = 0):
        self._value = value
        self._lock = threading.Lock()

    def load(self) -> int:
        if _hook is not None:
            _hook()
        return self._value

    def fetch_add(self, delta: int) -> int:
        if _hook is not None:
            _hook()
        with self._lock:
            old = self._value
            self._value = old + delta
            return old

    def __repr__(self) -> str:
        return f"AtomicCounter({self._value})"
