"""A mutable cell for values managed by copy and destruct.

``load`` copies the current value under protection; ``store`` retires the
overwritten value and destructs it only once no load can still be copying
it. This is safe for any copy/destruct pair that is itself safe whenever a
copy never overlaps the destruct of the value it copies (e.g. counted
handles, deep-copied buffers).

Values are boxed inside the cell, so they need not be hashable and equal
values stored twice stay distinct.
"""

from __future__ import annotations

import threading

from ._atomics import EMPTY, AtomicWord
from .acquire_retire import AcquireRetire

__all__ = ["CopyDestruct", "CountedHandlePolicy", "WeakAtomic", "default_domain"]


class CopyDestruct:
    """Copy/destruct policy. The default is plain sharing with no cleanup.

    ``empty`` is recognised by identity and ``destruct(empty)`` must be a
    no-op.
    """

    empty = None

    def copy(self, v):
        return v

    def destruct(self, v) -> None:
        pass


class CountedHandlePolicy(CopyDestruct):
    """Copy bumps a :class:`~acqret.refcount.CountedObject` count, destruct drops it."""

    empty = EMPTY

    def __init__(self, collector):
        self.collector = collector

    def copy(self, v):
        if v is not EMPTY:
            v.add_counter(1)
        return v

    def destruct(self, v) -> None:
        if v is not EMPTY:
            self.collector.decrement(v)


class _Box:
    __slots__ = ("value", "policy")

    def __init__(self, value, policy):
        self.value = value
        self.policy = policy


_default = None
_default_lock = threading.Lock()


def default_domain() -> AcquireRetire:
    """Process-wide table used when a cell is created without one."""
    global _default
    with _default_lock:
        if _default is None:
            _default = AcquireRetire(64, 1)
        return _default


def _destruct_box(b) -> None:
    b.policy.destruct(b.value)


class WeakAtomic:
    """Shared mutable cell owning one value under a :class:`CopyDestruct` policy."""

    __slots__ = ("_p", "policy", "domain")

    def __init__(self, value=None, policy: CopyDestruct | None = None, domain: AcquireRetire | None = None):
        self.policy = policy if policy is not None else CopyDestruct()
        self.domain = domain if domain is not None else default_domain()
        if value is None:
            value = self.policy.empty
        self._p = AtomicWord(self._box(value))

    def _box(self, v):
        return EMPTY if v is self.policy.empty else _Box(v, self.policy)

    def _unbox(self, b):
        return self.policy.empty if b is EMPTY else b.value

    def load(self):
        """Return a policy copy of the current value."""
        h = self.domain.handle()
        b = h.acquire(self._p)
        try:
            return self.policy.copy(self.policy.empty if b == EMPTY else b.value)
        finally:
            h.release()

    def store(self, v) -> None:
        """Take ownership of ``v``; the old value is destructed once safe."""
        h = self.domain.handle()
        e = h.eject()
        if e is not None:
            _destruct_box(e)
        old = self._p.exchange(self._box(v))
        if old is not EMPTY:
            h.retire(old)

    def exchange(self, v):
        """Swap in ``v`` and hand the old value (and its destruct duty) to the caller."""
        return self._unbox(self._p.exchange(self._box(v)))

    def move(self):
        return self.exchange(self.policy.empty)

    def compare_exchange(self, expected, desired) -> bool:
        """Store ``desired`` if the cell holds ``expected`` (by identity).

        On success the old value is retired like a store; on failure the
        caller keeps ownership of ``desired``.
        """
        cur = self._p.load()
        if self._unbox(cur) is not expected:
            return False
        if not self._p.compare_and_swap(cur, self._box(desired)):
            return False
        h = self.domain.handle()
        if cur is not EMPTY:
            h.retire(cur)
        e = h.eject()
        if e is not None:
            _destruct_box(e)
        return True

    def drop(self) -> None:
        """Destruct the current value now; no other operation may be in flight."""
        b = self._p._value
        self._p._value = EMPTY
        if b is not EMPTY:
            _destruct_box(b)

    def peek_raw(self):
        """Current value without copying. Only safe when nothing can overwrite it."""
        return self._unbox(self._p.load())


def drain(domain: AcquireRetire | None = None, timeout: float | None = None) -> int:
    """Destruct every value this thread has retired through ``domain``."""
    domain = domain if domain is not None else default_domain()
    out = domain.handle().drain(timeout=timeout)
    for b in out:
        _destruct_box(b)
    return len(out)


def detach(domain: AcquireRetire | None = None, timeout: float | None = None) -> int:
    domain = domain if domain is not None else default_domain()
    out = domain.detach(timeout=timeout)
    for b in out:
        _destruct_box(b)
    return len(out)
