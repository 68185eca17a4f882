"""Reference counting safe against read/overwrite races.

A :class:`RefPtr` is a mutable location holding one counted reference. Copying
out of it protects the target with acquire-retire while the count is bumped,
and overwriting it retires the old target instead of decrementing at once, so
a count can never be bumped after it reached zero. Counts move only by
fetch-and-add.

Example::

    rc = Collector(max_processes=4)

    class Node(CountedObject):
        def __init__(self, val, left, right):
            super().__init__()
            self.val, self.left, self.right = val, left, right

    tree = rc.new(Node(5, rc.new(Node(3, rc.null(), rc.null())), rc.null()))
    snapshot = tree.copy()          # safe against a concurrent tree.update(...)
"""

from __future__ import annotations

from ._atomics import EMPTY, AtomicCounter, AtomicWord
from .acquire_retire import AcquireRetire

__all__ = ["CountedObject", "Collector", "RefPtr"]


class CountedObject:
    """Base for objects managed by a :class:`Collector`.

    Subclasses keep child references as :class:`RefPtr` attributes; those are
    dropped when the object is destructed. Override :meth:`references` for
    other layouts and :meth:`on_destruct` for cleanup.
    """

    # add_counter calls that reached an already destructed object
    post_destruct_touches = 0

    def __init__(self):
        self._count = AtomicCounter(0)
        self.destroyed = False

    def add_counter(self, delta: int) -> int:
        """Atomically add ``delta`` to the count; return the previous count."""
        if self.destroyed:
            CountedObject.post_destruct_touches += 1
        return self._count.fetch_add(delta)

    @property
    def count(self) -> int:
        return self._count.load()

    def references(self):
        return [v for v in vars(self).values() if isinstance(v, RefPtr)]

    def on_destruct(self) -> None:
        pass


class Collector:
    """Owns the acquire-retire table used by a family of :class:`RefPtr`."""

    def __init__(self, max_processes: int = 8, slots: int = 1, **domain_kw):
        self.domain = AcquireRetire(max_processes, slots, **domain_kw)
        self.destructed = AtomicCounter(0)

    def new(self, obj) -> "RefPtr":
        return RefPtr(self, obj)

    def null(self) -> "RefPtr":
        return RefPtr(self)

    def decrement(self, o) -> None:
        if o != EMPTY and o.add_counter(-1) == 1:
            self._destruct(o)

    def _destruct(self, o) -> None:
        # Worklist instead of recursion: long chains must not blow the stack.
        work = [o]
        while work:
            x = work.pop()
            x.destroyed = True
            self.destructed.fetch_add(1)
            x.on_destruct()
            for r in x.references():
                p = r._p._value
                r._p._value = EMPTY
                if p != EMPTY and p.add_counter(-1) == 1:
                    work.append(p)

    def delayed(self) -> int:
        """Decrements owed to overwritten references and not yet applied."""
        return sum(self.domain.delayed_counts())

    def drain(self, timeout: float | None = None) -> int:
        out = self.domain.handle().drain(timeout=timeout)
        for o in out:
            self.decrement(o)
        return len(out)

    def detach(self, timeout: float | None = None) -> int:
        """Apply every pending decrement of this thread and deregister it."""
        out = self.domain.detach(timeout=timeout)
        for o in out:
            self.decrement(o)
        return len(out)


class RefPtr:
    """A location holding one counted reference (or ``EMPTY``).

    Any thread may ``copy``, ``update`` or ``with_ptr`` concurrently. ``drop``
    must not race with other operations on the same instance.
    """

    __slots__ = ("_c", "_p")

    def __init__(self, collector: Collector, obj=EMPTY):
        self._c = collector
        if obj != EMPTY:
            obj.add_counter(1)
        self._p = AtomicWord(obj)

    def get(self):
        """The raw target; only meaningful to a thread that owns this pointer."""
        return self._p.load()

    def is_null(self) -> bool:
        return self._p.load() == EMPTY

    def copy(self) -> "RefPtr":
        """A new reference to whatever this location held at the acquire instant."""
        h = self._c.domain.handle()
        p = h.acquire(self._p)
        if p != EMPTY:
            p.add_counter(1)
        h.release()
        r = RefPtr.__new__(RefPtr)
        r._c = self._c
        r._p = AtomicWord(p)
        return r

    def update(self, b: "RefPtr") -> None:
        """Store ``b``'s target here, taking over its count; ``b`` is emptied."""
        new = b._p._value
        b._p._value = EMPTY
        old = self._p.exchange(new)
        h = self._c.domain.handle()
        if old != EMPTY:
            h.retire(old)
        e = h.eject()
        if e is not None:
            self._c.decrement(e)

    def with_ptr(self, f):
        """Run ``f`` on the protected raw target without touching its count."""
        h = self._c.domain.handle()
        p = h.acquire(self._p)
        try:
            return f(p)
        finally:
            h.release()

    def drop(self) -> None:
        p = self._p._value
        self._p._value = EMPTY
        self._c.decrement(p)

    def __repr__(self) -> str:
        p = self._p._value
        return "RefPtr(null)" if p == EMPTY else f"RefPtr({p!r})"
