"""The acquire-retire interface.

``acquire`` reads a handle from a shared location and protects it in one of
the caller's announcement slots; ``release`` withdraws that protection.
``retire`` declares a handle overwritten and ready to destruct; ``eject``
hands back retired handles once no announcement can still be linked to them.

acquire, release and retire are constant-step. ``eject`` advances an
incremental scan-and-difference pass by a fixed number of steps per call, so
its cost is expected constant (hashing) rather than amortised.

Typical use, one handle per thread::

    ar = AcquireRetire(max_processes=8, slots=2)
    h = ar.handle()
    x = h.acquire(loc)
    ...            # x cannot be ejected by anyone until the release
    h.release()
"""

from __future__ import annotations

import heapq
import threading
import time
from collections import deque

from ._atomics import EMPTY
from .destination import Destination

__all__ = [
    "AcquireRetire",
    "CapacityError",
    "ProcessHandle",
    "multiset_difference",
]

_IDLE = 0
_SCANNING = 1
_DIFFERENCING = 2


class CapacityError(RuntimeError):
    """Raised when more than ``max_processes`` handles are registered."""


def multiset_difference(rl, plist) -> list:
    """Return ``rl \\ plist`` with multiplicity, preserving the order of ``rl``.

    Each occurrence in ``plist`` cancels at most one equal occurrence in
    ``rl``; a handle retired ``s`` times and announced ``t`` times survives
    ``max(s - t, 0)`` times.
    """
    counts: dict = {}
    for x in plist:
        counts[x] = counts.get(x, 0) + 1
    out = []
    for x in rl:
        n = counts.get(x, 0)
        if n:
            counts[x] = n - 1
        else:
            out.append(x)
    return out


class ProcessHandle:
    """Per-process state: one announcement row plus retired/ready lists.

    A handle must only be used by one thread at a time. The announcement
    slots are read by every process; everything else is private.
    """

    __slots__ = (
        "pid",
        "slots",
        "rlist",
        "flist",
        "_domain",
        "_cells",
        "_cp",
        "_steps",
        "_phase",
        "_pos",
        "_plist",
        "_batch",
        "_ready",
        "_kept",
        "_since_pass",
        "_fast_tries",
        "live",
    )

    def __init__(self, domain: "AcquireRetire", pid: int):
        self.pid = pid
        self.slots = domain.table[pid]
        self.rlist: list = []
        self.flist: deque = deque()
        self._domain = domain
        self._cells = domain._cells
        self._cp = len(domain._cells)
        self._steps = domain.steps_per_eject
        self._fast_tries = domain.fast_path_tries
        self._phase = _IDLE
        self._pos = 0
        self._plist: dict = {}
        self._batch: list = []
        self._ready: list = []
        self._kept: list = []
        # Large so that a fresh process starts a pass on its first eject.
        self._since_pass = 2 * self._cp
        self.live = True

    # -- protection -------------------------------------------------------

    def acquire(self, loc, i: int = 0):
        """Read the handle in ``loc`` and protect it in slot ``i``."""
        d = self.slots[i]
        for _ in range(self._fast_tries):
            v = loc.load()
            d.write(v)
            if loc.load() == v:
                return v
        d.swcopy(loc)
        return d.read()

    def release(self, i: int = 0) -> None:
        self.slots[i].write(EMPTY)

    # -- retirement -------------------------------------------------------

    def retire(self, x) -> None:
        if x == EMPTY:
            raise ValueError("cannot retire the empty sentinel")
        self.rlist.append(x)

    def eject(self):
        """Run a few steps of the pending pass, then pop one ready handle.

        Returns ``None`` when nothing is ready.
        """
        if self._phase == _IDLE:
            n = len(self.rlist)
            if n and (self._steps is None or n >= self._cp or self._since_pass >= 2 * self._cp):
                self._start_pass()
            else:
                self._since_pass += 1
        if self._phase != _IDLE:
            self._advance(self._steps)
        if self.flist:
            return self.flist.popleft()
        return None

    def eject_all(self) -> None:
        """Eagerly finish any pass in flight and run one full pass over ``rlist``."""
        if self._phase != _IDLE:
            self._advance(None)
        if self.rlist:
            self._start_pass()
            self._advance(None)

    @property
    def delayed(self) -> int:
        """Handles retired here and not yet returned by ``eject``."""
        return len(self.rlist) + len(self._batch) + len(self.flist)

    @property
    def in_pass(self) -> bool:
        return self._phase != _IDLE

    def _start_pass(self) -> None:
        self._batch = self.rlist
        self.rlist = []
        self._plist = {}
        self._ready = []
        self._kept = []
        self._pos = 0
        self._phase = _SCANNING

    def _advance(self, budget) -> None:
        # One unit is one announcement read (plus insert) or one lookup in the
        # differencing phase; hash operations are never split.
        cells = self._cells
        plist = self._plist
        while budget is None or budget > 0:
            if self._phase == _SCANNING:
                v = cells[self._pos].read()
                if v != EMPTY:
                    plist[v] = plist.get(v, 0) + 1
                self._pos += 1
                if self._pos == self._cp:
                    self._phase = _DIFFERENCING
                    self._pos = 0
            else:
                x = self._batch[self._pos]
                n = plist.get(x, 0)
                if n:
                    plist[x] = n - 1
                    self._kept.append(x)
                else:
                    self._ready.append(x)
                self._pos += 1
                if self._pos == len(self._batch):
                    self._finish_pass()
                    return
            if budget is not None:
                budget -= 1

    def _finish_pass(self) -> None:
        self.flist.extend(self._ready)
        self.rlist.extend(self._kept)
        self._batch = []
        self._plist = {}
        self._ready = []
        self._kept = []
        self._phase = _IDLE
        self._since_pass = 0

    # -- lifecycle --------------------------------------------------------

    def deregister(self, timeout: float | None = None) -> list:
        """Drain every retired handle and give the pid back.

        Requires all slots released. Blocks until other processes release
        whatever still protects our retired handles. Returns the drained
        handles; the caller destructs them.
        """
        if any(d.read() != EMPTY for d in self.slots):
            raise RuntimeError("deregister with a protected slot")
        drained = self.drain(timeout=timeout)
        self.live = False
        self._domain._release_pid(self.pid)
        return drained

    def drain(self, timeout: float | None = None) -> list:
        """Eject everything retired so far, waiting on foreign protections."""
        deadline = None if timeout is None else time.monotonic() + timeout
        out = []
        while True:
            self.eject_all()
            out.extend(self.flist)
            self.flist.clear()
            if not self.rlist:
                return out
            if deadline is not None and time.monotonic() > deadline:
                raise TimeoutError(f"{len(self.rlist)} handles still protected")
            time.sleep(0)

    def __repr__(self) -> str:
        return f"<ProcessHandle pid={self.pid} rlist={len(self.rlist)} flist={len(self.flist)}>"


class AcquireRetire:
    """Announcement table shared by up to ``max_processes`` processes.

    Parameters
    ----------
    max_processes:
        Table rows ``P``.
    slots:
        Protections per process ``c``.
    steps_per_eject:
        Units of pass work done per ``eject``; ``None`` runs a full pass at
        every eject that finds retired handles.
    fast_path_tries:
        Hazard-pointer style read/announce/validate attempts before falling
        back to the wait-free ``swcopy`` acquire.
    """

    def __init__(self, max_processes: int = 8, slots: int = 2, *, steps_per_eject: int | None = 4,
                 fast_path_tries: int = 0):
        if max_processes < 1 or slots < 1:
            raise ValueError("max_processes and slots must be positive")
        if steps_per_eject is not None and steps_per_eject < 1:
            raise ValueError("steps_per_eject must be positive or None")
        self.max_processes = max_processes
        self.slots = slots
        self.steps_per_eject = steps_per_eject
        self.fast_path_tries = fast_path_tries
        self.table = [[Destination() for _ in range(slots)] for _ in range(max_processes)]
        self._cells = [d for row in self.table for d in row]
        self._free_pids = list(range(max_processes))
        self._handles: list[ProcessHandle | None] = [None] * max_processes
        self._lock = threading.Lock()
        self._local = threading.local()

    @property
    def delayed_bound(self) -> int:
        """Per-process bound on delayed handles, ``3cP``."""
        return 3 * self.slots * self.max_processes

    def register(self) -> ProcessHandle:
        with self._lock:
            if not self._free_pids:
                raise CapacityError(f"all {self.max_processes} process slots in use")
            pid = heapq.heappop(self._free_pids)
        # The pid is ours now; no shared access while holding the lock.
        for d in self.table[pid]:
            d.write(EMPTY)
        h = ProcessHandle(self, pid)
        with self._lock:
            self._handles[pid] = h
        return h

    def _release_pid(self, pid: int) -> None:
        with self._lock:
            self._handles[pid] = None
            heapq.heappush(self._free_pids, pid)

    def handle(self) -> ProcessHandle:
        """The calling thread's handle, registering one on first use."""
        try:
            h = self._local.handle
            if h.live:
                return h
        except AttributeError:
            pass
        h = self._local.handle = self.register()
        return h

    def detach(self, timeout: float | None = None) -> list:
        """Deregister the calling thread's handle; return its drained handles."""
        h = getattr(self._local, "handle", None)
        if h is None or not h.live:
            return []
        del self._local.handle
        return h.deregister(timeout=timeout)

    def live_handles(self) -> list[ProcessHandle]:
        return [h for h in self._handles if h is not None]

    def delayed_counts(self) -> list[int]:
        return [h.delayed for h in self._handles if h is not None]

    def announced(self) -> list:
        """Snapshot (not atomic) of every non-empty announcement."""
        return [v for v in (d.read() for d in self._cells) if v != EMPTY]
