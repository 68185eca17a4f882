"""Protected-block memory reclamation on top of acquire-retire."""

from __future__ import annotations

from .acquire_retire import AcquireRetire


class Reclaimer:
    """``protected_read`` / ``safe_free`` for blocks reached through shared locations.

    ``free`` is the actual deallocation, called once a safe-freed block can
    no longer be reached by any protected read. Use one reclaimer per
    ``free`` routine: ejected handles carry no record of who retired them.

    A block that has been safe-freed must not be stored into a location
    again until it has actually been freed and reallocated.
    """

    def __init__(self, free, domain: AcquireRetire | None = None, *, max_processes: int = 8,
                 slots: int = 1, **domain_kw):
        self.domain = domain if domain is not None else AcquireRetire(max_processes, slots, **domain_kw)
        self.free = free

    def protected_read(self, loc, f, slot: int = 0):
        """Read the block address in ``loc`` and run ``f`` on it while it is protected."""
        h = self.domain.handle()
        p = h.acquire(loc, slot)
        try:
            return f(p)
        finally:
            h.release(slot)

    def safe_free(self, addr) -> None:
        h = self.domain.handle()
        h.retire(addr)
        e = h.eject()
        if e is not None:
            self.free(e)

    def eject_step(self) -> None:
        """Run one eject without retiring anything."""
        e = self.domain.handle().eject()
        if e is not None:
            self.free(e)

    def delayed(self) -> int:
        """Blocks safe-freed but not yet actually freed, across all processes."""
        return sum(self.domain.delayed_counts())

    def drain(self, timeout: float | None = None) -> int:
        """Actually free everything this thread has safe-freed. Returns the count."""
        out = self.domain.handle().drain(timeout=timeout)
        for a in out:
            self.free(a)
        return len(out)

    def detach(self, timeout: float | None = None) -> int:
        """Drain and deregister the calling thread."""
        out = self.domain.detach(timeout=timeout)
        for a in out:
            self.free(a)
        return len(out)
