"""Acquire-retire: constant-time protection against read/destruct races."""

from ._atomics import EMPTY, AtomicCounter, AtomicWord
from .acquire_retire import AcquireRetire, CapacityError, ProcessHandle, multiset_difference
from .block_pool import BlockPool, LocalPool, PoolExhausted
from .containers import Queue, Stack
from .destination import Destination
from .heap import POISON, DoubleFreeError, Heap
from .reclamation import Reclaimer
from .refcount import Collector, CountedObject, RefPtr
from .weak_atomic import CopyDestruct, CountedHandlePolicy, WeakAtomic

__all__ = [
    "EMPTY",
    "POISON",
    "AcquireRetire",
    "AtomicCounter",
    "AtomicWord",
    "BlockPool",
    "CapacityError",
    "Collector",
    "CopyDestruct",
    "CountedHandlePolicy",
    "CountedObject",
    "Destination",
    "DoubleFreeError",
    "Heap",
    "LocalPool",
    "PoolExhausted",
    "ProcessHandle",
    "Queue",
    "Reclaimer",
    "RefPtr",
    "Stack",
    "WeakAtomic",
    "multiset_difference",
]

__version__ = "0.1.0"
