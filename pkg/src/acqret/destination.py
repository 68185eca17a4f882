"""Single-writer destination cell with atomic copy-from-location.

A :class:`Destination` has one owner that may ``write`` a word into it or
``swcopy`` a word from an arbitrary shared location; anyone may ``read`` it.
``swcopy`` appears to read the source and store the result in one atomic
step, which is what makes a constant-time acquire possible.

The cell body is a load-linked/store-conditional object. We emulate weak
LL/SC with a tagged body ``(payload, state, tag)``: every successful
conditional store bumps the tag, so a stale link can never succeed.
"""

from __future__ import annotations

import threading

from . import _atomics
from ._atomics import EMPTY

COPYING = 0
DONE = 1


class LLSCCell:
    """Weak LL/SC over a ``(payload, state, tag)`` triple.

    ``ll`` may in principle report ``None`` (a spurious weak-LL failure); this
    emulation never does. ``sc`` succeeds only if no successful ``sc``/``cas``/
    ``store`` happened since the matching ``ll``.
    """

    __slots__ = ("_body", "_lock")

    def __init__(self, payload=EMPTY, state=DONE):
        self._body = (payload, state, 0)
        self._lock = threading.Lock()

    def ll(self):
        if _atomics._hook is not None:
            _atomics._hook()
        return self._body

    def sc(self, linked, payload, state) -> bool:
        if _atomics._hook is not None:
            _atomics._hook()
        with self._lock:
            if self._body is not linked:
                return False
            self._body = (payload, state, linked[2] + 1)
            return True

    # The owner's CAS and a reader's SC have the same shape in the tagged
    # emulation: both compare against a body object obtained earlier.
    cas = sc

    def store(self, payload, state):
        """Unconditional tagged store; returns the new body."""
        if _atomics._hook is not None:
            _atomics._hook()
        with self._lock:
            body = (payload, state, self._body[2] + 1)
            self._body = body
            return body

    @property
    def tag(self) -> int:
        return self._body[2]


class Destination:
    """Single-writer cell supporting ``read``, ``write`` and ``swcopy``.

    Only the owning thread may call :meth:`write` and :meth:`swcopy`.
    """

    __slots__ = ("data", "old")

    def __init__(self, value=EMPTY):
        self.data = LLSCCell(value, DONE)
        self.old = value

    def write(self, value) -> None:
        # A write always leaves the cell in DONE state; any reader SC still in
        # flight fails on the tag bump and falls back to ``old``.
        self.data.store(value, DONE)

    def swcopy(self, src) -> None:
        """Atomically copy the word held by the location ``src`` into the cell.

        ``src`` must expose ``load()`` (e.g. an :class:`~acqret.AtomicWord`).
        """
        data = self.data
        self.old = data.ll()[0]
        installed = data.store(src, COPYING)
        val = src.load()
        data.cas(installed, val, DONE)

    def read(self):
        data = self.data
        c = data.ll()
        if c is None:
            c = data.ll()
            if c is None:
                return self.old
        payload, state, _ = c
        if state == COPYING:
            val = payload.load()
            if data.sc(c, val, DONE):
                return val
            # Someone finished that copy after our link. Returning ``old``
            # right away could hand back the pre-copy value after the copy
            # took effect, so look once more: a finished value is current
            # now, and a newer copy has refreshed ``old`` since our link.
            c = data.ll()
            if c is not None and c[1] == DONE:
                return c[0]
            return self.old
        return payload

    def __repr__(self) -> str:
        payload, state, tag = self.data._body
        return f"Destination({payload!r}, {'copying' if state == COPYING else 'done'}, tag={tag})"
