"""Load/store stress harness over an array of shared counted references.

Each worker repeatedly picks a slot uniformly at random and either loads it
(copy the reference, check the target, drop the copy) or, with probability
``store_prob``, stores a freshly allocated object into it. At the end every
worker drains its delayed decrements and a census checks that every object's
count matches the references to it and that unreachable objects were
destructed exactly once.

Three cell implementations are compared:

``refcount``
    :class:`~acqret.refcount.RefPtr` cells.
``weak-atomic-counted``
    :class:`~acqret.weak_atomic.WeakAtomic` cells holding counted objects.
``lock-baseline``
    one mutex per slot around a plain reference; the stand-in for a
    lock-based atomic shared pointer.

Usage::

    acqret-bench --impl refcount --threads 4 --n-refs 10 --store-prob 0.1
    acqret-bench --sweep 1,2,4,8 --ops 20000 --csv out.csv
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import sys
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from ._atomics import EMPTY
from .refcount import Collector, CountedObject
from .weak_atomic import CountedHandlePolicy, WeakAtomic, detach as wa_detach

IMPLS = ("refcount", "weak-atomic-counted", "lock-baseline")
CSV_FIELDS = ["impl", "threads", "n_refs", "store_prob", "duration_s", "ops_total", "throughput", "violations"]

_BLOCK = 4096  # random draws per refill


@dataclass
class WorkloadConfig:
    impl: str = "refcount"
    threads: int = 1
    n_refs: int = 10
    store_prob: float = 0.1
    duration_s: float = 3.0
    ops: int | None = None  # per thread; overrides duration_s when set
    seed: int = 0
    fast_path_tries: int = 3

    def validate(self) -> None:
        if self.impl not in IMPLS:
            raise ValueError(f"impl must be one of {', '.join(IMPLS)}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.n_refs < 1:
            raise ValueError("n_refs must be >= 1")
        if not 0.0 <= self.store_prob <= 1.0:
            raise ValueError("store_prob must be in [0, 1]")
        if self.ops is None and not self.duration_s > 0:
            raise ValueError("duration_s must be positive")
        if self.ops is not None and self.ops < 0:
            raise ValueError("ops must be >= 0")
        if self.fast_path_tries < 0:
            raise ValueError("fast_path_tries must be >= 0")


@dataclass
class RunResult:
    config: WorkloadConfig
    elapsed_s: float
    loads: int
    stores: int
    violations: int
    per_thread_ops: list = field(default_factory=list)
    digests: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def ops_total(self) -> int:
        return self.loads + self.stores

    @property
    def throughput(self) -> float:
        return self.ops_total / self.elapsed_s if self.elapsed_s > 0 else 0.0


class Payload(CountedObject):
    """Benchmark object; remembers how often it was destructed."""

    def __init__(self, tag):
        super().__init__()
        self.tag = tag
        self.destructs = 0

    def on_destruct(self):
        self.destructs += 1


# -- cell arrays ------------------------------------------------------------
#
# Each array exposes load(i) -> object holding one count owned by the caller,
# release(obj) to drop that count, store(i, obj) for a fresh uncounted obj,
# targets() for the census and finish() to run on each worker before exit.


class _RefcountArray:
    def __init__(self, objs, nprocs, tries):
        self.rc = Collector(nprocs, 1, fast_path_tries=tries)
        self.cells = [self.rc.new(o) for o in objs]

    def load(self, i):
        # RefPtr.copy minus the wrapper object
        h = self.rc.domain.handle()
        p = h.acquire(self.cells[i]._p)
        if p != EMPTY:
            p.add_counter(1)
        h.release()
        return p

    def release(self, p):
        self.rc.decrement(p)

    def store(self, i, obj):
        self.cells[i].update(self.rc.new(obj))

    def targets(self):
        return [c.get() for c in self.cells]

    def finish(self):
        self.rc.detach()

    def teardown(self):
        for c in self.cells:
            c.drop()

    def destructed(self):
        return self.rc.destructed.load()


class _WeakAtomicArray:
    def __init__(self, objs, nprocs, tries):
        from .acquire_retire import AcquireRetire

        self.rc = Collector(1)
        self.domain = AcquireRetire(nprocs, 1, fast_path_tries=tries)
        policy = CountedHandlePolicy(self.rc)
        self.cells = []
        for o in objs:
            o.add_counter(1)
            self.cells.append(WeakAtomic(o, policy, self.domain))

    def load(self, i):
        return self.cells[i].load()

    def release(self, p):
        self.rc.decrement(p)

    def store(self, i, obj):
        obj.add_counter(1)
        self.cells[i].store(obj)

    def targets(self):
        return [c.peek_raw() for c in self.cells]

    def finish(self):
        wa_detach(self.domain)

    def teardown(self):
        for c in self.cells:
            c.drop()

    def destructed(self):
        return self.rc.destructed.load()


class _LockArray:
    def __init__(self, objs, nprocs, tries):
        self.rc = Collector(1)
        self.locks = [threading.Lock() for _ in objs]
        self.cells = list(objs)
        for o in objs:
            o.add_counter(1)

    def load(self, i):
        with self.locks[i]:
            p = self.cells[i]
            p.add_counter(1)
        return p

    def release(self, p):
        self.rc.decrement(p)

    def store(self, i, obj):
        obj.add_counter(1)
        with self.locks[i]:
            old = self.cells[i]
            self.cells[i] = obj
        self.rc.decrement(old)

    def targets(self):
        return list(self.cells)

    def finish(self):
        pass

    def teardown(self):
        for i, o in enumerate(self.cells):
            self.cells[i] = EMPTY
            self.rc.decrement(o)

    def destructed(self):
        return self.rc.destructed.load()


_ARRAYS = {"refcount": _RefcountArray, "weak-atomic-counted": _WeakAtomicArray, "lock-baseline": _LockArray}


# -- workload ---------------------------------------------------------------


def _rng(seed: int, tid: int) -> np.random.Generator:
    # Counter-based: the key is the run seed, the stream is picked by thread id.
    return np.random.Generator(np.random.Philox(key=seed & (2**64 - 1), counter=[0, 0, 0, tid]))


class _Worker:
    def __init__(self, tid, cfg, arr, start, stop):
        self.tid = tid
        self.cfg = cfg
        self.arr = arr
        self.start = start
        self.stop = stop
        self.loads = 0
        self.stores = 0
        self.violations = 0
        self.created = []
        self.digest = hashlib.blake2b(digest_size=16)
        self.error = None

    def run(self):
        try:
            self._run()
        except BaseException as e:  # reported by the caller
            self.error = e

    def _run(self):
        cfg = self.cfg
        arr = self.arr
        rng = _rng(cfg.seed, self.tid)
        n = cfg.n_refs
        ps = cfg.store_prob
        budget = cfg.ops
        stop = self.stop
        self.start.wait()
        done = 0
        while budget is None or done < budget:
            k = _BLOCK if budget is None else min(_BLOCK, budget - done)
            idx = rng.integers(0, n, size=k)
            is_store = rng.random(size=k) < ps
            self.digest.update(idx.tobytes())
            self.digest.update(is_store.tobytes())
            idx = idx.tolist()
            is_store = is_store.tolist()
            for j in range(k):
                i = idx[j]
                if is_store[j]:
                    obj = Payload((self.tid, self.stores))
                    self.created.append(obj)
                    arr.store(i, obj)
                    self.stores += 1
                else:
                    p = arr.load(i)
                    if p is EMPTY or p.destroyed or p.count < 1:
                        self.violations += 1
                    arr.release(p)
                    self.loads += 1
                if budget is None and not j & 63 and stop.is_set():
                    arr.finish()
                    return
            done += k
        arr.finish()


def run_workload(cfg: WorkloadConfig) -> RunResult:
    """Run one configuration and return its counts and census result."""
    cfg.validate()
    initial = [Payload(("init", i)) for i in range(cfg.n_refs)]
    arr = _ARRAYS[cfg.impl](initial, cfg.threads + 1, cfg.fast_path_tries)
    touches0 = CountedObject.post_destruct_touches

    start = threading.Barrier(cfg.threads + 1)
    stop = threading.Event()
    workers = [_Worker(t, cfg, arr, start, stop) for t in range(cfg.threads)]
    threads = [threading.Thread(target=w.run, name=f"bench-{w.tid}") for w in workers]
    for t in threads:
        t.start()
    start.wait()
    t0 = time.perf_counter()
    if cfg.ops is None:
        stop.wait(cfg.duration_s)
        stop.set()
    for t in threads:
        t.join()
    elapsed = time.perf_counter() - t0
    for w in workers:
        if w.error is not None:
            raise w.error

    notes = []
    violations = sum(w.violations for w in workers)
    if violations:
        notes.append(f"{violations} loads saw a destructed or uncounted object")
    census = _census(arr, initial, [o for w in workers for o in w.created], notes)
    touches = CountedObject.post_destruct_touches - touches0
    if touches:
        notes.append(f"{touches} count updates on destructed objects")
    violations += census + touches

    return RunResult(
        config=cfg,
        elapsed_s=elapsed,
        loads=sum(w.loads for w in workers),
        stores=sum(w.stores for w in workers),
        violations=violations,
        per_thread_ops=[w.loads + w.stores for w in workers],
        digests=[w.digest.hexdigest() for w in workers],
        notes=notes,
    )


def _census(arr, initial, created, notes) -> int:
    bad = 0
    refs: dict[int, int] = {}
    for p in arr.targets():
        if p is not EMPTY:
            refs[id(p)] = refs.get(id(p), 0) + 1
    everything = initial + created
    for o in everything:
        want = refs.get(id(o), 0)
        if want:
            if o.destroyed or o.count != want:
                bad += 1
        elif not o.destroyed or o.destructs != 1 or o.count != 0:
            bad += 1
    if bad:
        notes.append(f"{bad} objects failed the count census")
    # Tear down the array: now every object must be gone exactly once.
    arr.teardown()
    leaked = sum(1 for o in everything if o.destructs != 1)
    if leaked:
        notes.append(f"{leaked} objects not destructed exactly once at teardown")
    if arr.destructed() != len(everything):
        notes.append(f"destruct counter {arr.destructed()} != {len(everything)} objects")
        bad += 1
    return bad + leaked


# -- reporting --------------------------------------------------------------


def emit_report(results, out=None, summary=None) -> None:
    """Write CSV rows for ``results`` to ``out`` and a speedup table to ``summary``."""
    if not results:
        raise ValueError("no results to report")
    if out is not None:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in results:
            c = r.config
            w.writerow([
                c.impl, c.threads, c.n_refs, c.store_prob, f"{r.elapsed_s:.3f}",
                r.ops_total, f"{r.throughput:.1f}", r.violations,
            ])
    if summary is not None:
        base = {}
        for r in results:
            if r.config.threads == 1:
                base.setdefault(r.config.impl, r.throughput)
        summary.write(f"{'impl':<20} {'threads':>7} {'ops':>10} {'ops/s':>12} {'speedup':>8} {'viol':>5}\n")
        for r in results:
            b = base.get(r.config.impl)
            sp = f"{r.throughput / b:.2f}" if b else "-"
            summary.write(f"{r.config.impl:<20} {r.config.threads:>7} {r.ops_total:>10} "
                          f"{r.throughput:>12.0f} {sp:>8} {r.violations:>5}\n")
            for n in r.notes:
                summary.write(f"  ! {n}\n")


def _thread_list(s: str) -> list[int]:
    try:
        ts = [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad thread list {s!r}")
    if not ts or min(ts) < 1:
        raise argparse.ArgumentTypeError("thread counts must be positive")
    return ts


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="acqret-bench", description=__doc__.split("\n\n")[0])
    p.add_argument("--impl", choices=IMPLS, default="refcount")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--n-refs", type=int, default=10)
    p.add_argument("--store-prob", type=float, default=0.1)
    p.add_argument("--duration-s", type=float, default=3.0)
    p.add_argument("--ops", type=int, default=None, help="ops per thread; replaces --duration-s")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", metavar="PATH", help="write CSV here ('-' for stdout)")
    p.add_argument("--sweep", type=_thread_list, metavar="T1,T2,...", help="run once per thread count")
    p.add_argument("--fast-path-tries", type=int, default=3,
                   help="validated-read attempts before the wait-free acquire")
    p.add_argument("--quiet", action="store_true", help="no summary table")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    counts = args.sweep if args.sweep else [args.threads]
    cfgs = [
        WorkloadConfig(
            impl=args.impl, threads=t, n_refs=args.n_refs, store_prob=args.store_prob,
            duration_s=args.duration_s, ops=args.ops, seed=args.seed,
            fast_path_tries=args.fast_path_tries,
        )
        for t in counts
    ]
    try:
        for c in cfgs:
            c.validate()
    except ValueError as e:
        print(f"acqret-bench: error: {e}", file=sys.stderr)
        return 2

    results = [run_workload(c) for c in cfgs]
    try:
        if args.csv == "-":
            emit_report(results, sys.stdout)
        elif args.csv:
            with open(args.csv, "w", encoding="utf-8", newline="") as f:
                emit_report(results, f)
    except OSError as e:
        print(f"acqret-bench: cannot write {args.csv}: {e}", file=sys.stderr)
        return 2
    if not args.quiet:
        emit_report(results, summary=sys.stderr if args.csv == "-" else sys.stdout)
    return 0 if all(r.violations == 0 for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
