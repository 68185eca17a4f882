import threading


def run_threads(fns, timeout=120):
    """Start one thread per callable behind a barrier; return results, re-raise errors."""
    barrier = threading.Barrier(len(fns))
    results = [None] * len(fns)
    errors = []

    def wrap(i, f):
        barrier.wait()
        try:
            results[i] = f()
        except BaseException as e:
            errors.append(e)

    ts = [threading.Thread(target=wrap, args=(i, f), daemon=True) for i, f in enumerate(fns)]
    for t in ts:
        t.start()
    for t in ts:
        t.join(timeout)
        if t.is_alive():
            raise TimeoutError("worker did not finish")
    if errors:
        raise errors[0]
    return results


class OneShotHook:
    """Schedule hook that runs ``action`` just before the ``n``-th shared access (1-based)."""

    def __init__(self, n, action):
        self.n = n
        self.count = 0
        self.action = action
        self.fired = False

    def __call__(self):
        self.count += 1
        if self.count == self.n and not self.fired:
            self.fired = True
            from acqret import _atomics
            prev = _atomics.set_schedule_hook(None)
            try:
                self.action()
            finally:
                _atomics.set_schedule_hook(prev)
