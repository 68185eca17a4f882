# %% [markdown]
# # An atomic cell for values of any size
#
# `WeakAtomic` keeps one value and copies it out on `load`. The copy runs
# inside an acquire window, so a concurrent `store` cannot destruct the
# value while it is being copied. Here the values are 64-entry buffers that
# are deep-copied on load and scribbled over on destruct.

# %%
import threading

from acqret import CopyDestruct, WeakAtomic


class Buffers(CopyDestruct):
    def copy(self, v):
        return list(v)

    def destruct(self, v):
        v[:] = [-1] * len(v)


cell = WeakAtomic([0] * 64, Buffers())
stop = threading.Event()


def writer():
    g = 0
    while not stop.is_set():
        g += 1
        cell.store([g] * 64)


def loader(out):
    torn = 0
    for _ in range(20_000):
        buf = cell.load()
        torn += len(set(buf)) != 1 or buf[0] < 0
    out.append(torn)


torn = []
w = threading.Thread(target=writer)
ls = [threading.Thread(target=loader, args=(torn,)) for _ in range(2)]
w.start()
for t in ls:
    t.start()
for t in ls:
    t.join()
stop.set()
w.join()
print("torn or destructed loads per loader:", torn)
