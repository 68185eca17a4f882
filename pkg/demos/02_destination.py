# %% [markdown]
# # A single-writer copy cell
#
# `Destination.swcopy(src)` copies the word in `src` into the cell and looks
# atomic to readers: a reader either sees the old contents or a value that
# `src` held during the copy. Readers help a copy in progress to finish.

# %%
import threading

from acqret import AtomicWord, Destination

src = AtomicWord(0)
d = Destination(0)

# %%
src.store(42)
d.swcopy(src)
d.read(), d

# %% [markdown]
# One writer keeps copying an increasing counter. Each reader checks that
# the values it sees never go backwards.

# %%
stop = threading.Event()


def writer():
    i = 0
    while not stop.is_set():
        i += 1
        src.store(i)
        d.swcopy(src)


def reader(out):
    last, bad = -1, 0
    for _ in range(50_000):
        v = d.read()
        bad += v < last
        last = v
    out.append(bad)


inversions = []
w = threading.Thread(target=writer)
rs = [threading.Thread(target=reader, args=(inversions,)) for _ in range(3)]
w.start()
for r in rs:
    r.start()
for r in rs:
    r.join()
stop.set()
w.join()
print("inversions per reader:", inversions, "| final", d.read())
