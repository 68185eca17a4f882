# %% [markdown]
# # Acquire and retire
#
# A reader *acquires* a handle stored in a shared location: the handle is
# announced in one of its slots, so nobody will destruct it until the reader
# releases. A writer that unlinks a handle *retires* it, and later *ejects*
# it once no announcement covers it.

# %%
from acqret import AcquireRetire, AtomicWord

ar = AcquireRetire(max_processes=2, slots=1)
reader, writer = ar.register(), ar.register()
loc = AtomicWord(100)

# %% [markdown]
# The reader protects 100. The writer swaps in 101 and retires 100.

# %%
x = reader.acquire(loc)
old = loc.exchange(101)
writer.retire(old)
print("acquired", x, "| announced:", ar.announced())

# %% [markdown]
# Ejection is deamortized: each `eject` call does a few units of a scan over
# the announcements. While the reader holds 100 it never comes out.

# %%
print([writer.eject() for _ in range(10)])

# %%
reader.release()
out = [writer.eject() for _ in range(10)]
print(out)
assert 100 in out

# %% [markdown]
# Each process holds at most `3 * c * P` delayed handles at any moment.

# %%
for i in range(200):
    writer.retire(loc.exchange(1000 + i))
    writer.eject()
print("delayed now:", writer.delayed, "bound:", ar.delayed_bound)
