# %% [markdown]
# # A stack and a queue with safe reclamation
#
# Both containers keep their nodes in a simulated heap that poisons freed
# blocks, so any read of a freed node is counted as a violation. Popped nodes
# go through `safe_free` and are freed only when no reader protects them.

# %%
import random
import threading

from acqret import Queue, Stack

s = Stack(max_processes=4)
for v in "abc":
    s.push(v)
s.peek(), s.pop(), s.pop()

# %%
q = Queue(max_processes=4)
for v in range(3):
    q.enqueue(v)
q.peek(), q.dequeue(), q.dequeue()

# %% [markdown]
# Four threads hammer the stack. Everything pushed comes out exactly once
# and the heap never reports a read of a freed block.

# %%
s = Stack(max_processes=5)
pushed, popped = [], []


def worker(t):
    rng = random.Random(t)
    for k in range(5000):
        if rng.random() < 0.5:
            s.push((t, k))
            pushed.append((t, k))
        else:
            v = s.pop()
            if v is not None:
                popped.append(v)
    s.detach()


ts = [threading.Thread(target=worker, args=(t,)) for t in range(4)]
for t in ts:
    t.start()
for t in ts:
    t.join()
while (v := s.pop()) is not None:
    popped.append(v)
s.reclaimer.drain()
print(sorted(pushed) == sorted(popped), "heap violations:", s.heap.violations, "live blocks:", s.heap.live)
