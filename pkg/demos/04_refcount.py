# %% [markdown]
# # Reference counting with deferred decrements
#
# `RefPtr.copy` protects the target with an acquire before bumping its count,
# so a concurrent `update` can never free it in between. The decrement of
# an overwritten target is delayed until no copy is in flight.

# %%
from acqret import Collector, CountedObject


class Node(CountedObject):
    def __init__(self, val, left, right):
        super().__init__()
        self.val, self.left, self.right = val, left, right

    def on_destruct(self):
        print("destruct", self.val)


rc = Collector(max_processes=2)
leaf = lambda v: rc.new(Node(v, rc.null(), rc.null()))
root = rc.new(Node(5, leaf(3), leaf(7)))
root.get().count

# %%
alias = root.copy()
print("count after copy:", root.get().count)
alias.drop()

# %% [markdown]
# Overwriting the root delays the decrement; `drain` applies it and the old
# tree is destructed child by child.

# %%
root.update(leaf(9))
rc.drain()
root.drop()
print("destructed:", rc.destructed.load())
