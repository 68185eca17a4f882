# %% [markdown]
# # The load/store benchmark
#
# `run_workload` drives the same harness as the `acqret-bench` command. Each
# run ends with a census: every object's count must match the references to
# it, and everything unreachable must have been destructed exactly once.

# %%
import sys

import numpy as np

from acqret.bench_cli import WorkloadConfig, emit_report, run_workload

results = [
    run_workload(WorkloadConfig(impl=impl, threads=t, n_refs=100, store_prob=0.1, ops=5000))
    for impl in ("refcount", "weak-atomic-counted", "lock-baseline")
    for t in (1, 2, 4)
]
emit_report(results, sys.stdout, summary=sys.stdout)

# %% [markdown]
# Throughput per implementation, relative to its single-thread run. Under a
# single interpreter lock there is no parallel speedup to see.

# %%
tp = np.array([r.throughput for r in results]).reshape(3, 3)
print(np.round(tp / tp[:, :1], 2))
