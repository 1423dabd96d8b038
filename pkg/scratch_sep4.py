import cProfile
import pstats
import time

import numpy as np

from chancenet import model, separation
from scratch_gen import random_instance

rng = np.random.default_rng(7)
inst_d = random_instance(rng, 8, "diag")
inst_c = random_instance(rng, 8, "corr")
print("diag arcs:", inst_d.n_arcs, " corr arcs:", inst_c.n_arcs, flush=True)

xbar = rng.uniform(0.0, 1.0, size=inst_c.n_arcs)
p = separation.separation_problem(inst_c, xbar, 1.5)
fm = separation._build_formulation(p, "sep-mc")
print("mc cols:", fm.n_cols, "rows:", len(fm.base_rows), flush=True)

t = time.perf_counter()
res = separation._solve_node(fm, {})
t1 = time.perf_counter() - t
print("one root LP:", round(t1, 3), "s status", res.status, "iters", res.iterations, flush=True)

pr = cProfile.Profile()
pr.enable()
separation._solve_node(fm, {3: 1, 5: 0})
pr.disable()
pstats.Stats(pr).sort_stats("tottime").print_stats(10)
