"""Oracle sweep for the master solver: brute force over all binary designs."""
import time

import numpy as np

from chancenet import bnb, model
from scratch_gen import random_instance


def brute_optimum(inst, omega):
    cuts = model.enumerate_cuts(inst)
    models = [model.capacity_model(inst, omega, arc_ids=c.arc_ids) for c in cuts]
    m = inst.n_arcs
    best_cost, best_x = None, None
    for mask in range(1 << m):
        x = np.array([(mask >> i) & 1 for i in range(m)], dtype=float)
        cost = float(inst.costs @ x)
        if best_cost is not None and cost >= best_cost:
            continue
        if all(model.eval_f(cm, x) >= inst.demand - 1e-9 for cm in models):
            best_cost, best_x = cost, x
    return best_cost, best_x


def main():
    rng = np.random.default_rng(20240817)
    t0 = time.perf_counter()
    n_checked = n_infeasible = 0
    for trial in range(30):
        regime = ("diag", "corr")[trial % 2]
        # Small networks so 2^m enumeration stays quick.
        inst = random_instance(rng, n_internal=3 + trial % 2, regime=regime)
        if inst.n_arcs > 14:
            continue
        from chancenet.flow import dinic_max_flow
        phi = dinic_max_flow(inst.nodes, inst.tails, inst.heads, inst.mu,
                             inst.source, inst.sink).value
        data = model.instance_to_dict(inst)
        data["demand"] = float(rng.uniform(0.35, 0.8) * phi)
        inst = model.instance_from_dict(data, name=inst.name)
        omega = float(rng.uniform(0.1, 1.2))
        want_cost, _ = brute_optimum(inst, omega)
        cfg = bnb.SolveConfig(omega=omega, strategy="enum")
        design, stats = bnb.solve_cqnd(inst, cfg)
        if want_cost is None:
            assert stats.status == "infeasible", (trial, stats.status)
            n_infeasible += 1
        else:
            assert stats.status == "optimal", (trial, stats.status)
            assert abs(design.cost - want_cost) < 1e-6, (trial, design.cost, want_cost)
            assert design.worst_slack >= -1e-6 * max(1.0, inst.demand)
        n_checked += 1

        # Ablation: OA-only must land on the same optimum.
        if want_cost is not None and trial % 3 == 0:
            d2, s2 = bnb.solve_cqnd(inst, bnb.SolveConfig(omega=omega, cuts=("oa",)))
            assert s2.status == "optimal" and abs(d2.cost - want_cost) < 1e-6, (
                trial, d2.cost, want_cost)

        # Strategy cross-check on a couple of trials.
        if want_cost is not None and trial % 7 == 0:
            strat = "sep-qcqp" if inst.is_diagonal else "sep-mc"
            d3, s3 = bnb.solve_cqnd(inst, bnb.SolveConfig(omega=omega, strategy=strat))
            assert s3.status == "optimal" and abs(d3.cost - want_cost) < 1e-6, (
                trial, strat, d3.cost, want_cost)

    print(f"oracle sweep: {n_checked} instances ({n_infeasible} infeasible) OK "
          f"in {time.perf_counter() - t0:.1f}s")

    # Monotonicity in omega on the bundled network.
    inst = model.example_network()
    grid = [0.0, 0.3, 0.8, 1.2, 1.96, 2.33, 2.8, 3.09]
    costs = []
    for om in grid:
        design, stats = bnb.solve_cqnd(inst, bnb.SolveConfig(omega=om))
        assert stats.status == "optimal"
        costs.append(design.cost)
    assert costs == sorted(costs), costs
    print("omega monotonicity:", costs)


if __name__ == "__main__":
    main()
