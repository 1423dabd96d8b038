"""Cut generators: validity sweeps and hand-checked small cases."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from chancenet.cutgen import (
    CutGenerationError,
    LinearCut,
    aggregate_and_cover,
    build_q_tilde,
    find_cover,
    find_pack,
    knapsack_from_vertex,
    lift_cover,
    lift_pack,
    mean_cut,
    oa_gradient_cut,
)
from chancenet.model import capacity_model, check_cv, eval_f, q_coefficients
from chancenet.submodular import SetFunction, greedy_vertex

from conftest import random_instance

VALIDITY_TOL = 1e-7


def small_cm(inst, omega, width=10):
    return capacity_model(inst, omega, arc_ids=tuple(range(min(width, inst.n_arcs))))


def binaries(size):
    for bits in range(1 << size):
        yield np.array([(bits >> k) & 1 for k in range(size)], dtype=float)


def full_point(cm, local):
    x = np.zeros(cm.n_parent_arcs)
    x[list(cm.arc_ids)] = local
    return x


def feasible_binaries(cm):
    return [x for x in binaries(cm.size) if eval_f(cm, x) >= cm.demand]


def assert_valid_on(cut, cm, points):
    for local in points:
        assert cut.violation(full_point(cm, local)) <= VALIDITY_TOL


# ---------------------------------------------------------------------------
# LinearCut plumbing
# ---------------------------------------------------------------------------


def test_linear_cut_violation_sign():
    cut = LinearCut(kind="mean-cut", indices=(0, 2), coefs=(1.0, 2.0), sense=">=", rhs=3.0)
    x = np.array([1.0, 0.0, 0.5])
    assert cut.activity(x) == pytest.approx(2.0)
    assert cut.violation(x) == pytest.approx(1.0)
    flipped = LinearCut(kind="cover", indices=(0, 2), coefs=(1.0, 2.0), sense="<=", rhs=1.5)
    assert flipped.violation(x) == pytest.approx(0.5)


def test_linear_cut_rejects_bad_data():
    with pytest.raises(CutGenerationError):
        LinearCut(kind="surprise", indices=(0,), coefs=(1.0,), sense=">=", rhs=0.0)
    with pytest.raises(CutGenerationError):
        LinearCut(kind="oa", indices=(0,), coefs=(1.0,), sense="=>", rhs=0.0)
    with pytest.raises(CutGenerationError):
        LinearCut(kind="oa", indices=(0, 1), coefs=(1.0,), sense=">=", rhs=0.0)
    with pytest.raises(CutGenerationError):
        LinearCut(kind="oa", indices=(0,), coefs=(math.inf,), sense=">=", rhs=0.0)


def test_coefficient_key_ignores_index_order():
    a = LinearCut(kind="oa", indices=(0, 1), coefs=(1.0, 2.0), sense=">=", rhs=3.0)
    b = LinearCut(kind="oa", indices=(1, 0), coefs=(2.0, 1.0), sense=">=", rhs=3.0)
    assert a.coefficient_key() == b.coefficient_key()


# ---------------------------------------------------------------------------
# Outer approximation and the mean row
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("regime", ["independent", "correlated", "general"])
@pytest.mark.parametrize("seed", [0, 1])
def test_oa_cut_is_tangent_overestimate(regime, seed):
    inst = random_instance(6, regime, seed=seed)
    cm = small_cm(inst, omega=2.0)
    rng = np.random.default_rng(seed)
    for _ in range(8):
        xbar = rng.random(cm.size)
        cut = oa_gradient_cut(cm, xbar)
        assert cut.kind == "oa" and cut.sense == ">=" and cut.rhs == cm.demand
        tangent_at = cut.activity(full_point(cm, xbar)) - cut.rhs
        assert tangent_at == pytest.approx(eval_f(cm, xbar) - cm.demand, abs=1e-8)
        for x in binaries(cm.size):
            linear = cut.activity(full_point(cm, x)) - cut.rhs
            assert linear >= eval_f(cm, x) - cm.demand - VALIDITY_TOL


def test_oa_cut_at_zero_point_falls_back(sixnode):
    cm = capacity_model(sixnode, omega=1.959963984540054, arc_ids=(0, 1, 2, 3, 4))
    cut = oa_gradient_cut(cm, np.zeros(5))
    assert all(math.isfinite(c) for c in cut.coefs)
    assert_valid_on(cut, cm, feasible_binaries(cm))


def test_mean_cut_row(sixnode):
    cm = capacity_model(sixnode, omega=2.0, arc_ids=(0, 1, 2, 3, 4))
    cut = mean_cut(cm)
    assert cut.kind == "mean-cut" and cut.sense == ">="
    assert cut.coefs == (81.0, 90.0, 12.0, 91.0, 63.0)
    assert cut.rhs == 230.0


# ---------------------------------------------------------------------------
# Packs
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(6))
def test_pack_sweep(seed):
    inst = random_instance(6, "independent", seed=seed)
    cm = small_cm(inst, omega=2.0)
    assert check_cv(cm) == []
    rng = np.random.default_rng(seed)
    feasible = feasible_binaries(cm)
    found = find_pack(cm, rng.random(cm.size))
    if found is None:
        assert cm.demand <= 0.0
        return
    pack, cut = found
    locals_of = [cm.arc_ids.index(p) for p in pack.arcs]
    chi = np.zeros(cm.size)
    chi[locals_of] = 1.0
    assert eval_f(cm, chi) < cm.demand
    assert pack.slack == pytest.approx(cm.demand - eval_f(cm, chi))
    brute_maximal = all(
        eval_f(cm, np.minimum(chi + unit, 1.0)) >= cm.demand
        for unit in np.eye(cm.size)[[k for k in range(cm.size) if k not in locals_of]]
    )
    assert pack.maximal == brute_maximal
    assert cut.kind == "pack" and cut.sense == ">=" and cut.rhs == 1.0
    assert_valid_on(cut, cm, feasible)


@pytest.mark.parametrize("seed", range(6))
def test_lifted_pack_sweep(seed):
    inst = random_instance(6, "independent", seed=100 + seed)
    cm = small_cm(inst, omega=2.0, width=8)
    rng = np.random.default_rng(seed)
    xbar = rng.random(cm.size)
    found = find_pack(cm, xbar)
    if found is None:
        return
    pack, plain = found
    lifted = lift_pack(cm, pack, xbar)
    assert lifted.kind in ("pack", "extended-pack")
    assert_valid_on(lifted, cm, feasible_binaries(cm))
    if lifted.kind == "extended-pack":
        # Lifting only adds (1 - x_i) terms, so wherever the pack members
        # are all open the two rows coincide.
        open_all = np.ones(cm.n_parent_arcs)
        assert lifted.violation(open_all) == pytest.approx(plain.violation(open_all), abs=1e-9)


def test_pack_none_when_demand_absent(sixnode):
    cm = capacity_model(sixnode, omega=1.0, arc_ids=(0, 1), demand=0.0)
    assert find_pack(cm, np.array([0.5, 0.5])) is None


# ---------------------------------------------------------------------------
# Covers
# ---------------------------------------------------------------------------


def test_cover_hand_case():
    kp = knapsack_from_vertex((1, 2, 3), (3.0, 4.0, 5.0), 6.0)
    members, cut = find_cover(kp, None)
    assert members == (1, 2)
    assert cut.sense == "<=" and cut.rhs == 1.0
    lifted = lift_cover(kp, members, None)
    assert lifted.kind == "lifted-cover"
    assert dict(zip(lifted.indices, lifted.coefs)) == {1: 1.0, 2: 1.0, 3: 1.0}
    assert lifted.rhs == 1.0


def test_cover_none_when_weights_fit():
    kp = knapsack_from_vertex((0, 1), (1.0, 2.0), 4.0)
    assert find_cover(kp, None) is None


def test_cover_respects_fractional_ordering():
    kp = knapsack_from_vertex((0, 1, 2), (4.0, 4.0, 4.0), 6.0)
    members, _ = find_cover(kp, {0: 0.1, 1: 0.9, 2: 0.8})
    assert members == (1, 2)


def test_folded_knapsack_pins_negative_weights():
    kp = knapsack_from_vertex((0, 1, 2), (-2.0, 3.0, 4.0), 4.0)
    pos_idx, pos_w, cap = kp.folded()
    assert pos_idx == [1, 2] and pos_w == [3.0, 4.0] and cap == 6.0
    found = find_cover(kp, None)
    assert found is not None
    _, cut = found
    # Validity against the original signed knapsack, all binaries.
    for x in binaries(3):
        if float(np.array(kp.weights) @ x) <= kp.gamma + 1e-12:
            assert cut.violation(x) <= VALIDITY_TOL


@pytest.mark.parametrize("seed", range(6))
def test_cover_sweep_from_polymatroid_knapsack(seed):
    # The q-form knapsack: a greedy vertex v of the polymatroid of the
    # normalized form satisfies v'x <= -q(0) on every feasible design,
    # and covers of that knapsack must hold there too.
    inst = random_instance(6, "correlated", seed=200 + seed)
    cm = small_cm(inst, omega=2.0, width=7)
    if check_cv(cm):
        pytest.skip("variation bound violated; the q knapsack needs it")
    qf = q_coefficients(cm)

    def q_norm(subset):
        x = np.zeros(cm.size)
        x[list(subset)] = 1.0
        return float(qf.alpha @ x + x @ qf.beta @ x)

    g = SetFunction(cm.size, q_norm)
    rng = np.random.default_rng(seed)
    vertex = greedy_vertex(g, tuple(rng.permutation(cm.size).tolist()))
    kp = knapsack_from_vertex(cm.arc_ids, vertex.v, -qf.constant)

    q_feasible = [
        x for x in binaries(cm.size)
        if float(qf.alpha @ x + x @ qf.beta @ x + qf.constant) <= 0.0
    ]
    for x in q_feasible:
        assert float(vertex.v @ x) <= kp.gamma + 1e-7

    xbar = {a: float(v) for a, v in zip(cm.arc_ids, rng.random(cm.size))}
    found = find_cover(kp, xbar)
    if found is None:
        return
    members, cut = found
    lifted = lift_cover(kp, members, xbar)
    for row in (cut, lifted):
        assert_valid_on(row, cm, q_feasible)


def test_aggregate_and_cover_validity():
    a = LinearCut(kind="cover", indices=(0, 1, 2), coefs=(1.0, 1.0, 1.0), sense="<=", rhs=2.0)
    b = LinearCut(kind="cover", indices=(1, 2, 3), coefs=(1.0, 1.0, 1.0), sense="<=", rhs=1.0)
    agg = aggregate_and_cover([a, b], None)
    assert agg is not None and agg.sense == "<="
    for x in binaries(4):
        if a.violation(x) <= 0.0 and b.violation(x) <= 0.0:
            assert agg.violation(x) <= VALIDITY_TOL


def test_aggregate_rejects_ge_rows():
    row = LinearCut(kind="pack", indices=(0,), coefs=(1.0,), sense=">=", rhs=1.0)
    with pytest.raises(CutGenerationError):
        aggregate_and_cover([row], None)


def test_aggregate_none_cases():
    assert aggregate_and_cover([], None) is None
    slack = LinearCut(kind="cover", indices=(0, 1), coefs=(1.0, 1.0), sense="<=", rhs=5.0)
    assert aggregate_and_cover([slack], None) is None


# ---------------------------------------------------------------------------
# The extended quadratic form
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("seed", range(4))
def test_q_tilde_agrees_on_binaries(seed):
    inst = random_instance(6, "general", seed=300 + seed)
    cm = small_cm(inst, omega=1.5, width=7)
    qt = build_q_tilde(cm)
    qf = q_coefficients(cm)
    assert qt.n_x == cm.size
    assert list(qt.pairs) == sorted(qt.pairs)
    # No positive quadratic coefficient survives on the x block; that is
    # the whole point of introducing the z columns.
    assert np.all(qt.form.beta[: qt.n_x, : qt.n_x] <= 1e-12)
    for x in binaries(cm.size):
        z = np.array([x[i] * x[j] for i, j in qt.pairs])
        ext = np.concatenate([x, z])
        val = float(qt.form.alpha @ ext + ext @ qt.form.beta @ ext + qt.form.constant)
        direct = float(qf.alpha @ x + x @ qf.beta @ x + qf.constant)
        assert val == pytest.approx(direct, rel=1e-9, abs=1e-7)
        for link in qt.links:
            assert link.violation(x, z) <= 1e-9


def test_q_tilde_with_product_columns_agrees_exhaustively():
    inst = random_instance(7, "general", seed=0)
    cm = capacity_model(inst, omega=2.0)
    qt = build_q_tilde(cm)
    assert qt.pairs, "expected positive product pairs on this draw"
    qf = q_coefficients(cm)
    m = cm.size
    X = np.array([[(bits >> k) & 1 for k in range(m)] for bits in range(1 << m)], dtype=float)
    Z = np.column_stack([X[:, i] * X[:, j] for i, j in qt.pairs])
    E = np.hstack([X, Z])
    ext_vals = E @ qt.form.alpha + np.einsum("bi,ij,bj->b", E, qt.form.beta, E) + qt.form.constant
    direct = X @ qf.alpha + np.einsum("bi,ij,bj->b", X, qf.beta, X) + qf.constant
    assert np.allclose(ext_vals, direct, rtol=1e-9, atol=1e-6)
    for link in qt.links:
        viols = np.array([link.violation(x, z) for x, z in zip(X, Z)])
        assert viols.max() <= 1e-9


def test_q_tilde_links_catch_dishonest_z():
    # Product columns appear only when a strongly positive covariance
    # entry beats the product of the means, so scan a few draws.
    for seed in range(10):
        inst = random_instance(7, "general", seed=seed)
        cm = capacity_model(inst, omega=2.0)
        qt = build_q_tilde(cm)
        if qt.pairs:
            break
    else:
        raise AssertionError("no general instance produced product columns")
    x = np.zeros(cm.size)
    z = np.ones(len(qt.pairs))
    assert any(link.violation(x, z) > 1e-9 for link in qt.links)
