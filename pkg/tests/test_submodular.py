"""Set-function machinery: certificates, greedy vertices, linearizations."""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from chancenet.model import capacity_model, check_cv, eval_f, q_coefficients
from chancenet.submodular import (
    GroundSetError,
    SetFunction,
    certify_modularity,
    difference,
    greedy_vertex,
    nw_inequality,
    separate_polymatroid,
)

from conftest import random_instance


def f_set_function(cm):
    def evaluate(subset):
        x = np.zeros(cm.size)
        x[list(subset)] = 1.0
        return eval_f(cm, x)

    return SetFunction(cm.size, evaluate)


def q_set_function(cm):
    """Normalized quadratic form; greedy constructions need g(empty) = 0."""
    qf = q_coefficients(cm)

    def evaluate(subset):
        x = np.zeros(cm.size)
        x[list(subset)] = 1.0
        return float(qf.alpha @ x + x @ qf.beta @ x)

    return SetFunction(cm.size, evaluate)


def small_capacity_model(inst, omega: float, width: int = 7):
    """Restrict to the first few arcs so exhaustive sweeps stay cheap."""
    return capacity_model(inst, omega, arc_ids=tuple(range(min(width, inst.n_arcs))))


def cv_capacity_model(n: int, seed: int, omega: float = 2.0):
    """A correlated cut model satisfying the variation bound on every arc."""
    for s in range(seed, seed + 50):
        inst = random_instance(n, "correlated", seed=s, omega=omega)
        cm = small_capacity_model(inst, omega)
        if not check_cv(cm):
            return cm
    raise AssertionError("no CV-compliant instance found in 50 seeds")


# ---------------------------------------------------------------------------
# SetFunction plumbing
# ---------------------------------------------------------------------------


def test_set_function_normalizes_input():
    calls = []

    def evaluate(subset):
        calls.append(subset)
        return float(len(subset))

    g = SetFunction(4, evaluate)
    assert g((2, 1)) == 2.0
    assert g([1, 2, 2]) == 2.0
    # The empty value is computed once at construction and served from cache.
    assert calls == [(), (1, 2), (1, 2)]
    assert g(()) == 0.0
    assert calls[-1] == (1, 2)


def test_set_function_rejects_foreign_elements():
    g = SetFunction(3, lambda s: 0.0)
    with pytest.raises(GroundSetError):
        g((3,))
    with pytest.raises(GroundSetError):
        g((-1,))


def test_difference_is_marginal_value():
    g = SetFunction(3, lambda s: float(sum(s)) ** 2)
    assert difference(g, 2, ()) == 4.0
    assert difference(g, 2, (1,)) == 9.0 - 1.0


# ---------------------------------------------------------------------------
# Modularity certificates
# ---------------------------------------------------------------------------


def test_certify_additive_function():
    g = SetFunction(4, lambda s: float(len(s)))
    assert certify_modularity(g).kind == "modular"


def test_certify_neither_produces_witness():
    values = {(): 0.0, (0,): 1.0, (1,): 1.0, (0, 1): 1.5, (2,): 5.0,
              (0, 2): 5.0, (1, 2): 6.5, (0, 1, 2): 9.0}
    g = SetFunction(3, lambda s: values[s])
    cert = certify_modularity(g)
    assert cert.kind == "neither"
    i, small, large = cert.witness
    assert set(small) <= set(large)
    assert i not in set(large)
    rho_small = difference(g, i, small)
    rho_large = difference(g, i, large)
    assert not math.isclose(rho_small, rho_large)


@pytest.mark.parametrize("seed", range(8))
def test_f_supermodular_on_diagonal_instances(seed):
    inst = random_instance(6, "independent", seed=seed)
    cm = small_capacity_model(inst, omega=2.0)
    assert certify_modularity(f_set_function(cm)).kind in ("supermodular", "modular")


@pytest.mark.parametrize("seed", range(8))
def test_q_submodular_under_cv(seed):
    cm = cv_capacity_model(6, seed=10 * seed)
    assert certify_modularity(q_set_function(cm)).kind in ("submodular", "modular")


def test_q_can_lose_submodularity_without_cv():
    # Instances drawn at omega = 1 but modeled at omega = 8 violate the
    # variation bound; the certificate must notice on at least one seed,
    # otherwise the check would be vacuous.
    kinds = set()
    for seed in range(30):
        inst = random_instance(6, "general", seed=seed, omega=1.0)
        cm = small_capacity_model(inst, omega=8.0)
        if not check_cv(cm):
            continue
        kinds.add(certify_modularity(q_set_function(cm)).kind)
    assert kinds - {"submodular", "modular"}


# ---------------------------------------------------------------------------
# Greedy vertices and polymatroid separation
# ---------------------------------------------------------------------------


def test_greedy_vertex_telescopes():
    g = SetFunction(3, lambda s: math.sqrt(1.0 + sum(s)) - 1.0)
    vx = greedy_vertex(g, (2, 0, 1))
    assert vx.v[2] == pytest.approx(g((2,)) - g(()))
    assert vx.v[0] == pytest.approx(g((0, 2)) - g((2,)))
    assert vx.v[1] == pytest.approx(g((0, 1, 2)) - g((0, 2)))
    assert vx.check(g)


def test_greedy_vertex_rejects_non_permutation():
    g = SetFunction(3, lambda s: float(len(s)))
    with pytest.raises(GroundSetError):
        greedy_vertex(g, (0, 0, 1))
    with pytest.raises(GroundSetError):
        greedy_vertex(g, (0, 1))


@pytest.mark.parametrize("seed", range(5))
def test_greedy_vertices_live_in_the_polyhedron(seed):
    # For submodular g every greedy vertex satisfies v(S) <= g(S) - g(empty).
    cm = cv_capacity_model(6, seed=100 + 10 * seed)
    g = q_set_function(cm)
    rng = np.random.default_rng(seed)
    n = g.n
    base = g(())
    for _ in range(20):
        perm = tuple(rng.permutation(n).tolist())
        vx = greedy_vertex(g, perm)
        for r in range(1, n + 1):
            subset = tuple(sorted(perm[:r]))
            assert vx.v[list(subset)].sum() <= g(subset) - base + 1e-7
        for size in range(n + 1):
            for subset in itertools.combinations(range(n), size):
                assert vx.v[list(subset)].sum() <= g(subset) - base + 1e-7


@pytest.mark.parametrize("seed", range(6))
def test_separation_matches_factorial_brute_force(seed):
    cm = cv_capacity_model(5, seed=200 + 10 * seed)
    g = q_set_function(cm)
    rng = np.random.default_rng(seed)
    xbar = rng.random(g.n)
    vertex, violation = separate_polymatroid(xbar, g, rhs=0.0)
    best = max(
        float(xbar @ greedy_vertex(g, perm).v)
        for perm in itertools.permutations(range(g.n))
    )
    assert float(xbar @ vertex.v) == pytest.approx(best, abs=1e-9)
    assert violation == pytest.approx(best, abs=1e-9)


def test_separation_sign_convention():
    g = SetFunction(2, lambda s: float(len(s)))
    _, violation = separate_polymatroid(np.array([0.4, 0.2]), g, rhs=1.0)
    assert violation == pytest.approx(-0.4)
    _, violation = separate_polymatroid(np.array([0.9, 0.8]), g, rhs=1.0)
    assert violation == pytest.approx(0.7)


# ---------------------------------------------------------------------------
# NW linearizations
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("variant", ["submod1", "submod2"])
@pytest.mark.parametrize("seed", range(4))
def test_nw_rows_bound_supermodular_theta(variant, seed):
    inst = random_instance(6, "independent", seed=300 + seed)
    theta = f_set_function(small_capacity_model(inst, omega=2.0))
    rng = np.random.default_rng(seed)
    n = theta.n
    for _ in range(6):
        anchor = tuple(sorted(rng.choice(n, size=rng.integers(0, n + 1), replace=False)))
        row = nw_inequality(theta, anchor, variant=variant)
        assert row.anchor == anchor
        for bits in range(2**n):
            z = np.array([(bits >> k) & 1 for k in range(n)], dtype=float)
            subset = tuple(k for k in range(n) if z[k] > 0.5)
            assert theta(subset) >= row.bound_at(z) - 1e-7
        chi = np.zeros(n)
        chi[list(anchor)] = 1.0
        assert theta(anchor) == pytest.approx(row.bound_at(chi), abs=1e-7)


def test_nw_rejects_unknown_variant():
    g = SetFunction(2, lambda s: float(len(s)))
    with pytest.raises(GroundSetError):
        nw_inequality(g, (0,), variant="submod3")
