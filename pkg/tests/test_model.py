"""Core model: omega map, cut capacity function, schema round trips."""

from __future__ import annotations

import json
import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st

from chancenet.model import (
    TOL,
    Cut,
    ModelError,
    SchemaError,
    capacity_model,
    check_cv,
    dump_instance,
    enumerate_cuts,
    eval_f,
    example_network,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    omega_from_epsilon,
    psd_factor,
    q_coefficients,
)

from conftest import random_instance


# ---------------------------------------------------------------------------
# omega_from_epsilon
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("eps", [0.5, 0.3, 0.2, 0.1, 0.025, 0.01, 0.001])
def test_omega_normal_matches_quantile(eps):
    assert omega_from_epsilon("normal", eps) == pytest.approx(
        scipy.stats.norm.ppf(1.0 - eps), abs=1e-12
    )


def test_omega_frozen_values():
    assert omega_from_epsilon("normal", 0.025) == pytest.approx(1.959963984540054)
    assert omega_from_epsilon("normal", 0.5) == 0.0
    assert omega_from_epsilon("two-moment", 0.2) == pytest.approx(2.0)
    assert omega_from_epsilon("two-moment", 0.5) == pytest.approx(1.0)
    assert omega_from_epsilon("symmetric-bounded", 0.25) == pytest.approx(
        math.sqrt(math.log(4.0))
    )


@pytest.mark.parametrize("kind", ["normal", "two-moment", "symmetric-bounded"])
def test_omega_decreasing_in_epsilon(kind):
    grid = np.linspace(1e-4, 0.5, 40)
    values = [omega_from_epsilon(kind, e) for e in grid]
    assert all(a > b or math.isclose(a, b) for a, b in zip(values, values[1:]))
    assert min(values) >= 0.0


@pytest.mark.parametrize("eps", [0.0, -0.1, 0.500001, 1.0, float("nan")])
def test_omega_rejects_out_of_range(eps):
    with pytest.raises(ModelError):
        omega_from_epsilon("normal", eps)


def test_omega_rejects_unknown_kind():
    with pytest.raises(ModelError):
        omega_from_epsilon("lognormal", 0.1)


@given(eps=st.floats(1e-6, 0.5))
@settings(max_examples=60, deadline=None)
def test_two_moment_dominates_normal(eps):
    # Cantelli's inequality is the weaker tail bound, so its safety factor
    # can never undercut the normal quantile on (0, 0.5].
    assert omega_from_epsilon("two-moment", eps) >= omega_from_epsilon("normal", eps) - 1e-12


# ---------------------------------------------------------------------------
# eval_f and the quadratic form
# ---------------------------------------------------------------------------


def test_eval_f_source_cut_frozen(sixnode):
    # Arcs out of the source: mu sums to 337, variance to 994 (independent),
    # so f = 337 - omega * sqrt(994) by hand.
    cm = capacity_model(sixnode, omega=1.959963984540054, arc_ids=(0, 1, 2, 3, 4))
    got = eval_f(cm, np.ones(5))
    assert got == pytest.approx(337.0 - 1.959963984540054 * math.sqrt(994.0), rel=1e-12)
    assert got == pytest.approx(275.206715026874, abs=1e-9)


def test_eval_f_accepts_full_design_vector(sixnode):
    cm = capacity_model(sixnode, omega=1.0, arc_ids=(0, 1, 2, 3, 4))
    full = np.zeros(sixnode.n_arcs)
    full[[0, 2]] = 1.0
    local = np.array([1.0, 0.0, 1.0, 0.0, 0.0])
    assert eval_f(cm, full) == pytest.approx(eval_f(cm, local))
    assert eval_f(cm, local) == pytest.approx(93.0 - math.sqrt(20.0))


def test_eval_f_zero_design(sixnode):
    cm = capacity_model(sixnode, omega=2.0)
    assert eval_f(cm, np.zeros(sixnode.n_arcs)) == 0.0


@given(seed=st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_eval_f_concavity_on_segments(seed, sixnode):
    # f is concave on the nonnegative orthant, so the chord never beats it.
    rng = np.random.default_rng(seed)
    cm = capacity_model(sixnode, omega=2.0)
    a, b = rng.random(15), rng.random(15)
    lam = rng.random()
    mid = lam * a + (1 - lam) * b
    assert eval_f(cm, mid) >= lam * eval_f(cm, a) + (1 - lam) * eval_f(cm, b) - 1e-9


def _eval_quadratic(qf, x):
    x = np.asarray(x, dtype=float)
    return float(qf.alpha @ x + x @ qf.beta @ x + qf.constant)


@pytest.mark.parametrize("seed", range(6))
def test_q_coefficients_match_definition_on_binaries(seed):
    inst = random_instance(7, "general", seed=seed)
    cm = capacity_model(inst, omega=1.7)
    qf = q_coefficients(cm)
    rng = np.random.default_rng(seed)
    for _ in range(40):
        x = rng.integers(0, 2, size=cm.size).astype(float)
        direct = cm.omega**2 * float(x @ cm.cov @ x) - (float(cm.mu @ x) - cm.demand) ** 2
        assert _eval_quadratic(qf, x) == pytest.approx(direct, rel=1e-9, abs=1e-7)


def test_q_sign_agrees_with_f(sixnode):
    # Wherever the mean capacity already covers demand, q <= 0 iff f >= d.
    cm = capacity_model(sixnode, omega=1.959963984540054, arc_ids=(0, 1, 2, 3, 4))
    qf = q_coefficients(cm)
    for bits in range(32):
        x = np.array([(bits >> k) & 1 for k in range(5)], dtype=float)
        if float(cm.mu @ x) < cm.demand:
            continue
        assert (_eval_quadratic(qf, x) <= 1e-9) == (eval_f(cm, x) >= cm.demand - 1e-9)


def test_check_cv_flags_high_variation(sixnode):
    assert check_cv(capacity_model(sixnode, omega=1.959963984540054)) == []
    # Arc 1 has mu = 90, sigma = 26; omega = 4 pushes 4 * 26 past 90.
    bad = check_cv(capacity_model(sixnode, omega=4.0))
    assert 1 in bad
    assert all(sixnode.mu[a] < 4.0 * math.sqrt(sixnode.cov[a, a]) for a in bad)


# ---------------------------------------------------------------------------
# Cut enumeration
# ---------------------------------------------------------------------------


def test_enumerate_cuts_sixnode(sixnode):
    cuts = enumerate_cuts(sixnode)
    assert len(cuts) == 16
    # Bitmask order over internal nodes {1, 2, 3, 4}: first the bare source,
    # then source plus node 1, and the full node set last.
    assert cuts[0].source_side == frozenset({0})
    assert cuts[0].arc_ids == (0, 1, 2, 3, 4)
    assert cuts[1].source_side == frozenset({0, 1})
    assert cuts[-1].source_side == frozenset({0, 1, 2, 3, 4})
    assert cuts[-1].arc_ids == (4, 8, 11, 13, 14)
    for cut in cuts:
        for a in cut.arc_ids:
            assert sixnode.tails[a] in cut.source_side
            assert sixnode.heads[a] not in cut.source_side
        for a in range(sixnode.n_arcs):
            crossing = (
                sixnode.tails[a] in cut.source_side
                and sixnode.heads[a] not in cut.source_side
            )
            assert crossing == (a in cut.arc_ids)


def test_enumerate_cuts_respects_limit(sixnode):
    with pytest.raises(ModelError):
        enumerate_cuts(sixnode, limit=3)


def test_cut_sorts_arc_ids():
    cut = Cut(source_side=frozenset({0}), arc_ids=(4, 1, 3))
    assert cut.arc_ids == (1, 3, 4)


# ---------------------------------------------------------------------------
# psd_factor
# ---------------------------------------------------------------------------


def test_psd_factor_identity_and_diagonal():
    L, jitter = psd_factor(np.eye(3))
    assert np.allclose(L, np.eye(3))
    assert jitter == 0.0
    L, _ = psd_factor(np.diag([4.0, 9.0]))
    assert np.allclose(L, np.diag([2.0, 3.0]))


@pytest.mark.parametrize("seed", range(5))
def test_psd_factor_reconstructs_random_spd(seed):
    inst = random_instance(9, "correlated", seed=seed)
    L, jitter = psd_factor(inst.cov)
    err = np.linalg.norm(L @ L.T - inst.cov) / max(np.linalg.norm(inst.cov), 1.0)
    assert err <= 1e-6
    assert 0.0 <= jitter <= 1e-7
    assert np.allclose(L, np.tril(L))


def test_psd_factor_repairs_tiny_negative_eigenvalue():
    cov = np.array([[1.0, 1.0], [1.0, 1.0 - 1e-10]])
    L, jitter = psd_factor(cov)
    assert jitter > 0.0
    assert np.linalg.norm(L @ L.T - cov) <= 1e-6


def test_psd_factor_rejects_indefinite():
    with pytest.raises(ModelError):
        psd_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def test_dict_round_trip(sixnode):
    clone = instance_from_dict(instance_to_dict(sixnode))
    assert clone.nodes == sixnode.nodes
    assert clone.demand == sixnode.demand
    assert np.array_equal(clone.mu, sixnode.mu)
    assert np.array_equal(clone.cov, sixnode.cov)
    assert np.array_equal(clone.costs, sixnode.costs)
    # The name is a runtime label, not part of the schema.
    assert clone.name == ""


def test_file_round_trip(tmp_path):
    inst = random_instance(8, "general", seed=3)
    path = tmp_path / "inst.json"
    dump_instance(inst, path)
    text = path.read_text()
    assert text.endswith("\n")
    clone = load_instance(path)
    assert np.allclose(clone.cov, inst.cov)
    assert clone.demand == pytest.approx(inst.demand)
    # Stable serialization: dumping the clone reproduces the bytes.
    dump_instance(clone, tmp_path / "again.json")
    assert (tmp_path / "again.json").read_text() == text


def test_load_reports_json_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "nodes": 3,\n  "oops": [1,\n}\n')
    with pytest.raises(SchemaError) as err:
        load_instance(path)
    assert "broken.json:4" in str(err.value)
    assert "invalid JSON" in str(err.value)


def test_schema_rejects_missing_field(sixnode):
    payload = instance_to_dict(sixnode)
    del payload["demand"]
    with pytest.raises(SchemaError) as err:
        instance_from_dict(payload)
    assert "demand" in str(err.value)


def test_schema_rejects_dangling_arc(sixnode):
    payload = instance_to_dict(sixnode)
    payload["arcs"][0]["head"] = 99
    with pytest.raises(ModelError):
        instance_from_dict(payload)


def test_schema_rejects_asymmetric_cov():
    payload = instance_to_dict(random_instance(6, "correlated", seed=0))
    payload["cov"][0][1] += 5.0
    with pytest.raises(ModelError):
        instance_from_dict(payload)


def test_example_network_facts(sixnode):
    assert sixnode.nodes == 6
    assert (sixnode.source, sixnode.sink) == (0, 5)
    assert sixnode.n_arcs == 15
    assert sixnode.demand == 230.0
    assert sixnode.is_diagonal
    assert sixnode.costs.sum() == 903.0
    assert list(sixnode.internal_nodes()) == [1, 2, 3, 4]
