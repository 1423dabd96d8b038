"""Set-function machinery for the polymatroid view of cut constraints.

A set function g on subsets of {0, ..., n-1} with g(empty) = 0 defines the
extended polymatroid  EP_g = { v : v(S) <= g(S) for all S }  whose vertices
are produced by Edmonds' greedy rule: pick a permutation pi, then

    v_j = g(S^pi_j) - g(S^pi_{j-1}),   S^pi_j = first j elements under pi.

Maximizing x'v over EP_g for a fixed x in [0,1]^n is solved exactly by the
greedy rule with pi sorting x in non-increasing order, which is how cut
separation works here.  The module also provides difference functions
rho_i(S) = g(S + i) - g(S), a brute-force modularity certifier used as the
test oracle, and the two Nemhauser-Wolsey style linearizations that bound a
supermodular objective from below with linear rows in (w, z).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

CERTIFY_MAX_GROUND = 12
TABULATE_MAX_GROUND = 22


class GroundSetError(ValueError):
    """Subset arguments inconsistent with the ground set."""


class SetFunction:
    """Deterministic real-valued function on subsets of {0, ..., n-1}.

    The evaluator receives a sorted tuple of distinct indices.  The value
    at the empty set is computed once and cached because the polymatroid
    constructions require g(empty) = 0 and check it frequently.
    """

    __slots__ = ("n", "_eval", "empty_value")

    def __init__(self, n: int, evaluator: Callable[[tuple], float]):
        if n < 0:
            raise GroundSetError("ground set size must be nonnegative")
        self.n = n
        self._eval = evaluator
        self.empty_value = float(evaluator(()))

    def _normalize(self, subset: Iterable[int]) -> tuple:
        items = tuple(sorted(set(int(i) for i in subset)))
        if items and (items[0] < 0 or items[-1] >= self.n):
            raise GroundSetError(f"subset {items} outside ground set of size {self.n}")
        return items

    def __call__(self, subset: Iterable[int]) -> float:
        items = self._normalize(subset)
        if not items:
            return self.empty_value
        return float(self._eval(items))

    def tabulate(self) -> np.ndarray:
        """Value for every subset, indexed by bitmask (small ground sets)."""
        if self.n > TABULATE_MAX_GROUND:
            raise GroundSetError(f"refusing to tabulate 2^{self.n} subsets")
        values = np.empty(1 << self.n)
        members: list[int] = []
        for mask in range(1 << self.n):
            members.clear()
            m = mask
            while m:
                low = m & -m
                members.append(low.bit_length() - 1)
                m ^= low
            values[mask] = self._eval(tuple(members)) if members else self.empty_value
        return values


def difference(g: SetFunction, i: int, subset: Iterable[int]) -> float:
    """rho_i(S) = g(S + i) - g(S); requires i not already in S."""
    base = g._normalize(subset)
    if i in base:
        raise GroundSetError(f"element {i} already in subset {base}")
    with_i = tuple(sorted(base + (i,)))
    return g(with_i) - g(base)


@dataclass(frozen=True)
class ModularityCertificate:
    """Outcome of the exhaustive second-difference check.

    ``kind`` is one of ``submodular``, ``supermodular``, ``modular`` (both
    hold, i.e. additive), or ``neither``.  On ``neither`` the witness is a
    triple (i, S, T) with S subset of T and rho_i violating both monotone
    orders; otherwise it is None.
    """

    kind: str
    witness: tuple | None = None


def certify_modularity(g, n: int | None = None, tol: float = 1e-9) -> ModularityCertificate:
    """Classify g by checking rho_i(S) against rho_i(T) for all S ⊆ T, i ∉ T.

    Exhaustive over the whole containment lattice, so limited to small
    ground sets; this is the oracle the faster constructions are tested
    against, not a production routine.
    """
    if isinstance(g, SetFunction):
        fn, size = g, g.n
    else:
        if n is None:
            raise GroundSetError("plain callables need an explicit ground set size")
        fn, size = SetFunction(n, g), n
    if size > CERTIFY_MAX_GROUND:
        raise GroundSetError(f"certification is exhaustive; n={size} exceeds {CERTIFY_MAX_GROUND}")

    table = fn.tabulate()
    full = (1 << size) - 1
    is_sub = True
    is_super = True
    witness = None
    for i in range(size):
        bit = 1 << i
        universe = full ^ bit
        # All T not containing i, and all S ⊆ T, via the subset-stepping trick.
        t_mask = universe
        while True:
            rho_t = table[t_mask | bit] - table[t_mask]
            s_mask = t_mask
            while True:
                rho_s = table[s_mask | bit] - table[s_mask]
                if rho_s < rho_t - tol:
                    is_sub = False
                if rho_s > rho_t + tol:
                    is_super = False
                if not is_sub and not is_super:
                    witness = (i, _mask_to_tuple(s_mask), _mask_to_tuple(t_mask))
                    return ModularityCertificate("neither", witness)
                if s_mask == 0:
                    break
                s_mask = (s_mask - 1) & t_mask
            if t_mask == 0:
                break
            t_mask = (t_mask - 1) & universe
    if is_sub and is_super:
        return ModularityCertificate("modular")
    return ModularityCertificate("submodular" if is_sub else "supermodular")


def _mask_to_tuple(mask: int) -> tuple:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return tuple(out)


@dataclass(frozen=True)
class PolymatroidVertex:
    """Greedy vertex of EP_g together with the permutation that built it."""

    v: np.ndarray
    permutation: tuple

    def check(self, g: SetFunction, tol: float = 1e-7) -> bool:
        """Recompute the telescoping differences and compare."""
        rebuilt = greedy_vertex(g, self.permutation)
        return bool(np.allclose(rebuilt.v, self.v, atol=tol))


def greedy_vertex(g: SetFunction, permutation: Sequence[int]) -> PolymatroidVertex:
    """Edmonds' greedy vertex for the given visiting order.

    Requires g(empty) = 0; the quadratic cut function q is shifted by d^2
    upstream so this precondition holds verbatim.
    """
    perm = tuple(int(p) for p in permutation)
    if sorted(perm) != list(range(g.n)):
        raise GroundSetError(f"permutation {perm} is not a bijection on 0..{g.n - 1}")
    if abs(g.empty_value) > 1e-9:
        raise GroundSetError(f"greedy vertices need g(empty)=0, got {g.empty_value!r}")
    v = np.empty(g.n)
    prefix: list[int] = []
    prev = 0.0
    for j in perm:
        prefix.append(j)
        cur = g(prefix)
        v[j] = cur - prev
        prev = cur
    return PolymatroidVertex(v, perm)


def separate_polymatroid(xbar, g: SetFunction, rhs: float) -> tuple[PolymatroidVertex, float]:
    """Most violated polymatroid inequality v'x <= rhs at the point xbar.

    For submodular g the greedy vertex built from xbar sorted in
    non-increasing order (ties broken toward the lower index) maximizes
    x̄'v over EP_g, so the returned violation x̄'v − rhs is the exact
    separation optimum, positive iff xbar lies outside the polyhedron.
    """
    xbar = np.asarray(xbar, dtype=float).ravel()
    if xbar.size != g.n:
        raise GroundSetError("point length does not match the ground set")
    order = np.argsort(-xbar, kind="stable")
    vertex = greedy_vertex(g, tuple(int(i) for i in order))
    violation = float(xbar @ vertex.v - rhs)
    return vertex, violation


@dataclass(frozen=True)
class NWInequality:
    """Lower-bounding row  w >= constant + coef' z  for a supermodular objective.

    ``anchor`` is the subset S the row is tight at (as a sorted tuple) and
    ``variant`` records which difference-function combination generated it.
    """

    coef: np.ndarray
    constant: float
    variant: str
    anchor: tuple

    def bound_at(self, z) -> float:
        return self.constant + float(np.asarray(z, dtype=float) @ self.coef)


def nw_inequality(theta: SetFunction, subset: Iterable[int], variant: str = "submod1") -> NWInequality:
    """Linearization row anchored at S for supermodular theta.

    variant submod1:  w >= theta(S) - sum_{i in S} rho_i(A\\i) (1 - z_i)
                             + sum_{i not in S} rho_i(S) z_i
    variant submod2:  w >= theta(S) - sum_{i in S} rho_i(S\\i) (1 - z_i)
                             + sum_{i not in S} rho_i(empty) z_i

    Both are valid at every binary z and tight at z = chi_S.
    """
    if variant not in ("submod1", "submod2"):
        raise GroundSetError(f"unknown variant {variant!r}")
    anchor = theta._normalize(subset)
    in_s = set(anchor)
    n = theta.n
    coef = np.zeros(n)
    constant = float(theta(anchor))
    ground = range(n)
    for i in ground:
        if i in in_s:
            if variant == "submod1":
                rho = difference(theta, i, [j for j in ground if j != i])
            else:
                rho = difference(theta, i, [j for j in anchor if j != i])
            # -rho*(1-z_i) contributes -rho to the constant and +rho to z_i.
            constant -= rho
            coef[i] += rho
        else:
            if variant == "submod1":
                rho = difference(theta, i, anchor)
            else:
                rho = difference(theta, i, ())
            coef[i] += rho
    return NWInequality(coef, constant, variant, anchor)
