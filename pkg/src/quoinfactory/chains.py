"""Exact oracles for the combinators, as absorbing Markov chains.

Every repeat-until-exit combinator is a small chain whose transient states
are "about to toss something" and whose absorbing states are the two outputs.
Solving the chain in exact symbolic arithmetic gives both the output bias and
the expected primitive cost, independently of the sampling code.

Inputs may be ints, :class:`~fractions.Fraction` or sympy expressions
(square roots stay symbolic), so the quantum protocol is solved exactly too.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import sympy as sp

_HEAD, _TAIL = "head", "tail"


def sym(x) -> sp.Expr:
    """Exact sympy value of ``x``; a float is read as its shortest decimal."""
    if isinstance(x, sp.Basic):
        return x
    if isinstance(x, float):
        x = Fraction(repr(x))
    if isinstance(x, Fraction):
        return sp.Rational(x.numerator, x.denominator)
    return sp.sympify(x)


@dataclass(frozen=True)
class ChainResult:
    """Head probability and expected primitive cost of one output."""

    head: sp.Expr
    cost: sp.Expr

    def __iter__(self):
        return iter((self.head, self.cost))


def absorb(transitions: dict, start) -> ChainResult:
    """Solve an absorbing chain.

    ``transitions[state]`` lists ``(probability, destination, cost)`` moves;
    the destinations ``"head"`` and ``"tail"`` are absorbing.
    """
    states = list(transitions)
    h = {s: sp.Symbol(f"h_{i}") for i, s in enumerate(states)}
    c = {s: sp.Symbol(f"c_{i}") for i, s in enumerate(states)}
    h.update({_HEAD: 1, _TAIL: 0})
    eqs = []
    for s, moves in transitions.items():
        eqs.append(sp.Eq(h[s], sum(sym(pr) * h[d] for pr, d, _ in moves)))
        eqs.append(sp.Eq(c[s], sum(sym(pr) * (sym(k) + c.get(d, 0)) for pr, d, k in moves)))
    unknowns = [h[s] for s in states] + [c[s] for s in states]
    sol = sp.solve(eqs, unknowns, dict=True)
    if len(sol) != 1 or any(u not in sol[0] for u in unknowns):
        raise ValueError("chain does not absorb with probability one")
    return ChainResult(sp.simplify(sol[0][h[start]]),
                       sp.simplify(sol[0][c[start]]))


def von_neumann(p, cost=1) -> ChainResult:
    p = sym(p)
    q = 1 - p
    return absorb({"pair": [(q * p, _HEAD, 2 * cost), (p * q, _TAIL, 2 * cost),
                            (p**2 + q**2, "pair", 2 * cost)]}, "pair")


def diff(p, cost=1) -> ChainResult:
    p = sym(p)
    differ = 2 * p * (1 - p)
    return absorb({"pair": [(differ, _HEAD, 2 * cost), (1 - differ, _TAIL, 2 * cost)]}, "pair")


def race(m, cost=1, lazy: bool = True) -> ChainResult:
    m = sym(m)
    if lazy:
        return absorb({"first": [(1 - m, _TAIL, cost), (m, "second", cost)],
                       "second": [(1 - m, _HEAD, cost), (m, "first", cost)]}, "first")
    return absorb({"round": [(1 - m, _TAIL, 2 * cost), (m * (1 - m), _HEAD, 2 * cost),
                             (m * m, "round", 2 * cost)]}, "round")


def ratio(s, t, cost_s=1, cost_t=1) -> ChainResult:
    s, t = sym(s), sym(t)
    k = sym(cost_s) + sym(cost_t)
    stay = s * t + (1 - s) * (1 - t)
    return absorb({"round": [(s * (1 - t), _HEAD, k), ((1 - s) * t, _TAIL, k),
                             (stay, "round", k)]}, "round")


def either(a, b, cost_a=1, cost_b=1, lazy: bool = True) -> ChainResult:
    a, b = sym(a), sym(b)
    ca, cb = sym(cost_a), sym(cost_b)
    if lazy:
        return absorb({"first": [(a, _HEAD, ca), (1 - a, "second", ca)],
                       "second": [(b, _HEAD, cb), (1 - b, _TAIL, cb)]}, "first")
    return absorb({"both": [(1 - (1 - a) * (1 - b), _HEAD, ca + cb),
                            ((1 - a) * (1 - b), _TAIL, ca + cb)]}, "both")


def quantum(p, lazy: bool = True) -> ChainResult:
    """The full f(p) protocol on ideal quoins; cost counts quoins."""
    p = sym(p)
    q = (1 + 2 * sp.sqrt(p * (1 - p))) / 2
    return quantum_from_coins(p, q, lazy)


def quantum_from_coins(z_head, x_head, lazy: bool = True) -> ChainResult:
    """The protocol given the head probabilities of the Z- and X-measured coins."""
    m_coin = diff(z_head)
    n_coin = diff(x_head)
    s_coin = race(m_coin.head, m_coin.cost, lazy)
    t_coin = race(n_coin.head, n_coin.cost, lazy)
    out = ratio(s_coin.head, t_coin.head, s_coin.cost, t_coin.cost)
    return ChainResult(sp.simplify(out.head), sp.simplify(out.cost))


# closed forms for the stages that walk an unbounded sample


def sqrt_head(f) -> sp.Expr:
    return sp.sqrt(sym(f))


def doubling_head(x, eps) -> sp.Expr:
    return sp.Min(2 * sym(x), 1 - 2 * sym(eps))


def classical_ft_head(p, eps1) -> sp.Expr:
    p = sym(p)
    return sp.Min(4 * p * (1 - p), 1 - sym(eps1))


def classical_qt_head(p, eps1) -> sp.Expr:
    return (1 + sp.sqrt(classical_ft_head(p, eps1))) / 2
