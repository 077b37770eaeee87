import itertools
import random
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from app.application.use_cases.expression_use_cases import ComputationMap, Evaluator
from app.application.use_cases.transform_use_cases import TransformUseCases
from app.domain.entities.distribution import TransformLevel
from app.domain.entities.expr import POOL, ExprKind, Op, VarKind
from app.domain.entities.transform_trace import TransformKind

k = POOL.var("k", VarKind.PRIVATE)
p = POOL.var("p", VarKind.PUBLIC)
r = POOL.var("r", VarKind.RANDOM)
r0 = POOL.var("r0", VarKind.RANDOM)
r1 = POOL.var("r1", VarKind.RANDOM)
r2 = POOL.var("r2", VarKind.RANDOM)
r3 = POOL.var("r3", VarKind.RANDOM)
r_prime = POOL.var("r'", VarKind.RANDOM)
z_bar = POOL.var("Z", VarKind.COLLAPSED)


def xor(a, b):
    return POOL.binary(Op.XOR, a, b)


def sbox(a):
    return POOL.table("sbox", a)


@pytest.fixture()
def transforms():
    return TransformUseCases(8)


# ------------------------------------------------------------
# Simply_Alg
# ------------------------------------------------------------
def test_alg_cancels_across_xor_chain(transforms):
    y4 = xor(xor(r_prime, r), xor(k, r))
    (result,), trace = transforms.simplify_alg([y4])
    assert result is xor(r_prime, k)
    assert [step.law for step in trace.steps] == ["xor-cancel"]


def test_alg_cancels_below_table(transforms):
    inner = xor(xor(r0, xor(xor(k, r0), r1)), r1)
    (result,), _ = transforms.simplify_alg([xor(sbox(inner), z_bar)])
    assert result is xor(sbox(k), z_bar)


def test_alg_trivial_laws(transforms):
    zero = POOL.const(0, 8)
    (a,), _ = transforms.simplify_alg([xor(k, k)])
    assert a is zero
    (b,), _ = transforms.simplify_alg([POOL.binary(Op.SUB, xor(k, r), xor(k, r))])
    assert b is zero
    (c,), _ = transforms.simplify_alg([POOL.binary(Op.GMUL, zero, r)])
    assert c is zero
    (d,), _ = transforms.simplify_alg([xor(zero, k)])
    assert d is k
    (e,), _ = transforms.simplify_alg([POOL.binary(Op.ADD, POOL.const(200, 8), POOL.const(100, 8))])
    assert e is POOL.const(44, 8)


def test_alg_leaves_irreducible_sets_alone(transforms):
    expr = POOL.binary(Op.AND, xor(k, r), r1)
    result, trace = transforms.simplify_alg([expr])
    assert result == [expr]
    assert not trace


# ------------------------------------------------------------
# Simply_Dom
# ------------------------------------------------------------
def test_dom_replaces_dominated_subexpression(transforms):
    x_prime = xor(k, r)
    y1 = POOL.binary(Op.SUB, xor(x_prime, r_prime), r_prime)
    result, trace = transforms.simplify_dom([x_prime, y1])
    assert result == [r, POOL.binary(Op.SUB, xor(r, r_prime), r_prime)]
    assert trace.count(TransformKind.DOM) == 1
    assert trace.steps[0].random == "r"


def test_dom_prefers_largest_subexpression(transforms):
    first = xor(sbox(xor(k, r0)), z_bar)
    second = xor(sbox(k), z_bar)
    result, trace = transforms.simplify_dom([first, second])
    assert result == [r0, z_bar]
    assert [step.random for step in trace.steps] == ["r0", "Z"]


def test_dom_keeps_variables(transforms):
    result, trace = transforms.simplify_dom([r])
    assert result == [r]
    assert not trace


# ------------------------------------------------------------
# Simply_Col
# ------------------------------------------------------------
def test_col_collapses_shared_randoms(transforms):
    s1 = POOL.binary(Op.AND, k, p)
    s2 = POOL.binary(Op.OR, k, p)
    result, trace = transforms.simplify_col([xor(xor(s1, r2), r3), xor(xor(s2, r2), r3)])
    (step,) = trace.steps
    assert step.pair == ("r2", "r3")
    assert step.fresh.kind == VarKind.COLLAPSED
    assert step.fresh.origin == frozenset({"r2", "r3"})
    fresh = POOL.var(step.fresh.name, VarKind.COLLAPSED)
    assert result == [xor(s1, fresh), xor(s2, fresh)]


def test_col_needs_a_pair(transforms):
    x = POOL.var("x", VarKind.PRIVATE)
    expr = POOL.binary(Op.ADD, xor(x, POOL.const(1, 8)), xor(x, POOL.const(2, 8)))
    result, trace = transforms.simplify_col([expr])
    assert result == [expr] and not trace


def test_col_rejects_variables_outside_the_cluster(transforms):
    result, trace = transforms.simplify_col([xor(r2, r3), r2])
    assert result == [xor(r2, r3), r2] and not trace


# ------------------------------------------------------------
# Escalation and replay
# ------------------------------------------------------------
def test_escalate_levels(goubin):
    cm = ComputationMap(goubin)
    transforms = TransformUseCases(goubin.width, goubin.tables)
    plain, trace = transforms.escalate([cm["y4"]], TransformLevel.PLAIN)
    assert plain == [cm["y4"]] and not trace
    (dom,), trace = transforms.escalate([cm["y4"]], TransformLevel.DOM)
    assert dom.kind == ExprKind.VAR and dom.name == "r'"
    assert trace.uses(TransformKind.ALG) and trace.uses(TransformKind.DOM)


def test_replay_reproduces_and_extends(goubin):
    cm = ComputationMap(goubin)
    transforms = TransformUseCases(goubin.width, goubin.tables)
    base = [cm["x'"], cm["y1"]]
    transformed, trace = transforms.escalate(base, TransformLevel.DOM)
    assert transforms.replay(trace, base) == transformed

    extended = transforms.replay(trace, base + [cm["y0"]])
    assert extended is not None
    assert extended[:2] == transformed
    assert extended[2] is xor(r, r_prime)


def test_replay_rejects_illegal_steps(goubin):
    cm = ComputationMap(goubin)
    transforms = TransformUseCases(goubin.width, goubin.tables)
    base = [cm["x'"], cm["y1"]]
    _, trace = transforms.escalate(base, TransformLevel.DOM)
    assert transforms.replay(trace, base + [cm["y3"]]) is None


def test_trace_serialises():
    transforms = TransformUseCases(8)
    _, trace = transforms.simplify_dom([xor(k, r)])
    assert trace.to_list() == [{"kind": "dom", "replaced": "(k ^ r)", "random": "r"}]
    assert str(trace) == "dom[(k ^ r) -> r]"


# ------------------------------------------------------------
# Distribution preservation against exhaustive enumeration
# ------------------------------------------------------------
WIDTH = 2
LEAVES = [k, p, r1, r2, r3]
BINARY = [Op.XOR, Op.XOR, Op.AND, Op.OR, Op.ADD, Op.SUB]


def _random_expr(rng, depth):
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.1:
            return POOL.const(rng.randrange(1 << WIDTH), WIDTH)
        return rng.choice(LEAVES)
    if rng.random() < 0.1:
        return POOL.not_(_random_expr(rng, depth - 1))
    return POOL.binary(rng.choice(BINARY), _random_expr(rng, depth - 1), _random_expr(rng, depth - 1))


def _joint(exprs, fixed):
    randoms = sorted(set().union(*(e.rvars for e in exprs)))
    space = (1 << WIDTH) ** len(randoms)
    grid = np.indices((1 << WIDTH,) * len(randoms)).reshape(len(randoms), space).astype(np.uint64)
    values = dict(fixed, **dict(zip(randoms, grid)))
    columns = [np.broadcast_to(c, (space,)).tolist() for c in Evaluator(WIDTH).evaluate_many(exprs, values)]
    histogram = Counter(zip(*columns))
    return {key: Fraction(count, space) for key, count in histogram.items()}


def _check_preservation(rewrite, sets):
    rng = random.Random(rewrite)
    transforms = TransformUseCases(WIDTH)
    for _ in range(sets):
        exprs = [_random_expr(rng, 3) for _ in range(2)]
        if rewrite == "escalate":
            rewritten, _ = transforms.escalate(exprs, TransformLevel.COL)
        else:
            rewritten, _ = getattr(transforms, rewrite)(exprs)
        for kv, pv in itertools.product(range(1 << WIDTH), repeat=2):
            fixed = {"k": kv, "p": pv}
            assert _joint(rewritten, fixed) == _joint(exprs, fixed), (exprs, rewritten)


REWRITES = ["simplify_alg", "simplify_dom", "simplify_col", "escalate"]


@pytest.mark.parametrize("rewrite", REWRITES)
def test_rewrites_preserve_joint_distribution(rewrite):
    _check_preservation(rewrite, 25)


@pytest.mark.slow
@pytest.mark.parametrize("rewrite", REWRITES)
def test_rewrites_preserve_joint_distribution_on_many_sets(rewrite):
    _check_preservation(rewrite, 1000)


@pytest.mark.parametrize("rewrite", ["simplify_alg", "simplify_dom", "simplify_col"])
def test_rewrites_are_idempotent(rewrite):
    rng = random.Random(rewrite)
    transforms = TransformUseCases(WIDTH)
    apply = getattr(transforms, rewrite)
    for _ in range(25):
        once, _ = apply([_random_expr(rng, 3) for _ in range(2)])
        twice, trace = apply(once)
        assert twice == once
        assert not trace
