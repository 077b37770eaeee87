import itertools
import random
import warnings

import pytest

from app.application.use_cases.expression_use_cases import (
    ComputationMap,
    Evaluator,
    eval_expr,
    operands,
    uniform_by_dominators,
)
from app.core.exceptions import ElaborationError, VariableError
from app.domain.entities.expr import POOL, Op, VarKind
from app.infrastructure.services.galois_field import GaloisField, field_for


@pytest.fixture(scope="module")
def cm(goubin):
    return ComputationMap(goubin)


def test_computations_of_goubin(cm):
    assert str(cm["y3"]) == "(r' ^ r)"
    assert cm["y0"].vars == frozenset({"k", "r", "r'"})
    assert cm["y3"].rvars == frozenset({"r", "r'"})
    assert cm["y2"].vars == frozenset({"k", "r", "r'"})
    assert cm["k"].vars == frozenset({"k"})


def test_hash_consing_shares_subtrees(cm):
    # k ⊕ r occurs in x', y0, y2 and y4 as one node
    x_prime = cm["x'"]
    assert cm["y0"].left is x_prime
    assert POOL.binary(Op.XOR, cm["k"], cm["r"]) is x_prime
    assert POOL.const(300, 8) is POOL.const(44, 8)


def test_dominators(cm):
    assert cm["x'"].dominators == frozenset({"r"})
    assert cm["y1"].dominators == frozenset({"r"})
    assert cm["y2"].dominators == frozenset()
    assert cm["y0"].dominators == frozenset({"r", "r'"})


def test_dominators_of_field_and_logic_operators():
    r = POOL.var("r", VarKind.RANDOM)
    k = POOL.var("k", VarKind.PRIVATE)
    assert POOL.binary(Op.GMUL, POOL.const(3, 8), r).dominators == frozenset({"r"})
    assert POOL.binary(Op.GMUL, POOL.const(0, 8), r).dominators == frozenset()
    assert POOL.binary(Op.AND, r, k).dominators == frozenset()


def test_dominators_within_rvars_within_vars(cm, goubin):
    for name in goubin.observables:
        e = cm[name]
        assert e.dominators <= e.rvars <= e.vars


def test_uniform_by_dominators(cm):
    ok, witnesses = uniform_by_dominators(cm.get_many(["y3"]))
    assert ok and witnesses["y3"] in {"r", "r'"}
    ok, _ = uniform_by_dominators(cm.get_many(["x'", "y3"]))
    assert not ok
    assert uniform_by_dominators({}) == (True, {})


def test_operands(goubin):
    assert operands(goubin, "y3") == frozenset({"r", "r'"})
    assert operands(goubin, "A") == frozenset({"y5", "y2"})
    with pytest.raises(VariableError):
        operands(goubin, "k")


def test_eval_examples():
    k = POOL.var("k", VarKind.PRIVATE)
    r = POOL.var("r", VarKind.RANDOM)
    r2 = POOL.var("r'", VarKind.RANDOM)
    y0 = POOL.binary(Op.XOR, POOL.binary(Op.XOR, k, r), r2)
    assert eval_expr(y0, {"k": 1, "r": 1, "r'": 0}, Evaluator(1)) == 0

    a = POOL.var("a", VarKind.PUBLIC)
    b = POOL.var("b", VarKind.PUBLIC)
    assert eval_expr(POOL.binary(Op.ADD, a, b), {"a": 200, "b": 100}, Evaluator(8)) == 44
    assert eval_expr(POOL.binary(Op.GMUL, a, b), {"a": 0x53, "b": 0xCA}, Evaluator(8)) == 0x01
    assert eval_expr(POOL.shift(Op.SHL, 3, a), {"a": 0x3F}, Evaluator(8)) == 0xF8
    assert eval_expr(POOL.not_(a), {"a": 0x0F}, Evaluator(8)) == 0xF0

    with pytest.raises(VariableError):
        eval_expr(y0, {"k": 1}, Evaluator(1))


def test_subtraction_wraps_silently():
    a = POOL.var("a", VarKind.PUBLIC)
    b = POOL.var("b", VarKind.PUBLIC)
    with warnings.catch_warnings():
        warnings.simplefilter("error", RuntimeWarning)
        assert eval_expr(POOL.binary(Op.SUB, a, b), {"a": 1, "b": 3}, Evaluator(8)) == 0xFE
        assert eval_expr(POOL.binary(Op.SUB, a, b), {"a": 0, "b": 1}, Evaluator(2)) == 3


def _log_table_mul(a: int, b: int) -> int:
    """GF(2^8) multiplication through log/antilog tables over generator 3."""
    if a == 0 or b == 0:
        return 0
    exp, log = [0] * 510, [0] * 256
    x = 1
    for i in range(255):
        exp[i] = exp[i + 255] = x
        log[x] = i
        x ^= (x << 1) ^ (0x11B if x & 0x80 else 0)
        x &= 0xFF
    return exp[log[a] + log[b]]


def test_gf256_agrees_with_log_tables():
    field = field_for(8)
    rng = random.Random(7)
    for _ in range(500):
        a, b = rng.randrange(256), rng.randrange(256)
        assert field.mul(a, b) == _log_table_mul(a, b)


@pytest.mark.parametrize("width", [1, 2, 3, 4])
def test_gmul_distributes_over_xor(width):
    field = field_for(width)
    size = 1 << width
    for a, b, c in itertools.product(range(size), repeat=3):
        assert field.mul(a, b ^ c) == field.mul(a, b) ^ field.mul(a, c)


def test_gmul_at_width_1_is_and():
    field = field_for(1)
    for a, b in itertools.product(range(2), repeat=2):
        assert field.mul(a, b) == a & b


def test_reducible_polynomial_rejected():
    with pytest.raises(ElaborationError):
        GaloisField(4, 0x11)


@pytest.mark.parametrize("width", [1, 2, 3])
def test_dominant_variable_gives_a_bijection(width):
    rng = random.Random(width)
    r = POOL.var("r", VarKind.RANDOM)
    k = POOL.var("k", VarKind.PRIVATE)
    p = POOL.var("p", VarKind.PUBLIC)
    ops = [Op.XOR, Op.ADD, Op.SUB]
    evaluator = Evaluator(width)
    size = 1 << width
    for _ in range(20):
        e = r
        for _ in range(3):
            other = POOL.binary(rng.choice([Op.AND, Op.OR, Op.MUL]), k, p)
            e = POOL.binary(rng.choice(ops), e, other) if rng.random() < 0.5 else POOL.binary(rng.choice(ops), other, e)
        assert "r" in e.dominators
        for kv, pv in itertools.product(range(size), repeat=2):
            image = {eval_expr(e, {"r": rv, "k": kv, "p": pv}, evaluator) for rv in range(size)}
            assert len(image) == size
