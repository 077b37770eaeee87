import itertools
from collections import Counter

import pytest

from app.application.use_cases.counting_use_cases import CountingUseCases
from app.application.use_cases.elaboration_use_cases import ElaborationUseCases
from app.application.use_cases.expression_use_cases import ComputationMap, Evaluator
from app.application.use_cases.exploration_use_cases import ExplorationUseCases
from app.application.use_cases.type_inference_use_cases import CheckSession
from app.application.use_cases.verification_use_cases import exhaustive_leaks
from app.core.exceptions import VariableError
from app.domain.entities.distribution import DistType, TransformLevel
from app.domain.entities.expr import POOL, VarKind
from app.infrastructure.services.parser_service import parse
from tests.conftest import random_programs


def typer_for(program):
    return ExplorationUseCases(program).typer


def program_from(text: str, width: int = 8):
    return ElaborationUseCases().elaborate(parse(text), width)


@pytest.fixture(scope="module")
def typer(goubin):
    return typer_for(goubin)


# ------------------------------------------------------------
# First order
# ------------------------------------------------------------
def test_first_order_types_of_goubin(typer):
    uniform = ["x'", "y0", "y1", "y3", "y4", "y5", "r", "r'"]
    for name in uniform:
        assert typer.infer_var(name) == DistType.UNIFORM, name
    assert typer.infer_var("y2") == DistType.UNKNOWN
    assert typer.infer_var("A") == DistType.UNKNOWN
    assert typer.infer_var("k") == DistType.LEAKY


def test_first_order_rule_records_witness(typer):
    rule = typer.var_rule("y3")
    assert rule.rule == "Rud"
    assert rule.witnesses == (("y3", "r"),)


def test_unknown_variable(typer):
    with pytest.raises(VariableError):
        typer.infer_var("nope")


def test_assignment_rules():
    program = program_from(
        "#public p;\n#private k;\n#random r;\n"
        "a = k & k;\nb = k - k;\nc = k & r;\nd = p << 2;\ne = ~a;\nreturn e;\n"
    )
    typer = typer_for(program)
    assert typer.var_rule("a").rule == "Ide4" and typer.infer_var("a") == DistType.LEAKY
    assert typer.infer_var("b") == DistType.SECRET_INDEPENDENT
    assert typer.var_rule("c").rule == "Sdd" and typer.infer_var("c") == DistType.LEAKY
    assert typer.infer_var("d") == DistType.SECRET_INDEPENDENT
    assert typer.infer_var("e") == DistType.LEAKY


# ------------------------------------------------------------
# Sets
# ------------------------------------------------------------
def test_rud_on_two_members(typer):
    judgement = typer.infer_set(["x'", "y0"])
    assert judgement.dist_type == DistType.UNIFORM
    assert judgement.rules[0].rule == "Rud"
    assert judgement.rules[0].witnesses == (("y0", "r'"),)


def test_leaky_member_makes_the_set_leaky():
    program = program_from("#private k;\n#random r;\nt = k & k;\nu = t ^ r;\nreturn u;\n")
    judgement = typer_for(program).infer_set(["t", "u"])
    assert judgement.dist_type == DistType.LEAKY


def test_no_key_for_key_free_sets():
    program = program_from("#public p;\n#private k;\n#random r;\nt = p & r;\nu = t + r;\nv = u ^ k;\nreturn v;\n")
    judgement = typer_for(program).infer_set(["t", "u"])
    assert judgement.is_secure
    assert judgement.rules[-1].rule == "No-Key"


def test_check_escalates_to_dom(typer):
    session = CheckSession(typer)
    judgement = session.check(["x'", "y1"])
    assert judgement.dist_type == DistType.SECRET_INDEPENDENT
    assert judgement.level == TransformLevel.DOM
    assert session.stats.dom_successes == 1


def test_check_fails_for_random_and_masked_key(typer):
    judgement = CheckSession(typer).check(["r", "x'"])
    assert judgement.dist_type == DistType.UNKNOWN
    assert not judgement.is_secure


def test_check_fails_for_key_recovering_pair(typer):
    judgement = CheckSession(typer).check(["y0", "y3"])
    assert not judgement.is_secure
    assert judgement.level == TransformLevel.COL


def test_check_extension_by_sid2(typer):
    session = CheckSession(typer)
    assert session.check(["r", "r'"]).dist_type == DistType.UNIFORM
    judgement = session.check(["r", "r'", "y3"], base=frozenset({"r", "r'"}))
    assert judgement.is_secure
    assert "Sid2" in [rule.rule for rule in judgement.rules]
    assert session.stats.checks == 1
    assert session.stats.extension_checks == 1


def test_check_extension_needs_dom(typer):
    session = CheckSession(typer)
    assert session.check(["x'", "y0"]).dist_type == DistType.UNIFORM
    judgement = session.check(["x'", "y0", "y1"], base=frozenset({"x'", "y0"}))
    assert judgement.is_secure
    assert judgement.level == TransformLevel.DOM


def test_judgement_serialises(typer):
    data = CheckSession(typer).check(["x'", "y1"]).to_dict()
    assert data["observables"] == ["x'", "y1"]
    assert data["type"] == "secret_independent"
    assert data["level"] == "dom"
    assert data["trace"][0]["kind"] == "dom"


# ------------------------------------------------------------
# Soundness against exhaustive enumeration
# ------------------------------------------------------------
def _histograms(program, names):
    cm = ComputationMap(program)
    evaluator = Evaluator.for_program(program)
    exprs = [cm[name] for name in names]
    size = 1 << program.width
    randoms = sorted(program.x_r)
    result = {}
    for key in range(size):
        counts = Counter()
        for values in itertools.product(range(size), repeat=len(randoms)):
            valuation = dict(zip(randoms, values), k=key)
            counts[tuple(int(v) for v in evaluator.evaluate_many(exprs, valuation))] += 1
        result[key] = counts
    return result


@pytest.mark.parametrize("order", [1, 2])
def test_secure_judgements_are_sound(goubin_k2, order):
    typer = typer_for(goubin_k2)
    size = 1 << goubin_k2.width
    randoms = len(goubin_k2.x_r)
    for names in itertools.combinations(sorted(goubin_k2.observables), order):
        judgement = CheckSession(typer).check(list(names))
        if not judgement.is_secure:
            continue
        histograms = _histograms(goubin_k2, names)
        reference = histograms[0]
        assert all(h == reference for h in histograms.values()), names
        if judgement.dist_type == DistType.UNIFORM:
            expected = size ** randoms // size ** order
            assert len(reference) == size ** order, names
            assert set(reference.values()) == {expected}, names


TWO_KEYS = (
    "#private k, k2;\n#random r1, r2, r3;\n"
    "t0 = k2 ^ k;\nt1 = r2 @ t0;\nt2 = t0 + r1;\nt3 = t0 ^ t1;\nreturn t3;\n"
)


def test_collapsed_keys_still_count_as_key():
    program = program_from(TWO_KEYS, 2)
    judgement = CheckSession(typer_for(program)).check(["t0"])
    assert not judgement.is_secure
    assert "No-Key" not in [rule.rule for rule in judgement.rules]


def test_two_key_leaks_are_potential_leaks():
    program = program_from(TWO_KEYS, 2)
    leaks = set(exhaustive_leaks(program, 1))
    assert {frozenset({"t0"}), frozenset({"t1"}), frozenset({"t3"})} <= leaks
    assert leaks <= set(ExplorationUseCases(program).home(1).pls.sets())


def test_set_rules_read_leaf_kinds():
    typer = typer_for(program_from(TWO_KEYS, 2))
    collapsed = POOL.var("{k+k2}", VarKind.PRIVATE)
    judgement = typer.infer_set(["t0"], [collapsed], level=TransformLevel.COL)
    assert not judgement.is_secure
    assert judgement.rules[-1].rule == "none"


@pytest.mark.parametrize("privates", [1, 2])
def test_judgements_agree_with_counting(privates):
    for program in random_programs(privates, 30, privates=privates, public=privates == 1):
        typer = typer_for(program)
        cm = ComputationMap(program)
        counting = CountingUseCases(program.width)
        candidates = [x for x in program.observables if not cm[x].vars <= program.x_p]
        for order in (1, 2):
            for names in itertools.combinations(candidates, order):
                judgement = CheckSession(typer).check(list(names))
                if judgement.dist_type == DistType.UNKNOWN:
                    continue
                leaky = counting.bf_decide(cm.get_many(names)).leaky
                context = (names, [str(a) for a in program.assignments], judgement.to_dict())
                if judgement.is_secure:
                    assert not leaky, context
                else:
                    assert judgement.dist_type == DistType.LEAKY
                    assert leaky, context
