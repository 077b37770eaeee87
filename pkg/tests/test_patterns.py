import pytest

from app.application.use_cases.counting_use_cases import CountingUseCases
from app.application.use_cases.pattern_use_cases import PatternUseCases, faulty_sbox_families
from app.domain.entities.bijective_table import BijectiveTable
from app.domain.entities.distribution import DistType
from app.domain.entities.expr import POOL, Op, VarKind
from app.infrastructure.repositories.pattern_repository_impl import (
    JsonLinesPatternRepository,
    PatternRepositoryImpl,
)
from app.infrastructure.services.table_loader import AES_SBOX

PRESENT_SBOX = [0xC, 0x5, 0x6, 0xB, 0x9, 0x0, 0xA, 0xD, 0x3, 0xE, 0xF, 0x8, 0x4, 0x7, 0x1, 0x2]

x = POOL.var("x", VarKind.RANDOM)
y = POOL.var("y", VarKind.RANDOM)
a = POOL.var("a", VarKind.RANDOM)
b = POOL.var("b", VarKind.RANDOM)
k = POOL.var("k", VarKind.PRIVATE)
k2 = POOL.var("k2", VarKind.PRIVATE)


def xor(left, right):
    return POOL.binary(Op.XOR, left, right)


def c(value, width=8):
    return POOL.const(value, width)


@pytest.fixture()
def store(tmp_path):
    return JsonLinesPatternRepository(str(tmp_path / "patterns.jsonl"))


@pytest.fixture()
def patterns(store):
    return PatternUseCases(store, 8)


# ------------------------------------------------------------
# Normalisation
# ------------------------------------------------------------
def test_normalize_assimilates_constants(patterns):
    expr = POOL.binary(Op.ADD, POOL.binary(Op.ADD, xor(x, c(1)), xor(x, c(2))), xor(y, c(1)))
    nset = patterns.normalize([expr])
    assert str(nset.exprs[0]) == "(((x#1 ^ 3) + x#1) + y#2)"
    assert [str(step) for step in nset.assimilated] == ["x ^ 2 -> x#1", "y ^ 1 -> y#2"]


def test_normalize_additive_constants(patterns):
    nset = patterns.normalize([POOL.binary(Op.ADD, x, c(5)), POOL.binary(Op.ADD, x, c(7))])
    assert [str(e) for e in nset.exprs] == ["x#1", "(x#1 + 2)"]


def test_normalize_keeps_bare_anchors(patterns):
    nset = patterns.normalize([x, xor(x, c(1))])
    assert nset.exprs == (x, xor(x, c(1)))
    assert nset.assimilated == ()


def test_normalize_simplifies_first(patterns):
    nset = patterns.normalize([xor(xor(k, x), x)])
    assert nset.exprs == (k,)
    assert nset.rewritten


# ------------------------------------------------------------
# Matching
# ------------------------------------------------------------
def test_match_renames_consistently(patterns):
    h = patterns.match([xor(k, x), x], [b, xor(b, k2)])
    assert h == {"k": "k2", "x": "b"}


def test_match_respects_variable_kinds(patterns):
    assert patterns.match([xor(k, x)], [xor(a, b)]) is None


def test_match_respects_sharing(patterns):
    assert patterns.match([xor(k, x), xor(k, y)], [xor(k, a), xor(k2, b)]) is None


def test_fingerprint_is_renaming_invariant(patterns):
    left = patterns.normalize([xor(k, x), POOL.binary(Op.AND, x, y)])
    right = patterns.normalize([POOL.binary(Op.AND, b, a), xor(b, k2)])
    assert patterns.fingerprint(left) == patterns.fingerprint(right)
    assert patterns.fingerprint(left) != patterns.fingerprint(patterns.normalize([xor(k, x)]))


def test_match_distinguishes_tables(tmp_path):
    sbox = BijectiveTable("sbox", 8, AES_SBOX, "aes")
    other = BijectiveTable("sbox", 8, list(reversed(AES_SBOX)))
    left = PatternUseCases(JsonLinesPatternRepository(str(tmp_path / "unused.jsonl")), 8, {"sbox": sbox})
    right = PatternUseCases(JsonLinesPatternRepository(str(tmp_path / "unused.jsonl")), 8, {"sbox": other})
    s = POOL.table("sbox", xor(k, x))
    assert left.match([s], [s], left.table_tags) is not None
    assert left.match([s], [s], right.table_tags) is None


# ------------------------------------------------------------
# Cache
# ------------------------------------------------------------
def test_lookup_or_insert(patterns, store):
    calls = []

    def resolve():
        calls.append(1)
        return DistType.LEAKY

    assert patterns.lookup_or_insert([xor(k, x), x], resolve, provenance="first") == DistType.LEAKY
    assert patterns.lookup_or_insert([xor(k2, a), a], resolve) == DistType.LEAKY
    assert len(calls) == 1
    assert (patterns.hits, patterns.misses) == (1, 1)
    (entry,) = store.get_all()
    assert entry.hits == 2
    assert entry.provenance == "first"


def test_lookup_without_resolver(patterns):
    assert patterns.lookup_or_insert([xor(k, x)]) is None
    assert patterns.misses == 1


def test_unknown_verdicts_are_not_stored(patterns, store):
    assert patterns.lookup_or_insert([xor(k, x)], lambda: DistType.UNKNOWN) == DistType.UNKNOWN
    assert store.count() == 0
    nset = patterns.normalize([xor(k, x)])
    with pytest.raises(ValueError):
        patterns.insert(nset, patterns.fingerprint(nset), DistType.UNKNOWN)


def test_json_lines_store_persists(tmp_path):
    path = str(tmp_path / "store" / "patterns.jsonl")
    first = PatternUseCases(JsonLinesPatternRepository(path), 8)
    first.lookup_or_insert([xor(k, x), x], lambda: DistType.LEAKY)
    first.lookup_or_insert([xor(k2, a), a], lambda: DistType.LEAKY)
    first.store.flush()

    second = PatternUseCases(JsonLinesPatternRepository(path), 8)
    assert second.lookup_or_insert([xor(k, y), y]) == DistType.LEAKY
    (summary,) = second.summary()
    assert summary["sets"] == 3
    assert summary["verdict"] == "leaky"


def test_sql_store_persists(db_session):
    first = PatternUseCases(PatternRepositoryImpl(db_session), 8)
    first.lookup_or_insert([xor(k, x)], lambda: DistType.UNIFORM, provenance="goubin")
    second = PatternUseCases(PatternRepositoryImpl(db_session), 8)
    assert second.lookup_or_insert([xor(k2, b)]) == DistType.UNIFORM
    assert second.summary()[0]["provenance"] == "goubin"
    assert PatternUseCases(PatternRepositoryImpl(db_session), 4).summary() == []


# ------------------------------------------------------------
# Faulty Sbox families
# ------------------------------------------------------------
def _run_families(tmp_path, width, values):
    table = BijectiveTable("sbox", width, values)
    store = JsonLinesPatternRepository(str(tmp_path / f"families{width}.jsonl"))
    patterns = PatternUseCases(store, width, {"sbox": table})
    counting = CountingUseCases(width, {"sbox": table})
    verdicts = []
    members = 0
    for member in faulty_sbox_families(width=width):
        members += 1
        verdict = patterns.lookup_or_insert(
            list(member.exprs.values()),
            lambda: counting.bf_decide(member.exprs).dist_type,
            provenance=f"family {member.family}",
        )
        verdicts.append(verdict)
    return patterns, store, members, verdicts


def test_faulty_sbox_families_share_patterns(tmp_path):
    patterns, store, members, verdicts = _run_families(tmp_path, 4, PRESENT_SBOX)
    assert members == 3 * (15 + 15 + 16)
    assert store.count() == 15 + 15 + 16
    assert patterns.misses == store.count()
    assert patterns.hits == members - store.count()
    assert len(verdicts) == members
    assert set(verdicts) == {DistType.LEAKY}


@pytest.mark.slow
def test_faulty_aes_sbox_families(tmp_path):
    patterns, store, members, verdicts = _run_families(tmp_path, 8, AES_SBOX)
    assert members == 2298
    assert store.count() == 766
    assert patterns.hits == 2298 - 766
    assert len(verdicts) == 2298
    assert set(verdicts) == {DistType.LEAKY}
