# tests/conftest.py
import os
import random
import sys
from pathlib import Path

import pytest
from fastapi.testclient import TestClient
from sqlalchemy.orm import sessionmaker

# ------------------------------------------------------------
# Project root on the import path
# ------------------------------------------------------------
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from app.application.use_cases.elaboration_use_cases import ElaborationUseCases  # noqa: E402
from app.core.database import Base, build_engine, get_db  # noqa: E402
from app.infrastructure import models  # noqa: E402,F401
from app.infrastructure.services.parser_service import parse  # noqa: E402
from app.main import app  # noqa: E402

FIXTURES = Path(__file__).resolve().parent / "fixtures"

# ------------------------------------------------------------
# Test database (in-memory SQLite, one shared connection)
# ------------------------------------------------------------
engine = build_engine("sqlite:///:memory:")
TestingSessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)


@pytest.fixture(scope="session", autouse=True)
def setup_database():
    Base.metadata.create_all(bind=engine)
    yield
    Base.metadata.drop_all(bind=engine)


@pytest.fixture()
def db_session():
    session = TestingSessionLocal()
    try:
        yield session
    finally:
        session.rollback()
        for table in reversed(Base.metadata.sorted_tables):
            session.execute(table.delete())
        session.commit()
        session.close()


@pytest.fixture()
def client(db_session):
    def override_get_db():
        yield db_session

    app.dependency_overrides[get_db] = override_get_db
    yield TestClient(app)
    app.dependency_overrides.clear()


# ------------------------------------------------------------
# Programs
# ------------------------------------------------------------
def fixture_path(name: str) -> str:
    return str(FIXTURES / name)


def load_program(name: str, width: int = 8):
    path = fixture_path(name)
    source = parse(Path(path).read_text(encoding="utf-8"), path)
    return ElaborationUseCases().elaborate(source, width)


@pytest.fixture(scope="session")
def goubin_text() -> str:
    return (FIXTURES / "goubin.mask").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def goubin():
    return load_program("goubin.mask", 8)


@pytest.fixture(scope="session")
def goubin_k1():
    return load_program("goubin.mask", 1)


@pytest.fixture(scope="session")
def goubin_k2():
    return load_program("goubin.mask", 2)


# ------------------------------------------------------------
# Random programs
# ------------------------------------------------------------
RANDOM_OPERATORS = ["^", "^", "^", "&", "|", "+", "-", "@"]
PRIVATE_NAMES = ["k", "k2"]


def random_program_text(rng, privates=1, randoms=3, assignments=5, public=False) -> str:
    """Straight-line program where every assignment combines two earlier variables."""
    keys = PRIVATE_NAMES[:privates]
    masks = [f"r{i}" for i in range(1, randoms + 1)]
    lines = ["#public p;"] if public else []
    lines.append(f"#private {', '.join(keys)};")
    lines.append(f"#random {', '.join(masks)};")
    operands = (["p"] if public else []) + keys + masks
    for i in range(assignments):
        left, right = rng.sample(operands, 2)
        lines.append(f"t{i} = {left} {rng.choice(RANDOM_OPERATORS)} {right};")
        operands.append(f"t{i}")
    lines.append(f"return t{assignments - 1};")
    return "\n".join(lines) + "\n"


def random_programs(seed, count, width=2, **options):
    rng = random.Random(seed)
    return [
        ElaborationUseCases().elaborate(parse(random_program_text(rng, **options)), width)
        for _ in range(count)
    ]
