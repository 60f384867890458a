import os

# keep the app's import-time engine off the working directory
os.environ.setdefault("ITEMSEL_DATABASE_URL", "sqlite://")
os.environ.setdefault("ITEMSEL_THREADS", "2")

import numpy as np
import pytest
from fastapi.testclient import TestClient
from sqlalchemy import create_engine
from sqlalchemy.orm import sessionmaker
from sqlalchemy.pool import StaticPool

from schemas.embedding_schema import EmbeddingMatrix


def matrix(rows, ids=None) -> EmbeddingMatrix:
    return EmbeddingMatrix.from_array(np.asarray(rows, dtype=np.float64), ids)


def random_instance(rng: np.random.Generator, n_items: int, n_users: int, dim: int,
                    non_negative: bool = False) -> tuple[EmbeddingMatrix, EmbeddingMatrix]:
    if non_negative:
        users = rng.random((n_users, dim))
        items = rng.random((n_items, dim))
    else:
        users = rng.standard_normal((n_users, dim))
        items = rng.standard_normal((n_items, dim))
    return matrix(users), matrix(items)


@pytest.fixture(autouse=True)
def _reset_logging():
    # cli.main reconfigures structlog against whatever sys.stderr is at the time
    # (capsys's temporary stream); restore the default sink after each test
    yield
    import config

    config.configure_logging()


@pytest.fixture
def toy_users() -> EmbeddingMatrix:
    return matrix([[1.0, 0.0], [0.0, 1.0]])


@pytest.fixture
def toy_items() -> EmbeddingMatrix:
    return matrix([[1.0, 0.0], [0.0, 1.0], [0.6, 0.6]])


@pytest.fixture
def triangle_items() -> EmbeddingMatrix:
    return matrix([[2.0, 0.0], [1.9, 0.1], [0.0, 1.0]])


@pytest.fixture
def db_session_factory():
    import models

    engine = create_engine("sqlite://", connect_args={"check_same_thread": False}, poolclass=StaticPool)
    models.Base.metadata.create_all(bind=engine)
    factory = sessionmaker(autocommit=False, autoflush=False, bind=engine)
    yield factory
    engine.dispose()


@pytest.fixture
def db(db_session_factory):
    session = db_session_factory()
    try:
        yield session
    finally:
        session.close()


@pytest.fixture
def client(db_session_factory):
    from database import get_db
    from main import app

    def override_get_db():
        session = db_session_factory()
        try:
            yield session
        finally:
            session.close()

    app.dependency_overrides[get_db] = override_get_db
    with TestClient(app) as test_client:
        yield test_client
    app.dependency_overrides.clear()
