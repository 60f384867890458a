from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

import config


def make_engine(url: str = config.DATABASE_URL):
    # sqlite connections are shared with FastAPI's worker threads
    connect_args = {"check_same_thread": False} if url.startswith("sqlite") else {}
    return create_engine(url, connect_args=connect_args)


engine = make_engine()

SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

Base = declarative_base()


def get_db():
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()
