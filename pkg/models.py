from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text, func
from sqlalchemy.orm import relationship

from database import Base


class ExperimentRun(Base):
    __tablename__ = "experiment_runs"

    id = Column(Integer, primary_key=True, index=True)
    config_hash = Column(String(64), index=True, nullable=False)
    seed = Column(Integer, nullable=False)
    schema_version = Column(Integer, nullable=False)
    created_at = Column(DateTime(timezone=True), server_default=func.now(), nullable=False)
    config_json = Column(Text, nullable=True)
    input_digests = Column(Text, nullable=True)

    rows = relationship("ReportRow", back_populates="run", cascade="all, delete",
                        order_by="ReportRow.position")


class ReportRow(Base):
    __tablename__ = "report_rows"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("experiment_runs.id"), nullable=False, index=True)
    # row order within the report
    position = Column(Integer, nullable=False)
    method = Column(String, nullable=False)
    m = Column(Integer, nullable=False)
    population = Column(String, nullable=False)
    fav_loss = Column(Float, nullable=True)
    fav_loss_per_user = Column(Float, nullable=True)
    precision = Column(Float, nullable=True)
    map = Column(Float, nullable=True)
    ndcg = Column(Float, nullable=True)
    wall_time = Column(Float, nullable=True)
    shared_time = Column(Float, nullable=True)
    error = Column(Text, nullable=True)

    run = relationship("ExperimentRun", back_populates="rows")
