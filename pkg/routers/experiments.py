from typing import List

from fastapi import APIRouter, Depends, HTTPException, status
from fastapi.responses import PlainTextResponse
from sqlalchemy.orm import Session

from database import get_db
from schemas.experiment_schema import ExperimentRequest
from schemas.report_schema import RunSummary, StoredReport
from services.errors import SelectionError
from services.experiment import inputs_from_synthetic, run_experiment
from services.report import list_runs, load_report, render_csv, store_report

experiments_router = APIRouter(prefix="/experiments", tags=["experiments"])


@experiments_router.post("/", response_model=StoredReport, status_code=status.HTTP_201_CREATED)
def create_experiment(request: ExperimentRequest, db: Session = Depends(get_db)):
    try:
        inputs = inputs_from_synthetic(request.synthetic, request.config)
        report = run_experiment(request.config, inputs)
    except SelectionError as exc:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(exc))
    run_id = store_report(db, report, request.config)
    return StoredReport(run_id=run_id, report=report)


@experiments_router.get("/", response_model=List[RunSummary])
def get_runs(skip: int = 0, limit: int = 100, db: Session = Depends(get_db)):
    return list_runs(db, skip=skip, limit=limit)


@experiments_router.get("/{run_id}", response_model=StoredReport)
def get_run(run_id: int, db: Session = Depends(get_db)):
    report = load_report(db, run_id)
    if report is None:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail="Experiment run not found")
    return StoredReport(run_id=run_id, report=report)


@experiments_router.get("/{run_id}/csv", response_class=PlainTextResponse)
def get_run_csv(run_id: int, db: Session = Depends(get_db)):
    report = load_report(db, run_id)
    if report is None:
        raise HTTPException(status_code=status.HTTP_404_NOT_FOUND, detail="Experiment run not found")
    return PlainTextResponse(render_csv(report), media_type="text/csv")
