from fastapi import APIRouter, HTTPException, status
from pydantic import ValidationError

from schemas.diagnostics_schema import NormsRequest
from schemas.embedding_schema import EmbeddingMatrix
from schemas.report_schema import NormDiagnostics
from services.errors import SelectionError
from services.metrics import norm_distribution, norm_group_occupancy

diagnostics_router = APIRouter(prefix="/diagnostics", tags=["diagnostics"])


@diagnostics_router.post("/norms", response_model=NormDiagnostics)
def norm_diagnostics(request: NormsRequest):
    """Norm distribution of the posted items; group occupancy when users are posted too."""
    try:
        items = EmbeddingMatrix.from_array(request.items, request.item_ids)
        diagnostics = norm_distribution(items)
        if request.users:
            users = EmbeddingMatrix.from_array(request.users)
            occupancy = norm_group_occupancy(users, items, min(request.k, items.count),
                                             request.percentile_edges)
            diagnostics = diagnostics.model_copy(update={"group_occupancy": occupancy})
    except (SelectionError, ValidationError) as exc:
        raise HTTPException(status_code=status.HTTP_400_BAD_REQUEST, detail=str(exc))
    return diagnostics
