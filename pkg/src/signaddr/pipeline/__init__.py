"""End-to-end orchestration: configuration, per-image processing, results."""
from ..detgeom import crop
from .config import AdapterSpec, DetectorTrainingConfig, PipelineConfig, load_yaml
from .run import (
    STAGES,
    AddressResult,
    PipelineModels,
    PipelineResult,
    SignboardResult,
    load_models,
    process_image,
    run_pipeline,
    serialize_results,
)
