"""Request/response models for the HTTP surface."""
from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

Structure = Literal["weight", "block", "unit"]


class HealthResponse(BaseModel):
    status: str
    version: str


class FootprintInfo(BaseModel):
    value_bytes: int
    index_bytes: int
    working_bytes: int
    total_bytes: int


class LayerInfo(BaseModel):
    name: str
    kind: str
    out_size: int
    in_size: int
    weight_bits: int
    encoding: str
    params: int
    sparsity: float
    weight_sparsity_mean: float


class ModelSummary(BaseModel):
    model_id: str
    sample_rate: int
    frame_size: int
    hop_size: int
    mel_bins: int
    params: int
    structure: str
    overall_sparsity: float
    ops_per_frame: int
    weight_hash: str
    footprint: FootprintInfo
    speedup: float
    layers: list[LayerInfo]


class PruneRequest(BaseModel):
    structure: Structure
    target: Optional[float] = Field(default=None, ge=0.1, le=0.9)
    per_layer: Optional[dict[str, float]] = None


class PlanInfo(BaseModel):
    structure: str
    per_layer: dict[str, float]
    predicted_overall: float


class PruneReportInfo(BaseModel):
    plan: PlanInfo
    params_before: int
    params_after: int
    per_layer_sparsity: dict[str, float]
    overall_sparsity: float
    ops_per_frame_before: int
    ops_per_frame_after: int
    footprint: FootprintInfo
    speedup: float


class PruneResponse(BaseModel):
    model: ModelSummary
    report: PruneReportInfo


class UtteranceIn(BaseModel):
    id: str
    noisy_wav_b64: str
    clean_wav_b64: str


class MetricRow(BaseModel):
    id: str
    stoi: float
    pesq: float


class SearchRequest(BaseModel):
    structure: Structure
    target: float = Field(ge=0.1, le=0.9)
    utterances: list[UtteranceIn]
    metrics: Optional[list[MetricRow]] = None


class PlanEvalInfo(BaseModel):
    plan: PlanInfo
    stoi: float
    pesq: float
    si_sdr: float
    q: float
    overall_sparsity: float
    footprint_total: int
    speedup: float


class SearchReportInfo(BaseModel):
    structure: str
    target: float
    q_basis: str
    plans_evaluated: int
    evals: list[PlanEvalInfo]
    winner_index: int
    winner: PlanEvalInfo


class SearchResponse(BaseModel):
    report: SearchReportInfo
    winner_model_id: str


class HwProfileIn(BaseModel):
    macs_per_cycle: int = 8
    clock_hz: float = 100e6
    sram_bytes: int = 640 * 1024


class ReportRequest(BaseModel):
    hw: HwProfileIn = HwProfileIn()
    anchors_text: Optional[str] = None


class BudgetCheckInfo(BaseModel):
    value: float
    limit: float
    ok: bool


class ConstraintInfo(BaseModel):
    causal: bool
    quantized: bool
    compute_latency: BudgetCheckInfo
    footprint: BudgetCheckInfo
    audio_latency: BudgetCheckInfo
    overall: bool


class ReportResponse(BaseModel):
    model_id: str
    constraints: ConstraintInfo
    footprint: FootprintInfo
    structure: str
    overall_sparsity: float
    speedup: float
    ops_per_frame: int
    params: int


class SessionCreateRequest(BaseModel):
    model_id: str


class SessionInfo(BaseModel):
    session_id: str
    model_id: str
    sample_rate: int
