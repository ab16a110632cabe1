"""HTTP endpoints wrapping the core package.

Errors carry a machine-readable ``code`` in the detail payload so thin
clients can map them to exit codes: usage, data_mismatch, infeasible,
corrupt_model, not_found.
"""
from __future__ import annotations

import base64
import io
import wave

import numpy as np
from fastapi import APIRouter, Request, Response
from fastapi.concurrency import run_in_threadpool
from fastapi.exceptions import HTTPException

from .. import analysis, compress, container, describe, dsp, render
from ..engine import enhance, ops_per_frame
from ..sparse import StructureKind
from .schemas import (ConstraintInfo, HealthResponse, HwProfileIn,
                      ModelSummary, PruneRequest, PruneResponse,
                      ReportRequest, ReportResponse, SearchRequest,
                      SearchResponse, SessionCreateRequest, SessionInfo)
from .state import ModelStore, SessionStore

router = APIRouter()

PGM_MEDIA = "image/x-portable-graymap"
WAV_MEDIA = "audio/wav"
SSEM_MEDIA = "application/octet-stream"


def _fail(status: int, code: str, message: str):
    raise HTTPException(status_code=status, detail={"code": code, "message": message})


def _models(request: Request) -> ModelStore:
    return request.app.state.models


def _sessions(request: Request) -> SessionStore:
    return request.app.state.sessions


def _get_model(request: Request, model_id: str):
    try:
        return _models(request).get(model_id)
    except KeyError:
        _fail(404, "not_found", f"no model {model_id!r}")


def _summary(model_id: str, model) -> ModelSummary:
    return ModelSummary(model_id=model_id, **describe.describe(model))


def _parse_wav(data: bytes, expected_rate: int) -> np.ndarray:
    try:
        samples, rate = dsp.read_wav(io.BytesIO(data))
    except (wave.Error, EOFError, ValueError) as e:
        _fail(422, "usage", f"not a readable mono 16-bit WAV: {e}")
    if rate != expected_rate:
        _fail(409, "data_mismatch",
              f"audio is {rate} Hz but the model expects {expected_rate} Hz")
    return samples


def _emit_wav(samples: np.ndarray, rate: int) -> bytes:
    buf = io.BytesIO()
    dsp.write_wav(buf, samples, rate)
    return buf.getvalue()


@router.get("/health", response_model=HealthResponse)
def health():
    from .. import __version__
    return HealthResponse(status="ok", version=__version__)


@router.post("/models", response_model=ModelSummary, status_code=201)
async def upload_model(request: Request):
    data = await request.body()
    try:
        mid, model = _models(request).add_bytes(data)
    except container.ContainerError as e:
        _fail(400, "corrupt_model", str(e))
    return _summary(mid, model)


@router.get("/models", response_model=list[ModelSummary])
def list_models(request: Request):
    store = _models(request)
    return [_summary(mid, store.get(mid)) for mid in store.ids()]


@router.get("/models/{model_id}", response_model=ModelSummary)
def model_info(request: Request, model_id: str):
    return _summary(model_id, _get_model(request, model_id))


@router.get("/models/{model_id}/file")
def model_file(request: Request, model_id: str):
    _get_model(request, model_id)
    return Response(content=_models(request).raw(model_id), media_type=SSEM_MEDIA)


@router.delete("/models/{model_id}", status_code=204)
def delete_model(request: Request, model_id: str):
    try:
        _models(request).remove(model_id)
    except KeyError:
        _fail(404, "not_found", f"no model {model_id!r}")


@router.post("/models/{model_id}/enhance")
async def enhance_audio(request: Request, model_id: str):
    model = _get_model(request, model_id)
    noisy = _parse_wav(await request.body(), model.dsp.sample_rate)
    if noisy.size == 0:
        _fail(422, "usage", "empty audio payload")
    if len(noisy) < model.dsp.frame_size:
        # sub-frame input cannot produce output; return silence of length 0
        return Response(content=_emit_wav(np.zeros(0), model.dsp.sample_rate),
                        media_type=WAV_MEDIA)
    out = await run_in_threadpool(enhance, model, noisy)
    return Response(content=_emit_wav(out, model.dsp.sample_rate), media_type=WAV_MEDIA)


@router.post("/models/{model_id}/prune", response_model=PruneResponse)
async def prune(request: Request, model_id: str, req: PruneRequest):
    model = _get_model(request, model_id)
    kind = StructureKind(req.structure)
    try:
        if req.per_layer is not None:
            plan = compress.explicit_plan(model, kind, req.per_layer)
        elif req.target is not None:
            plan = compress.balanced_plan(compress.ArchInfo.from_model(model),
                                          kind, req.target)
        else:
            _fail(422, "usage", "provide either target or per_layer")
        pruned, report = await run_in_threadpool(compress.prune_model, model, plan)
    except compress.InfeasibleTargetError as e:
        _fail(409, "infeasible", str(e))
    except compress.InvalidPlanError as e:
        _fail(422, "usage", str(e))
    new_id, _ = _models(request).add_model(pruned)
    return PruneResponse(model=_summary(new_id, pruned), report=report.to_dict())


@router.post("/models/{model_id}/search", response_model=SearchResponse)
async def search(request: Request, model_id: str, req: SearchRequest):
    model = _get_model(request, model_id)
    if not req.utterances:
        _fail(422, "usage", "evaluation set is empty")
    eval_set = []
    for utt in req.utterances:
        noisy = _parse_wav(base64.b64decode(utt.noisy_wav_b64), model.dsp.sample_rate)
        clean = _parse_wav(base64.b64decode(utt.clean_wav_b64), model.dsp.sample_rate)
        eval_set.append((utt.id, noisy, clean))
    source = None
    if req.metrics is not None:
        source = compress.MetricSidecar({m.id: (m.stoi, m.pesq) for m in req.metrics})
    kind = StructureKind(req.structure)
    try:
        report = await run_in_threadpool(
            compress.search, model, req.target, kind, eval_set, source)
    except compress.InfeasibleTargetError as e:
        _fail(409, "infeasible", str(e))
    except KeyError as e:
        _fail(422, "usage", f"metric sidecar incomplete: {e}")
    winner_model, _ = compress.prune_model(model, report.winner.plan)
    winner_id, _ = _models(request).add_model(winner_model)
    return SearchResponse(report=report.to_dict(), winner_model_id=winner_id)


@router.post("/models/{model_id}/report", response_model=ReportResponse)
def budget_report(request: Request, model_id: str, req: ReportRequest = ReportRequest()):
    model = _get_model(request, model_id)
    try:
        hw = analysis.HwProfile(macs_per_cycle=req.hw.macs_per_cycle,
                                clock_hz=req.hw.clock_hz, sram_bytes=req.hw.sram_bytes)
        speedup_model = (analysis.parse_anchor_file(req.anchors_text)
                         if req.anchors_text else analysis.DEFAULT_SPEEDUP)
    except ValueError as e:
        _fail(422, "usage", str(e))
    constraints = analysis.validate_constraints(model, hw)
    return ReportResponse(
        model_id=model_id,
        constraints=ConstraintInfo(**constraints.to_dict()),
        footprint=analysis.estimate_footprint(model).to_dict(),
        structure=describe.model_structure(model),
        overall_sparsity=describe.overall_sparsity(model),
        speedup=describe.estimated_speedup(model, speedup_model),
        ops_per_frame=ops_per_frame(model),
        params=model.param_count(),
    )


@router.get("/models/{model_id}/layers/{layer}/sparsity-map")
def sparsity_map(request: Request, model_id: str, layer: str):
    model = _get_model(request, model_id)
    try:
        img = render.sparsity_bitmap(model, layer)
    except render.UnknownLayerError as e:
        _fail(422, "usage", str(e))
    return Response(content=render.encode_pgm(img), media_type=PGM_MEDIA)


@router.post("/sessions", response_model=SessionInfo, status_code=201)
def create_session(request: Request, req: SessionCreateRequest):
    model = _get_model(request, req.model_id)
    sid = _sessions(request).create(req.model_id, model)
    return SessionInfo(session_id=sid, model_id=req.model_id,
                       sample_rate=model.dsp.sample_rate)


def _get_session(request: Request, sid: str):
    try:
        return _sessions(request).get(sid)
    except KeyError:
        _fail(404, "not_found", f"no session {sid!r}")


@router.post("/sessions/{sid}/audio")
async def feed_session(request: Request, sid: str):
    session = _get_session(request, sid)
    data = await request.body()
    if len(data) % 2:
        _fail(422, "usage", "audio chunks must be 16-bit little-endian PCM")
    chunk = np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0

    def run():
        with session.lock:
            return session.enhancer.feed(chunk)

    out = await run_in_threadpool(run)
    pcm = np.clip(np.rint(out * 32768.0), -32768, 32767).astype("<i2")
    return Response(content=pcm.tobytes(), media_type="application/octet-stream")


@router.post("/sessions/{sid}/flush")
def flush_session(request: Request, sid: str):
    session = _get_session(request, sid)
    with session.lock:
        out = session.enhancer.flush()
        session.enhancer.reset()
    pcm = np.clip(np.rint(out * 32768.0), -32768, 32767).astype("<i2")
    return Response(content=pcm.tobytes(), media_type="application/octet-stream")


@router.delete("/sessions/{sid}", status_code=204)
def close_session(request: Request, sid: str):
    try:
        _sessions(request).remove(sid)
    except KeyError:
        _fail(404, "not_found", f"no session {sid!r}")
