"""FastAPI application exposing every pipeline stage."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from ..corpus import ManifestError
from ..fmat import FmatFormatError
from . import handlers
from . import schemas as s


def create_app() -> FastAPI:
    app = FastAPI(
        title="elign",
        description="Parallel EL/HE corpus alignment, augmentation and evaluation service",
    )

    def run(handler, req):
        try:
            return handler(req)
        except (ValueError, ManifestError, FmatFormatError, FileNotFoundError, OSError) as e:
            raise HTTPException(status_code=400, detail=f"{type(e).__name__}: {e}") from e

    @app.get("/v1/health", response_model=s.HealthResponse)
    def health():
        return handlers.health()

    @app.post("/v1/silence", response_model=s.SilenceResponse)
    def silence(req: s.SilenceRequest):
        return run(handlers.silence, req)

    @app.post("/v1/features", response_model=s.FeaturesResponse)
    def features(req: s.FeaturesRequest):
        return run(handlers.features, req)

    @app.post("/v1/pitch", response_model=s.PitchResponse)
    def pitch(req: s.PitchRequest):
        return run(handlers.pitch, req)

    @app.post("/v1/stretch", response_model=s.StretchResponse)
    def stretch(req: s.StretchRequest):
        return run(handlers.stretch, req)

    @app.post("/v1/align", response_model=s.AlignResponse)
    def align(req: s.AlignRequest):
        return run(handlers.align, req)

    @app.post("/v1/corpus/pairs", response_model=s.PairsResponse)
    def corpus_pairs(req: s.PairsRequest):
        return run(handlers.pairs, req)

    @app.post("/v1/corpus/split", response_model=s.SplitResponse)
    def corpus_split(req: s.SplitRequest):
        return run(handlers.split, req)

    @app.post("/v1/corpus/run", response_model=s.CorpusRunResponse)
    def corpus_run(req: s.CorpusRunRequest):
        return run(handlers.corpus_run, req)

    @app.post("/v1/augment", response_model=s.AugmentResponse)
    def augment(req: s.AugmentRequest):
        return run(handlers.augment, req)

    @app.post("/v1/sweep", response_model=s.SweepResponse)
    def sweep(req: s.SweepRequest):
        return run(handlers.sweep, req)

    @app.post("/v1/sweep/aggregate", response_model=s.SweepAggregateResponse)
    def sweep_aggregate(req: s.SweepAggregateRequest):
        return run(handlers.sweep_aggregate, req)

    @app.post("/v1/eval/transcription", response_model=s.EvalTranscriptionResponse)
    def eval_transcription(req: s.EvalTranscriptionRequest):
        return run(handlers.eval_transcription, req)

    @app.post("/v1/eval/f0", response_model=s.EvalF0Response)
    def eval_f0(req: s.EvalF0Request):
        return run(handlers.eval_f0, req)

    @app.post("/v1/eval/sim", response_model=s.EvalSimResponse)
    def eval_sim(req: s.EvalSimRequest):
        return run(handlers.eval_sim, req)

    @app.post("/v1/eval/report", response_model=s.EvalReportResponse)
    def eval_report(req: s.EvalReportRequest):
        return run(handlers.eval_report, req)

    @app.post("/v1/fmat/info", response_model=s.FmatInfoResponse)
    def fmat_info(req: s.FmatInfoRequest):
        return run(handlers.fmat_info, req)

    return app


app = create_app()
