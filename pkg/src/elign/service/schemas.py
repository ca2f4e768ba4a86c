"""Request/response models for the pipeline service.

Paths are server-local: the service wraps the core package for clients that
share its filesystem (the CLI in local or remote mode, the feature adapter,
notebooks)."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class SilenceRequest(BaseModel):
    input_path: str
    output_path: str
    max_silence_ms: float = 200.0
    threshold_db: float = -40.0
    hangover_frames: int = 5
    crossfade_ms: float = 5.0
    keep_rate: bool = False


class SilenceResponse(BaseModel):
    output_path: str
    input_seconds: float
    output_seconds: float
    segments_trimmed: int


class FeaturesRequest(BaseModel):
    input_path: str
    output_path: str
    n_mels: int = 80
    frame_seconds: float = 0.025
    hop_seconds: float = 0.010
    keep_rate: bool = False


class FeaturesResponse(BaseModel):
    output_path: str
    rows: int
    cols: int
    hop_seconds: float


class PitchRequest(BaseModel):
    input_path: str
    output_path: str | None = None
    f0_min: float = 50.0
    f0_max: float = 500.0
    hop_seconds: float = 0.010
    keep_rate: bool = False


class PitchResponse(BaseModel):
    output_path: str | None
    n_frames: int
    voiced_fraction: float
    median_f0_hz: float | None


class StretchRequest(BaseModel):
    input_path: str
    output_path: str
    factor: float
    f0_min: float = 50.0
    f0_max: float = 500.0
    keep_rate: bool = False


class StretchResponse(BaseModel):
    output_path: str
    input_seconds: float
    output_seconds: float


class AlignRequest(BaseModel):
    el_path: str
    he_path: str
    out_dir: str
    el_features_path: str | None = None
    he_features_path: str | None = None
    metric: str = "cosine"
    band_fraction: float | None = None
    max_silence_ms: float = 200.0
    threshold_db: float = -40.0
    keep_rate: bool = False


class AlignResponse(BaseModel):
    el_aligned_path: str
    he_target_path: str
    stats_path: str
    total_cost: float
    normalized_cost: float
    duration_ratio: float
    frames_src: int
    frames_tgt: int


class PairsRequest(BaseModel):
    manifest_path: str
    output_path: str


class PairsResponse(BaseModel):
    output_path: str
    pairs: int
    unpaired: dict


class SplitRequest(BaseModel):
    manifest_path: str
    output_path: str
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0


class SplitResponse(BaseModel):
    output_path: str
    train: int
    dev: int
    val: int


class CorpusRunRequest(BaseModel):
    manifest_path: str
    out_dir: str
    pairs_path: str | None = None
    report_path: str | None = None
    jobs: int = 1
    metric: str = "cosine"
    band_fraction: float | None = None
    use_external_features: bool = True
    keep_rate: bool = False


class CorpusRunResponse(BaseModel):
    report_path: str | None
    pairs: int
    success: int
    failures: list


class AugmentRequest(BaseModel):
    in_dir: str
    noise_dir: str
    out_dir: str
    probability: float = 0.3
    snr_min_db: float = 3.0
    snr_max_db: float = 30.0
    seed: int = 0


class AugmentResponse(BaseModel):
    out_dir: str
    files: int
    augmented: int
    errors: int
    log_path: str


class SweepRequest(BaseModel):
    in_dir: str
    noise_dir: str
    out_dir: str
    snrs: list[float] = Field(default_factory=lambda: [0.0, 5.0, 10.0, 15.0, 20.0, 25.0])
    seed: int = 0


class SweepResponse(BaseModel):
    index_path: str
    files: int


class EvalTranscriptionRequest(BaseModel):
    ref_path: str
    hyp_path: str
    unit: str = "char"  # char -> CER, word -> WER
    bootstrap: int = 1000
    level: float = 0.95
    seed: int = 0
    macro: bool = False
    output_path: str | None = None


class EvalTranscriptionResponse(BaseModel):
    output_path: str | None
    unit: str
    utterances: int
    error_rate: float | None
    ci_low: float | None
    ci_high: float | None
    wip: float | None
    wil: float | None
    missing_hypotheses: list


class EvalF0Request(BaseModel):
    a_path: str
    b_path: str
    f0_min: float = 50.0
    f0_max: float = 500.0
    hop_seconds: float = 0.010
    keep_rate: bool = False


class EvalF0Response(BaseModel):
    rmse: float | None
    voiced_overlap: float


class EvalSimRequest(BaseModel):
    a_path: str
    b_path: str


class EvalSimResponse(BaseModel):
    similarity: float


class EvalReportRequest(BaseModel):
    input_path: str
    output_csv: str
    output_json: str | None = None


class EvalReportResponse(BaseModel):
    output_csv: str
    output_json: str | None
    metrics: list
    methods: list


class SweepAggregateRequest(BaseModel):
    index_path: str
    ref_path: str
    hyp_path: str
    clean_hyp_path: str | None = None
    output_csv: str | None = None


class SweepAggregateResponse(BaseModel):
    output_csv: str | None
    table: list


class FmatInfoRequest(BaseModel):
    path: str


class FmatInfoResponse(BaseModel):
    path: str
    rows: int
    cols: int
    hop_seconds: float
    start_offset_seconds: float
