"""Command-line client for the alignment toolkit.

Every subcommand builds a typed request and dispatches it through the service
layer: in-process by default, or to a running server via --server (the same
JSON payloads travel over HTTP). Data goes to files or stdout, progress and
diagnostics to stderr."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import Config, load_config
from .service import handlers
from .service import schemas as s

_ROUTES = {
    "silence": ("/v1/silence", s.SilenceRequest, handlers.silence),
    "features": ("/v1/features", s.FeaturesRequest, handlers.features),
    "pitch": ("/v1/pitch", s.PitchRequest, handlers.pitch),
    "stretch": ("/v1/stretch", s.StretchRequest, handlers.stretch),
    "align": ("/v1/align", s.AlignRequest, handlers.align),
    "corpus_pair": ("/v1/corpus/pairs", s.PairsRequest, handlers.pairs),
    "corpus_split": ("/v1/corpus/split", s.SplitRequest, handlers.split),
    "corpus_run": ("/v1/corpus/run", s.CorpusRunRequest, handlers.corpus_run),
    "augment": ("/v1/augment", s.AugmentRequest, handlers.augment),
    "sweep": ("/v1/sweep", s.SweepRequest, handlers.sweep),
    "eval_cer": ("/v1/eval/transcription", s.EvalTranscriptionRequest, handlers.eval_transcription),
    "eval_wer": ("/v1/eval/transcription", s.EvalTranscriptionRequest, handlers.eval_transcription),
    "eval_f0": ("/v1/eval/f0", s.EvalF0Request, handlers.eval_f0),
    "eval_sim": ("/v1/eval/sim", s.EvalSimRequest, handlers.eval_sim),
    "eval_report": ("/v1/eval/report", s.EvalReportRequest, handlers.eval_report),
    "eval_sweep": ("/v1/sweep/aggregate", s.SweepAggregateRequest, handlers.sweep_aggregate),
    "fmat_info": ("/v1/fmat/info", s.FmatInfoRequest, handlers.fmat_info),
}


def _dispatch(command: str, req, server: str | None, config: Config | None = None) -> dict:
    route, _, handler = _ROUTES[command]
    if server:
        import httpx

        url = server.rstrip("/") + route
        resp = httpx.post(url, json=req.model_dump(mode="json"), timeout=3600.0)
        if resp.status_code != 200:
            raise RuntimeError(f"server returned {resp.status_code}: {resp.text}")
        return resp.json()
    if command == "corpus_run":
        return handler(req, config=config).model_dump(mode="json")
    return handler(req).model_dump(mode="json")


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _env_jobs() -> int:
    try:
        return max(1, int(os.environ.get("ELIGN_JOBS", "1")))
    except ValueError:
        return 1


def build_parser(cfg: Config) -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(
        prog="elign",
        description="Temporal alignment, augmentation and evaluation for parallel EL/HE speech corpora.",
    )
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--server", help="base URL of a running elign service; run remotely instead of in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("silence", help="trim silences longer than the cap", formatter_class=fmt)
    p.add_argument("--in", dest="input_path", required=True, help="input wav")
    p.add_argument("--out", dest="output_path", required=True, help="output wav")
    p.add_argument("--max-silence-ms", type=float, default=cfg.silence.max_silence_ms, help="silence cap (ms)")
    p.add_argument("--threshold-db", type=float, default=cfg.vad.threshold_db, help="VAD threshold below peak (dB)")
    p.add_argument("--hangover-frames", type=int, default=cfg.vad.hangover_frames, help="silence gap frames absorbed into speech")
    p.add_argument("--crossfade-ms", type=float, default=cfg.silence.crossfade_ms, help="crossfade at cut points (ms)")
    p.add_argument("--keep-rate", action="store_true", help="skip resampling to 16 kHz")

    p = sub.add_parser("features", help="log-mel features to an FMT1 file", formatter_class=fmt)
    p.add_argument("--in", dest="input_path", required=True, help="input wav")
    p.add_argument("--out", dest="output_path", required=True, help="output .fmat")
    p.add_argument("--n-mels", type=int, default=cfg.mel.n_mels, help="mel bands")
    p.add_argument("--frame-seconds", type=float, default=cfg.mel.frame_seconds, help="analysis window (s)")
    p.add_argument("--hop-seconds", type=float, default=cfg.mel.hop_seconds, help="hop (s)")
    p.add_argument("--keep-rate", action="store_true", help="skip resampling to 16 kHz")

    p = sub.add_parser("pitch", help="YIN pitch track to JSON", formatter_class=fmt)
    p.add_argument("--in", dest="input_path", required=True, help="input wav")
    p.add_argument("--out", dest="output_path", help="output JSON (stdout summary only if omitted)")
    p.add_argument("--f0-min", type=float, default=cfg.pitch.f0_min, help="lowest F0 (Hz)")
    p.add_argument("--f0-max", type=float, default=cfg.pitch.f0_max, help="highest F0 (Hz)")
    p.add_argument("--hop-seconds", type=float, default=cfg.pitch.hop_seconds, help="hop (s)")
    p.add_argument("--keep-rate", action="store_true", help="skip resampling to 16 kHz")

    p = sub.add_parser("stretch", help="constant-rate PSOLA time stretch", formatter_class=fmt)
    p.add_argument("--in", dest="input_path", required=True, help="input wav")
    p.add_argument("--out", dest="output_path", required=True, help="output wav")
    p.add_argument("--factor", type=float, required=True, help="duration ratio, 0.25 to 4.0")
    p.add_argument("--f0-min", type=float, default=cfg.pitch.f0_min, help="lowest F0 (Hz)")
    p.add_argument("--f0-max", type=float, default=cfg.pitch.f0_max, help="highest F0 (Hz)")
    p.add_argument("--keep-rate", action="store_true", help="skip resampling to 16 kHz")

    p = sub.add_parser("align", help="align one EL/HE pair", formatter_class=fmt)
    p.add_argument("--el", dest="el_path", required=True, help="EL wav")
    p.add_argument("--he", dest="he_path", required=True, help="HE wav")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.add_argument("--el-features", dest="el_features_path", help="external EL features (.fmat)")
    p.add_argument("--he-features", dest="he_features_path", help="external HE features (.fmat)")
    p.add_argument("--metric", choices=["cosine", "euclidean"], default=cfg.dtw.metric, help="DTW frame distance")
    p.add_argument("--band", dest="band_fraction", type=float, default=cfg.dtw.band_fraction, help="Sakoe-Chiba band fraction of target length")
    p.add_argument("--max-silence-ms", type=float, default=cfg.silence.max_silence_ms, help="silence cap (ms)")
    p.add_argument("--threshold-db", type=float, default=cfg.vad.threshold_db, help="VAD threshold (dB)")
    p.add_argument("--keep-rate", action="store_true", help="skip resampling to 16 kHz")

    corpus = sub.add_parser("corpus", help="manifest-level operations")
    corpus_sub = corpus.add_subparsers(dest="corpus_command", required=True)

    p = corpus_sub.add_parser("pair", help="expand all EL x HE pairs per content id", formatter_class=fmt)
    p.add_argument("--manifest", dest="manifest_path", required=True, help="manifest JSONL")
    p.add_argument("--out", dest="output_path", required=True, help="pairs JSONL")

    p = corpus_sub.add_parser("split", help="content-level train/dev/val split", formatter_class=fmt)
    p.add_argument("--manifest", dest="manifest_path", required=True, help="manifest JSONL")
    p.add_argument("--out", dest="output_path", required=True, help="split JSON")
    p.add_argument("--ratios", default="0.8,0.1,0.1", help="train,dev,val proportions")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed")

    p = corpus_sub.add_parser("run", help="batch-align every pair", formatter_class=fmt)
    p.add_argument("--manifest", dest="manifest_path", required=True, help="manifest JSONL")
    p.add_argument("--pairs", dest="pairs_path", help="pairs JSONL (expanded from the manifest if omitted)")
    p.add_argument("--out-dir", required=True, help="output root; one directory per pair")
    p.add_argument("--report", dest="report_path", help="report JSON (defaults to <out-dir>/report.json)")
    p.add_argument("--jobs", type=int, default=_env_jobs(), help="parallel workers (env ELIGN_JOBS)")
    p.add_argument("--metric", choices=["cosine", "euclidean"], default=cfg.dtw.metric, help="DTW frame distance")
    p.add_argument("--band", dest="band_fraction", type=float, default=cfg.dtw.band_fraction, help="Sakoe-Chiba band fraction")
    p.add_argument("--no-external-features", action="store_true", help="ignore features_path entries in the manifest")
    p.add_argument("--keep-rate", action="store_true", help="skip resampling to 16 kHz")
    p.add_argument("--seed", type=int, default=0, help="accepted for interface uniformity; alignment is deterministic")

    p = sub.add_parser("augment", help="noise-inject a fraction of a training set", formatter_class=fmt)
    p.add_argument("--in-dir", required=True, help="directory of clean wavs")
    p.add_argument("--noise-dir", required=True, help="noise bank root: <class>/*.wav")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.add_argument("--probability", type=float, default=cfg.augment.probability, help="fraction of files to augment")
    p.add_argument("--snr-min", dest="snr_min_db", type=float, default=cfg.augment.snr_min_db, help="lowest SNR (dB)")
    p.add_argument("--snr-max", dest="snr_max_db", type=float, default=cfg.augment.snr_max_db, help="highest SNR (dB)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")

    p = sub.add_parser("sweep", help="noisy variants over an SNR grid", formatter_class=fmt)
    p.add_argument("--in-dir", required=True, help="directory of input wavs")
    p.add_argument("--noise-dir", required=True, help="noise bank root: <class>/*.wav")
    p.add_argument("--out-dir", required=True, help="output directory (index.csv + wavs)")
    p.add_argument("--snrs", default="0,5,10,15,20,25", help="comma-separated SNR grid (dB)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed")

    ev = sub.add_parser("eval", help="objective metrics")
    ev_sub = ev.add_subparsers(dest="eval_command", required=True)

    for unit, name in (("char", "cer"), ("word", "wer")):
        p = ev_sub.add_parser(name, help=f"{name.upper()} with WIP/WIL and bootstrap CI", formatter_class=fmt)
        p.add_argument("--ref", dest="ref_path", required=True, help="reference transcripts (utt_id<TAB>text)")
        p.add_argument("--hyp", dest="hyp_path", required=True, help="hypothesis transcripts (utt_id<TAB>text)")
        p.add_argument("--bootstrap", type=int, default=cfg.metrics.bootstrap_resamples, help="bootstrap resamples (0 disables)")
        p.add_argument("--level", type=float, default=cfg.metrics.level, help="CI level")
        p.add_argument("--seed", type=int, default=0, help="bootstrap seed")
        p.add_argument("--macro", action="store_true", help="average per-utterance rates instead of pooling")
        p.add_argument("--out", dest="output_path", help="full report JSON (per-utterance rates included)")

    p = ev_sub.add_parser("f0", help="log-F0 RMSE over commonly voiced frames", formatter_class=fmt)
    p.add_argument("--a", dest="a_path", required=True, help="wav or pitch JSON")
    p.add_argument("--b", dest="b_path", required=True, help="wav or pitch JSON")
    p.add_argument("--f0-min", type=float, default=cfg.pitch.f0_min, help="lowest F0 (Hz)")
    p.add_argument("--f0-max", type=float, default=cfg.pitch.f0_max, help="highest F0 (Hz)")
    p.add_argument("--hop-seconds", type=float, default=cfg.pitch.hop_seconds, help="hop (s)")
    p.add_argument("--keep-rate", action="store_true", help="skip resampling to 16 kHz")

    p = ev_sub.add_parser("sim", help="cosine similarity of two stored embeddings", formatter_class=fmt)
    p.add_argument("--a", dest="a_path", required=True, help="embedding .fmat (1 row)")
    p.add_argument("--b", dest="b_path", required=True, help="embedding .fmat (1 row)")

    p = ev_sub.add_parser("report", help="normalize a metric table for comparison plots", formatter_class=fmt)
    p.add_argument("--in", dest="input_path", required=True, help="metrics JSON")
    p.add_argument("--out-csv", dest="output_csv", required=True, help="normalized method x metric grid")
    p.add_argument("--out-json", dest="output_json", help="normalized report JSON")

    p = ev_sub.add_parser("sweep", help="CER per (noise class, SNR) from sweep transcripts", formatter_class=fmt)
    p.add_argument("--index", dest="index_path", required=True, help="sweep index.csv")
    p.add_argument("--ref", dest="ref_path", required=True, help="references keyed by input id")
    p.add_argument("--hyp", dest="hyp_path", required=True, help="hypotheses keyed by sweep file stem")
    p.add_argument("--clean-hyp", dest="clean_hyp_path", help="noise-free hypotheses for the reference row")
    p.add_argument("--out-csv", dest="output_csv", help="CER-vs-SNR table CSV")

    p = sub.add_parser("fmat", help="feature file utilities")
    fm_sub = p.add_subparsers(dest="fmat_command", required=True)
    p = fm_sub.add_parser("info", help="validate an FMT1 file and print its header", formatter_class=fmt)
    p.add_argument("path", help="feature file")

    p = sub.add_parser("serve", help="run the HTTP service", formatter_class=fmt)
    p.add_argument("--host", default="127.0.0.1", help="bind address")
    p.add_argument("--port", type=int, default=8571, help="port")

    return parser


def _request_from_args(command: str, args: argparse.Namespace):
    _, model, _ = _ROUTES[command]
    payload = {}
    for name in model.model_fields:
        if hasattr(args, name):
            payload[name] = getattr(args, name)
    return model(**payload)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)

    # --config decides flag defaults, so peek at it before the real parse
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        cfg = load_config(known.config) if known.config else Config()
    except (OSError, ValueError) as e:
        print(f"error: cannot load config: {e}", file=sys.stderr)
        print("hint: pass a JSON object with only known keys", file=sys.stderr)
        return 2

    parser = build_parser(cfg)
    args = parser.parse_args(argv)

    command = args.command
    if command == "corpus":
        command = f"corpus_{args.corpus_command}"
    elif command == "eval":
        command = f"eval_{args.eval_command}"
    elif command == "fmat":
        command = f"fmat_{args.fmat_command}"

    if command == "serve":
        import uvicorn

        from .service.app import app

        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
        return 0

    try:
        if command == "corpus_split":
            parts = [float(x) for x in args.ratios.split(",")]
            if len(parts) != 3:
                raise ValueError("--ratios needs three comma-separated numbers")
            args.ratios = tuple(parts)
        if command == "sweep":
            args.snrs = [float(x) for x in args.snrs.split(",")]
        if command == "eval_cer":
            args.unit = "char"
        if command == "eval_wer":
            args.unit = "word"
        if command == "corpus_run":
            args.use_external_features = not args.no_external_features

        req = _request_from_args(command, args)
        payload = _dispatch(command, req, args.server, config=cfg)
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        print("hint: run with --help for flag documentation", file=sys.stderr)
        return 1

    _emit(payload)
    if command == "corpus_run" and payload.get("failures"):
        return 1
    if command == "augment" and payload.get("errors"):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
