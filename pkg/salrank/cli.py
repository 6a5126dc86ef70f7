"""Command-line entry point: dataset generation, curation, training, prediction, experiments."""

import asyncio
import functools
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import click
import pandas as pd

from salrank.config import TrainConfig, load_settings, load_train_config
from salrank.core.maps import VideoClip
from salrank.models.wire import Detection, Provenance
from salrank.services import dataset_io, experiments, plotting
from salrank.services.curation import emit_record, gt_ranking_maps
from salrank.services.diffusion.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from salrank.services.diffusion.training import TrainingSet, train
from salrank.services.image_service import write_map_png
from salrank.services.metrics import MetricReport
from salrank.services.pipeline import ClipRanking, prediction_for, resolve_rankings
from salrank.services.grounding_service import RemoteGrounder
from salrank.services.mllm_service import MllmClient
from salrank.services.rankmap import predicted_ranking_map
from salrank.services.synth import generate, load_synth_spec, split_of
from salrank.utils.exceptions import InputError, SalRankException, TransportError
from salrank.utils.logging_config import bind_run_id, setup_logging

logger = logging.getLogger(__name__)

SOURCES = ["mllm", "oracle", "random"]


@dataclass
class CliContext:
    seed: Optional[int]
    config: Optional[Path]
    jobs: Optional[int]

    def seed_or(self, default: int) -> int:
        return self.seed if self.seed is not None else default


def handles_errors(fn):
    """Report package errors on stderr and exit with their exit code."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SalRankException as e:
            logger.error(
                "Command failed",
                extra={"command": fn.__name__, "error": str(e), "exit_code": e.exit_code},
            )
            click.echo(f"Error: {e}", err=True)
            last = getattr(e, "last_finite_step", None)
            if last is not None and last >= 0:
                click.echo(f"Last finite step: {last}", err=True)
            raise SystemExit(e.exit_code)

    return wrapper


@click.group()
@click.option("--seed", type=int, default=None, help="Seed for every random draw (overrides config files).")
@click.option(
    "--config",
    type=click.Path(path_type=Path),
    default=None,
    help="key = value file: training hyper-parameters and SALRANK_* settings.",
)
@click.option("--jobs", type=int, default=None, help="Concurrent remote requests (default: SALRANK_MAX_IN_FLIGHT).")
@click.option("--log-level", default=None, help="Logging level (default: SALRANK_LOG_LEVEL).")
@click.pass_context
def main(ctx: click.Context, seed: Optional[int], config: Optional[Path], jobs: Optional[int], log_level: Optional[str]):
    """Salient-object-ranking conditioned video saliency prediction."""
    try:
        settings = load_settings(config)
    except SalRankException as e:
        click.echo(f"Error: {e}", err=True)
        raise SystemExit(e.exit_code)
    setup_logging(log_level or settings.log_level)
    ctx.with_resource(bind_run_id())
    ctx.obj = CliContext(seed=seed, config=config, jobs=jobs or settings.max_in_flight)


def _train_config(cli: CliContext, **overrides) -> TrainConfig:
    return load_train_config(cli.config, seed=cli.seed, **overrides)


def _load_split(dataset: Path, split: str) -> List[VideoClip]:
    clips = dataset_io.load_dataset(dataset, None if split == "all" else split)
    if not clips:
        raise InputError(f"No clips in split {split!r} of {dataset}")
    return clips


def _resolve(
    cli: CliContext,
    clips: List[VideoClip],
    source: str,
    seed: int,
    prompt_mode: str = "cot",
    ground: str = "oracle",
) -> Dict[str, object]:
    settings = load_settings(cli.config)
    mllm = MllmClient(url=settings.mllm_url, timeout=settings.http_timeout) if source == "mllm" else None
    grounder_for = None
    if ground == "remote":
        remote = RemoteGrounder(url=settings.ground_url, timeout=settings.http_timeout)
        grounder_for = lambda clip: remote  # noqa: E731
    return asyncio.run(resolve_rankings(
        clips,
        source,
        seed=seed,
        mllm=mllm,
        grounder_for=grounder_for,
        prompt_mode=prompt_mode,
        max_in_flight=cli.jobs,
    ))


def _only_resolved(results: Dict[str, object]) -> Dict[str, ClipRanking]:
    return {cid: r for cid, r in results.items() if isinstance(r, ClipRanking)}


# --------------------------
# Commands
# --------------------------

@main.command()
@click.argument("spec_file", type=click.Path(path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True, help="Dataset directory to write.")
@click.pass_obj
@handles_errors
def synth(cli: CliContext, spec_file: Path, out_dir: Path):
    """Generate a synthetic moving-disk dataset from a key-value SPEC_FILE."""
    spec = load_synth_spec(spec_file)
    if cli.seed is not None:
        spec = spec.model_copy(update={"seed": cli.seed})
    clips = generate(spec)
    splits = {clip.id: split_of(spec, i) for i, clip in enumerate(clips)}
    dataset_io.write_dataset(clips, out_dir, splits)
    click.echo(f"Wrote {len(clips)} clips to {out_dir}")


@main.command()
@click.argument("dataset", type=click.Path(path_type=Path))
@click.option("--captions", type=click.Path(path_type=Path), default=None, help="JSON object: clip id -> caption.")
@click.pass_obj
@handles_errors
def curate(cli: CliContext, dataset: Path, captions: Optional[Path]):
    """Rank annotated objects by fixations; write records.jsonl and ground-truth ranking maps."""
    settings = load_settings(cli.config)
    caption_of = dataset_io.read_captions(captions) if captions else {}
    clips = dataset_io.load_dataset(dataset)
    if not clips:
        raise InputError(f"No clips in {dataset}")
    records = []
    for clip in clips:
        record = emit_record(clip, caption_of.get(clip.id, settings.placeholder_caption))
        for fr, grid in zip(record.frames, gt_ranking_maps(clip, record)):
            write_map_png(grid, dataset / clip.id / "ranking_maps" / f"{fr.frame:03d}.png", unit=False)
        records.append(record)
    dataset_io.write_records(records, dataset / dataset_io.RECORDS)
    click.echo(f"Curated {len(records)} clips")


@main.command(name="train")
@click.argument("dataset", type=click.Path(path_type=Path))
@click.option("--out", "checkpoint", type=click.Path(path_type=Path), required=True, help="Checkpoint file to write.")
@click.option("--steps", type=int, default=None, help="Override the number of training steps.")
@click.option("--ratio", type=float, default=None, help="Override the training ranking-map ratio.")
@click.pass_obj
@handles_errors
def train_cmd(cli: CliContext, dataset: Path, checkpoint: Path, steps: Optional[int], ratio: Optional[float]):
    """Train the conditioned diffusion decoder on the train split; write a checkpoint and loss.csv."""
    config = _train_config(cli, steps=steps, ratio=ratio)
    clips = _load_split(dataset, "train")
    records = dataset_io.read_records(dataset / dataset_io.RECORDS)
    missing = [c.id for c in clips if c.id not in records]
    if missing:
        raise InputError(f"Clips without curated records: {missing[:5]} (run `salrank curate`)")

    started = time.time()
    result = train(TrainingSet.build(clips, records, config.rank_map_source), config)
    save_checkpoint(result.params, config, checkpoint)

    loss_csv = checkpoint.parent / "loss.csv"
    pd.DataFrame({"step": range(1, len(result.losses) + 1), "loss": result.losses}).to_csv(
        loss_csv, index=False, float_format="%.10g"
    )
    plotting.plot_loss(result.losses, checkpoint.parent / "loss.png")
    click.echo(
        f"Trained {config.steps} steps in {time.time() - started:.1f}s; "
        f"final loss {result.losses[-1]:.6f}; wrote {checkpoint}"
    )


def _prediction_run(
    cli: CliContext,
    clips: List[VideoClip],
    ckpt: Checkpoint,
    source: str,
    ratio: float,
    out_dir: Path,
    prompt_mode: str,
    ground: str,
) -> int:
    seed = cli.seed_or(ckpt.config.seed)
    results = _resolve(cli, clips, source, seed, prompt_mode, ground)
    errors = []
    written = 0
    for clip in clips:
        resolved = results[clip.id]
        if not isinstance(resolved, ClipRanking):
            errors.append({"clip_id": clip.id, "error": type(resolved).__name__, "detail": str(resolved)})
            continue
        pred = prediction_for(
            clip, resolved, ckpt.params, ckpt.schedule, ratio, source, seed, ckpt.config.temporal_window
        )
        dataset_io.write_prediction(
            out_dir / clip.id, pred.maps, [f.index for f in clip.frames], pred.provenance, pred.ranking
        )
        written += 1
    dataset_io.write_json(out_dir / dataset_io.ERRORS, errors)
    if written == 0:
        raise TransportError(f"All {len(clips)} clips failed; see {out_dir / dataset_io.ERRORS}")
    return written


@main.command()
@click.argument("dataset", type=click.Path(path_type=Path))
@click.argument("checkpoint", type=click.Path(path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True, help="Prediction directory.")
@click.option("--source", type=click.Choice(SOURCES), default="oracle", show_default=True)
@click.option("--ratio", type=click.FloatRange(0.0, 1.0), default=0.25, show_default=True)
@click.option("--split", type=click.Choice(["train", "test", "all"]), default="test", show_default=True)
@click.option("--prompt-mode", type=click.Choice(["cot", "direct"]), default=None, help="MLLM prompt style.")
@click.option("--ground", type=click.Choice(["oracle", "remote"]), default=None, help="Grounding backend.")
@click.pass_obj
@handles_errors
def predict(
    cli: CliContext,
    dataset: Path,
    checkpoint: Path,
    out_dir: Path,
    source: str,
    ratio: float,
    split: str,
    prompt_mode: Optional[str],
    ground: Optional[str],
):
    """Predict per-frame saliency maps with ranking maps from SOURCE."""
    settings = load_settings(cli.config)
    ckpt = load_checkpoint(checkpoint)
    clips = _load_split(dataset, split)
    ground = ground or ("remote" if settings.ground_url else "oracle")
    written = _prediction_run(
        cli, clips, ckpt, source, ratio, out_dir, prompt_mode or settings.prompt_mode, ground
    )
    click.echo(f"Predicted {written}/{len(clips)} clips into {out_dir}")


@main.command(name="eval")
@click.argument("pred_dir", type=click.Path(path_type=Path))
@click.argument("dataset", type=click.Path(path_type=Path))
@click.option("--out", "out_csv", type=click.Path(path_type=Path), default=None, help="Default: PRED_DIR/metrics.csv")
@click.pass_obj
@handles_errors
def eval_cmd(cli: CliContext, pred_dir: Path, dataset: Path, out_csv: Optional[Path]):
    """Per-frame and mean AUC-J / CC / SIM / NSS of predictions against the dataset."""
    report = MetricReport()
    known = set(dataset_io.dataset_clip_ids(dataset))
    clip_ids = dataset_io.prediction_clip_ids(pred_dir)
    if not clip_ids:
        raise InputError(f"No predictions in {pred_dir}")
    for cid in clip_ids:
        if cid not in known:
            raise InputError(f"Predicted clip {cid} is not in {dataset}")
        clip = dataset_io.load_clip(dataset / cid)
        preds = dataset_io.read_prediction_maps(pred_dir / cid, clip)
        report.extend(experiments.evaluate([clip], {cid: preds}))
    report.write_csv(out_csv or pred_dir / "metrics.csv")
    means = report.means()
    click.echo(" ".join(f"{k}={v:.4f}" for k, v in means.items()))


@main.command(name="ratio-sweep")
@click.argument("dataset", type=click.Path(path_type=Path))
@click.argument("checkpoint", type=click.Path(path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--source", type=click.Choice(SOURCES), default="oracle", show_default=True)
@click.option("--split", type=click.Choice(["train", "test", "all"]), default="test", show_default=True)
@click.pass_obj
@handles_errors
def ratio_sweep(cli: CliContext, dataset: Path, checkpoint: Path, out_dir: Path, source: str, split: str):
    """Evaluate ranking-map ratios 0, 1/16, 1/8, 1/4, 1/2 and 1 on one checkpoint."""
    settings = load_settings(cli.config)
    ckpt = load_checkpoint(checkpoint)
    clips = _load_split(dataset, split)
    seed = cli.seed_or(ckpt.config.seed)
    rankings = _only_resolved(_resolve(cli, clips, source, seed, settings.prompt_mode))
    table = experiments.ratio_sweep(
        clips, rankings, ckpt.params, ckpt.schedule, seed, ckpt.config.temporal_window
    )
    experiments.write_table(table, out_dir / "ratio_sweep.csv")
    plotting.plot_ratio_sweep(table, out_dir / "ratio_sweep.png")
    click.echo(table.to_string(index=False))


@main.command()
@click.argument("dataset", type=click.Path(path_type=Path))
@click.argument("checkpoint", type=click.Path(path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--ratio", type=click.FloatRange(0.0, 1.0), default=0.25, show_default=True)
@click.option("--split", type=click.Choice(["train", "test", "all"]), default="test", show_default=True)
@click.pass_obj
@handles_errors
def replace(cli: CliContext, dataset: Path, checkpoint: Path, out_dir: Path, ratio: float, split: str):
    """Decode with oracle ranking maps, then with random ones; compare metrics."""
    ckpt = load_checkpoint(checkpoint)
    clips = _load_split(dataset, split)
    seed = cli.seed_or(ckpt.config.seed)
    by_source = {src: _only_resolved(_resolve(cli, clips, src, seed)) for src in ("oracle", "random")}
    result = experiments.replacement(
        clips, by_source, ckpt.params, ckpt.schedule, ratio, seed, ckpt.config.temporal_window
    )
    experiments.write_table(result.table, out_dir / "replacement.csv")

    clip = next(c for c in clips if c.id in result.predictions["oracle"])
    middle = clip.middle_index
    plotting.plot_replacement(
        clip.frames[middle],
        predicted_ranking_map(by_source["oracle"][clip.id].ranking, clip.width, clip.height),
        result.predictions["oracle"][clip.id][middle],
        predicted_ranking_map(by_source["random"][clip.id].ranking, clip.width, clip.height),
        result.predictions["random"][clip.id][middle],
        clip.saliency[middle],
        out_dir / "replacement.png",
    )
    click.echo(result.table.to_string(index=False))


@main.command()
@click.argument("pred_dir", type=click.Path(path_type=Path))
@click.argument("dataset", type=click.Path(path_type=Path))
@click.option("--out", "out_csv", type=click.Path(path_type=Path), default=None, help="Default: PRED_DIR/correlation.csv")
@click.pass_obj
@handles_errors
def correlate(cli: CliContext, pred_dir: Path, dataset: Path, out_csv: Optional[Path]):
    """Map and rank correlation between predicted ranking maps and ground truth."""
    provenances: Dict[str, Provenance] = {
        cid: dataset_io.read_provenance(pred_dir / cid) for cid in dataset_io.prediction_clip_ids(pred_dir)
    }
    known = set(dataset_io.dataset_clip_ids(dataset))
    clips = [dataset_io.load_clip(dataset / cid) for cid in sorted(provenances) if cid in known]
    table = experiments.correlation_table(clips, provenances)
    experiments.write_table(table, out_csv or pred_dir / "correlation.csv")
    mean = table.iloc[-1]
    click.echo(f"map_correlation={mean['map_correlation']:.4f} rank_correlation={mean['rank_correlation']:.4f}")


@main.command(name="stub-server")
@click.option("--dataset", type=click.Path(path_type=Path), default=None, help="Serve oracle answers for this dataset.")
@click.option("--response-file", type=click.Path(path_type=Path), default=None, help="Canned MLLM answer text.")
@click.option("--detections-file", type=click.Path(path_type=Path), default=None, help="Canned detections (JSON list).")
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.pass_obj
@handles_errors
def stub_server(
    cli: CliContext,
    dataset: Optional[Path],
    response_file: Optional[Path],
    detections_file: Optional[Path],
    host: Optional[str],
    port: Optional[int],
):
    """Run the stub MLLM + grounding server."""
    import uvicorn

    from salrank.api.main import create_app

    settings = load_settings(cli.config)
    dataset = dataset or (Path(settings.stub_dataset) if settings.stub_dataset else None)
    canned = response_file.read_text(encoding="utf-8") if response_file else None
    detections = None
    if detections_file:
        payload = dataset_io.read_json(detections_file)
        try:
            detections = [Detection(**d) for d in payload]
        except Exception as e:
            raise InputError(f"Malformed detections in {detections_file}: {e}") from e
    app = create_app(dataset_dir=dataset, canned_text=canned, detections=detections)
    uvicorn.run(
        app,
        host=host or settings.stub_host,
        port=port or settings.stub_port,
        log_config=None,
    )
