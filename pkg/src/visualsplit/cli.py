"""Command-line entry point: extract / train / reconstruct / edit / probe /
sweep / serve. Every flag names its config-file equivalent in its help text;
CLI values override the config file."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import torch

from .data import prepare_image
from .descriptors import DescriptorConfig, apply_edits, extract_bundle
from .evaluation import (
    PAPER_SWEEP_REFERENCE,
    ProbeConfig,
    probe,
    psnr,
    ssim,
    sweep_clusters,
)
from .model import load_model_checkpoint
from .training import config_from_dict, load_config, run_training
from .vsdfile import load_bundle, save_bundle
from .viz import save_descriptor_previews, save_image

log = logging.getLogger(__name__)


def _descriptor_options(fn):
    opts = [
        click.option("--clusters", default=6, show_default=True,
                     help="Colour cluster count K [config: descriptor.num_clusters]"),
        click.option("--bins", default=100, show_default=True,
                     help="Histogram bin count [config: descriptor.num_bins]"),
        click.option("--bandwidth", default=2.0, show_default=True,
                     help="Histogram Gaussian bandwidth in L units [config: descriptor.bandwidth]"),
        click.option("--temperature", default=25.0, show_default=True,
                     help="Soft-assignment temperature [config: descriptor.temperature]"),
        click.option("--iterations", default=10, show_default=True,
                     help="Soft k-means update iterations [config: descriptor.kmeans_iterations]"),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


@click.group()
@click.option("--verbose", is_flag=True, help="Debug logging [config: n/a]")
@click.option("--json", "json_errors", is_flag=True,
              help="Machine-readable error JSON on stderr [config: n/a]")
@click.option("--seed", type=int, default=0, show_default=True,
              help="RNG seed [config: seed]")
@click.pass_context
def cli(ctx, verbose, json_errors, seed):
    """VisualSplit: descriptor extraction, pretraining, reconstruction and editing."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"json": json_errors, "seed": seed}


@cli.command()
@click.argument("images", nargs=-1, required=True, type=click.Path(exists=True, path_type=Path))
@click.option("-o", "--output", required=True, type=click.Path(path_type=Path),
              help="Output .vsd path (single image) or directory [config: n/a]")
@click.option("--size", default=224, show_default=True,
              help="Resize/centre-crop edge length [config: image_size]")
@click.option("--viz/--no-viz", default=True, show_default=True,
              help="Also write edge/segmentation/histogram PNGs [config: n/a]")
@_descriptor_options
@click.pass_context
def extract(ctx, images, output, size, viz, clusters, bins, bandwidth, temperature, iterations):
    """Extract descriptor bundles (.vsd) and preview images."""
    cfg = DescriptorConfig(
        num_clusters=clusters, num_bins=bins, bandwidth=bandwidth,
        temperature=temperature, kmeans_iterations=iterations, seed=ctx.obj["seed"],
    )
    multi = len(images) > 1 or output.is_dir()
    if multi:
        output.mkdir(parents=True, exist_ok=True)
    for path in images:
        img = prepare_image(path, size)
        bundle = extract_bundle(img, cfg)
        out = output / (path.stem + ".vsd") if multi else output
        save_bundle(bundle, out)
        if viz:
            save_descriptor_previews(bundle, out.with_suffix(""))
        click.echo(f"wrote {out}")


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="YAML training config mirroring TrainConfig [config: whole file]")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Dotted-path config override, e.g. loss.w_pixel=2.0 [config: any key]")
@click.option("--dataset-root", default=None, help="Training image folder [config: dataset_root]")
@click.option("--out-dir", default=None, help="Run output directory [config: out_dir]")
@click.pass_context
def train(ctx, config_path, overrides, dataset_root, out_dir):
    """Pre-train a model; writes checkpoints and a JSONL metrics log."""
    parsed = {}
    for item in overrides:
        key, _, value = item.partition("=")
        parsed[key] = yaml_value(value)
    if dataset_root:
        parsed["dataset_root"] = dataset_root
    if out_dir:
        parsed["out_dir"] = out_dir
    config = load_config(config_path, parsed)
    trainer, reports = run_training(config)
    click.echo(json.dumps({"steps": trainer.step, "final": reports[-1].to_dict() if reports else None}))


def yaml_value(text: str):
    import yaml

    return yaml.safe_load(text)


def _bundle_from_input(path: Path, model_payload: dict, size: int, seed: int):
    if path.suffix == ".vsd":
        return load_bundle(path), None
    img = prepare_image(path, size)
    tc = model_payload.get("train_config")
    if tc:
        cfg = config_from_dict(tc).descriptor
    else:
        cfg = DescriptorConfig(seed=seed)
    return extract_bundle(img, cfg), img


@cli.command()
@click.argument("checkpoint", type=click.Path(exists=True, path_type=Path))
@click.argument("source", type=click.Path(exists=True, path_type=Path))
@click.option("-o", "--output", required=True, type=click.Path(path_type=Path),
              help="Output PNG path [config: n/a]")
@click.option("--size", default=None, type=int,
              help="Crop size when SOURCE is an image; defaults to the checkpoint's [config: image_size]")
@click.pass_context
def reconstruct(ctx, checkpoint, source, output, size):
    """Reconstruct an image from a .vsd bundle or straight from an image."""
    model, payload = load_model_checkpoint(checkpoint)
    model.eval()
    if size is None:
        size = payload.get("train_config", {}).get("image_size", 224)
    bundle, original = _bundle_from_input(source, payload, size, ctx.obj["seed"])
    with torch.no_grad():
        recon = model.reconstruct_bundle(bundle)
    save_image(recon, output)
    report = {"output": str(output), "height": bundle.height, "width": bundle.width}
    if original is not None:
        report["psnr"] = psnr(recon, original)
        report["ssim"] = ssim(recon, original)
        if report["psnr"] == float("inf"):
            report["psnr"] = "inf"
    click.echo(json.dumps(report))


@cli.command()
@click.argument("bundle_path", type=click.Path(exists=True, path_type=Path))
@click.option("--recolour", "recolours", multiple=True, metavar="K:A,B",
              help="Set centroid K to (a, b); repeatable [edit op: recolour]")
@click.option("--shift-hist", type=float, default=None,
              help="Brightness shift delta_L for the histogram [edit op: shift_hist]")
@click.option("--script", "script_path", type=click.Path(exists=True, path_type=Path),
              help="JSON edit script (ordered list of {op, ...}) [config: n/a]")
@click.option("-o", "--output", required=True, type=click.Path(path_type=Path),
              help="Output .vsd path [config: n/a]")
def edit(bundle_path, recolours, shift_hist, script_path, output):
    """Apply descriptor edits to a .vsd bundle."""
    edits = []
    if script_path:
        edits.extend(json.loads(Path(script_path).read_text()))
    for spec_text in recolours:
        idx, _, ab = spec_text.partition(":")
        a, b = ab.split(",")
        edits.append({"op": "recolour", "cluster": int(idx), "ab": [float(a), float(b)]})
    if shift_hist is not None:
        edits.append({"op": "shift_hist", "delta": shift_hist})
    if not edits:
        raise click.UsageError("no edits given; use --recolour/--shift-hist/--script")
    bundle = apply_edits(load_bundle(bundle_path), edits)
    save_bundle(bundle, output)
    click.echo(f"wrote {output} ({len(edits)} edits)")


@cli.command("probe")
@click.argument("checkpoint", type=click.Path(exists=True, path_type=Path))
@click.argument("dataset", type=click.Path(exists=True, path_type=Path))
@click.option("--mode", type=click.Choice(["linear", "finetune"]), default="linear",
              show_default=True, help="Probe mode [config: probe.mode]")
@click.option("--representation", type=click.Choice(["global", "mean_local"]), default="global",
              show_default=True, help="Representation to probe [config: probe.representation]")
@click.option("--epochs", default=30, show_default=True, help="Probe epochs [config: probe.epochs]")
@click.option("--lr", default=0.01, show_default=True, help="Probe learning rate [config: probe.lr]")
@click.option("--size", default=64, show_default=True, help="Probe crop size [config: probe.image_size]")
@click.option("--train-fraction", default=1.0, show_default=True,
              help="Per-class fraction used to fit the head; rest is held out "
                   "[config: probe.train_fraction]")
@click.pass_context
def probe_cmd(ctx, checkpoint, dataset, mode, representation, epochs, lr, size, train_fraction):
    """Linear-probe or finetune a checkpoint on a folder-per-class dataset."""
    model, payload = load_model_checkpoint(checkpoint)
    tc = payload.get("train_config")
    dcfg = config_from_dict(tc).descriptor if tc else DescriptorConfig(seed=ctx.obj["seed"])
    cfg = ProbeConfig(mode=mode, representation=representation, epochs=epochs,
                      lr=lr, image_size=size, seed=ctx.obj["seed"],
                      train_fraction=train_fraction)
    report = probe(model, dataset, cfg, dcfg)
    click.echo(json.dumps(report.to_dict()))


@cli.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True),
              help="YAML training config used per sweep arm [config: whole file]")
@click.option("--ks", default="2,4,6,8", show_default=True,
              help="Comma-separated cluster counts [config: sweep.ks]")
@click.option("-o", "--output", required=True, type=click.Path(path_type=Path),
              help="CSV report path [config: n/a]")
@click.option("--probe-epochs", default=30, show_default=True,
              help="Linear-probe epochs per arm [config: probe.epochs]")
def sweep(config_path, ks, output, probe_epochs):
    """Pretrain + linear-probe once per cluster count and emit a CSV table."""
    config = load_config(config_path)
    k_list = [int(k) for k in ks.split(",") if k.strip()]
    rows = sweep_clusters(
        k_list, config,
        ProbeConfig(epochs=probe_epochs, image_size=config.image_size),
        csv_path=output,
    )
    click.echo(json.dumps({"rows": rows, "paper_reference": PAPER_SWEEP_REFERENCE}))


@cli.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True),
              envvar="VISUALSPLIT_CHECKPOINT",
              help="Model checkpoint to serve [env: VISUALSPLIT_CHECKPOINT]")
@click.option("--host", default="127.0.0.1", show_default=True, envvar="VISUALSPLIT_HOST",
              help="Bind address [env: VISUALSPLIT_HOST]")
@click.option("--port", default=8000, show_default=True, envvar="VISUALSPLIT_PORT",
              help="Bind port [env: VISUALSPLIT_PORT]")
@click.option("--session-ttl", default=1800.0, show_default=True, envvar="VISUALSPLIT_SESSION_TTL",
              help="Idle session expiry in seconds [env: VISUALSPLIT_SESSION_TTL]")
def serve(checkpoint, host, port, session_ttl):
    """Start the HTTP editing/inference service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(checkpoint, session_ttl=session_ttl), host=host, port=port)


def main(argv=None) -> int:
    json_errors = "--json" in (argv if argv is not None else sys.argv[1:])
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.UsageError as e:
        click.echo(f"Error: {e.format_message()}", err=True)
        if e.ctx is not None:
            click.echo(e.ctx.get_help(), err=True)
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except click.exceptions.Exit as e:  # e.g. --help
        return e.exit_code
    except click.exceptions.Abort:
        return 1
    except Exception as e:  # runtime/data errors
        if json_errors:
            click.echo(json.dumps({"error": type(e).__name__, "message": str(e)}), err=True)
        else:
            log.error("%s: %s", type(e).__name__, e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
