"""Pre-training loop: AdamW with warmup+cosine schedule, descriptor-only
encoder inputs, JSONL metrics, and bit-exact checkpoint/resume."""

from __future__ import annotations

import json
import logging
import random
from dataclasses import asdict, dataclass, field
from math import cos, pi
from pathlib import Path

import numpy as np
import torch
import yaml
from torch import Tensor

from .data import list_image_folder, prepare_batch
from .decoder import DecoderConfig
from .descriptors import DescriptorBundle, DescriptorConfig, encoder_planes
from .encoder import EncoderConfig
from .losses import LossConfig, LossReport, total_loss
from .model import (
    CHECKPOINT_FORMAT,
    CheckpointError,
    VisualSplitModel,
    config_header,
    read_checkpoint,
)

log = logging.getLogger(__name__)


class NonFiniteLossError(RuntimeError):
    def __init__(self, component: str, report: LossReport):
        super().__init__(f"non-finite loss in component '{component}': {report.to_dict()}")
        self.component = component
        self.report = report


@dataclass(frozen=True)
class TrainConfig:
    image_size: int = 224
    batch_size: int = 8
    total_steps: int = 1000
    warmup_steps: int = 100
    base_lr: float = 1.5e-4
    weight_decay: float = 0.05
    betas: tuple[float, float] = (0.9, 0.95)
    grad_clip: float = 1.0
    seed: int = 0
    dataset_root: str = ""
    checkpoint_every: int = 500
    out_dir: str = "runs/default"
    loss: LossConfig = field(default_factory=LossConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    descriptor: DescriptorConfig = field(default_factory=DescriptorConfig)

    def __post_init__(self):
        if not 0 <= self.warmup_steps < self.total_steps:
            raise ValueError("need 0 <= warmup_steps < total_steps")
        if self.image_size % self.encoder.patch_size != 0:
            raise ValueError("image_size must be divisible by patch_size")


def config_to_dict(config: TrainConfig) -> dict:
    d = asdict(config)
    d["betas"] = list(d["betas"])
    d["encoder"]["block_pattern"] = list(d["encoder"]["block_pattern"])
    return d


def config_from_dict(d: dict) -> TrainConfig:
    d = dict(d)
    for key, cls in (
        ("loss", LossConfig),
        ("encoder", EncoderConfig),
        ("decoder", DecoderConfig),
        ("descriptor", DescriptorConfig),
    ):
        if key in d and isinstance(d[key], dict):
            sub = dict(d[key])
            if key == "encoder" and "block_pattern" in sub:
                sub["block_pattern"] = tuple(sub["block_pattern"])
            d[key] = cls(**sub)
    if "betas" in d:
        d["betas"] = tuple(d["betas"])
    return TrainConfig(**d)


def load_config(path: str | Path, overrides: dict | None = None) -> TrainConfig:
    """YAML config file mirroring TrainConfig; dotted-path overrides win."""
    with open(path) as f:
        raw = yaml.safe_load(f) or {}
    for dotted, value in (overrides or {}).items():
        node = raw
        *parents, leaf = dotted.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    return config_from_dict(raw)


def save_config(config: TrainConfig, path: str | Path) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(config_to_dict(config), f, sort_keys=False)


def lr_at(step: int, config: TrainConfig) -> float:
    """Linear warmup to base_lr, then cosine decay to 0 at total_steps."""
    if not 0 <= step <= config.total_steps:
        raise ValueError(f"step {step} outside [0, {config.total_steps}]")
    if config.warmup_steps > 0 and step < config.warmup_steps:
        return config.base_lr * step / config.warmup_steps
    progress = (step - config.warmup_steps) / (config.total_steps - config.warmup_steps)
    return config.base_lr * 0.5 * (1.0 + cos(pi * progress))


def _rng_snapshot() -> dict:
    return {
        "torch": torch.get_rng_state(),
        "numpy": np.random.get_state(),
        "python": random.getstate(),
    }


def _rng_restore(snap: dict) -> None:
    torch.set_rng_state(snap["torch"])
    np.random.set_state(snap["numpy"])
    random.setstate(snap["python"])


class Trainer:
    """Owns model parameters, optimizer moments and the step counter."""

    def __init__(self, config: TrainConfig, _from_checkpoint: bool = False):
        self.config = config
        if not _from_checkpoint:
            torch.manual_seed(config.seed)
            np.random.seed(config.seed)
            random.seed(config.seed)
        self.model = VisualSplitModel(config.encoder, config.decoder)
        self.optimizer = torch.optim.AdamW(
            self.model.parameters(),
            lr=config.base_lr,
            betas=config.betas,
            weight_decay=config.weight_decay,
        )
        self.step = 0

    def train_step(self, images: Tensor, bundles: list[DescriptorBundle]) -> LossReport:
        """One forward/backward/update over a prepared batch.

        A non-finite loss aborts the step with parameters untouched.
        """
        lr = lr_at(self.step, self.config)
        for group in self.optimizer.param_groups:
            group["lr"] = lr
        planes = torch.stack([encoder_planes(b) for b in bundles])
        hist = torch.stack([b.histogram.weights for b in bundles])
        recon = self.model(planes, hist)
        losses, reports = [], []
        for i, bundle in enumerate(bundles):
            loss_i, report_i = total_loss(recon[i], images[i], bundle, self.config.loss)
            losses.append(loss_i)
            reports.append(report_i)
        loss = torch.stack(losses).mean()
        report = LossReport(
            **{
                k: sum(r.to_dict()[k] for r in reports) / len(reports)
                for k in reports[0].to_dict()
            }
        )
        for name, value in report.to_dict().items():
            if not np.isfinite(value):
                raise NonFiniteLossError(name, report)
        self.optimizer.zero_grad(set_to_none=True)
        loss.backward()
        if self.config.grad_clip > 0:
            torch.nn.utils.clip_grad_norm_(self.model.parameters(), self.config.grad_clip)
        self.optimizer.step()
        self.step += 1
        return report

    def save_checkpoint(self, path: str | Path) -> None:
        payload = {
            "format": CHECKPOINT_FORMAT,
            "config_json": config_header(self.model),
            "train_config": config_to_dict(self.config),
            "encoder": self.model.encoder.state_dict(),
            "decoder": self.model.decoder.state_dict(),
            "optimizer": self.optimizer.state_dict(),
            "step": self.step,
            "rng": _rng_snapshot(),
        }
        torch.save(payload, path)

    @classmethod
    def load_checkpoint(cls, path: str | Path) -> "Trainer":
        payload = read_checkpoint(path)
        if "train_config" not in payload:
            raise CheckpointError(f"{path} is a model-only checkpoint, cannot resume")
        config = config_from_dict(payload["train_config"])
        trainer = cls(config, _from_checkpoint=True)
        try:
            trainer.model.encoder.load_state_dict(payload["encoder"])
            trainer.model.decoder.load_state_dict(payload["decoder"])
        except RuntimeError as e:
            raise CheckpointError(f"parameter shape mismatch: {e}") from e
        trainer.optimizer.load_state_dict(payload["optimizer"])
        trainer.step = int(payload["step"])
        _rng_restore(payload["rng"])
        return trainer


def run_training(
    config: TrainConfig,
    paths: list[Path] | None = None,
    trainer: Trainer | None = None,
    max_steps: int | None = None,
) -> tuple[Trainer, list[LossReport]]:
    """Train until total_steps (or max_steps), cycling the dataset in a fixed
    order. Bundles are extracted once per image and reused."""
    if paths is None:
        paths = [p for p, _, _ in list_image_folder(config.dataset_root)]
    trainer = trainer or Trainer(config)
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    images, bundles = prepare_batch(paths, config.image_size, config.descriptor)
    n = len(bundles)
    stop = min(config.total_steps, trainer.step + max_steps) if max_steps else config.total_steps
    reports = []
    with open(out_dir / "metrics.jsonl", "a") as metrics:
        while trainer.step < stop:
            idx = [
                (trainer.step * config.batch_size + j) % n
                for j in range(min(config.batch_size, n))
            ]
            lr = lr_at(trainer.step, config)
            report = trainer.train_step(images[idx], [bundles[i] for i in idx])
            reports.append(report)
            metrics.write(
                json.dumps({"step": trainer.step, "lr": lr, **report.to_dict()}) + "\n"
            )
            if trainer.step % 50 == 0 or trainer.step == stop:
                log.info("step %d lr %.2e total %.4f", trainer.step, lr, report.total)
            if config.checkpoint_every and trainer.step % config.checkpoint_every == 0:
                trainer.save_checkpoint(out_dir / f"ckpt_{trainer.step:07d}.pt")
    trainer.save_checkpoint(out_dir / "ckpt_last.pt")
    return trainer, reports
