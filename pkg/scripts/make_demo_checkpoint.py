"""Produce a small servable checkpoint quickly.

Trains a patch-16 model for a handful of steps on synthetic images — enough
to exercise the service and studio end to end (extract, edit, reconstruct)
without waiting for a real training run.
"""

import argparse
import math

import torch

from visualsplit.decoder import DecoderConfig
from visualsplit.descriptors import DescriptorConfig, extract_bundle
from visualsplit.encoder import EncoderConfig
from visualsplit.training import TrainConfig, Trainer


def demo_image(i: int, size: int = 64) -> torch.Tensor:
    ys, xs = torch.meshgrid(
        torch.linspace(0, 1, size), torch.linspace(0, 1, size), indexing="ij"
    )
    r = 0.5 + 0.5 * torch.sin(2 * math.pi * (xs * (i + 1) + 0.3 * i))
    g = 0.5 + 0.5 * torch.cos(2 * math.pi * (ys * (i + 2)))
    b = (xs + ys) / 2
    return torch.stack([r, g, b], dim=-1)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out", help="checkpoint path to write")
    parser.add_argument("--steps", type=int, default=10)
    parser.add_argument("--size", type=int, default=64)
    args = parser.parse_args()

    config = TrainConfig(
        image_size=args.size,
        batch_size=4,
        total_steps=max(args.steps, 2),
        warmup_steps=1,
        base_lr=1e-3,
        checkpoint_every=0,
        encoder=EncoderConfig(patch_size=16, embed_dim=64, depth=2, num_heads=4,
                              hist_token_count=4),
        decoder=DecoderConfig(embed_dim=32, depth=1, num_heads=4, patch_size=16),
        descriptor=DescriptorConfig(seed=0),
    )
    images = torch.stack([demo_image(i, args.size) for i in range(4)])
    bundles = [extract_bundle(images[i], config.descriptor) for i in range(4)]
    trainer = Trainer(config)
    for step in range(args.steps):
        metrics = trainer.train_step(images, bundles)
        if step % 5 == 0:
            print(f"step {step}: loss {metrics.total:.4f}")
    trainer.save_checkpoint(args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
