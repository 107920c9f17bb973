#!/usr/bin/env python3
"""Small-scale reconstruction demo: overfit the default model on four
synthetic 64x64 images (with photometric augmentation) and write side-by-side
originals, reconstructions, and descriptor-edited variants.

Usage: python scripts/overfit_demo.py OUT_DIR [--steps N]
"""

import argparse
import time
from dataclasses import replace
from pathlib import Path

import torch

from visualsplit.augment import photometric_pool
from visualsplit.descriptors import DescriptorConfig, extract_bundle, recolour_region
from visualsplit.evaluation import psnr, reconstruct_with_histogram_shift
from visualsplit.toydata import desk_scene
from visualsplit.training import TrainConfig, Trainer
from visualsplit.viz import save_image


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir")
    parser.add_argument("--steps", type=int, default=1200)
    args = parser.parse_args()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    base = [desk_scene(i) for i in range(4)]
    config = DescriptorConfig()
    images, bundles = photometric_pool(
        base,
        config,
        brightness_deltas=(-20.0, -10.0, 0.0, 10.0, 20.0),
        recolours_per_image=6,
    )
    base_bundles = [extract_bundle(img, config) for img in base]
    print(f"training pool: {len(bundles)} image/bundle pairs")

    train_config = TrainConfig(
        image_size=64, batch_size=8, total_steps=max(args.steps, 100),
        warmup_steps=50, base_lr=3e-3, grad_clip=5.0, seed=0, descriptor=config,
    )
    trainer = Trainer(train_config)
    n = len(bundles)
    start = time.time()
    while trainer.step < args.steps:
        idx = [(trainer.step * 8 + j) % n for j in range(8)]
        report = trainer.train_step(images[idx], [bundles[i] for i in idx])
        if trainer.step % 100 == 0:
            print(f"step {trainer.step} loss {report.total:.4f} ({time.time() - start:.0f}s)")

    model = trainer.model.eval()
    trainer.save_checkpoint(out / "model.pt")
    for i, bundle in enumerate(base_bundles):
        with torch.no_grad():
            recon = model.reconstruct_bundle(bundle)
        save_image(base[i], out / f"img{i}_original.png")
        save_image(recon, out / f"img{i}_recon.png")
        save_image(reconstruct_with_histogram_shift(model, bundle, 20.0),
                   out / f"img{i}_brighter.png")
        labels = bundle.segmentation.argmax_labels()
        k = int(torch.bincount(labels.flatten(), minlength=config.num_clusters).argmax())
        c = bundle.segmentation.centroids[k]
        edited = replace(
            bundle,
            segmentation=recolour_region(
                bundle.segmentation, k, (float(c[0] + 30.0), float(c[1] - 30.0))
            ),
        )
        with torch.no_grad():
            save_image(model.reconstruct_bundle(edited), out / f"img{i}_recoloured.png")
        print(f"img {i}: psnr {psnr(recon, base[i]):.2f} dB")
    print(f"outputs written to {out}")


if __name__ == "__main__":
    main()
