import csv
import math
from dataclasses import replace

import pytest
import torch

from conftest import structured_image
from visualsplit.descriptors import DescriptorConfig, extract_bundle
from visualsplit.evaluation import (
    ProbeConfig,
    input_independence_report,
    parameter_hash,
    probe,
    psnr,
    ssim,
    sweep_clusters,
)
from visualsplit.model import VisualSplitModel
from visualsplit.toydata import write_toy_dataset
from visualsplit.training import Trainer


@pytest.fixture
def tiny_model(tiny_encoder_config, tiny_decoder_config):
    torch.manual_seed(0)
    return VisualSplitModel(tiny_encoder_config, tiny_decoder_config)


@pytest.fixture
def toy_root(tmp_path):
    return write_toy_dataset(tmp_path / "toy", num_classes=3, per_class=4, size=16)


TOY_DESCRIPTOR = DescriptorConfig(num_clusters=3, num_bins=20, seed=0)


# --------------------------------------------------------------------- psnr


def test_psnr_known_values():
    a = torch.zeros(8, 8, 3, dtype=torch.float64)
    assert abs(psnr(a + 0.1, a) - 20.0) < 1e-9  # mse 0.01
    assert abs(psnr(a + 0.5, a) - 10.0 * math.log10(4.0)) < 1e-9
    assert psnr(a, a) == math.inf
    with pytest.raises(ValueError):
        psnr(a, torch.zeros(8, 9, 3))


def test_psnr_matches_scalar_oracle():
    g = torch.Generator().manual_seed(0)
    a = torch.rand(5, 5, 3, generator=g, dtype=torch.float64)
    b = torch.rand(5, 5, 3, generator=g, dtype=torch.float64)
    mse = sum(
        (float(a[i, j, c]) - float(b[i, j, c])) ** 2
        for i in range(5)
        for j in range(5)
        for c in range(3)
    ) / 75
    assert abs(psnr(a, b) - 10.0 * math.log10(1.0 / mse)) < 1e-9


# --------------------------------------------------------------------- ssim


def test_ssim_identity_is_one():
    g = torch.Generator().manual_seed(1)
    a = torch.rand(16, 16, 3, generator=g, dtype=torch.float64)
    assert abs(ssim(a, a) - 1.0) < 1e-9


def test_ssim_constant_offset_closed_form():
    # constant images: variances and covariance vanish, so
    # ssim = (2*m1*m2 + c1) / (m1^2 + m2^2 + c1)
    m1, m2, c1 = 0.4, 0.6, 0.01**2
    a = torch.full((16, 16, 3), m1, dtype=torch.float64)
    b = torch.full((16, 16, 3), m2, dtype=torch.float64)
    expected = (2 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1)
    assert abs(ssim(a, b) - expected) < 1e-6


def test_ssim_anticorrelated_is_negative():
    yy, xx = torch.meshgrid(torch.arange(16), torch.arange(16), indexing="ij")
    board = ((yy + xx) % 2).double() * 0.8 + 0.1
    a = board.unsqueeze(-1).expand(16, 16, 3)
    b = (1.0 - board).unsqueeze(-1).expand(16, 16, 3)
    assert ssim(a, b) < 0.0


def test_ssim_rejects_small_images():
    with pytest.raises(ValueError):
        ssim(torch.zeros(8, 8, 3), torch.zeros(8, 8, 3))
    with pytest.raises(ValueError):
        ssim(torch.zeros(16, 16, 3), torch.zeros(16, 17, 3))


def test_ssim_bounded():
    g = torch.Generator().manual_seed(2)
    a = torch.rand(16, 16, 3, generator=g)
    b = torch.rand(16, 16, 3, generator=g)
    assert -1.0 <= ssim(a, b) <= 1.0


# ----------------------------------------------------------- parameter hash


def test_parameter_hash_detects_any_change(tiny_model, tiny_encoder_config, tiny_decoder_config):
    torch.manual_seed(0)
    twin = VisualSplitModel(tiny_encoder_config, tiny_decoder_config)
    assert parameter_hash(tiny_model) == parameter_hash(twin)
    with torch.no_grad():
        next(twin.parameters()).view(-1)[0] += 1e-7
    assert parameter_hash(tiny_model) != parameter_hash(twin)


# -------------------------------------------------------------------- probe


def test_probe_config_validation():
    with pytest.raises(ValueError):
        ProbeConfig(mode="knn")
    with pytest.raises(ValueError):
        ProbeConfig(representation="cls")
    with pytest.raises(ValueError):
        ProbeConfig(train_fraction=0.0)


def test_linear_probe_deterministic_and_frozen(tiny_model, toy_root):
    cfg = ProbeConfig(mode="linear", epochs=10, image_size=16, seed=3)
    before = parameter_hash(tiny_model)
    r1 = probe(tiny_model, toy_root, cfg, TOY_DESCRIPTOR)
    r2 = probe(tiny_model, toy_root, cfg, TOY_DESCRIPTOR)
    assert parameter_hash(tiny_model) == before
    assert r1.accuracy == r2.accuracy
    assert 0.0 <= r1.accuracy <= 1.0
    assert set(r1.per_class) == {"class_00", "class_01", "class_02"}


def test_probe_split_reports_held_out_accuracy(tiny_model, toy_root):
    cfg = ProbeConfig(mode="linear", epochs=10, image_size=16, seed=3, train_fraction=0.5)
    r = probe(tiny_model, toy_root, cfg, TOY_DESCRIPTOR)
    assert 0.0 <= r.accuracy <= 1.0
    with pytest.raises(ValueError):
        # fraction so high every sample lands in the train split
        probe(tiny_model, toy_root, replace(cfg, train_fraction=0.99), TOY_DESCRIPTOR)


def test_finetune_probe_updates_encoder(tiny_model, toy_root):
    cfg = ProbeConfig(mode="finetune", epochs=2, image_size=16, seed=3)
    before = parameter_hash(tiny_model.encoder)
    probe(tiny_model, toy_root, cfg, TOY_DESCRIPTOR)
    assert parameter_hash(tiny_model.encoder) != before


def test_probe_rejects_single_class(tiny_model, tmp_path):
    root = write_toy_dataset(tmp_path / "one", num_classes=2, per_class=2, size=16)
    import shutil

    shutil.rmtree(root / "class_01")
    with pytest.raises(ValueError):
        probe(tiny_model, root, ProbeConfig(image_size=16), TOY_DESCRIPTOR)


# ------------------------------------------------------- input independence


def test_input_independence_report_structure(tiny_model):
    img = structured_image(0, 16)
    report = input_independence_report(tiny_model, img, [-10.0, 0.0, 10.0], TOY_DESCRIPTOR)
    assert math.isfinite(report["baseline_mean_L"])
    assert [row["delta_L"] for row in report["rows"]] == [-10.0, 0.0, 10.0]
    zero_row = report["rows"][1]
    assert zero_row["edge_l1_vs_baseline"] == 0.0
    assert abs(zero_row["mean_L"] - report["baseline_mean_L"]) < 1e-9


# -------------------------------------------------------------------- sweep


def test_sweep_emits_csv(tiny_train_config, toy_root, tmp_path):
    cfg = replace(
        tiny_train_config,
        total_steps=3,
        warmup_steps=1,
        dataset_root=str(toy_root),
        descriptor=TOY_DESCRIPTOR,
        out_dir=str(tmp_path / "sweep"),
    )
    csv_path = tmp_path / "sweep.csv"
    rows = sweep_clusters([2, 3], cfg, ProbeConfig(epochs=5, image_size=16), csv_path)
    assert [r["K"] for r in rows] == [2, 3]
    assert all(math.isfinite(r["psnr"]) and math.isfinite(r["ssim"]) for r in rows)
    with open(csv_path, newline="") as f:
        parsed = list(csv.DictReader(f))
    assert [int(r["K"]) for r in parsed] == [2, 3]
    assert set(parsed[0]) == {"K", "accuracy", "psnr", "ssim"}
    with pytest.raises(ValueError):
        sweep_clusters([], cfg, ProbeConfig(image_size=16))
