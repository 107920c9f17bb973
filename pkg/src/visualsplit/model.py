"""Encoder + decoder pairing and the self-describing checkpoint archive."""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import torch
import torch.nn as nn
from torch import Tensor

from .decoder import DecoderConfig, LightDecoder
from .descriptors import DescriptorBundle, encoder_planes
from .encoder import ConditionedEncoder, EncodedRepresentation, EncoderConfig

CHECKPOINT_FORMAT = "visualsplit-ckpt-1"


class CheckpointError(ValueError):
    pass


class VisualSplitModel(nn.Module):
    def __init__(self, encoder_config: EncoderConfig, decoder_config: DecoderConfig):
        super().__init__()
        self.encoder_config = encoder_config
        self.decoder_config = decoder_config
        self.encoder = ConditionedEncoder(encoder_config)
        self.decoder = LightDecoder(decoder_config, encoder_config)

    def forward(self, planes: Tensor, hist_weights: Tensor) -> Tensor:
        return self.decoder(self.encoder(planes, hist_weights))

    def encode_bundle(self, bundle: DescriptorBundle) -> EncodedRepresentation:
        planes = encoder_planes(bundle).unsqueeze(0)
        dtype = next(self.parameters()).dtype
        return self.encoder(
            planes.to(dtype), bundle.histogram.weights.unsqueeze(0).to(dtype)
        )

    def reconstruct_bundle(self, bundle: DescriptorBundle) -> Tensor:
        """Single bundle -> (H, W, 3) reconstruction."""
        return self.decoder(self.encode_bundle(bundle))[0]


def config_header(model: VisualSplitModel) -> str:
    return json.dumps(
        {
            "encoder": asdict(model.encoder_config),
            "decoder": asdict(model.decoder_config),
        },
        sort_keys=True,
    )


def save_model_checkpoint(
    model: VisualSplitModel, path: str | Path, extra: dict | None = None
) -> None:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "config_json": config_header(model),
        "encoder": model.encoder.state_dict(),
        "decoder": model.decoder.state_dict(),
    }
    if extra:
        payload.update(extra)
    torch.save(payload, path)


def read_checkpoint(path: str | Path) -> dict:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"unrecognized checkpoint format in {path}")
    return payload


def load_model_checkpoint(
    path: str | Path, expected_encoder_config: EncoderConfig | None = None
) -> tuple[VisualSplitModel, dict]:
    payload = read_checkpoint(path)
    cfg = json.loads(payload["config_json"])
    enc_cfg = EncoderConfig(**{**cfg["encoder"], "block_pattern": tuple(cfg["encoder"]["block_pattern"])})
    dec_cfg = DecoderConfig(**cfg["decoder"])
    if expected_encoder_config is not None and enc_cfg != expected_encoder_config:
        raise CheckpointError(
            f"checkpoint encoder config {enc_cfg} does not match expected "
            f"{expected_encoder_config}"
        )
    model = VisualSplitModel(enc_cfg, dec_cfg)
    try:
        model.encoder.load_state_dict(payload["encoder"])
        model.decoder.load_state_dict(payload["decoder"])
    except RuntimeError as e:
        raise CheckpointError(f"parameter shape mismatch: {e}") from e
    return model, payload
