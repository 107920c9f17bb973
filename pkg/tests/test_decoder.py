import pytest
import torch

from visualsplit.decoder import DecoderConfig, LightDecoder
from visualsplit.encoder import ConditionedEncoder, EncoderConfig
from visualsplit.model import VisualSplitModel


def _rand_rep(enc, planes_shape=(1, 3, 16, 16), seed=0):
    g = torch.Generator().manual_seed(seed)
    planes = torch.rand(*planes_shape, generator=g)
    hist = torch.rand(planes_shape[0], enc.config.hist_bins, generator=g)
    return enc(planes, hist / hist.sum(-1, keepdim=True))


def test_output_shape_and_range(tiny_encoder_config, tiny_decoder_config):
    torch.manual_seed(0)
    enc = ConditionedEncoder(tiny_encoder_config)
    dec = LightDecoder(tiny_decoder_config, tiny_encoder_config)
    rep = _rand_rep(enc, (2, 3, 16, 24))
    out = dec(rep)
    assert out.shape == (2, 16, 24, 3)
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_determinism(tiny_encoder_config, tiny_decoder_config):
    torch.manual_seed(1)
    enc = ConditionedEncoder(tiny_encoder_config)
    dec = LightDecoder(tiny_decoder_config, tiny_encoder_config)
    rep = _rand_rep(enc)
    assert torch.equal(dec(rep), dec(rep))


def test_depth_must_be_shallower(tiny_encoder_config):
    with pytest.raises(ValueError):
        LightDecoder(DecoderConfig(embed_dim=16, depth=4, num_heads=4, patch_size=4),
                     tiny_encoder_config)
    with pytest.raises(ValueError):
        LightDecoder(DecoderConfig(embed_dim=16, depth=2, num_heads=4, patch_size=8),
                     tiny_encoder_config)


def test_default_decoder_much_smaller_than_encoder():
    model = VisualSplitModel(EncoderConfig(), DecoderConfig())
    enc_params = sum(p.numel() for p in model.encoder.parameters())
    dec_params = sum(p.numel() for p in model.decoder.parameters())
    assert dec_params < 0.35 * enc_params


def test_end_to_end_gradient_flow(tiny_encoder_config, tiny_decoder_config):
    torch.manual_seed(2)
    model = VisualSplitModel(tiny_encoder_config, tiny_decoder_config).double()
    planes = torch.rand(1, 3, 8, 8, dtype=torch.float64, requires_grad=True)
    g = torch.Generator().manual_seed(3)
    hist = torch.rand(20, generator=g, dtype=torch.float64)
    hist = hist / hist.sum()
    target = torch.rand(1, 8, 8, 3, generator=g, dtype=torch.float64)

    def fn(p):
        return ((model(p, hist.unsqueeze(0)) - target) ** 2).mean()

    fn(planes).backward()
    flat = planes.detach().clone().reshape(-1)
    h = 1e-6
    gperm = torch.Generator().manual_seed(4)
    for i in torch.randperm(flat.numel(), generator=gperm)[:6].tolist():
        orig = float(flat[i])
        flat[i] = orig + h
        hi = float(fn(flat.reshape(planes.shape)))
        flat[i] = orig - h
        lo = float(fn(flat.reshape(planes.shape)))
        flat[i] = orig
        numeric = (hi - lo) / (2 * h)
        denom = max(abs(numeric), 1e-6)
        assert abs(float(planes.grad.reshape(-1)[i]) - numeric) / denom < 1e-3
