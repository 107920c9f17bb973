"""Differentiable sRGB <-> CIE-LAB conversion (D65 white point).

All functions accept tensors shaped (..., 3) and preserve dtype, so the
same code path serves float32 training and float64 gradient checks.
"""

import torch
from torch import Tensor

# D65 reference white.
_WHITE = (0.95047, 1.0, 1.08883)

_RGB_TO_XYZ = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
]

_DELTA = 6.0 / 29.0


def _srgb_to_linear(c: Tensor) -> Tensor:
    return torch.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(c: Tensor) -> Tensor:
    c = c.clamp(min=0.0)
    return torch.where(c <= 0.0031308, c * 12.92, 1.055 * c ** (1.0 / 2.4) - 0.055)


def _lab_f(t: Tensor) -> Tensor:
    # Clamp inside the cube-root branch so autograd never sees t**(1/3) at t<=0.
    cube = torch.clamp(t, min=_DELTA**3) ** (1.0 / 3.0)
    lin = t / (3.0 * _DELTA**2) + 4.0 / 29.0
    return torch.where(t > _DELTA**3, cube, lin)


def _lab_f_inv(f: Tensor) -> Tensor:
    return torch.where(f > _DELTA, f**3, 3.0 * _DELTA**2 * (f - 4.0 / 29.0))


def srgb_to_lab(rgb: Tensor) -> Tensor:
    """Map sRGB values in [0, 1] to LAB, shape (..., 3) -> (..., 3)."""
    if rgb.shape[-1] != 3:
        raise ValueError(f"expected trailing channel dim of 3, got {rgb.shape}")
    lin = _srgb_to_linear(rgb)
    m = torch.tensor(_RGB_TO_XYZ, dtype=rgb.dtype, device=rgb.device)
    xyz = lin @ m.T
    white = torch.tensor(_WHITE, dtype=rgb.dtype, device=rgb.device)
    f = _lab_f(xyz / white)
    fx, fy, fz = f.unbind(-1)
    L = 116.0 * fy - 16.0
    a = 500.0 * (fx - fy)
    b = 200.0 * (fy - fz)
    return torch.stack([L, a, b], dim=-1)


def lab_to_srgb(lab: Tensor) -> Tensor:
    """Inverse of :func:`srgb_to_lab`; output clamped to [0, 1]."""
    if lab.shape[-1] != 3:
        raise ValueError(f"expected trailing channel dim of 3, got {lab.shape}")
    L, a, b = lab.unbind(-1)
    fy = (L + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0
    white = torch.tensor(_WHITE, dtype=lab.dtype, device=lab.device)
    xyz = _lab_f_inv(torch.stack([fx, fy, fz], dim=-1)) * white
    m = torch.tensor(_RGB_TO_XYZ, dtype=lab.dtype, device=lab.device)
    lin = xyz @ torch.linalg.inv(m).T
    return _linear_to_srgb(lin).clamp(0.0, 1.0)
