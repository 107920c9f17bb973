"""The .vsd descriptor-bundle container ("VSD1").

One JSON manifest line (format version, image size, extraction config,
named-array table with dtype/shape/offset), a newline, then the raw
little-endian float32 array payloads in manifest order.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np
import torch

from .descriptors import (
    ColourSegmentationMap,
    DescriptorBundle,
    DescriptorConfig,
    EdgeMap,
    GreyLevelHistogram,
)

FORMAT_VERSION = "VSD1"


class VSDFormatError(ValueError):
    pass


def _arrays(bundle: DescriptorBundle) -> dict[str, np.ndarray]:
    t = lambda x: x.detach().cpu().to(torch.float32).numpy()
    return {
        "edge_magnitude": t(bundle.edges.magnitude),
        "seg_assignments": t(bundle.segmentation.assignments),
        "seg_centroids": t(bundle.segmentation.centroids),
        "hist_weights": t(bundle.histogram.weights),
        "hist_centres": t(bundle.histogram.bin_centres),
    }


def save_bundle(bundle: DescriptorBundle, path: str | Path) -> None:
    arrays = _arrays(bundle)
    table = []
    offset = 0
    for name, arr in arrays.items():
        table.append(
            {"name": name, "dtype": "<f4", "shape": list(arr.shape), "offset": offset}
        )
        offset += arr.nbytes
    manifest = {
        "format": FORMAT_VERSION,
        "height": bundle.height,
        "width": bundle.width,
        "edge_normalization": bundle.edges.normalization,
        "extraction_config": asdict(bundle.config),
        "arrays": table,
    }
    with open(path, "wb") as f:
        f.write(json.dumps(manifest, sort_keys=True).encode("utf-8"))
        f.write(b"\n")
        for arr in arrays.values():
            f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_bundle(path: str | Path) -> DescriptorBundle:
    with open(path, "rb") as f:
        header = f.readline()
        payload = f.read()
    try:
        manifest = json.loads(header.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise VSDFormatError(f"unreadable manifest in {path}") from e
    if manifest.get("format") != FORMAT_VERSION:
        raise VSDFormatError(f"unknown format version {manifest.get('format')!r}")
    arrays = {}
    for entry in manifest["arrays"]:
        if entry["dtype"] != "<f4":
            raise VSDFormatError(f"unsupported dtype {entry['dtype']!r}")
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        start = entry["offset"]
        end = start + count * 4
        if end > len(payload):
            raise VSDFormatError("truncated payload")
        arr = np.frombuffer(payload[start:end], dtype="<f4").reshape(entry["shape"])
        arrays[entry["name"]] = torch.from_numpy(arr.copy())
    config = DescriptorConfig(**manifest["extraction_config"])
    return DescriptorBundle(
        edges=EdgeMap(
            magnitude=arrays["edge_magnitude"],
            normalization=float(manifest["edge_normalization"]),
        ),
        segmentation=ColourSegmentationMap(
            assignments=arrays["seg_assignments"],
            centroids=arrays["seg_centroids"],
            temperature=config.temperature,
        ),
        histogram=GreyLevelHistogram(
            weights=arrays["hist_weights"],
            bin_centres=arrays["hist_centres"],
            bandwidth=config.bandwidth,
        ),
        config=config,
        height=int(manifest["height"]),
        width=int(manifest["width"]),
    )
