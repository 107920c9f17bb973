"""HTTP inference service behind the editing studio.

The checkpoint is loaded once and held read-only; per-session descriptor
bundles live server-side with an undo stack, so clients only ship small
edit scripts, never full assignment arrays.
"""

from __future__ import annotations

import base64
import io
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
import torch
from fastapi import FastAPI, HTTPException, UploadFile
from PIL import Image
from pydantic import BaseModel

from .data import resize_centre_crop
from .descriptors import (
    DescriptorBundle,
    DescriptorConfig,
    apply_edits,
    extract_bundle,
    render_segmentation,
    srgb_to_lab,
)
from .evaluation import parameter_hash, psnr, ssim
from .model import load_model_checkpoint
from .training import config_from_dict
from .viz import image_png_bytes

SCHEMA_VERSION = 1
MAX_UPLOAD_BYTES = 8 * 1024 * 1024
MAX_SIDE = 1024
UNDO_DEPTH = 10


@dataclass
class Session:
    bundle: DescriptorBundle
    original: torch.Tensor
    thumbnail_png: bytes
    created_at: float = field(default_factory=time.time)
    last_used: float = field(default_factory=time.time)
    undo: list[DescriptorBundle] = field(default_factory=list)
    edit_count: int = 0
    lock: threading.Lock = field(default_factory=threading.Lock)


class EditRequest(BaseModel):
    session_id: str
    edits: list[dict]


class ReconstructRequest(BaseModel):
    session_id: str


def _b64png(img: torch.Tensor) -> str:
    return base64.b64encode(image_png_bytes(img)).decode("ascii")


def create_app(
    checkpoint_path: str | None,
    session_ttl: float = 1800.0,
    descriptor_config: DescriptorConfig | None = None,
) -> FastAPI:
    app = FastAPI(title="visualsplit-service")
    started = time.time()
    sessions: dict[str, Session] = {}
    sessions_lock = threading.Lock()

    model = None
    checkpoint_id = None
    dcfg = descriptor_config or DescriptorConfig()
    patch = 16
    if checkpoint_path is not None:
        model, payload = load_model_checkpoint(checkpoint_path)
        model.eval()
        for p in model.parameters():
            p.requires_grad_(False)
        checkpoint_id = parameter_hash(model)[:16]
        patch = model.encoder_config.patch_size
        tc = payload.get("train_config")
        if descriptor_config is None and tc:
            dcfg = config_from_dict(tc).descriptor
    app.state.model = model
    app.state.initial_parameter_hash = checkpoint_id

    def meta() -> dict:
        return {"schema_version": SCHEMA_VERSION, "checkpoint": checkpoint_id}

    def evict_expired() -> None:
        now = time.time()
        with sessions_lock:
            for sid in [s for s, sess in sessions.items() if now - sess.last_used > session_ttl]:
                del sessions[sid]

    def get_session(session_id: str) -> Session:
        evict_expired()
        with sessions_lock:
            sess = sessions.get(session_id)
        if sess is None:
            raise HTTPException(status_code=404, detail="unknown or expired session")
        sess.last_used = time.time()
        return sess

    def previews(bundle: DescriptorBundle) -> dict:
        seg = render_segmentation(bundle.segmentation)
        return {
            "edges": _b64png(bundle.edges.normalized.clamp(0, 1) ** 0.5),
            "segmentation": _b64png(seg.display_rgb),
        }

    def descriptor_payload(bundle: DescriptorBundle) -> dict:
        return {
            "previews": previews(bundle),
            "histogram": bundle.histogram.weights.tolist(),
            "histogram_centres": bundle.histogram.bin_centres.tolist(),
            "histogram_mean_L": bundle.histogram.mean_level(),
            "centroids": bundle.segmentation.centroids.tolist(),
            "labels": bundle.segmentation.argmax_labels().to(torch.uint8).tolist(),
            "height": bundle.height,
            "width": bundle.width,
        }

    @app.get("/health")
    def health():
        return {
            **meta(),
            "status": "ok",
            "uptime": time.time() - started,
            "sessions": len(sessions),
        }

    @app.get("/session/{session_id}")
    def session_info(session_id: str):
        sess = get_session(session_id)
        return {
            **meta(),
            "session_id": session_id,
            "created_at": sess.created_at,
            "edit_count": sess.edit_count,
            "undo_depth": len(sess.undo),
        }

    @app.post("/extract")
    async def extract(file: UploadFile):
        payload = await file.read()
        if len(payload) > MAX_UPLOAD_BYTES:
            raise HTTPException(status_code=413, detail="upload exceeds size limit")
        try:
            with Image.open(io.BytesIO(payload)) as im:
                arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
        except Exception:
            raise HTTPException(status_code=400, detail="undecodable image payload")
        img = torch.from_numpy(arr)
        h, w = img.shape[:2]
        if max(h, w) > MAX_SIDE:
            img = resize_centre_crop(img, MAX_SIDE * min(h, w) // max(h, w))
            h, w = img.shape[:2]
        # Crop to patch multiples so the session is reconstructable as-is.
        ch, cw = (h // patch) * patch, (w // patch) * patch
        if ch == 0 or cw == 0:
            raise HTTPException(status_code=400, detail=f"image smaller than one {patch}px patch")
        img = img[(h - ch) // 2 : (h - ch) // 2 + ch, (w - cw) // 2 : (w - cw) // 2 + cw]
        bundle = extract_bundle(img, dcfg)
        thumb = image_png_bytes(resize_centre_crop(img, min(128, ch, cw)))
        session_id = uuid.uuid4().hex
        with sessions_lock:
            sessions[session_id] = Session(bundle=bundle, original=img, thumbnail_png=thumb)
        return {**meta(), "session_id": session_id, **descriptor_payload(bundle)}

    @app.post("/edit")
    def edit(req: EditRequest):
        sess = get_session(req.session_id)
        with sess.lock:
            bundle = sess.bundle
            for op in req.edits:
                if op.get("op") == "undo":
                    if sess.undo:
                        bundle = sess.undo.pop()
                    continue
                try:
                    new_bundle = apply_edits(bundle, [op])
                except (ValueError, IndexError, KeyError, TypeError) as e:
                    raise HTTPException(status_code=422, detail=f"invalid edit op: {e}")
                sess.undo.append(bundle)
                del sess.undo[:-UNDO_DEPTH]
                bundle = new_bundle
                sess.edit_count += 1
            sess.bundle = bundle
        return {**meta(), "session_id": req.session_id, **descriptor_payload(sess.bundle)}

    @app.post("/reconstruct")
    def reconstruct(req: ReconstructRequest):
        if model is None:
            raise HTTPException(status_code=503, detail="no checkpoint loaded")
        sess = get_session(req.session_id)
        with sess.lock:
            bundle = sess.bundle
            edited = sess.edit_count > 0
        with torch.no_grad():
            recon = model.reconstruct_bundle(bundle)
        out = {
            **meta(),
            "session_id": req.session_id,
            "image": _b64png(recon),
            "mean_L": float(srgb_to_lab(recon)[..., 0].mean()),
        }
        if not edited:
            out["psnr"] = psnr(recon, sess.original)
            out["ssim"] = ssim(recon, sess.original)
            if out["psnr"] == float("inf"):
                out["psnr"] = 1e9
        return out

    return app
