"""HTTP inference service: prompt-conditioned prediction and interpolation over
one loaded checkpoint. Stateless across requests; the model is loaded once at
startup and treated as read-only. Every request carries its own seed."""

from __future__ import annotations

import base64
import io
import threading
import time
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from PIL import Image
from pydantic import BaseModel, Field

from .data import DatasetManifest, load_case, load_manifest
from .errors import ValidationError
from .prompt import PersonaModel


class PredictRequest(BaseModel):
    case_id: str | None = None
    image_b64: str | None = None  # base64 PNG, 8-bit grayscale
    prompt: str
    seed: int
    k: int | None = Field(default=None, ge=1)
    threshold: float | None = Field(default=None, gt=0.0, lt=1.0)


class InterpolateRequest(BaseModel):
    case_id: str | None = None
    image_b64: str | None = None
    prompt_a: str
    prompt_b: str
    t: float
    seed: int
    k: int | None = Field(default=None, ge=1)
    threshold: float | None = Field(default=None, gt=0.0, lt=1.0)


def _png_b64(values: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(values.astype(np.uint8), mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _decode_inline_image(image_b64: str) -> np.ndarray:
    try:
        img = Image.open(io.BytesIO(base64.b64decode(image_b64)))
        return np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    except Exception as exc:
        raise HTTPException(status_code=400, detail=f"undecodable inline image: {exc}") from exc


def create_app(
    checkpoint_dir: str | None = None,
    data_dir: str | None = None,
    model: PersonaModel | None = None,
    manifest: DatasetManifest | None = None,
    workers: int = 4,
    default_k: int = 10,
    default_threshold: float = 0.5,
) -> FastAPI:
    """Build the app; the checkpoint/manifest load runs in the lifespan hook, so
    requests before startup see 409 / a "loading" health status."""
    state = {"model": model, "manifest": manifest, "started": time.monotonic()}
    slots = threading.BoundedSemaphore(workers)

    @asynccontextmanager
    async def lifespan(_app: FastAPI):
        if state["model"] is None and checkpoint_dir is not None:
            state["model"] = PersonaModel.from_checkpoint(checkpoint_dir)
        if state["manifest"] is None and data_dir is not None:
            state["manifest"] = load_manifest(data_dir)
        yield

    app = FastAPI(title="prosona inference service", lifespan=lifespan)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def _model() -> PersonaModel:
        if state["model"] is None:
            raise HTTPException(status_code=409, detail="model not loaded")
        return state["model"]

    def _resolve_image(case_id: str | None, image_b64: str | None) -> np.ndarray:
        if (case_id is None) == (image_b64 is None):
            raise HTTPException(status_code=400, detail="provide exactly one of case_id / image_b64")
        if image_b64 is not None:
            return _decode_inline_image(image_b64)
        if state["manifest"] is None:
            raise HTTPException(status_code=409, detail="no dataset loaded")
        try:
            return load_case(state["manifest"], case_id).image
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown case_id {case_id!r}")
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    def _respond(prob: np.ndarray, profile, threshold: float, started: float) -> dict:
        model = _model()
        model_info = {
            "checkpoint_id": model.meta.get("checkpoint_id", "unattached"),
            "latent_dim": model.latent_dim,
        }
        return {
            "mask_png": _png_b64((prob >= threshold) * np.uint8(255)),
            "prob_map_png": _png_b64(np.round(prob * 255.0)),
            "similarity": profile.to_lists(),
            "latency_ms": (time.monotonic() - started) * 1000.0,
            "model_info": model_info,
        }

    def _guarded(fn):
        if not slots.acquire(blocking=False):
            raise HTTPException(status_code=429, detail="saturated; retry later")
        try:
            return fn()
        except ValidationError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        finally:
            slots.release()

    @app.get("/health")
    def health() -> dict:
        loaded = state["model"] is not None
        return {
            "status": "ready" if loaded else "loading",
            "checkpoint_id": state["model"].meta.get("checkpoint_id") if loaded else None,
            "uptime_s": time.monotonic() - state["started"],
        }

    @app.get("/cases")
    def cases() -> list[dict]:
        manifest = state["manifest"]
        if manifest is None:
            return []
        return [
            {"case_id": c.case_id, "split": c.split, "annotator_count": len(c.mask_paths)}
            for c in manifest.cases
        ]

    @app.get("/prompts")
    def prompts() -> dict:
        manifest = state["manifest"]
        return manifest.prompt_catalog() if manifest is not None else {}

    @app.get("/case/{case_id}")
    def case_data(case_id: str) -> dict:
        """Underlay image and ground-truth masks for the explorer, as PNGs."""
        manifest = state["manifest"]
        if manifest is None:
            raise HTTPException(status_code=409, detail="no dataset loaded")
        try:
            case = load_case(manifest, case_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown case_id {case_id!r}")
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        return {
            "case_id": case_id,
            "image_png": _png_b64(np.round(case.image * 255.0)),
            "mask_pngs": [_png_b64(m * 255) for m in case.masks],
            "style_names": [s.style_name for s in manifest.styles],
        }

    @app.post("/predict")
    def predict(req: PredictRequest) -> dict:
        started = time.monotonic()

        def run():
            model = _model()
            image = _resolve_image(req.case_id, req.image_b64)
            prob, profile = model.personalize(
                image, req.prompt, req.k or default_k, np.random.default_rng(req.seed)
            )
            return _respond(prob, profile, req.threshold or default_threshold, started)

        return _guarded(run)

    @app.post("/interpolate")
    def interpolate(req: InterpolateRequest) -> dict:
        started = time.monotonic()
        if not 0.0 <= req.t <= 1.0:
            raise HTTPException(status_code=400, detail=f"t must lie in [0, 1], got {req.t}")

        def run():
            model = _model()
            image = _resolve_image(req.case_id, req.image_b64)
            prob, profile = model.interpolate(
                image, req.prompt_a, req.prompt_b, req.t, req.k or default_k,
                np.random.default_rng(req.seed),
            )
            return _respond(prob, profile, req.threshold or default_threshold, started)

        return _guarded(run)

    return app


def serve(checkpoint_dir: str, data_dir: str, port: int = 8000, workers: int = 4, host: str = "127.0.0.1") -> None:
    import uvicorn

    app = create_app(checkpoint_dir=checkpoint_dir, data_dir=data_dir, workers=workers)
    uvicorn.run(app, host=host, port=port)
