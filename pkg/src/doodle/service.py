"""HTTP job service: submit renders, poll progress, fetch previews/results.

Jobs live in memory only.  A small pool of worker threads (one by
default) pulls queued jobs and runs them; status polling never touches
the render thread, so it stays responsive while a job computes.  At most
16 finished (done or failed) jobs are retained, oldest evicted first.
"""

from __future__ import annotations

import json
import queue
import random
import threading
import uuid
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .errors import DoodleError, ValidationError
from .extractor import FeatureExtractor, default_extractor, load_weights
from .images import decode_png, encode_png
from .optimize import RenderConfig, RenderEvent, render, schedule_from_sizes
from .semantic import check_aspect

MAX_PART_BYTES = 8 * 1024 * 1024
RETAINED_FINISHED_JOBS = 16
PREVIEW_EVERY_ITERS = 20
DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 8707

# Vite/static dev servers the browser UI is typically served from.
DEV_UI_ORIGINS = [
    "http://localhost:5173",
    "http://127.0.0.1:5173",
    "http://localhost:8707",
    "http://127.0.0.1:8707",
]


@dataclass
class Job:
    id: str
    config: RenderConfig
    config_echo: dict[str, Any]
    content: np.ndarray
    style: np.ndarray
    content_map: np.ndarray | None
    style_map: np.ndarray | None
    state: str = "queued"  # queued | running | done | failed
    progress: float = 0.0
    error: str | None = None
    preview_png: bytes | None = None
    result_png: bytes | None = None
    cancel_requested: bool = False


class JobStore:
    """Thread-safe job registry with LRU eviction of finished jobs."""

    def __init__(self, retain: int = RETAINED_FINISHED_JOBS):
        self._lock = threading.Lock()
        self._jobs: dict[str, Job] = {}
        self._finished_order: list[str] = []
        self._retain = retain

    def add(self, job: Job) -> None:
        with self._lock:
            self._jobs[job.id] = job

    def get(self, job_id: str) -> Job | None:
        with self._lock:
            return self._jobs.get(job_id)

    def update(self, job_id: str, **fields: Any) -> None:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                return
            for key, value in fields.items():
                if key == "progress":
                    value = max(job.progress, float(value))
                setattr(job, key, value)
            if job.state in ("done", "failed") and job.id not in self._finished_order:
                self._finished_order.append(job.id)
                while len(self._finished_order) > self._retain:
                    evicted = self._finished_order.pop(0)
                    self._jobs.pop(evicted, None)

    def summary(self, job_id: str) -> dict[str, Any] | None:
        with self._lock:
            job = self._jobs.get(job_id)
            if job is None:
                return None
            return {
                "id": job.id,
                "state": job.state,
                "progress": round(job.progress, 4),
                "config": job.config_echo,
                "error": job.error,
            }


def _config_from_json(
    raw: str | None, content_shape: tuple[int, int]
) -> tuple[RenderConfig, dict[str, Any]]:
    """Build a RenderConfig from the JSON config part, echoing the knobs."""
    try:
        data = json.loads(raw) if raw else {}
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config part is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ValidationError("config part must be a JSON object")

    defaults = RenderConfig()
    try:
        alpha = float(data.get("alpha", defaults.content_weight))
        beta = float(data.get("beta", defaults.style_weight))
        gamma_raw = data.get("gamma", "auto")
        gamma = None if gamma_raw in (None, "auto") else float(gamma_raw)
        patch = int(data.get("patch_size", defaults.patch_size))
        iters = int(data.get("iterations", defaults.iterations))
        seed = int(data.get("seed", random.getrandbits(32)))
        resolutions = None
        if data.get("resolutions") is not None:
            sizes = data["resolutions"]
            if not isinstance(sizes, list):
                raise ValidationError("resolutions must be a list of pixel sizes")
            resolutions = schedule_from_sizes([int(s) for s in sizes], *content_shape)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad config value: {exc}")
    config = RenderConfig(
        content_weight=alpha,
        style_weight=beta,
        semantic_weight=gamma,
        patch_size=patch,
        resolutions=resolutions,
        iterations=iters,
        seed=seed,
    )
    echo = {
        "alpha": alpha,
        "beta": beta,
        "gamma": "auto" if gamma is None else gamma,
        "patch_size": patch,
        "resolutions": [list(level) for level in resolutions] if resolutions else None,
        "iterations": iters,
        "seed": seed,
    }
    return config, echo


async def _read_part(part: UploadFile | None, name: str) -> bytes | None:
    if part is None:
        return None
    blob = await part.read()
    if len(blob) > MAX_PART_BYTES:
        raise HTTPException(
            status_code=413, detail=f"part {name!r} exceeds {MAX_PART_BYTES} bytes"
        )
    if not blob:
        raise HTTPException(status_code=400, detail=f"part {name!r} is empty")
    return blob


class RenderWorker(threading.Thread):
    def __init__(self, store: JobStore, jobs: "queue.Queue[str]", net: FeatureExtractor):
        super().__init__(daemon=True, name="render-worker")
        self.store = store
        self.jobs = jobs
        self.net = net

    def run(self) -> None:
        while True:
            job_id = self.jobs.get()
            job = self.store.get(job_id)
            if job is None or job.state != "queued":
                continue
            if job.cancel_requested:
                self.store.update(job_id, state="failed", error="cancelled")
                continue
            self.store.update(job_id, state="running")
            try:
                self._render(job)
            except DoodleError as exc:
                self.store.update(job_id, state="failed", error=str(exc))
            except Exception as exc:  # keep the worker alive
                self.store.update(job_id, state="failed", error=f"internal error: {exc}")

    def _render(self, job: Job) -> None:
        def callback(event: RenderEvent) -> bool:
            current = self.store.get(job.id)
            if current is None or current.cancel_requested:
                return False
            frac = (event.level + (event.iteration + 1) / event.iteration_count) / event.level_count
            fields: dict[str, Any] = {"progress": min(frac, 0.999)}
            if event.phase == "level" or event.iteration % PREVIEW_EVERY_ITERS == 0:
                preview = np.clip(event.image, 0.0, 255.0)
                fields["preview_png"] = encode_png(preview)
            self.store.update(job.id, **fields)
            return True

        out = render(
            job.content, job.content_map, job.style, job.style_map,
            self.net, job.config, callback=callback,
        )
        current = self.store.get(job.id)
        if current is not None and current.cancel_requested:
            self.store.update(job.id, state="failed", error="cancelled")
            return
        self.store.update(
            job.id, state="done", progress=1.0, result_png=encode_png(out)
        )


def create_app(
    net: FeatureExtractor | None = None,
    workers: int = 1,
    retain: int = RETAINED_FINISHED_JOBS,
) -> FastAPI:
    net = net if net is not None else default_extractor()
    store = JobStore(retain)
    job_queue: "queue.Queue[str]" = queue.Queue()
    for _ in range(max(1, workers)):
        RenderWorker(store, job_queue, net).start()

    app = FastAPI(title="doodle render service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=DEV_UI_ORIGINS,
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store

    @app.post("/api/render", status_code=202)
    async def submit(
        content: UploadFile = File(...),
        style: UploadFile = File(...),
        content_map: UploadFile | None = File(None),
        style_map: UploadFile | None = File(None),
        config: str | None = Form(None),
    ):
        content_blob = await _read_part(content, "content")
        style_blob = await _read_part(style, "style")
        cmap_blob = await _read_part(content_map, "content_map")
        smap_blob = await _read_part(style_map, "style_map")
        if (cmap_blob is None) != (smap_blob is None):
            raise HTTPException(
                status_code=400,
                detail="content_map and style_map must be submitted together so "
                "both maps carry a matching channel count (M)",
            )
        try:
            content_img = decode_png(content_blob)
            style_img = decode_png(style_blob)
            cmap = decode_png(cmap_blob, as_map=True) if cmap_blob else None
            smap = decode_png(smap_blob, as_map=True) if smap_blob else None
            if cmap is not None and smap is not None:
                if cmap.shape[0] != smap.shape[0]:
                    raise ValidationError(
                        f"semantic maps must share the same channel count: "
                        f"{cmap.shape[0]} vs {smap.shape[0]}"
                    )
                check_aspect(cmap.shape[1:], content_img.shape[1:])
                check_aspect(smap.shape[1:], style_img.shape[1:])
            cfg, echo = _config_from_json(config, content_img.shape[1:])
        except DoodleError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        job = Job(
            id=uuid.uuid4().hex,
            config=cfg,
            config_echo=echo,
            content=content_img,
            style=style_img,
            content_map=cmap,
            style_map=smap,
        )
        store.add(job)
        job_queue.put(job.id)
        return JSONResponse(status_code=202, content={"id": job.id})

    @app.get("/api/jobs/{job_id}")
    def status(job_id: str):
        summary = store.summary(job_id)
        if summary is None:
            raise HTTPException(status_code=404, detail="unknown job")
        return summary

    @app.get("/api/jobs/{job_id}/result")
    def result(job_id: str):
        job = store.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        if job.state != "done" or job.result_png is None:
            raise HTTPException(status_code=409, detail=f"job is {job.state}, not done")
        return Response(content=job.result_png, media_type="image/png")

    @app.get("/api/jobs/{job_id}/preview")
    def preview(job_id: str):
        job = store.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        if job.preview_png is None:
            return Response(status_code=204)
        return Response(content=job.preview_png, media_type="image/png")

    @app.delete("/api/jobs/{job_id}")
    def cancel(job_id: str):
        job = store.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail="unknown job")
        if job.state in ("done", "failed"):
            return store.summary(job_id)
        store.update(job_id, cancel_requested=True)
        if job.state == "queued":
            store.update(job_id, state="failed", error="cancelled")
        return store.summary(job_id)

    return app


def serve(
    host: str = DEFAULT_HOST,
    port: int = DEFAULT_PORT,
    weights: str | None = None,
    workers: int = 1,
) -> None:
    """Run the service until interrupted (CLI --serve entry point)."""
    import uvicorn
    from pathlib import Path

    net = load_weights(Path(weights).read_bytes()) if weights else default_extractor()
    uvicorn.run(create_app(net=net, workers=workers), host=host, port=port, log_level="info")
