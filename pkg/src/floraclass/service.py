"""HTTP classification service.

Classifies uploaded images with a (possibly single-member) ensemble,
serves species metadata, and persists confirm/correct feedback as an
append-only JSON-lines log. Classification is stateless and
deterministic: identical image bytes produce identical probabilities.
Thumbnails are stored under a content-hash name so repeat uploads
deduplicate; request ids are per-request and kept in memory, so feedback
references expire on restart (documented desk-scale trade-off).
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
import uuid
from dataclasses import asdict, dataclass
from pathlib import Path

from fastapi import FastAPI, File, Query, Response, UploadFile
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from floraclass import imageprep
from floraclass.dataset import SpeciesStore
from floraclass.ensemble import EnsembleModel, ensemble_predict, top_k
from floraclass.errors import DataError

MAX_UPLOAD_BYTES = 10 * 1024 * 1024
THUMBNAIL_SIDE = 96


@dataclass
class FeedbackRecord:
    request_id: str
    predicted_species: str
    confirmed_species: str
    timestamp: int  # UTC seconds


class FeedbackBody(BaseModel):
    request_id: str
    confirmed_species: str


class FeedbackLog:
    """Append-only JSON-lines log; one atomic line per event."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, record: FeedbackRecord) -> None:
        line = json.dumps(asdict(record), ensure_ascii=False) + "\n"
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)


def read_feedback_log(path: str | Path) -> dict[str, FeedbackRecord]:
    """Effective feedback state: the latest record per request id."""
    out: dict[str, FeedbackRecord] = {}
    path = Path(path)
    if not path.exists():
        return out
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = FeedbackRecord(**json.loads(line))
            out[rec.request_id] = rec
    return out


def create_app(
    model: EnsembleModel | None,
    species: SpeciesStore,
    feedback_log_path: str | Path,
    work_dir: str | Path,
    static_dir: str | Path | None = None,
) -> FastAPI:
    """Assemble the service around an in-memory model and species store."""
    app = FastAPI(title="floraclass service")
    thumb_dir = Path(work_dir) / "thumbnails"
    thumb_dir.mkdir(parents=True, exist_ok=True)
    log = FeedbackLog(feedback_log_path)
    predictions: dict[str, str] = {}  # request id -> predicted top-1 species

    @app.post("/api/classify")
    async def classify(
        image: UploadFile | None = File(None),
        k: int = Query(default=5, ge=1),
    ):
        if model is None:
            return JSONResponse({"error": "model not loaded"}, status_code=503)
        if image is None:
            return JSONResponse({"error": "missing multipart image"}, status_code=400)
        data = await image.read()
        if not data:
            return JSONResponse({"error": "empty image body"}, status_code=400)
        if len(data) > MAX_UPLOAD_BYTES:
            return JSONResponse(
                {"error": f"image exceeds {MAX_UPLOAD_BYTES} bytes"}, status_code=413
            )
        try:
            img = imageprep.decode_image(data)
        except DataError:
            return JSONResponse({"error": "body is not a PNG or JPEG image"},
                                status_code=400)

        square = imageprep.center_crop_square(img)
        tensor = imageprep.to_tensor(imageprep.resize(square, model.input_side))
        probs = ensemble_predict(model, tensor)
        ranked = top_k(probs, k)

        thumb_name = hashlib.sha256(data).hexdigest()[:16] + ".png"
        thumb_path = thumb_dir / thumb_name
        if not thumb_path.exists():
            imageprep.save_png(imageprep.resize(square, THUMBNAIL_SIDE), thumb_path)

        request_id = uuid.uuid4().hex
        top_name = model.class_names[ranked[0][0]]
        predictions[request_id] = top_name
        results = []
        for idx, prob in ranked:
            name = model.class_names[idx]
            rec = species.get(name)
            results.append(
                {
                    "scientific_name": name,
                    "probability": prob,
                    "species": asdict(rec) if rec else None,
                }
            )
        return {
            "request_id": request_id,
            "model": model.name,
            "thumbnail": f"/thumbnails/{thumb_name}",
            "results": results,
        }

    @app.post("/api/feedback", status_code=204)
    def feedback(body: FeedbackBody):
        predicted = predictions.get(body.request_id)
        if predicted is None:
            return JSONResponse({"error": "unknown request id"}, status_code=404)
        if body.confirmed_species not in species:
            return JSONResponse(
                {"error": f"unknown species {body.confirmed_species!r}"},
                status_code=422,
            )
        log.append(
            FeedbackRecord(
                request_id=body.request_id,
                predicted_species=predicted,
                confirmed_species=body.confirmed_species,
                timestamp=int(time.time()),
            )
        )
        return Response(status_code=204)

    @app.get("/api/species")
    def species_list():
        return [asdict(rec) for rec in species.records]

    @app.get("/api/species/{scientific_name}")
    def species_detail(scientific_name: str):
        rec = species.get(scientific_name)
        if rec is None:
            return JSONResponse({"error": "unknown species"}, status_code=404)
        return asdict(rec)

    app.mount("/thumbnails", StaticFiles(directory=thumb_dir), name="thumbnails")
    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="webui")
    return app


def build_app(
    model_path: str | Path | None,
    species_path: str | Path,
    feedback_log_path: str | Path,
    work_dir: str | Path,
    static_dir: str | Path | None = None,
) -> FastAPI:
    """Load model and species store from disk and assemble the app.

    A missing or unreadable model leaves the service up but answering 503
    on classification.
    """
    from floraclass.dataset import load_species_store
    from floraclass.modelstore import load_ensemble

    model = None
    if model_path is not None and Path(model_path).exists():
        model = load_ensemble(model_path)
    species = load_species_store(species_path)
    return create_app(model, species, feedback_log_path, work_dir, static_dir)


def serve(app: FastAPI, host: str = "127.0.0.1", port: int = 8000) -> None:
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")
