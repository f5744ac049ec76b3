"""HTTP API over a data directory: image sequences, write-once
annotations, and on-demand keypoint-prompted segmentation.

Data directory layout::

    images/          PNG files, one per image id
    sequences.json   {"sequences":[{sequence_id, captured_at, views:[...]}]}
    annotations/     one <sequence_id>.json per accepted annotation

Annotations are validated field by field (400 errors name the exact
field path, e.g. ``views[0].teeth[2].x``), stored atomically via a
temporary file + rename, and are write-once: a second POST for the same
sequence returns 409. Keypoint prompts arrive in pixel coordinates;
stored annotations use relative coordinates in [0, 1].
"""

from __future__ import annotations

import base64
import io
import json
import os
import tempfile
import threading
from datetime import datetime
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse, JSONResponse
from PIL import Image

from . import __version__, imaging, pipeline, synth
from .errors import KeypointOutOfBoundsError, ToothsegError
from .keypoints import Keypoint, save_keypoints_json

VIEWS = ("lower", "front", "upper")
SEGMENT_METHODS = ("prompted", "otsu", "hsv")


class _ValidationError(Exception):
    def __init__(self, field: str, message: str):
        super().__init__(message)
        self.field = field


def _error(status: int, error: str, **extra) -> JSONResponse:
    return JSONResponse({"error": error, **extra}, status_code=status)


def _parse_timestamp(value) -> bool:
    if not isinstance(value, str):
        return False
    try:
        datetime.fromisoformat(value.replace("Z", "+00:00"))
        return True
    except ValueError:
        return False


def _mask_to_base64_png(mask: np.ndarray) -> str:
    buf = io.BytesIO()
    gray = np.where(mask, np.uint8(255), np.uint8(0))
    Image.fromarray(gray, mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class _Store:
    """Immutable sequence index plus a single-writer annotation store."""

    def __init__(self, data_dir: Path):
        self.data_dir = data_dir
        self.annotations_dir = data_dir / "annotations"
        self.annotations_dir.mkdir(parents=True, exist_ok=True)
        self.lock = threading.Lock()
        doc = json.loads((data_dir / "sequences.json").read_text())
        self.sequences: dict[str, dict] = {}
        self.images: dict[str, Path] = {}
        for record in doc.get("sequences", []):
            views = record.get("views", [])
            names = [v.get("view") for v in views]
            if sorted(names) != sorted(VIEWS):
                raise ValueError(
                    f"sequence {record.get('sequence_id')!r} must have exactly the views {VIEWS}"
                )
            if not _parse_timestamp(record.get("captured_at")):
                raise ValueError(f"sequence {record.get('sequence_id')!r}: captured_at does not parse")
            seq_id = str(record["sequence_id"])
            self.sequences[seq_id] = record
            for view in views:
                self.images[str(view["image_id"])] = data_dir / view["file"]

    def annotation_path(self, sequence_id: str) -> Path:
        return self.annotations_dir / f"{sequence_id}.json"

    def write_annotation(self, sequence_id: str, record: dict) -> bool:
        """Atomically persist; False when the sequence is already annotated."""
        with self.lock:
            target = self.annotation_path(sequence_id)
            if target.exists():
                return False
            fd, tmp_name = tempfile.mkstemp(dir=self.annotations_dir, suffix=".tmp")
            try:
                with os.fdopen(fd, "w") as fh:
                    json.dump(record, fh, indent=2)
                    fh.write("\n")
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp_name, target)
            except BaseException:
                if os.path.exists(tmp_name):
                    os.unlink(tmp_name)
                raise
        return True


def _validate_annotation(doc, store: _Store) -> dict:
    """Normalize an annotation body, raising _ValidationError with the
    offending field path on the first violation."""
    if not isinstance(doc, dict):
        raise _ValidationError("", "body must be a JSON object")
    if doc.get("schema_version") != 1:
        raise _ValidationError("schema_version", "schema_version must be 1")
    sequence_id = doc.get("sequence_id")
    if not isinstance(sequence_id, str) or not sequence_id:
        raise _ValidationError("sequence_id", "sequence_id must be a non-empty string")
    if not _parse_timestamp(doc.get("captured_at")):
        raise _ValidationError("captured_at", "captured_at must be an ISO-8601 timestamp")
    views = doc.get("views")
    if not isinstance(views, list):
        raise _ValidationError("views", "views must be a list")

    sequence = store.sequences.get(sequence_id)
    expected_images = {}
    if sequence is not None:
        expected_images = {v["view"]: str(v["image_id"]) for v in sequence["views"]}

    seen: set[str] = set()
    norm_views = []
    for i, view in enumerate(views):
        if not isinstance(view, dict):
            raise _ValidationError(f"views[{i}]", "view entry must be an object")
        name = view.get("view")
        if name not in VIEWS:
            raise _ValidationError(f"views[{i}].view", f"view must be one of {VIEWS}")
        if name in seen:
            raise _ValidationError(f"views[{i}].view", f"duplicate view {name!r}")
        seen.add(name)
        image_id = view.get("image_id")
        if not isinstance(image_id, str):
            raise _ValidationError(f"views[{i}].image_id", "image_id must be a string")
        if expected_images and expected_images.get(name) != image_id:
            raise _ValidationError(
                f"views[{i}].image_id",
                f"image_id {image_id!r} does not belong to the {name} view of this sequence",
            )
        teeth = view.get("teeth")
        if not isinstance(teeth, list):
            raise _ValidationError(f"views[{i}].teeth", "teeth must be a list")
        norm_teeth = []
        for j, tooth in enumerate(teeth):
            if not isinstance(tooth, dict):
                raise _ValidationError(f"views[{i}].teeth[{j}]", "tooth entry must be an object")
            for coord in ("x", "y"):
                value = tooth.get(coord)
                if not isinstance(value, (int, float)) or isinstance(value, bool) or not 0.0 <= value <= 1.0:
                    raise _ValidationError(
                        f"views[{i}].teeth[{j}].{coord}",
                        f"{coord} must be a relative coordinate in [0, 1]",
                    )
            props = tooth.get("properties", {})
            if not isinstance(props, dict) or not all(
                isinstance(k, str) and isinstance(v, str) for k, v in props.items()
            ):
                raise _ValidationError(
                    f"views[{i}].teeth[{j}].properties", "properties must map strings to strings"
                )
            norm_teeth.append({"x": float(tooth["x"]), "y": float(tooth["y"]), "properties": props})
        norm_views.append({"view": name, "image_id": image_id, "teeth": norm_teeth})
    if len(seen) != len(VIEWS):
        raise _ValidationError("views", f"all three views {VIEWS} must be present")
    notes = doc.get("global_notes", {})
    if not isinstance(notes, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in notes.items()
    ):
        raise _ValidationError("global_notes", "global_notes must map strings to strings")
    return {
        "schema_version": 1,
        "sequence_id": sequence_id,
        "captured_at": doc["captured_at"],
        "views": norm_views,
        "global_notes": notes,
    }


def create_app(
    data_dir: str | Path,
    config: pipeline.PipelineConfig | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    store = _Store(Path(data_dir))
    cfg = config or pipeline.PipelineConfig()
    app = FastAPI(title="toothseg service", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/api/health")
    def health():
        return {"status": "ok", "version": __version__}

    @app.get("/api/sequences")
    def list_sequences():
        return [store.sequences[k] for k in sorted(store.sequences)]

    @app.get("/api/sequences/{sequence_id}")
    def get_sequence(sequence_id: str):
        record = store.sequences.get(sequence_id)
        if record is None:
            return _error(404, "not_found")
        return record

    @app.get("/api/images/{image_id}")
    def get_image(image_id: str):
        path = store.images.get(image_id)
        if path is None or not path.is_file():
            return _error(404, "not_found")
        return FileResponse(path, media_type="image/png")

    @app.get("/api/annotations/{sequence_id}")
    def get_annotation(sequence_id: str):
        path = store.annotation_path(sequence_id)
        if not path.is_file():
            return _error(404, "not_found")
        return json.loads(path.read_text())

    @app.post("/api/annotations")
    async def post_annotation(request: Request):
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError:
            return _error(400, "validation", field="", message="body is not valid JSON")
        try:
            record = _validate_annotation(body, store)
        except _ValidationError as exc:
            return _error(400, "validation", field=exc.field, message=str(exc))
        if record["sequence_id"] not in store.sequences:
            return _error(404, "not_found")
        if not store.write_annotation(record["sequence_id"], record):
            return _error(409, "already_annotated")
        return JSONResponse(record, status_code=201)

    @app.post("/api/segment")
    async def post_segment(request: Request):
        try:
            body = json.loads(await request.body())
        except json.JSONDecodeError:
            return _error(400, "validation", field="", message="body is not valid JSON")
        if not isinstance(body, dict):
            return _error(400, "validation", field="", message="body must be a JSON object")
        method = body.get("method", "prompted")
        if method not in SEGMENT_METHODS:
            return _error(400, "validation", field="method", message=f"method must be one of {SEGMENT_METHODS}")
        image_id = body.get("image_id")
        path = store.images.get(image_id) if isinstance(image_id, str) else None
        if path is None or not path.is_file():
            return _error(404, "not_found")
        raw_kps = body.get("keypoints", [])
        if not isinstance(raw_kps, list):
            return _error(400, "validation", field="keypoints", message="keypoints must be a list")
        kps = []
        for k, entry in enumerate(raw_kps):
            if not isinstance(entry, dict) or "x_px" not in entry or "y_px" not in entry:
                return _error(
                    400, "validation", field=f"keypoints[{k}]", message="keypoint needs x_px and y_px"
                )
            kps.append(Keypoint(float(entry["x_px"]), float(entry["y_px"])))

        img = imaging.load_image(path)
        try:
            if method == "prompted":
                if not kps:
                    return _error(
                        400, "validation", field="keypoints",
                        message="prompted segmentation needs at least one keypoint",
                    )
                result = pipeline.keypoint_prompted_segment(img, kps, cfg)
            elif method == "otsu":
                result = pipeline.segment_otsu_baseline(img, cfg)
            else:
                result = pipeline.segment_hsv_baseline(img, cfg)
        except KeypointOutOfBoundsError as exc:
            return _error(400, "validation", field="keypoints", message=str(exc))
        except ToothsegError as exc:
            return _error(422, "segmentation_failed", message=str(exc))

        payload = {
            "mask_png_base64": _mask_to_base64_png(result.mask),
            "label_count": result.label_count,
            "score_hint": round(float(result.mask.mean()), 6),
        }
        if result.empty:
            return JSONResponse({"error": "empty_segmentation", **payload}, status_code=422)
        return JSONResponse(payload)

    if ui_dir is not None and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app


def build_demo_data_dir(
    out_dir: str | Path,
    seed: int = 7,
    size: int = 256,
    sequences: int = 2,
) -> list[str]:
    """Materialize a service data directory from synthetic scenes.

    Each sequence gets one scene per view; the scene's ground-truth
    keypoints are stored next to the image for demo prompts.
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "annotations").mkdir(exist_ok=True)
    records = []
    for k in range(sequences):
        seq_id = f"seq{k:03d}"
        views = []
        for view_index, view in enumerate(VIEWS):
            scene_cfg = synth.SynthConfig(
                view=view, size=size, seed=synth.scene_seed(seed, view_index, k)
            )
            scene = synth.generate_scene(scene_cfg)
            image_id = f"{seq_id}_{view}"
            imaging.save_image(scene.image, out / "images" / f"{image_id}.png")
            save_keypoints_json(
                {image_id: scene.gt_keypoints}, out / "images" / f"{image_id}_kps.json"
            )
            views.append({"view": view, "image_id": image_id, "file": f"images/{image_id}.png"})
        records.append(
            {
                "sequence_id": seq_id,
                "captured_at": f"2023-06-{k + 1:02d}T09:00:00+00:00",
                "views": views,
            }
        )
    (out / "sequences.json").write_text(json.dumps({"sequences": records}, indent=2) + "\n")
    return [r["sequence_id"] for r in records]
