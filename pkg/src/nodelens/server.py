"""Session-scoped HTTP/JSON service over the analysis pipeline.

One session holds at most one dataset, one running training job and an
append-only list of trained models. Mutations serialize through a
per-session lock; model payloads are read from immutable snapshots, so
reads never block a running training.

Env: VND_PORT (default 8080), VND_MAX_UPLOAD_MB (default 256),
VND_SNAPSHOT_DIR (optional JSON snapshots), VND_STATIC_DIR (UI bundle).
"""

from __future__ import annotations

import json
import os
import secrets
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import Body, FastAPI, HTTPException, Request, Response
from fastapi.staticfiles import StaticFiles

from . import __version__
from .dataset import (
    Dataset,
    MalformedCsv,
    NoEnabledInputs,
    NoTarget,
    RawTable,
    fork_categorical,
    infer_specs,
    load_csv,
    normalize,
)
from .decompose import (
    Decomposition,
    EmptyFilter,
    NoPositiveNodes,
    RangeFilter,
    build_cards,
    decompose,
    eval_range_filter,
    pcp_payload,
)
from .errors import NodelensError
from .model import (
    NonFiniteLoss,
    TrainConfig,
    TrainingCancelled,
    TrainResult,
    train,
)
from .serialize import (
    cards_to_json,
    dataset_summary,
    filter_result_to_json,
    network_export,
    variable_summary,
)


@dataclass
class TrainingStatus:
    state: str = "idle"   # idle | running | done | failed
    step: int = 0
    total_steps: int = 0
    current_loss: float = 0.0
    message: str = ""

    def to_json_obj(self) -> dict:
        return {
            "state": self.state,
            "step": self.step,
            "totalSteps": self.total_steps,
            "currentLoss": self.current_loss,
            "message": self.message,
        }


@dataclass
class StoredModel:
    model_id: int
    result: TrainResult
    decomposition: Optional[Decomposition]
    dataset: Dataset               # snapshot the model was trained on


@dataclass
class Session:
    session_id: str
    lock: threading.Lock = field(default_factory=threading.Lock)
    table: Optional[RawTable] = None
    specs: list = field(default_factory=list)
    threshold: float = 0.5
    dataset: Optional[Dataset] = None   # built lazily from table+specs
    models: list[StoredModel] = field(default_factory=list)
    next_model_id: int = 1
    status: TrainingStatus = field(default_factory=TrainingStatus)
    job: Optional[threading.Thread] = None
    cancel_flag: threading.Event = field(default_factory=threading.Event)

    def build_dataset(self) -> Dataset:
        if self.table is None:
            raise HTTPException(409, "no dataset uploaded")
        if self.dataset is None:
            try:
                ds = normalize(self.table, self.specs)
            except (NoTarget, NoEnabledInputs) as exc:
                raise HTTPException(409, str(exc))
            self.dataset = ds.with_threshold(self.threshold)
        return self.dataset

    def invalidate(self):
        self.dataset = None

    def abort_training(self):
        if self.job is not None and self.job.is_alive():
            self.cancel_flag.set()
            self.job.join(timeout=30)
        self.job = None
        self.cancel_flag = threading.Event()


class SessionStore:
    def __init__(self, snapshot_dir: str | None = None):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self.snapshot_dir = snapshot_dir

    def create(self) -> Session:
        sid = secrets.token_urlsafe(12)
        session = Session(session_id=sid)
        with self._lock:
            self._sessions[sid] = session
        return session

    def get(self, sid: str) -> Session:
        with self._lock:
            session = self._sessions.get(sid)
        if session is None:
            raise HTTPException(404, f"unknown session {sid}")
        return session

    def snapshot(self, session: Session):
        """Best-effort JSON dump of (dataset, models) for a session."""
        if not self.snapshot_dir:
            return
        path = Path(self.snapshot_dir)
        path.mkdir(parents=True, exist_ok=True)
        payload = {
            "session": session.session_id,
            "dataset": session.dataset.to_json_obj() if session.dataset else None,
            "models": [
                {"id": m.model_id, **network_export(m.result)}
                for m in session.models
            ],
        }
        (path / f"{session.session_id}.json").write_text(json.dumps(payload))


def _variables_payload(session: Session) -> dict:
    table = session.table
    out = []
    for spec in session.specs:
        source = spec.source_variable or spec.name
        if spec.kind == "binaryFork":
            column = table.column(source)
            cat = spec.categories[0]
            raw = ["1" if ((c is None and cat == "⟨missing⟩")
                           or c == cat) else "0" for c in column]
            out.append(variable_summary(spec, raw))
        else:
            out.append(variable_summary(spec, table.column(spec.name)))
    target = next((s for s in session.specs if s.is_target and s.enabled), None)
    high_fraction = None
    if target is not None:
        try:
            ds = session.build_dataset()
            high_fraction = float(ds.high_mask.mean())
        except HTTPException:
            high_fraction = None
    return {
        "variables": out,
        "threshold": session.threshold,
        "target": target.name if target else None,
        "highFraction": high_fraction,
        "rows": table.n_rows if table else 0,
    }


def _find_model(session: Session, model_id: int) -> StoredModel:
    for m in session.models:
        if m.model_id == model_id:
            return m
    raise HTTPException(404, f"unknown model {model_id}")


def create_app(snapshot_dir: str | None = None,
               max_upload_mb: float | None = None,
               static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="nodelens", version=__version__)
    store = SessionStore(
        snapshot_dir or os.environ.get("VND_SNAPSHOT_DIR") or None)
    limit_mb = max_upload_mb if max_upload_mb is not None else \
        float(os.environ.get("VND_MAX_UPLOAD_MB", "256"))
    app.state.store = store

    @app.exception_handler(NodelensError)
    async def _domain_error(request: Request, exc: NodelensError):
        return Response(json.dumps({"detail": str(exc)}), status_code=422,
                        media_type="application/json")

    @app.post("/api/v1/sessions", status_code=201)
    def create_session():
        session = store.create()
        return {"id": session.session_id}

    @app.post("/api/v1/sessions/{sid}/dataset")
    async def upload_dataset(sid: str, request: Request):
        session = store.get(sid)
        body = await request.body()
        if len(body) > limit_mb * 1024 * 1024:
            raise HTTPException(413, f"payload exceeds {limit_mb} MB")
        try:
            table = load_csv(body)
        except MalformedCsv as exc:
            raise HTTPException(422, str(exc))
        # abort outside the lock: a finishing worker needs the lock briefly
        session.abort_training()
        with session.lock:
            session.table = table
            session.specs = infer_specs(table)
            session.threshold = 0.5
            session.models.clear()          # dataset replacement invalidates
            session.status = TrainingStatus()
            session.invalidate()
            return _variables_payload(session)

    @app.get("/api/v1/sessions/{sid}/variables")
    def get_variables(sid: str):
        session = store.get(sid)
        with session.lock:
            if session.table is None:
                raise HTTPException(409, "no dataset uploaded")
            return _variables_payload(session)

    @app.patch("/api/v1/sessions/{sid}/variables/{name}")
    def patch_variable(sid: str, name: str, patch: dict = Body(...)):
        session = store.get(sid)
        with session.lock:
            if session.table is None:
                raise HTTPException(409, "no dataset uploaded")
            if session.status.state == "running":
                raise HTTPException(409, "training in progress")
            spec = next((s for s in session.specs if s.name == name), None)
            if spec is None:
                raise HTTPException(404, f"unknown variable {name}")

            if patch.get("fork"):
                if spec.kind != "categorical":
                    raise HTTPException(409, f"{name} is not categorical")
                if any(s.source_variable == name for s in session.specs):
                    raise HTTPException(409, f"{name} is already forked")
                children = fork_categorical(spec, session.table)
                idx = session.specs.index(spec)
                session.specs[idx + 1:idx + 1] = children
            if "enabled" in patch:
                if spec.is_target and not patch["enabled"]:
                    raise HTTPException(409, "target must stay enabled")
                spec.enabled = bool(patch["enabled"])
            if "logScale" in patch:
                if spec.kind != "numeric":
                    raise HTTPException(409, "log scale applies to numeric only")
                if patch["logScale"] and spec.scale_min <= 0:
                    raise HTTPException(409,
                                        "log scale requires positive values")
                spec.log_scale = bool(patch["logScale"])
            if patch.get("isTarget"):
                for s in session.specs:
                    s.is_target = False
                spec.is_target = True
                spec.enabled = True
            elif patch.get("isTarget") is False:
                spec.is_target = False

            session.invalidate()
            return _variables_payload(session)

    @app.put("/api/v1/sessions/{sid}/threshold")
    def put_threshold(sid: str, body: dict = Body(...)):
        session = store.get(sid)
        with session.lock:
            if session.table is None:
                raise HTTPException(409, "no dataset uploaded")
            value = body.get("threshold")
            session.invalidate()
            ds = session.build_dataset()
            if value == "median":
                tau = float(np.median(ds.target))
            elif value == "mid":
                tau = 0.5
            else:
                try:
                    tau = float(value)
                except (TypeError, ValueError):
                    raise HTTPException(422, "threshold must be a number, "
                                             "'mid' or 'median'")
            tau = float(min(max(tau, 1e-9), 1 - 1e-9))
            session.threshold = tau
            session.dataset = ds.with_threshold(tau)
            return _variables_payload(session)

    @app.post("/api/v1/sessions/{sid}/train", status_code=202)
    def start_training(sid: str, body: dict = Body(default={})):
        session = store.get(sid)
        with session.lock:
            if session.status.state == "running":
                raise HTTPException(409, "training in progress")
            ds = session.build_dataset()
            cfg = TrainConfig(
                hidden_nodes=int(body.get("hiddenNodes", 20)),
                iterations=int(body.get("iterations", 10_000)),
                beta=float(body.get("beta", 0.1)),
                learning_rate=float(body.get("learningRate", 0.01)),
                batch_size=int(body.get("batchSize", 32)),
                rmsprop_decay=float(body.get("rmspropDecay", 0.9)),
                rmsprop_epsilon=float(body.get("rmspropEpsilon", 1e-8)),
                seed=int(body.get("seed", 0)),
                threshold=ds.threshold,
            )
            if cfg.batch_size > ds.n_items or cfg.batch_size < 1:
                raise HTTPException(422, "batch size must be in [1, items]")
            if cfg.iterations < 0 or cfg.hidden_nodes < 1:
                raise HTTPException(422, "bad training parameters")

            model_id = session.next_model_id
            session.next_model_id += 1
            session.status = TrainingStatus(
                state="running", total_steps=cfg.iterations)
            session.cancel_flag = threading.Event()
            cancel_flag = session.cancel_flag
            status = session.status

            def progress(step, total, loss_value):
                status.step = step
                status.current_loss = loss_value

            def worker():
                try:
                    result = train(ds, cfg, progress=progress,
                                   cancel=cancel_flag.is_set)
                    try:
                        decomp = decompose(result.network, ds)
                    except NoPositiveNodes:
                        decomp = None
                    with session.lock:
                        session.models.append(
                            StoredModel(model_id, result, decomp, ds))
                        status.state = "done"
                        status.step = cfg.iterations
                    store.snapshot(session)
                except TrainingCancelled:
                    status.state = "failed"
                    status.message = "cancelled"
                except NonFiniteLoss as exc:
                    status.state = "failed"
                    status.message = str(exc)

            session.job = threading.Thread(target=worker, daemon=True)
            session.job.start()
            return {"jobId": model_id}

    @app.get("/api/v1/sessions/{sid}/train/status")
    def train_status(sid: str):
        return store.get(sid).status.to_json_obj()

    @app.get("/api/v1/sessions/{sid}/models")
    def list_models(sid: str):
        session = store.get(sid)
        with session.lock:
            return {
                "models": [
                    {
                        "id": m.model_id,
                        "config": m.result.config.to_json_obj(),
                        "finalMse": m.result.final_mse,
                        "nodes": len(m.decomposition.nodes)
                        if m.decomposition else 0,
                    }
                    for m in session.models
                ]
            }

    @app.get("/api/v1/sessions/{sid}/models/{model_id}/nodes")
    def get_nodes(sid: str, model_id: int, inputBins: int = 10,
                  targetBins: int = 2, coverageMode: str = "target"):
        session = store.get(sid)
        model = _find_model(session, model_id)
        if not 2 <= inputBins <= 20 or not 2 <= targetBins <= 20:
            raise HTTPException(422, "bins must lie in [2, 20]")
        if model.decomposition is None:
            return {"cards": [], "coverageMode": coverageMode}
        cards = build_cards(model.decomposition, model.dataset,
                            input_bins=inputBins, target_bins=targetBins)
        return {
            "cards": cards_to_json(cards, model.dataset,
                                   model.result.network),
            "coverageMode": coverageMode,
            "inputBins": inputBins,
            "targetBins": targetBins,
            "threshold": model.dataset.threshold,
            "highCount": int(model.dataset.high_mask.sum()),
            "lowCount": int((~model.dataset.high_mask).sum()),
        }

    @app.get("/api/v1/sessions/{sid}/models/{model_id}/nodes/{node}/pcp")
    def get_pcp(sid: str, model_id: int, node: int,
                membershipThreshold: float = 0.1):
        session = store.get(sid)
        model = _find_model(session, model_id)
        if model.decomposition is None:
            raise HTTPException(404, "model has no positive nodes")
        nc = next((n for n in model.decomposition.nodes
                   if n.node_index == node and not n.dormant), None)
        if nc is None:
            raise HTTPException(404, f"no active node {node}")
        ranking = model.decomposition.rankings[node]
        return pcp_payload(nc, model.dataset, ranking, membershipThreshold)

    @app.post("/api/v1/sessions/{sid}/filters/eval")
    def filters_eval(sid: str, body: dict = Body(...)):
        session = store.get(sid)
        with session.lock:
            model_id = body.get("modelId")
            if model_id is not None:
                ds = _find_model(session, int(model_id)).dataset
            else:
                ds = session.build_dataset()
        selections = body.get("selections") or []
        bins = int(body.get("bins", 10))
        if not 2 <= bins <= 20:
            raise HTTPException(422, "bins must lie in [2, 20]")
        parsed = []
        for sel in selections:
            var = sel.get("variable")
            chosen = sel.get("bins") or []
            if var is None:
                raise HTTPException(422, "selection needs a variable index")
            parsed.append((int(var), {int(b) for b in chosen}))
        if not parsed:
            raise HTTPException(422, "empty filter")
        try:
            result = eval_range_filter(RangeFilter(parsed, bins), ds,
                                       tau=ds.threshold,
                                       hist_bins=int(body.get("histBins", 10)))
        except (EmptyFilter, IndexError) as exc:
            raise HTTPException(422, str(exc))
        return filter_result_to_json(result)

    @app.get("/api/v1/sessions/{sid}/models/{model_id}/export")
    def export_model(sid: str, model_id: int):
        session = store.get(sid)
        model = _find_model(session, model_id)
        return network_export(model.result)

    @app.get("/api/v1/sessions/{sid}/dataset/summary")
    def get_dataset_summary(sid: str):
        session = store.get(sid)
        with session.lock:
            return dataset_summary(session.build_dataset())

    static = static_dir or os.environ.get("VND_STATIC_DIR")
    if static is None and Path("frontend/dist").is_dir():
        static = "frontend/dist"
    if static and Path(static).is_dir():
        app.mount("/", StaticFiles(directory=static, html=True),
                  name="static")
    return app
