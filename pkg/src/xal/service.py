"""In-memory HTTP session service for live labeling.

Each session owns one learner; every mutation happens under the
session's lock in response to exactly one accepted request. Pending
queries carry an id the client must echo back, so a stale label attempt
is rejected with a conflict instead of mislabeling the wrong point.
"""

from __future__ import annotations

import itertools
import threading
import time
from dataclasses import replace

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .cluster import (
    choose_k,
    cluster_report,
    encode_explanations,
    explain_pool,
    label_all,
    vocabulary_for,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    build_dataset,
    build_explainer,
    build_model_fitter,
    config_from_dict,
    get_preset,
)
from .dataset import CATEGORICAL
from .explain import Explanation, explain_uncertainty
from .learn import SKIP, LearnerState, initial_state, is_undefined, regions_from_group, RegionSpec, select_query, step
from .models import certainty


class CreateSession(BaseModel):
    preset: str | None = None
    config: dict | None = None
    seed: int | None = None


class LabelRequest(BaseModel):
    query_id: str
    label: int | None = None
    skip: bool = False


class _OneShotOracle:
    def __init__(self, decision):
        self._decision = decision

    def label(self, index, explanation):
        return self._decision


class Session:
    def __init__(self, session_id: str, cfg: ExperimentConfig):
        self.id = session_id
        self.cfg = cfg
        self.lock = threading.Lock()
        self.events: list[dict] = []
        dataset = build_dataset(cfg.dataset)
        spec = (
            regions_from_group(dataset)
            if cfg.regions == "group" and dataset.group is not None
            else RegionSpec("constraint_sets", ())
        )
        self.state: LearnerState = initial_state(
            dataset, spec, build_model_fitter(cfg.model),
            build_explainer(cfg.explainer, cfg.seed),
            initial_pool_size=cfg.loop.initial_pool_size,
            seed=cfg.seed,
            initial_groups=list(cfg.loop.initial_groups) or None,
        )
        self.step_budget = cfg.loop.steps
        self.pending: dict | None = None
        self._clusters_cache: tuple[int, dict] | None = None

    # All methods below run under self.lock.

    @property
    def done(self) -> bool:
        return self.state.round >= self.step_budget or not self.state.pool

    def status(self) -> str:
        if self.done:
            return "done"
        return "awaiting_label" if self.pending else "computing"

    def log_event(self, kind: str, **payload) -> None:
        self.events.append({"ts": time.time(), "type": kind, **payload})

    def next_payload(self) -> dict:
        if self.done:
            return {
                "status": "done",
                "round": self.state.round,
                "labeled_count": len(self.state.labeled),
            }
        if self.pending is None:
            index = select_query(self.state.model, self.state)
            explanation = explain_uncertainty(
                self.state.model, index, self.state.dataset, self.state.explainer,
                discretizer=self.state.discretizer, stats=self.state.stats,
            )
            self.pending = {
                "query_id": f"q{self.state.round}-{index}",
                "index": index,
                "explanation": explanation,
            }
            self.log_event("query_shown", query_id=self.pending["query_id"], index=index)
        index = self.pending["index"]
        exp: Explanation = self.pending["explanation"]
        dataset = self.state.dataset
        features = []
        for j, f in enumerate(dataset.schema):
            raw = float(dataset.rows[index, j])
            value = f.categories[int(round(raw))] if f.kind == CATEGORICAL else raw
            features.append({"name": f.name, "value": value, "display": f.display})
        return {
            "status": "awaiting_label",
            "round": self.state.round,
            "query_id": self.pending["query_id"],
            "index": index,
            "features": features,
            "certainty": exp.explained_certainty,
            "explanation": {
                "constraints": [
                    {"text": c.text, "feature": c.feature, "weight": w}
                    for c, w in exp.constraints
                ],
                "intercept": exp.intercept,
                "r2": exp.local_r2,
            },
            "region_text": exp.region.text,
        }

    def apply_label(self, req: LabelRequest) -> dict:
        if self.done:
            raise HTTPException(409, "session is done")
        if self.pending is None or req.query_id != self.pending["query_id"]:
            raise HTTPException(
                409,
                f"stale or unknown query id {req.query_id!r}; fetch /next again",
            )
        if req.skip:
            decision = SKIP
        elif req.label in (0, 1):
            decision = req.label
        else:
            raise HTTPException(400, "label must be 0 or 1, or skip must be true")
        explanation = self.pending["explanation"]
        new_state, record = step(self.state, _OneShotOracle(decision), explain=False)
        if record.query_index != self.pending["index"]:
            raise HTTPException(500, "query selection drifted; session corrupt")
        record = replace(record, explanation=explanation)
        self.state = new_state
        self.pending = None
        self.log_event(
            "skipped" if decision == SKIP else "labeled",
            query_id=req.query_id, index=record.query_index,
            label=None if decision == SKIP else int(decision),
        )
        return {
            "status": "done" if self.done else "ok",
            "outcome": record.outcome,
            "round": self.state.round,
            "labeled_count": len(self.state.labeled),
            "done": self.done,
        }

    def history_payload(self) -> dict:
        h = self.state.history
        rounds = []
        for r in range(len(h)):
            rounds.append({
                "round": r,
                "bias": {
                    name: (None if is_undefined(h.bias[name][r]) else h.bias[name][r])
                    for name in h.names
                },
                "count": {name: h.counts[name][r] for name in h.names},
            })
        return {"regions": list(h.names), "rounds": rounds}

    def clusters_payload(self) -> dict:
        if self._clusters_cache and self._clusters_cache[0] == self.state.round:
            return self._clusters_cache[1]
        c = self.cfg.cluster
        dataset = self.state.dataset
        indices = list(range(0, dataset.n_rows, c.encode_stride))
        explanations = explain_pool(
            self.state.model, dataset, self.state.explainer,
            discretizer=self.state.discretizer, stats=self.state.stats,
            indices=indices,
        )
        vocab = vocabulary_for(self.state.discretizer)
        encoding = encode_explanations(explanations, vocab)
        distinct = int(np.unique(encoding.matrix, axis=0).shape[0])
        k_max = min(c.k_max, distinct)
        chosen = choose_k(
            encoding, range(min(c.k_min, k_max), k_max + 1),
            improvement_threshold=c.improvement_threshold, seed=self.cfg.seed,
        )
        model = label_all(chosen.model, mode=c.label_mode, m=c.label_m, cutoff=c.label_cutoff)
        report = cluster_report(model)
        report["round"] = self.state.round
        self._clusters_cache = (self.state.round, report)
        return report


def make_app(default_preset: str = "toy-live", static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="active-learning labeling service")
    sessions: dict[str, Session] = {}
    counter = itertools.count(1)
    registry_lock = threading.Lock()

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSession):
        try:
            if body.config is not None:
                cfg = config_from_dict(body.config)
            else:
                cfg = get_preset(body.preset or default_preset)
            if body.seed is not None:
                cfg = replace(cfg, seed=body.seed)
            if cfg.mode != "experiment":
                raise ConfigError([("mode", "sessions require an experiment-mode config")])
        except ConfigError as exc:
            raise HTTPException(400, str(exc))
        with registry_lock:
            session_id = f"s{next(counter)}"
            session = Session(session_id, cfg)
            sessions[session_id] = session
        return {
            "session_id": session_id,
            "status": session.status(),
            "round": session.state.round,
            "steps": session.step_budget,
            "n_rows": session.state.dataset.n_rows,
            "labeled_count": len(session.state.labeled),
            "regions": list(session.state.region_spec.names),
        }

    def _session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(404, f"no session {session_id!r}")
        return session

    @app.get("/sessions/{session_id}/next")
    def next_query(session_id: str):
        session = _session(session_id)
        with session.lock:
            return session.next_payload()

    @app.post("/sessions/{session_id}/label")
    def label(session_id: str, body: LabelRequest):
        session = _session(session_id)
        with session.lock:
            return session.apply_label(body)

    @app.get("/sessions/{session_id}/history")
    def history(session_id: str):
        session = _session(session_id)
        with session.lock:
            return session.history_payload()

    @app.get("/sessions/{session_id}/clusters")
    def clusters(session_id: str):
        session = _session(session_id)
        with session.lock:
            return session.clusters_payload()

    if static_dir:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")
    return app
