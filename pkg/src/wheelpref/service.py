"""HTTP JSON service over a file store.

One app per store root. Training runs in-process on a background thread,
with a per-respondent exclusive lock: of two racing train requests exactly
one gets 202, the other 409. All GETs are side-effect free.

Error mapping: malformed bodies 400, unknown ids 404, invalid rankings 422,
state conflicts 409, too few responses 412.
"""

import io
import os
import threading

import numpy as np
from fastapi import Body, FastAPI, HTTPException
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response

from . import choice_model, ensemble, pipeline, recommend, simulator
from .config import load_config
from .store import Store


class ServiceState:
    def __init__(self, store, cfg):
        self.store = store
        self.cfg = cfg
        self.lock = threading.Lock()  # guards training set and id allocation
        self.training = set()
        self.threads = {}
        self.errors = {}

    def status_of(self, respondent):
        if os.path.exists(self.store.model_path(respondent)):
            return "trained"
        if respondent in self.training:
            return "training"
        return "untrained"


def _require_respondent(state, respondent):
    try:
        return state.store.read_respondent(respondent)
    except KeyError:
        raise HTTPException(404, f"unknown respondent {respondent}")


def _train_job(state, respondent):
    try:
        pipeline.train_individual_job(state.store, state.cfg, respondent)
    except Exception as exc:  # surfaced via /status, not a crashed thread
        state.errors[respondent] = f"{type(exc).__name__}: {exc}"
    finally:
        with state.lock:
            state.training.discard(respondent)


def make_app(root, cfg=None):
    store = root if isinstance(root, Store) else Store(root)
    cfg = cfg if cfg is not None else load_config()
    store.ensure_dirs()
    state = ServiceState(store, cfg)
    app = FastAPI(title="wheelpref")
    app.state.service = state

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request, exc):
        return JSONResponse(status_code=400, content={"detail": "malformed request"})

    @app.post("/respondents", status_code=201)
    def create_respondent(payload: dict = Body(None)):
        demographics = (payload or {}).get("demographics", {})
        if not isinstance(demographics, dict) or \
                not all(isinstance(k, str) and isinstance(v, str)
                        for k, v in demographics.items()):
            raise HTTPException(400, "demographics must map strings to strings")
        if not os.path.exists(store.labels_path):
            raise HTTPException(409, f"design pool not ready: {store.labels_path}")
        labels = store.read_labels()
        with state.lock:
            respondent = store.next_respondent_id()
            plan = simulator.plan_survey(labels,
                                         seed=[cfg["seed"], int(respondent[1:])],
                                         fixed_seed=cfg["fixed_seed"])
            store.write_respondent(respondent, demographics, plan.questions)
        return {"id": respondent}

    @app.get("/respondents/{respondent}/questions/{question}")
    def get_question(respondent: str, question: int):
        record = _require_respondent(state, respondent)
        if question not in record["plan"]:
            raise HTTPException(404, f"no question {question}")
        ids = record["plan"][question]
        return {"question": question, "design_ids": ids,
                "image_uris": [f"/designs/{d}/image" for d in ids]}

    @app.post("/respondents/{respondent}/responses", status_code=201)
    def post_response(respondent: str, payload: dict = Body(...)):
        record = _require_respondent(state, respondent)
        question = payload.get("question")
        ranking = payload.get("ranking")
        if not isinstance(question, int) or isinstance(question, bool) \
                or not isinstance(ranking, list) \
                or not all(isinstance(d, str) for d in ranking):
            raise HTTPException(400, "expected {question: int, ranking: [ids]}")
        with state.lock:
            if state.status_of(respondent) != "untrained":
                raise HTTPException(409, "training already started; responses frozen")
            if question not in record["plan"]:
                raise HTTPException(422, f"no question {question} in the survey plan")
            expected = record["plan"][question]
            if len(ranking) != len(expected) or len(set(ranking)) != len(ranking) \
                    or set(ranking) != set(expected):
                raise HTTPException(422, "ranking must permute the question's designs")
            store.append_response(respondent, question, ranking)
        return {"respondent": respondent, "question": question}

    @app.post("/respondents/{respondent}/train", status_code=202)
    def train(respondent: str):
        _require_respondent(state, respondent)
        with state.lock:
            status = state.status_of(respondent)
            if status != "untrained":
                raise HTTPException(409, f"respondent is already {status}")
            answered = len(store.latest_rankings(respondent))
            if answered < choice_model.N_QUESTIONS:
                raise HTTPException(
                    412, f"only {answered}/{choice_model.N_QUESTIONS} questions answered")
            state.training.add(respondent)
            thread = threading.Thread(target=_train_job, args=(state, respondent),
                                      daemon=True)
            state.threads[respondent] = thread
            thread.start()
        return {"id": respondent, "status": "training"}

    @app.get("/respondents/{respondent}/recommendations")
    def recommendations(respondent: str, n: int = 10):
        _require_respondent(state, respondent)
        if state.status_of(respondent) != "trained":
            raise HTTPException(409, "respondent is not trained yet")
        ens = pipeline.load_ensemble_for(store, respondent)
        try:
            rec = recommend.recommend_top_n(ens, pipeline.pool_images(store), n)
        except recommend.ParameterError as exc:
            raise HTTPException(422, str(exc))
        return {"respondent": respondent,
                "recommendations": [{"design_id": d, "utility": u,
                                     "image_uri": f"/designs/{d}/image"}
                                    for d, u in zip(rec.designs, rec.utilities)]}

    @app.get("/respondents/{respondent}")
    def get_respondent(respondent: str):
        record = _require_respondent(state, respondent)
        return {"id": respondent, "demographics": record["demographics"],
                "responses": len(store.latest_rankings(respondent)),
                "status": state.status_of(respondent),
                "error": state.errors.get(respondent)}

    @app.get("/designs/{design_id}/image")
    def design_image(design_id: str, format: str = "pgm"):
        rows = {row["id"]: row for row in store.design_rows()} \
            if os.path.exists(store.manifest_path) else {}
        if design_id not in rows:
            raise HTTPException(404, f"unknown design {design_id}")
        path = os.path.join(store.designs_dir, rows[design_id]["path"])
        if format == "pgm":
            with open(path, "rb") as fh:
                return Response(fh.read(), media_type="image/x-portable-graymap")
        if format == "png":
            from PIL import Image
            from .pgm import read_pgm
            pixels = np.clip(read_pgm(path) * 255.0, 0, 255).astype(np.uint8)
            buf = io.BytesIO()
            Image.fromarray(pixels, mode="L").save(buf, format="PNG")
            return Response(buf.getvalue(), media_type="image/png")
        raise HTTPException(400, f"unknown image format {format!r}")

    @app.get("/groups")
    def groups():
        try:
            return pipeline.group_report(store, cfg)
        except (ensemble.PopulationError, pipeline.MissingArtifactError) as exc:
            raise HTTPException(409, str(exc))

    @app.get("/status")
    def status():
        designs = len(store.design_rows()) if os.path.exists(store.manifest_path) else 0
        return {"designs": designs,
                "respondents": len(store.list_respondents()),
                "responses": len(store.read_responses()),
                "trained": store.trained_respondents(),
                "training": sorted(state.training),
                "errors": dict(state.errors),
                "artifacts": {name: os.path.exists(path) for name, path in
                              [("manifest", store.manifest_path),
                               ("features", store.features_path),
                               ("pca", store.pca_path),
                               ("labels", store.labels_path),
                               ("vae", store.vae_path),
                               ("utility", store.utility_path)]}}

    return app
