"""HTTP API over an immutable model bundle: generator, fitter, predictor.

Responses are pure functions of (bundle, request); the bundle is loaded
read-only at startup and its content hash is served for cache busting.
Schedules on the wire are arrays ordered female ages then male ages.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from pydantic import BaseModel

from .config import PipelineConfig
from .disruption import DisruptionModel, apply_disruption
from .errors import DomainError, ExtrapolationError, InvalidInput, MdmxError
from .fitter import FitOptions, FitProblem, fit_schedule
from .lifetable import expit, floor_and_logit, forward_e0_pair
from .regimes import ClusterModel
from .svdcomp import IndicatorModel
from .trajectory import NeuralTrajectory, load_grids, reconstruct_at
from .tucker import TuckerModel


class ModelBundle:
    """Read-only artifact set backing the service."""

    def __init__(self, model, clusters, grids, neural, disruption, indicators, source):
        self.model = model
        self.clusters = clusters
        self.grids = grids
        self.neural = neural
        self.disruption = disruption
        self.indicators = indicators
        self.source = Path(source)
        self.fit_problem = FitProblem(
            grids=grids,
            profiles={lab: p.smoothed for lab, p in disruption.profiles.items()},
            options=FitOptions(),
        )
        self.version_hash = self._hash()

    def _hash(self):
        h = hashlib.sha256()
        for key in sorted(self.grids):
            h.update(np.ascontiguousarray(self.grids[key].values).tobytes())
        h.update(np.ascontiguousarray(self.model.core).tobytes())
        for lab in sorted(self.disruption.profiles):
            h.update(np.ascontiguousarray(self.disruption.profiles[lab].smoothed).tobytes())
        return h.hexdigest()

    @property
    def n_ages(self):
        return self.model.A.shape[0]

    @classmethod
    def load(cls, workdir, cfg=None):
        workdir = Path(workdir)
        cfg = cfg or PipelineConfig()
        model = TuckerModel.load(workdir / "tucker")
        clusters = ClusterModel.load(workdir / "clusters")
        grids = load_grids(workdir / "grids")
        neural = None
        if (workdir / "neural_trajectory").exists():
            neural = NeuralTrajectory.load(workdir / "neural_trajectory")
        disruption = DisruptionModel.load(workdir / "disruption")
        indicators = {}
        for variant in ("one", "two"):
            path = workdir / f"indicators_{variant}"
            if path.exists():
                indicators[variant] = IndicatorModel.load(path)
        return cls(model, clusters, grids, neural, disruption, indicators, workdir)


class FitRequest(BaseModel):
    z: list | None = None
    qx_female: list | None = None
    qx_male: list | None = None


class PredictRequest(BaseModel):
    q5_female: float
    q5_male: float
    q45_female: float | None = None
    q45_male: float | None = None


def _schedule_payload(bundle, z):
    n = bundle.n_ages
    qx = expit(z)
    e0_f, e0_m = forward_e0_pair(z)
    return {
        "logit_qx": [float(v) for v in z],
        "qx_female": [float(v) for v in qx[:n]],
        "qx_male": [float(v) for v in qx[n:]],
        "e0_female": e0_f,
        "e0_male": e0_m,
        "e0_mean": 0.5 * (e0_f + e0_m),
    }


def create_app(bundle, static_dir=None):
    app = FastAPI(title="mdmx service", version="1.0")

    @app.get("/v1/meta")
    def meta():
        clusters = []
        for key in sorted(bundle.grids):
            g = bundle.grids[key]
            clusters.append(
                {
                    "id": int(key),
                    "kind": "corpus" if key == 0 else "regime",
                    "e0_range": [g.e0_range[0], g.e0_range[1]],
                    "n_observations": int(g.n_observations),
                }
            )
        types = []
        for lab in sorted(bundle.disruption.profiles):
            sc = bundle.disruption.subclusterings.get(lab)
            types.append(
                {
                    "id": int(lab),
                    "name": {1: "war", 2: "respiratory", 3: "enteric"}.get(lab, str(lab)),
                    "n_subclusters": 0 if sc is None else int(sc.n_subclusters),
                }
            )
        engines = ["lowess"] + (["neural"] if bundle.neural is not None else [])
        return {
            "bundle_hash": bundle.version_hash,
            "n_ages": bundle.n_ages,
            "clusters": clusters,
            "disruption_types": types,
            "engines": engines,
        }

    # "lambda" is a Python keyword, so the query string is read manually
    @app.get("/v1/schedule")
    async def schedule(request: Request):
        params = request.query_params
        if "e0" not in params:
            raise HTTPException(422, detail="e0 is required")
        try:
            cluster = int(params.get("cluster", 0))
            e0 = float(params["e0"])
            d_type = int(params.get("type", 0))
            lam = float(params.get("lambda", 0.0))
            sub_raw = params.get("subcluster")
            subcluster = int(sub_raw) if sub_raw not in (None, "") else None
            engine = params.get("engine", "lowess")
        except ValueError as exc:
            raise HTTPException(422, detail=f"bad query parameter: {exc}") from None

        if engine not in ("lowess", "neural"):
            raise HTTPException(422, detail="engine must be lowess or neural")
        if lam < 0:
            raise HTTPException(422, detail="lambda must be nonnegative")
        if d_type not in (0, 1, 2, 3):
            raise HTTPException(422, detail="type must be 0..3")

        if engine == "lowess":
            grid = bundle.grids.get(cluster)
            if grid is None:
                raise HTTPException(422, detail=f"unknown cluster {cluster}")
            try:
                base = reconstruct_at(grid, e0, refine=True)
            except ExtrapolationError as exc:
                raise HTTPException(
                    422,
                    detail={
                        "message": str(exc),
                        "supported_range": list(exc.supported_range),
                    },
                ) from None
        else:
            if bundle.neural is None:
                raise HTTPException(422, detail="neural engine unavailable")
            k = cluster - 1 if cluster > 0 else 0
            if not (0 <= k < bundle.neural.embeddings.vectors.shape[0]):
                raise HTTPException(422, detail=f"unknown cluster {cluster}")
            base = bundle.neural.reconstruct(e0, cluster=k)

        z = base
        if d_type != 0 and lam > 0:
            try:
                delta = bundle.disruption.profile_vector(d_type, subcluster)
            except (InvalidInput, MdmxError) as exc:
                raise HTTPException(422, detail=str(exc)) from None
            z = apply_disruption(base, delta, lam)
        payload = _schedule_payload(bundle, z)
        base_e0 = 0.5 * sum(forward_e0_pair(base))
        payload["delta_e0_vs_baseline"] = payload["e0_mean"] - base_e0
        payload["params"] = {
            "cluster": cluster,
            "e0": e0,
            "type": d_type,
            "lambda": lam,
            "subcluster": subcluster,
            "engine": engine,
        }
        return payload

    @app.post("/v1/fit")
    def fit(req: FitRequest):
        n = bundle.n_ages
        if req.z is not None:
            z = np.asarray(req.z, dtype=float)
            if z.shape != (2 * n,):
                raise HTTPException(400, detail=f"z must have length {2 * n}")
        elif req.qx_female is not None and req.qx_male is not None:
            qf = np.asarray(req.qx_female, dtype=float)
            qm = np.asarray(req.qx_male, dtype=float)
            if qf.shape != (n,) or qm.shape != (n,):
                raise HTTPException(400, detail=f"qx vectors must have length {n}")
            try:
                z = np.concatenate([floor_and_logit(qf), floor_and_logit(qm)])
            except DomainError as exc:
                raise HTTPException(400, detail=str(exc)) from None
        else:
            raise HTTPException(400, detail="provide z or qx_female plus qx_male")
        if not np.all(np.isfinite(z)):
            raise HTTPException(400, detail="schedule contains non-finite values")
        result = fit_schedule(bundle.fit_problem, z)
        payload = {
            "cluster": result.cluster,
            "e0_star": result.e0_star,
            "e0_null": result.e0_null,
            "d_hat": result.d_hat,
            "lam_hat": result.lam_hat,
            "rss0": result.rss0,
            "log_bf": {str(k): v for k, v in result.log_bf.items()},
            "rss_d": {str(k): v for k, v in result.rss_d.items()},
            "lam_d": {str(k): v for k, v in result.lam_d.items()},
            "gap_d": {str(k): v for k, v in result.gap_d.items()},
            "multi_lambda": [float(v) for v in result.multi_lambda],
        }
        grid = bundle.grids.get(result.cluster)
        if grid is not None:
            base = reconstruct_at(grid, result.e0_star, refine=False)
            fitted_z = base
            if result.d_hat != 0:
                fitted_z = base + result.lam_hat * bundle.fit_problem.profiles[result.d_hat]
            payload["baseline_logit_qx"] = [float(v) for v in base]
            payload["fitted_logit_qx"] = [float(v) for v in fitted_z]
        return payload

    @app.post("/v1/predict")
    def predict(req: PredictRequest):
        two_param = req.q45_female is not None and req.q45_male is not None
        variant = "two" if two_param else "one"
        model = bundle.indicators.get(variant)
        if model is None:
            raise HTTPException(422, detail=f"{variant}-parameter model unavailable")
        kwargs = {"q5_female": req.q5_female, "q5_male": req.q5_male}
        if two_param:
            kwargs.update(q45_female=req.q45_female, q45_male=req.q45_male)
        try:
            qx = model.predict_schedule(**kwargs)
        except (DomainError, InvalidInput) as exc:
            raise HTTPException(400, detail=str(exc)) from None
        n = bundle.n_ages
        z = floor_and_logit(np.minimum(qx, 1 - 1e-12))
        e0_f, e0_m = forward_e0_pair(z)
        return {
            "variant": variant,
            "qx_female": [float(v) for v in qx[:n]],
            "qx_male": [float(v) for v in qx[n:]],
            "e0_female": e0_f,
            "e0_male": e0_m,
        }

    if static_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
