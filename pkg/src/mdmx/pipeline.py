"""Stage orchestration over an on-disk workspace.

Every stage is a pure function of (upstream stores, config, seed): it
reads the documented stores of earlier stages, writes its own store
directory, and drops a JSON run log with input/config hashes and
timings.  Logs live outside the stores so reruns with one seed produce
bit-identical store bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from pathlib import Path

import numpy as np

from . import disruption as disruption_mod
from . import regimes
from . import trajectory as trajectory_mod
from .data import (
    CurationConfig,
    EventDictionary,
    MortalityTensor,
    SynthConfig,
    adaptive_pool,
    assemble_tensor,
    curate,
    ingest,
    label_exceptional,
    merge_counts,
    synthesize,
    write_counts_csv,
    write_lifetable_csv,
)
from .errors import MdmxError
from .fitter import FitOptions, FitProblem, fit_schedule
from .forecast import (
    estimate_drift_hierarchy,
    fit_kalman_mle,
    fit_score_space,
    forecast_country,
    kalman_filter,
    rolling_cv,
    score_series,
)
from .lifetable import TransformConfig, forward_e0_pair
from .svdcomp import IndicatorModel, build_recon, train_indicator_model
from .tucker import AgeSmoothingSpec, RankPolicy, TuckerModel, hosvd, smooth_age_basis

STAGE_DEPENDENCIES = {
    "synth": [],
    "ingest": ["data/lifetables.csv"],
    "pool": ["data/curated.csv", "data/labels.json"],
    "tensor": ["data/pooled.csv", "data/labels.json"],
    "decompose": ["tensor"],
    "cluster": ["tensor", "tucker"],
    "trajectory": ["tensor", "tucker", "clusters"],
    "disruption": ["tensor", "tucker"],
    "fit": ["grids", "disruption"],
    "predict": ["tensor", "tucker"],
    "forecast": ["tensor", "tucker"],
    "report": ["tensor", "tucker"],
}


class MissingStore(MdmxError):
    def __init__(self, path):
        super().__init__(f"missing upstream store: {path}")
        self.path = str(path)


def _require(workdir, relative):
    path = Path(workdir) / relative
    if not path.exists():
        raise MissingStore(path)
    return path


def _hash_path(path):
    path = Path(path)
    h = hashlib.sha256()
    if path.is_file():
        h.update(path.read_bytes())
    else:
        for sub in sorted(path.rglob("*")):
            if sub.is_file():
                h.update(sub.name.encode())
                h.update(sub.read_bytes())
    return h.hexdigest()


def _run_log(workdir, stage, cfg, inputs, started, extra=None):
    logdir = Path(workdir) / "logs"
    logdir.mkdir(parents=True, exist_ok=True)
    payload = {
        "stage": stage,
        "config_hash": cfg.config_hash(),
        "inputs": {str(k): _hash_path(Path(workdir) / k) for k in inputs},
        "elapsed_seconds": round(time.perf_counter() - started, 3),
    }
    if extra:
        payload.update(extra)
    (logdir / f"{stage}.json").write_text(json.dumps(payload, indent=2, sort_keys=True))


def _rng_for(cfg, stage_index):
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, stage_index]))


def _synth_config(cfg):
    s = cfg.synth
    return SynthConfig(
        n_countries=s.n_countries,
        n_years=s.n_years,
        start_year=s.start_year,
        n_ages=cfg.data.n_ages,
        seed=cfg.seed,
        small_countries=tuple(s.small_countries),
        include_disruptions=s.include_disruptions,
        ragged_entry=s.ragged_entry,
        noise_scale=s.noise_scale,
        wiggle_scale=s.wiggle_scale,
    )


def run_synth(cfg, workdir):
    """Generate the synthetic corpus: life table CSV, counts CSV, events."""
    started = time.perf_counter()
    out = Path(workdir) / "data"
    out.mkdir(parents=True, exist_ok=True)
    raw, events, truth = synthesize(_synth_config(cfg))
    write_lifetable_csv(out / "lifetables.csv", raw.tables.values(), cfg.data.n_ages)
    write_counts_csv(out / "counts.csv", raw.counts.values(), cfg.data.n_ages)
    events.save(out / "events.json")
    truth_payload = {
        "archetypes": truth.archetypes.tolist(),
        "populations": truth.populations,
        "intensities": [
            [int(c), int(year), kind, lam]
            for (c, year), (kind, lam) in sorted(truth.intensities.items())
        ],
    }
    (out / "truth.json").write_text(json.dumps(truth_payload, indent=2, sort_keys=True))
    _run_log(workdir, "synth", cfg, [], started)
    return out


def run_ingest(cfg, workdir):
    """Parse, curate, and label the raw CSVs."""
    started = time.perf_counter()
    lt_path = _require(workdir, "data/lifetables.csv")
    counts_path = Path(workdir) / "data" / "counts.csv"
    events_path = Path(workdir) / "data" / "events.json"
    raw = ingest(lt_path, "lifetable", n_ages=cfg.data.n_ages)
    if counts_path.exists():
        merge_counts(raw, ingest(counts_path, "counts", n_ages=cfg.data.n_ages))
    events = (
        EventDictionary.from_file(events_path)
        if events_path.exists()
        else EventDictionary.bundled()
    )
    curated, report = curate(
        raw,
        CurationConfig(
            flat_age_pair=tuple(cfg.data.flat_age_pair),
            excluded_populations=tuple(cfg.data.excluded_populations),
        ),
    )
    labels, unresolved = label_exceptional(
        curated.populations, curated.years_by_population(), events
    )
    out = Path(workdir) / "data"
    write_lifetable_csv(out / "curated.csv", curated.tables.values(), cfg.data.n_ages)
    (out / "labels.json").write_text(
        json.dumps(
            {"labels": [[p, int(y), int(lab)] for (p, y), lab in sorted(labels.items())],
             "unresolved": unresolved},
            indent=2,
            sort_keys=True,
        )
    )
    (out / "curation_report.json").write_text(
        json.dumps({"drops": report.drops}, indent=2, sort_keys=True)
    )
    _run_log(workdir, "ingest", cfg, ["data/lifetables.csv"], started,
             {"n_tables": len(curated.tables), "n_drops": len(report)})
    return curated, labels


def _load_labels(workdir):
    payload = json.loads(_require(workdir, "data/labels.json").read_text())
    return {(p, y): lab for p, y, lab in payload["labels"]}


def run_pool(cfg, workdir):
    """Adaptive temporal pooling of the curated tables."""
    started = time.perf_counter()
    curated = ingest(_require(workdir, "data/curated.csv"), "lifetable", cfg.data.n_ages)
    counts_path = Path(workdir) / "data" / "counts.csv"
    if counts_path.exists():
        merge_counts(curated, ingest(counts_path, "counts", cfg.data.n_ages))
    labels = _load_labels(workdir)
    pooled, report = adaptive_pool(curated, labels, q_thresh=cfg.data.q_thresh)
    out = Path(workdir) / "data"
    write_lifetable_csv(out / "pooled.csv", pooled.tables.values(), cfg.data.n_ages)
    (out / "pooling_report.json").write_text(
        json.dumps(
            {
                "valley_ages": report.valley_ages.tolist(),
                "blocks": report.blocks,
                "exceptional_blocks": report.exceptional_blocks,
                "untouched": report.untouched,
            },
            indent=2,
            sort_keys=True,
        )
    )
    _run_log(workdir, "pool", cfg, ["data/curated.csv", "data/labels.json"], started)
    return pooled


def run_tensor(cfg, workdir):
    started = time.perf_counter()
    pooled = ingest(_require(workdir, "data/pooled.csv"), "lifetable", cfg.data.n_ages)
    labels = _load_labels(workdir)
    tensor = assemble_tensor(
        pooled,
        labels,
        min_years=cfg.data.min_years,
        transform=TransformConfig(q_min=cfg.data.q_min, n_ages=cfg.data.n_ages),
        imputed_weight=cfg.data.imputed_weight,
    )
    tensor.save(Path(workdir) / "tensor")
    _run_log(workdir, "tensor", cfg, ["data/pooled.csv"], started,
             {"audit": tensor.audit()})
    return tensor


def run_decompose(cfg, workdir):
    started = time.perf_counter()
    tensor = MortalityTensor.load(_require(workdir, "tensor"))
    model = hosvd(tensor, RankPolicy(tau=cfg.tucker.tau), weighting=cfg.tucker.weighting)
    if cfg.tucker.smooth_age_basis:
        model = smooth_age_basis(model, AgeSmoothingSpec(), tensor=tensor.values)
    model.save(
        Path(workdir) / "tucker",
        provenance={"seed": cfg.seed, "data_hash": tensor.provenance_hash()},
    )
    _run_log(workdir, "decompose", cfg, ["tensor"], started,
             {"ranks": [int(r) for r in model.ranks]})
    return model


def run_cluster(cfg, workdir):
    started = time.perf_counter()
    tensor = MortalityTensor.load(_require(workdir, "tensor"))
    model = TuckerModel.load(_require(workdir, "tucker"))
    feats = regimes.extract_features(model, tensor)
    rng = _rng_for(cfg, 5)
    cm = regimes.fit_clusters(
        feats,
        k_range=range(cfg.cluster.k_min, cfg.cluster.k_max + 1),
        pca_target=cfg.cluster.pca_target,
        restarts=cfg.cluster.gmm_restarts,
        rng=rng,
        k_override=cfg.cluster.k_override,
    )
    cm.save(Path(workdir) / "clusters")

    # epoch classification on the level trajectory, ordinary years only
    level_series = {}
    for c in range(tensor.shape[2]):
        rows = [
            (int(tensor.years[t]), feats.grand_level[i])
            for i, (cc, t) in enumerate(feats.cells)
            if cc == c
        ]
        if rows:
            years, levels = zip(*rows)
            level_series[c] = (np.array(years), np.array(levels))
    params = regimes.EpochParams(
        window=cfg.cluster.epoch_window,
        delta=cfg.cluster.epoch_delta,
        delta_rapid=cfg.cluster.epoch_delta_rapid,
    )
    calendar = regimes.classify_epochs(level_series, params)

    with open(Path(workdir) / "clusters" / "report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pop", "year", "cluster", "epoch"])
        for i, (c, t) in enumerate(feats.cells):
            year = int(tensor.years[t])
            epoch = calendar.categories.get(c, {}).get(year, "unassigned")
            writer.writerow([tensor.populations[c], year, int(cm.labels[i]), epoch])
    _run_log(workdir, "cluster", cfg, ["tensor", "tucker"], started,
             {"n_clusters": cm.n_clusters, "bic_table": cm.bic_table})
    return cm


def run_trajectory(cfg, workdir):
    started = time.perf_counter()
    tensor = MortalityTensor.load(_require(workdir, "tensor"))
    model = TuckerModel.load(_require(workdir, "tucker"))
    cm = regimes.ClusterModel.load(_require(workdir, "clusters"))
    t = cfg.trajectory
    grids = trajectory_mod.fit_trajectories(
        tensor,
        model,
        cm,
        n_nodes=t.n_nodes,
        frac=t.lowess_frac,
        robust_iters=t.robust_iters,
        min_observations=t.min_observations,
        e0_summary=t.e0_summary,
    )
    trajectory_mod.save_grids(grids, Path(workdir) / "grids")
    nn = trajectory_mod.train_neural_trajectory(
        tensor,
        model,
        cm,
        hidden=tuple(t.nn_hidden),
        epochs=t.nn_epochs,
        batch_size=t.nn_batch_size,
        learning_rate=t.nn_learning_rate,
        weight_decay=t.nn_weight_decay,
        e0_summary=t.e0_summary,
        rng=_rng_for(cfg, 6),
    )
    nn.save(Path(workdir) / "neural_trajectory")
    _run_log(workdir, "trajectory", cfg, ["tensor", "tucker", "clusters"], started,
             {"grids": sorted(int(k) for k in grids), "nn_train_mse": nn.train_mse})
    return grids, nn


def run_disruption(cfg, workdir):
    started = time.perf_counter()
    tensor = MortalityTensor.load(_require(workdir, "tensor"))
    model = TuckerModel.load(_require(workdir, "tucker"))
    d = cfg.disruption
    dm = disruption_mod.fit_disruption_model(
        model,
        tensor,
        baseline_method=d.baseline_method,
        neural_core_kwargs={"hidden": tuple(d.core_hidden), "epochs": d.core_epochs},
        subcluster_min_size=d.subcluster_min_size,
        sg_window=d.sg_window,
        sg_degree=d.sg_degree,
        rng=_rng_for(cfg, 7),
    )
    dm.save(Path(workdir) / "disruption")
    with open(Path(workdir) / "disruption" / "report.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pop", "year", "type", "subcluster", "lambda", "r2", "orth_norm"])
        for (c, t), (lab, lam) in sorted(dm.intensities.items()):
            r = dm.residuals.get((c, t))
            r2 = orth = ""
            sub = ""
            if r is not None:
                norm2 = float(r @ r)
                rem = r - lam * dm.profiles[lab].smoothed
                orth = f"{np.linalg.norm(rem):.6g}"
                r2 = f"{1.0 - float(rem @ rem) / norm2:.6g}" if norm2 > 0 else ""
            sc = dm.subclusterings.get(lab)
            if sc is not None:
                cells = [
                    cell for cell, (lab2, _) in sorted(dm.intensities.items()) if lab2 == lab
                ]
                sub = int(sc.member_labels[cells.index((c, t))])
            writer.writerow(
                [tensor.populations[c], int(tensor.years[t]), lab, sub, f"{lam:.6g}", r2, orth]
            )
    _run_log(workdir, "disruption", cfg, ["tensor", "tucker"], started,
             {"types": sorted(int(k) for k in dm.profiles)})
    return dm


def load_fit_problem(cfg, workdir):
    grids = trajectory_mod.load_grids(_require(workdir, "grids"))
    dm = disruption_mod.DisruptionModel.load(_require(workdir, "disruption"))
    profiles = {lab: p.smoothed for lab, p in dm.profiles.items()}
    return FitProblem(
        grids=grids,
        profiles=profiles,
        options=FitOptions(
            sigma_lambda=cfg.fitter.sigma_lambda,
            gap_threshold=cfg.fitter.gap_threshold,
            include_global_grid=cfg.fitter.include_global_grid,
        ),
    )


def run_fit(cfg, workdir, schedules_csv, out_csv):
    """Batch-fit schedules from a CSV of (id, 2A logit values)."""
    started = time.perf_counter()
    problem = load_fit_problem(cfg, workdir)
    rows = []
    ids = []
    with open(schedules_csv, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        for row in reader:
            ids.append(row[0])
            rows.append([float(v) for v in row[1:]])
    results = [fit_schedule(problem, np.array(r)) for r in rows]
    fieldnames = ["id"] + list(results[0].to_row()) if results else ["id"]
    with open(out_csv, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for sid, res in zip(ids, results):
            writer.writerow({"id": sid, **{k: _fmt_cell(v) for k, v in res.to_row().items()}})
    _run_log(workdir, "fit", cfg, ["grids", "disruption"], started,
             {"n_schedules": len(rows),
              "options": {"sigma_lambda": cfg.fitter.sigma_lambda,
                          "gap_threshold": cfg.fitter.gap_threshold,
                          "include_global_grid": cfg.fitter.include_global_grid}})
    return results


def _fmt_cell(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return v


def run_train_indicators(cfg, workdir):
    started = time.perf_counter()
    tensor = MortalityTensor.load(_require(workdir, "tensor"))
    model = TuckerModel.load(_require(workdir, "tucker"))
    recon = build_recon(model, c_age=cfg.svdcomp.c_age)
    models = {}
    for i, variant in enumerate(("one", "two")):
        m = train_indicator_model(
            tensor,
            recon,
            variant=variant,
            alpha=cfg.svdcomp.alpha,
            epochs=cfg.svdcomp.epochs,
            patience=cfg.svdcomp.patience,
            rng=_rng_for(cfg, 8 + i),
        )
        m.save(Path(workdir) / f"indicators_{variant}")
        models[variant] = m
    _run_log(workdir, "indicators", cfg, ["tensor", "tucker"], started)
    return models


def load_indicator_models(cfg, workdir, train_if_missing=True):
    out = {}
    for variant in ("one", "two"):
        path = Path(workdir) / f"indicators_{variant}"
        if path.exists():
            out[variant] = IndicatorModel.load(path)
    if len(out) < 2 and train_if_missing:
        out = run_train_indicators(cfg, workdir)
    return out


def run_predict(cfg, workdir, q5_female, q5_male, q45_female=None, q45_male=None, out_csv=None):
    """Predict full life tables from summary indicators."""
    models = load_indicator_models(cfg, workdir)
    variant = "two" if q45_female is not None and q45_male is not None else "one"
    kwargs = {"q5_female": q5_female, "q5_male": q5_male}
    if variant == "two":
        kwargs.update(q45_female=q45_female, q45_male=q45_male)
    qx = models[variant].predict_schedule(**kwargs)
    if out_csv:
        from .lifetable import lifetable_from_qx

        half = qx.size // 2
        with open(out_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sex", "age", "qx", "lx", "dx", "Lx", "Tx", "ex"])
            for sex, q in (("f", qx[:half]), ("m", qx[half:])):
                lt = lifetable_from_qx(q)
                for age in range(half):
                    writer.writerow(
                        [sex, age, f"{lt.qx[age]:.10g}", f"{lt.lx[age]:.10g}",
                         f"{lt.dx[age]:.10g}", f"{lt.Lx[age]:.10g}",
                         f"{lt.Tx[age]:.10g}", f"{lt.ex[age]:.10g}"]
                    )
    return qx, variant


def run_forecast(cfg, workdir):
    """Score-space Kalman forecasts plus rolling-origin cross-validation."""
    started = time.perf_counter()
    tensor = MortalityTensor.load(_require(workdir, "tensor"))
    model = TuckerModel.load(_require(workdir, "tucker"))
    f = cfg.forecast
    space = fit_score_space(model, tensor, n_pc=f.n_pc)
    out = Path(workdir) / "forecast"
    out.mkdir(parents=True, exist_ok=True)
    space.save(out / "score_space")

    country_cluster = None
    cluster_store = Path(workdir) / "clusters"
    if cluster_store.exists():
        cm = regimes.ClusterModel.load(cluster_store)
        country_cluster = cm.country_labels

    years = tensor.years
    span = int(years[-1] - years[0])
    step = max(10, span // (f.n_origins + 1))
    origins = [int(years[0]) + step * (i + 1) for i in range(f.n_origins)]
    origins = [o for o in origins if o < int(years[-1]) - 2]
    metrics = rolling_cv(
        model,
        tensor,
        space,
        origins,
        horizon=f.horizon,
        min_train=f.min_train,
        weights=tuple(f.weights),
        window=f.window,
        country_cluster=country_cluster,
        kappa_floor=f.kappa_floor,
        mle_max_iter=f.mle_max_iter,
    )

    # final forecasts from the full series
    series = score_series(model, tensor, space)
    hier = estimate_drift_hierarchy(series, country_cluster, tuple(f.weights), f.window)
    rows = []
    e0_rows = []
    specs = {}
    for c, (ts, obs_rows) in sorted(series.items()):
        obs = np.full((ts[-1] - ts[0] + 1, space.n_pc), np.nan)
        obs[ts - ts[0]] = obs_rows
        try:
            spec = fit_kalman_mle(
                obs, hier.target_for(c), min_observations=f.min_train,
                max_iter=f.mle_max_iter,
            )
        except MdmxError:
            continue
        specs[c] = spec
        filtered = kalman_filter(spec, obs)
        entries = forecast_country(
            spec, filtered, space, years[: ts[-1] + 1], f.horizon, kappa=metrics.kappa
        )
        pop = tensor.populations[c]
        n_ages = tensor.n_ages
        for e in entries:
            lo80, hi80 = e.interval(0.80, metrics.kappa)
            lo95, hi95 = e.interval(0.95, metrics.kappa)
            e0_rows.append(
                [pop, e.year, f"{e.e0_female:.6g}", f"{e.e0_male:.6g}",
                 f"{e.e0_mean:.6g}", f"{e.sigma_e0:.6g}",
                 f"{lo80:.6g}", f"{hi80:.6g}", f"{lo95:.6g}", f"{hi95:.6g}"]
            )
            z = e.z_median
            sigma_z = np.sqrt(
                np.maximum((space.l_map**2 @ e.score_var), 0.0)
            )
            for s, sex in enumerate(("f", "m")):
                for age in range(n_ages):
                    j = s * n_ages + age
                    rows.append(
                        [pop, e.year, sex, age, f"{z[j]:.6g}",
                         f"{z[j] - Z80 * metrics.kappa * sigma_z[j]:.6g}",
                         f"{z[j] + Z80 * metrics.kappa * sigma_z[j]:.6g}",
                         f"{z[j] - Z95 * metrics.kappa * sigma_z[j]:.6g}",
                         f"{z[j] + Z95 * metrics.kappa * sigma_z[j]:.6g}"]
                    )
    with open(out / "schedules.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["pop", "year", "sex", "age", "logit_qx_median", "lo80", "hi80", "lo95", "hi95"]
        )
        writer.writerows(rows)
    with open(out / "e0.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["pop", "year", "e0_female", "e0_male", "e0_mean", "sigma",
             "lo80", "hi80", "lo95", "hi95"]
        )
        writer.writerows(e0_rows)
    manifest = {
        "weights": list(f.weights),
        "kappa": metrics.kappa,
        "origins": origins,
        "cv": {
            "mae": metrics.mae,
            "bias": metrics.bias,
            "coverage80": metrics.coverage80,
            "coverage95": metrics.coverage95,
            "coverage80_calibrated": metrics.coverage80_calibrated,
            "coverage95_calibrated": metrics.coverage95_calibrated,
            "n_points": metrics.n_points,
            "per_origin": metrics.per_origin,
        },
        "specs": {str(c): spec.to_dict() for c, spec in sorted(specs.items())},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    _run_log(workdir, "forecast", cfg, ["tensor", "tucker"], started,
             {"kappa": metrics.kappa, "mae": metrics.mae})
    return metrics


Z80 = 1.2815515655446004
Z95 = 1.959963984540054


def run_report(cfg, workdir):
    """Summary tables in long format: observed vs reconstructed e0 and more."""
    started = time.perf_counter()
    tensor = MortalityTensor.load(_require(workdir, "tensor"))
    model = TuckerModel.load(_require(workdir, "tucker"))
    out = Path(workdir) / "reports"
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "e0_observed_vs_reconstructed.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pop", "year", "series", "sex", "e0"])
        for c, t in tensor.observed_cells():
            pop = tensor.populations[c]
            year = int(tensor.years[t])
            for series, z in (
                ("observed", tensor.z_at(c, t)),
                ("reconstructed", model.reconstruct_pair(c, t)),
            ):
                ef, em = forward_e0_pair(z)
                writer.writerow([pop, year, series, "f", f"{ef:.6g}"])
                writer.writerow([pop, year, series, "m", f"{em:.6g}"])
    with open(out / "variance_fractions.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "rank", "retained_fraction"])
        for mode, (frac, rank) in enumerate(
            zip(model.variance_fractions(), model.ranks), start=1
        ):
            writer.writerow([mode, rank, f"{frac:.10g}"])
    _run_log(workdir, "report", cfg, ["tensor", "tucker"], started)
    return out


def run_all(cfg, workdir):
    """synth through forecast, in dependency order."""
    run_synth(cfg, workdir)
    run_ingest(cfg, workdir)
    run_pool(cfg, workdir)
    run_tensor(cfg, workdir)
    run_decompose(cfg, workdir)
    run_cluster(cfg, workdir)
    run_trajectory(cfg, workdir)
    run_disruption(cfg, workdir)
    run_train_indicators(cfg, workdir)
    run_forecast(cfg, workdir)
    run_report(cfg, workdir)
