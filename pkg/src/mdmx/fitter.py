"""Three-stage single-schedule fitting: which regime, what mortality level,
and is a disruption present.

Stage 1 linearizes the trajectory around every grid node and solves the
tiny (1- or 2-regressor) least squares in closed form, vectorized over
all nodes at once.  Stage 2 walks the life-expectancy reference by the
fitted shift until the linearization is locally valid.  Stage 3 drops
the trajectory tangent, projects the exact residual on each disruption
profile with the intensity clamped nonnegative, and scores each
hypothesis with a Laplace-approximated log Bayes factor (half-normal
intensity prior, Occam term from the observed information).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData, InvalidInput

DET_EPS = 1e-12


@dataclass
class FitOptions:
    sigma_lambda: float = 1.0
    gap_threshold: float = 0.0
    max_refine_iters: int = 3
    refine_tol: float = 0.3
    include_global_grid: bool = True


@dataclass
class FitProblem:
    """Immutable caches the fitter consumes: trajectory grids and profiles."""

    grids: dict  # grid key -> TrajectoryGrid (key 0 = corpus-wide)
    profiles: dict  # disruption label -> unit profile vector (2A,)
    options: FitOptions = field(default_factory=FitOptions)

    def __post_init__(self):
        for lab, delta in self.profiles.items():
            if abs(np.linalg.norm(delta) - 1.0) > 1e-6:
                raise InvalidInput(f"profile {lab} is not unit norm")

    def cluster_keys(self):
        keys = sorted(self.grids)
        if not self.options.include_global_grid:
            keys = [k for k in keys if k != 0]
        return keys


@dataclass
class Stage1Result:
    """Per-node closed-form solutions for one (cluster, hypothesis) pair."""

    cluster: int
    label: int  # 0 = null hypothesis
    delta_e0: np.ndarray  # (n_nodes,)
    lam: np.ndarray  # (n_nodes,), zeros under the null
    rss: np.ndarray
    bic: np.ndarray
    valid: np.ndarray  # False where the 2x2 system was singular

    def best_node(self):
        bic = np.where(self.valid, self.bic, np.inf)
        return int(np.argmin(bic))


def _stage1_one_grid(y, grid, profiles):
    """Vectorized node-wise regressions for one grid, null plus each type."""
    z = grid.values
    tg = grid.tangents
    r = y[None, :] - z  # (n_nodes, 2A)
    n = y.size
    tt = np.einsum("ij,ij->i", tg, tg)
    b1 = np.einsum("ij,ij->i", tg, r)
    rr = np.einsum("ij,ij->i", r, r)

    results = []
    with np.errstate(divide="ignore", invalid="ignore"):
        beta = np.where(tt > 0, b1 / np.maximum(tt, 1e-300), 0.0)
        rss0 = np.maximum(rr - beta * b1, 1e-300)
        bic0 = n * np.log(rss0 / n) + 2 * np.log(n)
    results.append(
        Stage1Result(
            cluster=grid.cluster,
            label=0,
            delta_e0=beta,
            lam=np.zeros_like(beta),
            rss=rss0,
            bic=bic0,
            valid=tt > 0,
        )
    )

    for lab in sorted(profiles):
        delta = profiles[lab]
        # einsum keeps the per-row reduction independent of the batch size,
        # so the vectorized grid scan matches a per-node loop bit for bit
        a12 = np.einsum("ij,j->i", tg, delta)
        a22 = float(np.einsum("j,j->", delta, delta))
        b2 = np.einsum("ij,j->i", r, delta)
        det = tt * a22 - a12**2
        valid = np.abs(det) >= DET_EPS
        safe_det = np.where(valid, det, 1.0)
        de = (a22 * b1 - a12 * b2) / safe_det
        lam = (tt * b2 - a12 * b1) / safe_det
        rss = np.maximum(rr - (de * b1 + lam * b2), 1e-300)
        bic = n * np.log(rss / n) + 3 * np.log(n)
        results.append(
            Stage1Result(
                cluster=grid.cluster,
                label=lab,
                delta_e0=np.where(valid, de, 0.0),
                lam=np.where(valid, lam, 0.0),
                rss=np.where(valid, rss, np.inf),
                bic=np.where(valid, bic, np.inf),
                valid=valid,
            )
        )
    return results


def stage1_grid(problem, y):
    """All (cluster, hypothesis) node scans, plus a BIC ranking.

    Returns (results, ranking) where ranking rows are
    (bic, cluster, label, node) sorted ascending.
    """
    y = np.asarray(y, dtype=float)
    results = {}
    ranking = []
    for key in problem.cluster_keys():
        grid = problem.grids[key]
        for res in _stage1_one_grid(y, grid, problem.profiles):
            results[(key, res.label)] = res
            node = res.best_node()
            if res.valid[node]:
                ranking.append((float(res.bic[node]), key, res.label, node))
    ranking.sort()
    return results, ranking


def _stage1_scalar(y, grid, profiles):
    """Naive per-node loop: runs the closed-form solver on one-node slices.

    Reference implementation for the batch-equals-scalar invariant; it
    must reproduce :func:`stage1_grid` bit for bit.
    """
    from .trajectory import TrajectoryGrid

    y = np.asarray(y, dtype=float)
    n_nodes = len(grid.e0_grid)
    labels = [0] + sorted(profiles)
    pieces = {lab: [] for lab in labels}
    for i in range(n_nodes):
        lo = max(i - 1, 0)
        one = TrajectoryGrid(
            cluster=grid.cluster,
            e0_grid=grid.e0_grid[i : i + 1],
            values=grid.values[i : i + 1],
            tangents=grid.tangents[i : i + 1],
        )
        for res in _stage1_one_grid(y, one, profiles):
            pieces[res.label].append(res)
    out = {}
    for lab in labels:
        seq = pieces[lab]
        out[lab] = Stage1Result(
            cluster=grid.cluster,
            label=lab,
            delta_e0=np.concatenate([p.delta_e0 for p in seq]),
            lam=np.concatenate([p.lam for p in seq]),
            rss=np.concatenate([p.rss for p in seq]),
            bic=np.concatenate([p.bic for p in seq]),
            valid=np.concatenate([p.valid for p in seq]),
        )
    return out


@dataclass
class RefineOutcome:
    e0_ref: float
    iterations: int
    final_delta: float
    clamped: bool


def stage2_refine(problem, y, cluster, label, e0_start):
    """Gauss-Newton walk of the reference e0 for one hypothesis."""
    y = np.asarray(y, dtype=float)
    grid = problem.grids[cluster]
    lo, hi = grid.e0_range
    opts = problem.options
    e0_ref = float(e0_start)
    clamped = False
    delta = problem.profiles.get(label)
    de = 0.0
    iters = 0
    for iters in range(1, opts.max_refine_iters + 1):
        z, tg = grid.interpolate(e0_ref, clip=True)
        r = y - z
        tt = tg @ tg
        b1 = tg @ r
        if label == 0 or delta is None:
            de = b1 / tt if tt > 0 else 0.0
        else:
            a12 = tg @ delta
            a22 = delta @ delta
            b2 = r @ delta
            det = tt * a22 - a12**2
            if abs(det) < DET_EPS:
                de = b1 / tt if tt > 0 else 0.0
            else:
                de = (a22 * b1 - a12 * b2) / det
        e0_ref += de
        if e0_ref < lo:
            e0_ref, clamped = lo, True
        elif e0_ref > hi:
            e0_ref, clamped = hi, True
        if abs(de) < opts.refine_tol:
            break
    return RefineOutcome(e0_ref=e0_ref, iterations=iters, final_delta=float(abs(de)), clamped=clamped)


LOG_2PI = float(np.log(2.0 * np.pi))


def laplace_log_bf(rss0, rss_d, lam_hat, delta_sq, sigma_lambda, n_cells):
    """Laplace-approximated log Bayes factor of one disruption vs none."""
    sigma2 = rss0 / n_cells
    info = delta_sq / max(sigma2, 1e-300)
    return (
        0.5 * n_cells * np.log(rss0 / rss_d)
        - lam_hat**2 / (2.0 * sigma_lambda**2)
        - 0.5 * np.log(info)
        + 0.5 * LOG_2PI
    )


@dataclass
class FitResult:
    cluster: int
    e0_star: float
    d_hat: int
    lam_hat: float
    log_bf: dict  # label -> float
    rss0: float
    rss_d: dict  # label -> float
    lam_d: dict  # label -> clamped intensity per hypothesis
    gap_d: dict  # label -> fitted e0 difference (hypothesis minus null)
    multi_lambda: np.ndarray  # signed OLS coefficients on all profiles jointly
    e0_null: float
    diagnostics: dict = field(default_factory=dict)

    def to_row(self):
        labels = sorted(self.log_bf)
        row = {
            "cluster": self.cluster,
            "e0_star": self.e0_star,
            "d_hat": self.d_hat,
            "lam_hat": self.lam_hat,
            "rss0": self.rss0,
            "e0_null": self.e0_null,
        }
        for lab in labels:
            row[f"log_bf_{lab}"] = self.log_bf[lab]
            row[f"rss_{lab}"] = self.rss_d[lab]
            row[f"lam_{lab}"] = self.lam_d[lab]
            row[f"gap_{lab}"] = self.gap_d[lab]
        for i, lam in enumerate(self.multi_lambda):
            row[f"multi_lam_{i + 1}"] = lam
        return row


def _stage3_for_cluster(problem, y, cluster, stage1_by_label):
    """Refine the null and every disruption hypothesis in one cluster, then
    evaluate exactly (tangent excluded, intensity clamped nonnegative)."""
    grid = problem.grids[cluster]
    opts = problem.options
    labels = sorted(problem.profiles)
    n = y.size

    null_s1 = stage1_by_label[0]
    node = null_s1.best_node()
    ref0 = stage2_refine(problem, y, cluster, 0, grid.e0_grid[node])
    z0, _ = grid.interpolate(ref0.e0_ref, clip=True)
    r0 = y - z0
    rss0 = float(r0 @ r0)

    rss_d, lam_d, gap_d, log_bf = {}, {}, {}, {}
    refinements = {0: ref0}
    for lab in labels:
        s1 = stage1_by_label[lab]
        node_d = s1.best_node()
        ref = stage2_refine(problem, y, cluster, lab, grid.e0_grid[node_d])
        refinements[lab] = ref
        z, _ = grid.interpolate(ref.e0_ref, clip=True)
        r = y - z
        delta = problem.profiles[lab]
        dsq = float(delta @ delta)
        lam = max(0.0, float(r @ delta) / dsq)
        resid = r - lam * delta
        rss = float(resid @ resid)
        rss_d[lab] = rss
        lam_d[lab] = lam
        gap_d[lab] = float(ref.e0_ref - ref0.e0_ref)
        log_bf[lab] = float(
            laplace_log_bf(rss0, rss, lam, dsq, opts.sigma_lambda, n)
        )

    # joint projection on all profiles reveals compound events
    basis = np.column_stack([problem.profiles[lab] for lab in labels])
    multi, *_ = np.linalg.lstsq(basis, r0, rcond=None)

    best_lab = max(labels, key=lambda lab: log_bf[lab]) if labels else 0
    d_hat = 0
    if labels and log_bf[best_lab] > 0 and gap_d[best_lab] >= opts.gap_threshold:
        d_hat = best_lab
    if d_hat != 0:
        e0_star = refinements[d_hat].e0_ref
        lam_hat = lam_d[d_hat]
    else:
        e0_star = ref0.e0_ref
        lam_hat = 0.0
    return FitResult(
        cluster=cluster,
        e0_star=float(e0_star),
        d_hat=int(d_hat),
        lam_hat=float(lam_hat),
        log_bf=log_bf,
        rss0=rss0,
        rss_d=rss_d,
        lam_d=lam_d,
        gap_d=gap_d,
        multi_lambda=multi,
        e0_null=float(ref0.e0_ref),
        diagnostics={
            "refine_iterations": {lab: ref.iterations for lab, ref in refinements.items()},
            "refine_clamped": {lab: ref.clamped for lab, ref in refinements.items()},
        },
    )


def fit_schedule(problem, y):
    """Full three-stage fit of one stacked logit schedule.

    Every cluster is refined and evaluated exactly; the winner is the
    cluster whose best hypothesis attains the smallest exact residual
    sum of squares (ties to the lower cluster key).
    """
    y = np.asarray(y, dtype=float)
    results, _ = stage1_grid(problem, y)
    best = None
    for key in problem.cluster_keys():
        by_label = {lab: results[(key, lab)] for kk, lab in results if kk == key}
        fit = _stage3_for_cluster(problem, y, key, by_label)
        score = min(fit.rss0, min(fit.rss_d.values()) if fit.rss_d else np.inf)
        if best is None or score < best[0] - 1e-15:
            best = (score, fit)
    return best[1]


def fit_batch(problem, rows):
    return [fit_schedule(problem, y) for y in np.atleast_2d(np.asarray(rows, dtype=float))]


@dataclass
class IdentifiabilityReport:
    """Correlation and tangent-orthogonal fraction of each profile across
    the cached (cluster, node) plane."""

    labels: list
    clusters: list
    rho: dict  # label -> (n_clusters, n_nodes)
    orthogonal_fraction: dict  # label -> (n_clusters, n_nodes)

    def summary(self):
        out = {}
        for lab in self.labels:
            out[lab] = {
                "max_abs_rho": float(np.max(np.abs(self.rho[lab]))),
                "min_orthogonal_fraction": float(np.min(self.orthogonal_fraction[lab])),
                "mean_orthogonal_fraction": float(np.mean(self.orthogonal_fraction[lab])),
            }
        return out


def identifiability(problem):
    labels = sorted(problem.profiles)
    clusters = problem.cluster_keys()
    rho = {lab: [] for lab in labels}
    frac = {lab: [] for lab in labels}
    for key in clusters:
        tg = problem.grids[key].tangents  # (n_nodes, 2A)
        t_norm = np.linalg.norm(tg, axis=1)
        t_hat = tg / np.maximum(t_norm, 1e-300)[:, None]
        t_centered = tg - tg.mean(axis=1, keepdims=True)
        t_std = np.linalg.norm(t_centered, axis=1)
        for lab in labels:
            delta = problem.profiles[lab]
            d_centered = delta - delta.mean()
            d_std = np.linalg.norm(d_centered)
            with np.errstate(invalid="ignore"):
                r = (t_centered @ d_centered) / np.maximum(t_std * d_std, 1e-300)
            proj = t_hat @ delta
            f = np.sqrt(np.maximum(1.0 - proj**2, 0.0))
            rho[lab].append(r)
            frac[lab].append(f)
    return IdentifiabilityReport(
        labels=labels,
        clusters=clusters,
        rho={lab: np.array(v) for lab, v in rho.items()},
        orthogonal_fraction={lab: np.array(v) for lab, v in frac.items()},
    )


@dataclass
class SweepResult:
    chosen_sigma: float
    chosen_gap: float
    per_fold: list  # dicts with selected params and held-out metrics
    confusion_all: np.ndarray  # (4, 4) true label x decided label
    confusion_strong: np.ndarray
    metrics: dict

    def to_json(self):
        return json.dumps(
            {
                "chosen_sigma": self.chosen_sigma,
                "chosen_gap": self.chosen_gap,
                "per_fold": self.per_fold,
                "confusion_all": self.confusion_all.tolist(),
                "confusion_strong": self.confusion_strong.tolist(),
                "metrics": self.metrics,
            },
            indent=2,
            sort_keys=True,
        )


def _decide(stored, sigma, gap_threshold, n_cells):
    """Recompute the decision for one stored fit under new thresholds."""
    best_lab, best_bf = 0, -np.inf
    for lab in stored["labels"]:
        bf = laplace_log_bf(
            stored["rss0"],
            stored["rss_d"][lab],
            stored["lam_d"][lab],
            stored["delta_sq"][lab],
            sigma,
            n_cells,
        )
        if bf > best_bf:
            best_bf, best_lab = bf, lab
    if best_bf > 0 and stored["gap_d"][best_lab] >= gap_threshold:
        return best_lab
    return 0


def cv_sweep(
    problem,
    rows,
    true_labels,
    true_lambdas,
    folds=5,
    sigma_grid=(0.25, 0.5, 1.0, 2.0, 4.0),
    gap_grid=(0.0, 0.25, 0.5, 1.0),
    fp_budget=0.05,
    strong_threshold=1.0,
    rng=None,
):
    """Stratified threshold sweep over stored fit quantities.

    The expensive three-stage fit runs once per schedule; the sweep only
    recomputes Bayes factors and gap comparisons from the stored RSS
    values, so rerunning with the same stores is bit-identical.  Each
    fold maximizes strong-case type accuracy subject to a false positive
    budget on the ordinary schedules; the consensus across folds is the
    modal selection.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    true_labels = np.asarray(true_labels, dtype=int)
    true_lambdas = np.asarray(true_lambdas, dtype=float)
    rng = np.random.default_rng(rng)
    n = rows.shape[0]
    n_cells = rows.shape[1]
    labels = sorted(problem.profiles)

    stored = []
    for y in rows:
        fit = fit_schedule(problem, y)
        stored.append(
            {
                "labels": labels,
                "rss0": fit.rss0,
                "rss_d": fit.rss_d,
                "lam_d": fit.lam_d,
                "gap_d": fit.gap_d,
                "delta_sq": {
                    lab: float(problem.profiles[lab] @ problem.profiles[lab])
                    for lab in labels
                },
                "e0_star": fit.e0_star,
            }
        )

    # stratified fold assignment
    fold_of = np.empty(n, dtype=int)
    for lab in np.unique(true_labels):
        idx = np.where(true_labels == lab)[0]
        rng.shuffle(idx)
        for i, j in enumerate(idx):
            fold_of[j] = i % folds
    for f in range(folds):
        test = fold_of == f
        if true_labels[test].max(initial=0) == 0 or (true_labels[test] == 0).sum() == 0:
            raise InsufficientData(f"fold {f} lacks positives or negatives")

    def metrics_for(indices, sigma, gap):
        decided = np.array([_decide(stored[i], sigma, gap, n_cells) for i in indices])
        truth = true_labels[indices]
        lams = true_lambdas[indices]
        nulls = truth == 0
        strong = (truth != 0) & (lams > strong_threshold)
        fp_rate = float((decided[nulls] != 0).mean()) if nulls.any() else 0.0
        strong_acc = float((decided[strong] == truth[strong]).mean()) if strong.any() else 0.0
        detect = float((decided[truth != 0] != 0).mean()) if (truth != 0).any() else 0.0
        return {"fp_rate": fp_rate, "strong_accuracy": strong_acc, "detection": detect}

    per_fold = []
    selections = []
    for f in range(folds):
        train_idx = np.where(fold_of != f)[0]
        test_idx = np.where(fold_of == f)[0]
        best = None
        for sigma in sigma_grid:
            for gap in gap_grid:
                m = metrics_for(train_idx, sigma, gap)
                feasible = m["fp_rate"] <= fp_budget
                key = (feasible, m["strong_accuracy"], -m["fp_rate"])
                if best is None or key > best[0]:
                    best = (key, sigma, gap)
        _, sigma, gap = best
        held = metrics_for(test_idx, sigma, gap)
        per_fold.append({"sigma": sigma, "gap": gap, **held})
        selections.append((sigma, gap))

    # consensus: modal selection, ties to the smaller thresholds
    counts = {}
    for sel in selections:
        counts[sel] = counts.get(sel, 0) + 1
    chosen = sorted(counts, key=lambda sel: (-counts[sel], sel))[0]

    all_idx = np.arange(n)
    decided = np.array([_decide(stored[i], chosen[0], chosen[1], n_cells) for i in all_idx])
    max_lab = max(labels) if labels else 0
    confusion_all = np.zeros((max_lab + 1, max_lab + 1), dtype=int)
    confusion_strong = np.zeros_like(confusion_all)
    for i in all_idx:
        confusion_all[true_labels[i], decided[i]] += 1
        if true_labels[i] != 0 and true_lambdas[i] > strong_threshold:
            confusion_strong[true_labels[i], decided[i]] += 1
    return SweepResult(
        chosen_sigma=float(chosen[0]),
        chosen_gap=float(chosen[1]),
        per_fold=per_fold,
        confusion_all=confusion_all,
        confusion_strong=confusion_strong,
        metrics=metrics_for(all_idx, chosen[0], chosen[1]),
    )
