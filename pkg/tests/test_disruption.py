import numpy as np
import pytest

from mdmx.data import disruption_profile
from mdmx.disruption import (
    BaselineEstimate,
    DisruptionModel,
    apply_disruption,
    baseline_naive,
    baseline_penalized,
    baseline_neural,
    baseline_temporal,
    compose,
    estimate_intensity,
    estimate_profile,
    estimate_profiles,
    fit_disruption_model,
    kron_basis,
    residuals,
    subcluster,
    train_neural_core,
    year_features,
)
from mdmx.errors import InvalidInput, NoSupport, SingleProfileFallback
from mdmx.lifetable import forward_e0


@pytest.fixture(scope="module")
def fitted(default_world, default_model):
    tensor = default_world["tensor"]
    model = default_model
    dm = fit_disruption_model(model, tensor, rng=11)
    return {"tensor": tensor, "model": model, "dm": dm}


class TestBaselineNaive:
    def test_in_span_residual_zero(self, default_model):
        b = kron_basis(default_model)
        rng = np.random.default_rng(300)
        y = b @ rng.normal(size=b.shape[1])
        est = baseline_naive(default_model, y)
        assert np.allclose(est.y_hat, y, atol=1e-8)

    def test_spike_biases_baseline_upward(self, default_world, default_model):
        tensor = default_world["tensor"]
        c, t = tensor.observed_cells()[200]
        y = tensor.z_at(c, t)
        base = baseline_naive(default_model, y).y_hat
        n_ages = tensor.n_ages
        spiked = y.copy()
        spiked[n_ages + 15 : n_ages + 25] += 2.5  # male ages 15-24
        base_spiked = baseline_naive(default_model, spiked).y_hat
        unaffected = np.r_[0:n_ages, n_ages + 60 : 2 * n_ages]
        # documented bias: the projection rises at ages the spike never touched
        assert (base_spiked[unaffected] - base[unaffected]).mean() > 0

    def test_orthogonal_complement_projects_to_zero(self, default_model):
        b = kron_basis(default_model)
        rng = np.random.default_rng(301)
        v = rng.normal(size=b.shape[0])
        q, _ = np.linalg.qr(b)
        v_perp = v - q @ (q.T @ v)
        est = baseline_naive(default_model, v_perp)
        assert np.allclose(est.y_hat, 0.0, atol=1e-8)


class TestBaselineTemporal:
    def test_linear_series_interpolated_exactly(self):
        years = np.array([1910, 1911, 1912, 1913, 1919, 1920, 1921, 1922])
        slope = np.linspace(-1, 1, 6)
        rows = np.array([y * 0.01 * slope + 3.0 for y in years])
        est = baseline_temporal(years, rows, 1916)
        assert np.allclose(est.y_hat, 1916 * 0.01 * slope + 3.0, atol=1e-8)

    def test_gap_bridging_between_anchors(self):
        years = np.array([1911, 1912, 1913, 1919, 1920])
        rows = np.array([[y * 1.0] * 4 for y in years])
        est = baseline_temporal(years, rows, 1916)
        assert np.all(est.y_hat >= 1913.0) and np.all(est.y_hat <= 1919.0)

    def test_single_sided_support_declines(self):
        years = np.array([1910, 1911, 1912, 1913])
        rows = np.zeros((4, 3))
        with pytest.raises(NoSupport):
            baseline_temporal(years, rows, 1916)

    def test_too_few_years(self):
        with pytest.raises(NoSupport):
            baseline_temporal(np.array([1910, 1920]), np.zeros((2, 3)), 1915)


class TestBaselinePenalized:
    def test_alpha_zero_equals_naive(self, default_world, default_model):
        tensor = default_world["tensor"]
        y = tensor.z_at(*tensor.observed_cells()[10])
        interp = np.zeros_like(y)
        pen = baseline_penalized(default_model, y, interp, 0.0)
        naive = baseline_naive(default_model, y)
        assert np.allclose(pen.y_hat, naive.y_hat, atol=1e-10)

    def test_alpha_inf_projects_interp(self, default_world, default_model):
        tensor = default_world["tensor"]
        cells = tensor.observed_cells()
        y = tensor.z_at(*cells[10])
        interp = tensor.z_at(*cells[11])
        pen = baseline_penalized(default_model, y, interp, 1e9)
        proj = baseline_naive(default_model, interp)
        assert np.allclose(pen.y_hat, proj.y_hat, atol=1e-6)

    def test_scalar_closed_form(self):
        # 1-D toy: basis = identity direction; z* = (y + alpha p) / (1 + alpha)
        class Tiny:
            S = np.array([[1.0]])
            A = np.array([[1.0]])

        y = np.array([2.0])
        p = np.array([0.5])
        alpha = 3.0
        est = baseline_penalized(Tiny, y, p, alpha)
        assert est.y_hat[0] == pytest.approx((2.0 + alpha * 0.5) / (1 + alpha), abs=1e-12)


class TestNeuralCore:
    def test_year_features_at_t_min(self):
        phi = year_features(1900, 1900.0, 2000.0)
        assert np.allclose(phi, [0, 0, 0, 0, 1, 0, 1, 0, 1])

    def test_baseline_close_to_reconstruction_on_ordinary_cells(self, fitted):
        tensor, model, dm = fitted["tensor"], fitted["model"], fitted["dm"]
        core = dm.neural_core
        rng = np.random.default_rng(302)
        cells = tensor.observed_cells()
        idx = rng.choice(len(cells), size=60, replace=False)
        nn_err, hosvd_err = [], []
        for i in idx:
            c, t = cells[i]
            z = tensor.z_at(c, t)
            nn_err.append(np.sqrt(np.mean((baseline_neural(core, model, c, tensor.years[t]).y_hat - z) ** 2)))
            hosvd_err.append(np.sqrt(np.mean((model.reconstruct_pair(c, t) - z) ** 2)))
        assert np.mean(nn_err) <= 1.25 * np.mean(hosvd_err)

    def test_exceptional_observation_never_consulted(self, fitted):
        tensor, model, dm = fitted["tensor"], fitted["model"], fitted["dm"]
        (c, t) = next(iter(tensor.exceptional))
        base1 = baseline_neural(dm.neural_core, model, c, tensor.years[t]).y_hat
        tensor.exceptional[(c, t)] = tensor.exceptional[(c, t)] + 5.0  # perturb
        base2 = baseline_neural(dm.neural_core, model, c, tensor.years[t]).y_hat
        tensor.exceptional[(c, t)] = tensor.exceptional[(c, t)] - 5.0
        assert np.array_equal(base1, base2)

    def test_unaffected_age_residuals_centered(self, default_world, default_model):
        # synthetic male-only event: female old-age residuals stay near zero
        tensor = default_world["tensor"]
        model = default_model
        core = train_neural_core(model, tensor, epochs=300, rng=13)
        cells = tensor.observed_cells()
        c, t = cells[len(cells) // 2]
        z = tensor.z_at(c, t).copy()
        n_ages = tensor.n_ages
        z[n_ages + 15 : n_ages + 46] += 1.5  # male 15-45 bump
        base = baseline_neural(core, model, c, tensor.years[t]).y_hat
        r = z - base
        female_60_80 = r[60:81]
        assert abs(female_60_80.mean()) <= 0.05


class TestResidualsAndProfiles:
    def test_residual_identity_and_shift(self):
        y = np.linspace(-3, 0, 10)
        assert np.allclose(residuals(y, y), 0.0)
        shifted = residuals(y + np.log(2), BaselineEstimate("x", y))
        assert np.allclose(shifted, np.log(2))

    def test_profile_of_identical_residuals(self):
        r = np.concatenate([np.linspace(0.2, 0.0, 30), np.linspace(0.4, 0.0, 30)])
        prof = estimate_profile([r, r, r])
        assert np.linalg.norm(prof.smoothed) == pytest.approx(1.0, abs=1e-12)
        assert prof.raw @ (r / np.linalg.norm(r)) == pytest.approx(1.0, abs=1e-12)

    def test_planted_war_shape_recovered(self):
        rng = np.random.default_rng(303)
        delta = disruption_profile("war", 60)
        rows = [2.0 * delta + rng.normal(0, 0.05, size=120) for _ in range(40)]
        prof = estimate_profile(rows)
        assert prof.smoothed @ delta >= 0.99

    def test_unit_norm_after_smoothing(self):
        rng = np.random.default_rng(304)
        rows = rng.normal(size=(10, 80))
        prof = estimate_profile(rows)
        assert np.linalg.norm(prof.smoothed) == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.norm(prof.raw) == pytest.approx(1.0, abs=1e-12)

    def test_empty_type_skipped(self):
        profs = estimate_profiles({1: [], 2: [np.ones(40)]})
        assert 1 not in profs and 2 in profs


class TestIntensity:
    def test_exact_multiples(self):
        delta = disruption_profile("war", 40)
        lam, rem = estimate_intensity(2.0 * delta, delta)
        assert lam == pytest.approx(2.0, abs=1e-12)
        assert np.allclose(rem, 0.0, atol=1e-12)

    def test_orthogonal_residual(self):
        delta = disruption_profile("respiratory", 40)
        v = np.zeros(80)
        v[0] = 1.0
        v = v - (v @ delta) * delta
        lam, rem = estimate_intensity(v, delta)
        assert lam == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_decomposition(self):
        rng = np.random.default_rng(305)
        delta = disruption_profile("enteric", 40)
        w = rng.normal(size=80)
        w -= (w @ delta) * delta
        r = 3.0 * delta + w
        lam, rem = estimate_intensity(r, delta)
        assert lam == pytest.approx(3.0, abs=1e-10)
        assert np.allclose(rem, w, atol=1e-10)
        # energy split: lam^2 + |remainder|^2 = |r|^2
        assert lam**2 + rem @ rem == pytest.approx(r @ r, abs=1e-10)


class TestSubcluster:
    def test_two_planted_shapes_recovered(self):
        rng = np.random.default_rng(306)
        war = disruption_profile("war", 55)
        resp = disruption_profile("respiratory", 55)
        rows = [1.5 * war + rng.normal(0, 0.04, 110) for _ in range(20)]
        rows += [1.5 * resp + rng.normal(0, 0.04, 110) for _ in range(20)]
        sc = subcluster(rows, rng=0)
        assert sc.n_subclusters == 2
        cos_war = max(abs(sc.profiles[j] @ war) for j in range(2))
        cos_resp = max(abs(sc.profiles[j] @ resp) for j in range(2))
        assert cos_war >= 0.98 and cos_resp >= 0.98

    def test_identical_members_fall_back(self):
        rows = [np.ones(40)] * 12
        with pytest.raises(SingleProfileFallback):
            subcluster(rows, rng=0)

    def test_too_few_members_fall_back(self):
        rng = np.random.default_rng(307)
        with pytest.raises(SingleProfileFallback):
            subcluster(rng.normal(size=(7, 40)), min_size=5, rng=0)

    def test_embedding_net_reproduces_profiles(self):
        rng = np.random.default_rng(308)
        war = disruption_profile("war", 55)
        ent = disruption_profile("enteric", 55)
        rows = [2.0 * war + rng.normal(0, 0.03, 110) for _ in range(15)]
        rows += [2.0 * ent + rng.normal(0, 0.03, 110) for _ in range(15)]
        sc = subcluster(rows, rng=1)
        for j in range(sc.n_subclusters):
            rebuilt = sc.profile_from_embedding(sc.embeddings[j])
            assert rebuilt @ sc.profiles[j] >= 0.99

    def test_positive_intensity_convention(self):
        rng = np.random.default_rng(309)
        war = disruption_profile("war", 55)
        resp = disruption_profile("respiratory", 55)
        rows = [1.2 * war + rng.normal(0, 0.05, 110) for _ in range(15)]
        rows += [0.8 * resp + rng.normal(0, 0.05, 110) for _ in range(15)]
        sc = subcluster(rows, rng=2)
        rows = np.array(rows)
        for j in range(sc.n_subclusters):
            members = rows[sc.member_labels == j]
            assert (members @ sc.profiles[j]).mean() >= 0

    def test_subprofile_never_fits_worse(self):
        rng = np.random.default_rng(310)
        war = disruption_profile("war", 55)
        resp = disruption_profile("respiratory", 55)
        rows = [1.5 * war + rng.normal(0, 0.05, 110) for _ in range(15)]
        rows += [1.5 * resp + rng.normal(0, 0.05, 110) for _ in range(15)]
        single = estimate_profile(rows)
        sc = subcluster(rows, rng=3)
        for r, j in zip(rows, sc.member_labels):
            norm2 = r @ r
            lam_s, rem_s = estimate_intensity(r, single)
            lam_k, rem_k = estimate_intensity(r, sc.profiles[j])
            r2_single = 1 - (rem_s @ rem_s) / norm2
            r2_sub = 1 - (rem_k @ rem_k) / norm2
            assert r2_sub >= r2_single - 1e-9


class TestOverlayModel:
    def test_lambda_zero_identity(self):
        base = np.linspace(-5, 0, 80)
        delta = disruption_profile("war", 40)
        assert np.array_equal(apply_disruption(base, delta, 0.0), base)

    def test_positive_profile_lowers_e0(self, default_world):
        tensor = default_world["tensor"]
        base = tensor.z_at(*tensor.observed_cells()[50])
        delta = disruption_profile("war", tensor.n_ages)
        hit = apply_disruption(base, delta, 1.0)
        assert forward_e0(hit, "mean") < forward_e0(base, "mean")

    def test_composition_exactly_additive(self):
        rng = np.random.default_rng(311)
        base = rng.normal(size=100)
        d1 = disruption_profile("war", 50)
        d2 = disruption_profile("respiratory", 50)
        combined = compose(base, [(d1, 1.3), (d2, 0.7)])
        assert np.allclose(combined, base + 1.3 * d1 + 0.7 * d2, atol=1e-14)

    def test_negative_lambda_rejected(self):
        with pytest.raises(InvalidInput):
            apply_disruption(np.zeros(4), np.ones(4) / 2.0, -1.0)


class TestFitDisruptionModel:
    def test_profiles_for_planted_types(self, fitted, default_world):
        dm = fitted["dm"]
        truth = default_world["truth"]
        present = {1, 2, 3} & set(dm.profiles)
        assert present  # at least war/respiratory/enteric seen
        kind_by_label = {1: "war", 2: "respiratory", 3: "enteric"}
        for lab in present:
            planted = truth.profiles[kind_by_label[lab]]
            assert abs(dm.profiles[lab].smoothed @ planted) >= 0.95

    def test_intensities_close_to_planted(self, fitted, default_world):
        dm = fitted["dm"]
        tensor = fitted["tensor"]
        truth = default_world["truth"]
        errs = []
        for (c, t), (lab, lam) in dm.intensities.items():
            pop_idx = truth.populations.index(tensor.populations[c])
            year = int(tensor.years[t])
            planted = truth.intensities.get((pop_idx, year))
            if planted is not None:
                errs.append(abs(lam - planted[1]))
        assert np.median(errs) <= 0.35

    def test_model_store_round_trip(self, fitted, tmp_path):
        dm = fitted["dm"]
        dm.save(tmp_path / "disruption")
        back = DisruptionModel.load(tmp_path / "disruption")
        assert set(back.profiles) == set(dm.profiles)
        for lab in dm.profiles:
            assert np.array_equal(back.profiles[lab].smoothed, dm.profiles[lab].smoothed)
        assert back.intensities == dm.intensities
        if dm.neural_core is not None:
            z1 = dm.neural_core.predict_core(fitted["model"].C[0], 1950)
            z2 = back.neural_core.predict_core(fitted["model"].C[0], 1950)
            assert np.array_equal(z1, z2)
