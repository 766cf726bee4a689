/** Deterministic mock service used by the unit tests. */

import type { FetchLike } from "../src/api.js";
import type { Meta } from "../src/types.js";

export const N_AGES = 40;

export const MOCK_META: Meta = {
  bundle_hash: "abc123def456",
  n_ages: N_AGES,
  clusters: [
    { id: 0, kind: "corpus", e0_range: [40, 80], n_observations: 500 },
    { id: 1, kind: "regime", e0_range: [45, 75], n_observations: 120 },
    { id: 2, kind: "regime", e0_range: [50, 78], n_observations: 140 },
  ],
  disruption_types: [
    { id: 1, name: "war", n_subclusters: 2 },
    { id: 2, name: "respiratory", n_subclusters: 0 },
    { id: 3, name: "enteric", n_subclusters: 0 },
  ],
  engines: ["lowess", "neural"],
};

function warProfile(age: number, half: "f" | "m"): number {
  const scale = half === "m" ? 1.0 : 0.15;
  return scale * Math.exp(-0.5 * ((age - 25) / 8) ** 2) * 0.12;
}

/** Synthetic but self-consistent schedule: logit declines with e0. */
export function mockSchedule(cluster: number, e0: number, type: number, lambda: number) {
  const logit: number[] = [];
  for (const half of ["f", "m"] as const) {
    for (let age = 0; age < N_AGES; age++) {
      let z =
        -7.5 +
        0.05 * (80 - e0) +
        4.0 * Math.exp(-age / 1.8) +
        0.06 * Math.max(age - 20, 0) +
        (half === "m" ? 0.4 : 0) +
        cluster * 0.01;
      if (type === 1 && lambda > 0) z += lambda * warProfile(age, half);
      logit.push(Number(z.toFixed(9)));
    }
  }
  const expit = (y: number) => 1 / (1 + Math.exp(-y));
  const qxF = logit.slice(0, N_AGES).map(expit);
  const qxM = logit.slice(N_AGES).map(expit);
  // crude but deterministic pseudo-e0 readouts (the UI never recomputes)
  const e0F = e0 + 1.1;
  const e0M = e0 - 1.1;
  return {
    logit_qx: logit,
    qx_female: qxF,
    qx_male: qxM,
    e0_female: e0F,
    e0_male: e0M,
    e0_mean: e0,
    delta_e0_vs_baseline: type !== 0 ? -0.8 * lambda : 0.0,
    params: { cluster, e0, type, lambda, subcluster: null, engine: "lowess" },
  };
}

export interface MockLog {
  urls: string[];
}

export function mockFetch(log: MockLog = { urls: [] }): FetchLike {
  return async (url: string, init?: RequestInit) => {
    log.urls.push(url);
    const parsed = new URL(url, "http://localhost");
    const json = (body: unknown, status = 200) =>
      new Response(JSON.stringify(body), {
        status,
        headers: { "content-type": "application/json" },
      });
    if (parsed.pathname === "/v1/meta") {
      return json(MOCK_META);
    }
    if (parsed.pathname === "/v1/schedule") {
      const q = parsed.searchParams;
      const e0 = Number(q.get("e0"));
      const cluster = Number(q.get("cluster") ?? 0);
      const meta = MOCK_META.clusters.find((c) => c.id === cluster);
      if (meta && (e0 < meta.e0_range[0] || e0 > meta.e0_range[1])) {
        return json(
          {
            detail: {
              message: "target outside supported range",
              supported_range: meta.e0_range,
            },
          },
          422,
        );
      }
      return json(
        mockSchedule(cluster, e0, Number(q.get("type") ?? 0), Number(q.get("lambda") ?? 0)),
      );
    }
    if (parsed.pathname === "/v1/fit") {
      const body = JSON.parse(String(init?.body ?? "{}"));
      const z: number[] = body.z ?? [];
      if (z.length !== 2 * N_AGES) {
        return json({ detail: `z must have length ${2 * N_AGES}` }, 400);
      }
      // "detect" the planted war bump: project the residual against the
      // mock baseline onto the mock profile
      const baseline = mockSchedule(1, 62.5, 0, 0).logit_qx;
      let proj = 0;
      let norm = 0;
      for (let age = 0; age < N_AGES; age++) {
        for (const half of ["f", "m"] as const) {
          const idx = (half === "m" ? N_AGES : 0) + age;
          const p = warProfile(age, half);
          proj += p * ((z[idx] ?? 0) - (baseline[idx] ?? 0));
          norm += p * p;
        }
      }
      const lam = proj / norm > 0.5 ? proj / norm : 0;
      const detected = lam > 0.5;
      return json({
        cluster: 1,
        e0_star: 62.5,
        e0_null: detected ? 61.0 : 62.5,
        d_hat: detected ? 1 : 0,
        lam_hat: detected ? lam : 0,
        rss0: 1.0,
        log_bf: { "1": detected ? 5.0 : -1.0, "2": -2.0, "3": -3.0 },
        rss_d: { "1": 0.5, "2": 0.9, "3": 0.95 },
        lam_d: { "1": lam, "2": 0.1, "3": 0.05 },
        gap_d: { "1": 1.5, "2": 0.2, "3": 0.1 },
        multi_lambda: [lam, 0.02, -0.01],
        baseline_logit_qx: mockSchedule(1, 62.5, 0, 0).logit_qx,
        fitted_logit_qx: mockSchedule(1, 62.5, detected ? 1 : 0, lam).logit_qx,
      });
    }
    if (parsed.pathname === "/v1/predict") {
      const body = JSON.parse(String(init?.body ?? "{}"));
      for (const key of ["q5_female", "q5_male", "q45_female", "q45_male"]) {
        const v = body[key];
        if (v !== undefined && v !== null && !(v > 0 && v < 1)) {
          return json({ detail: `probability ${v} outside (0, 1)` }, 400);
        }
      }
      const two = body.q45_female != null && body.q45_male != null;
      const base = mockSchedule(0, 70 - 100 * body.q5_female, 0, 0);
      return json({
        variant: two ? "two" : "one",
        qx_female: base.qx_female,
        qx_male: base.qx_male,
        e0_female: 71.2 - 100 * body.q5_female,
        e0_male: 68.9 - 100 * body.q5_male,
      });
    }
    return json({ detail: "not found" }, 404);
  };
}
