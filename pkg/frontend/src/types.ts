/** Wire types mirroring the service JSON. Schedules are arrays ordered
 * female ages then male ages. */

export interface ClusterMeta {
  id: number;
  kind: "corpus" | "regime";
  e0_range: [number, number];
  n_observations: number;
}

export interface DisruptionTypeMeta {
  id: number;
  name: string;
  n_subclusters: number;
}

export interface Meta {
  bundle_hash: string;
  n_ages: number;
  clusters: ClusterMeta[];
  disruption_types: DisruptionTypeMeta[];
  engines: string[];
}

export interface ScheduleResponse {
  logit_qx: number[];
  qx_female: number[];
  qx_male: number[];
  e0_female: number;
  e0_male: number;
  e0_mean: number;
  delta_e0_vs_baseline: number;
  params: {
    cluster: number;
    e0: number;
    type: number;
    lambda: number;
    subcluster: number | null;
    engine: string;
  };
}

export interface FitResponse {
  cluster: number;
  e0_star: number;
  e0_null: number;
  d_hat: number;
  lam_hat: number;
  rss0: number;
  log_bf: Record<string, number>;
  rss_d: Record<string, number>;
  lam_d: Record<string, number>;
  gap_d: Record<string, number>;
  multi_lambda: number[];
  baseline_logit_qx?: number[];
  fitted_logit_qx?: number[];
}

export interface PredictResponse {
  variant: "one" | "two";
  qx_female: number[];
  qx_male: number[];
  e0_female: number;
  e0_male: number;
}

export interface RangeError422 {
  message: string;
  supported_range: [number, number];
}
