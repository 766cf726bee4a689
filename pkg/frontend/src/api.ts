/** Typed client for the /v1 endpoints.
 *
 * The fetch implementation is injectable so panels can be tested against
 * recorded responses, and every request accepts an AbortSignal so the
 * debouncer can cancel stale in-flight calls.
 */

import type { FitResponse, Meta, PredictResponse, ScheduleResponse } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: unknown,
  ) {
    super(`HTTP ${status}`);
  }
}

export interface ScheduleParams {
  cluster: number;
  e0: number;
  type?: number;
  lambda?: number;
  subcluster?: number | null;
  engine?: "lowess" | "neural";
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(url: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + url, init);
    const body = await res.json().catch(() => null);
    if (!res.ok) {
      throw new ApiError(res.status, body && (body as { detail?: unknown }).detail);
    }
    return body as T;
  }

  meta(signal?: AbortSignal): Promise<Meta> {
    return this.request<Meta>("/v1/meta", { signal });
  }

  schedule(params: ScheduleParams, signal?: AbortSignal): Promise<ScheduleResponse> {
    const q = new URLSearchParams();
    q.set("cluster", String(params.cluster));
    q.set("e0", String(params.e0));
    if (params.type !== undefined) q.set("type", String(params.type));
    if (params.lambda !== undefined) q.set("lambda", String(params.lambda));
    if (params.subcluster !== undefined && params.subcluster !== null) {
      q.set("subcluster", String(params.subcluster));
    }
    if (params.engine) q.set("engine", params.engine);
    return this.request<ScheduleResponse>(`/v1/schedule?${q.toString()}`, { signal });
  }

  fit(body: { z: number[] }, signal?: AbortSignal): Promise<FitResponse> {
    return this.request<FitResponse>("/v1/fit", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
  }

  predict(
    body: {
      q5_female: number;
      q5_male: number;
      q45_female?: number;
      q45_male?: number;
    },
    signal?: AbortSignal,
  ): Promise<PredictResponse> {
    return this.request<PredictResponse>("/v1/predict", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
  }
}
