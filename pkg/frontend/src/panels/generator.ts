/** Generator panel: steer (cluster, e0, disruption) sliders against the
 * schedule endpoint and chart the returned qx curves for both sexes.
 *
 * Every number on screen comes from a service response; the panel holds
 * no demography.  Requests are debounced with latest-wins cancellation,
 * and a pinned response freezes a comparison curve.
 */

import { ApiClient, ApiError } from "../api.js";
import { renderChart, Series } from "../chart.js";
import { DebouncedRequester } from "../debounce.js";
import type { ExplorerState } from "../state.js";
import type { Meta, RangeError422, ScheduleResponse } from "../types.js";

export const DEBOUNCE_MS = 150;

export class GeneratorPanel {
  readonly root: HTMLElement;
  lastResponse: ScheduleResponse | null = null;
  pinned: ScheduleResponse | null = null;
  readonly requester: DebouncedRequester<ScheduleResponse>;

  private chartBox: HTMLElement;
  private readouts: HTMLElement;
  private hint: HTMLElement;
  private controls: Record<string, HTMLInputElement | HTMLSelectElement> = {};

  constructor(
    private client: ApiClient,
    private meta: Meta,
    private state: ExplorerState,
    private onStateChange: () => void,
    debounceMs: number = DEBOUNCE_MS,
  ) {
    this.root = document.createElement("section");
    this.root.className = "panel generator-panel";
    this.root.innerHTML = `<h2>Generator</h2>`;
    this.requester = new DebouncedRequester<ScheduleResponse>(
      debounceMs,
      (resp) => this.onResponse(resp),
      (err) => this.onRequestError(err),
    );

    const form = document.createElement("div");
    form.className = "controls";
    form.append(
      this.makeSelect("cluster", "Cluster",
        meta.clusters.map((c) => [String(c.id), c.kind === "corpus" ? "corpus-wide" : `regime ${c.id}`])),
      this.makeSlider("e0", "Target e0", 20, 90, 0.1),
      this.makeSelect("type", "Disruption",
        [["0", "none"], ...meta.disruption_types.map((t) => [String(t.id), t.name] as [string, string])]),
      this.makeSelect("subcluster", "Sub-cluster", [["", "type profile"]]),
      this.makeSlider("lambda", "Intensity", 0, 4, 0.05),
      this.makeSelect("engine", "Engine", meta.engines.map((e) => [e, e])),
    );
    const pinButton = document.createElement("button");
    pinButton.textContent = "Pin baseline";
    pinButton.className = "pin-button";
    pinButton.addEventListener("click", () => {
      this.pinned = this.lastResponse;
      this.render();
    });
    form.appendChild(pinButton);
    this.root.appendChild(form);

    this.hint = document.createElement("div");
    this.hint.className = "range-hint";
    this.root.appendChild(this.hint);
    this.chartBox = document.createElement("div");
    this.chartBox.className = "chart-box";
    this.root.appendChild(this.chartBox);
    this.readouts = document.createElement("div");
    this.readouts.className = "readouts";
    this.root.appendChild(this.readouts);

    this.applyStateToControls();
    this.updateClusterBounds();
  }

  private makeSlider(name: string, label: string, min: number, max: number, step: number): HTMLElement {
    const wrap = document.createElement("label");
    wrap.className = "control";
    wrap.textContent = label;
    const input = document.createElement("input");
    input.type = "range";
    input.min = String(min);
    input.max = String(max);
    input.step = String(step);
    input.name = name;
    input.addEventListener("input", () => this.onControlChange());
    const value = document.createElement("output");
    value.className = `value-${name}`;
    wrap.append(input, value);
    this.controls[name] = input;
    return wrap;
  }

  private makeSelect(name: string, label: string, options: [string, string][]): HTMLElement {
    const wrap = document.createElement("label");
    wrap.className = "control";
    wrap.textContent = label;
    const select = document.createElement("select");
    select.name = name;
    for (const [value, text] of options) {
      const opt = document.createElement("option");
      opt.value = value;
      opt.textContent = text;
      select.appendChild(opt);
    }
    select.addEventListener("change", () => this.onControlChange());
    wrap.appendChild(select);
    this.controls[name] = select;
    return wrap;
  }

  private applyStateToControls(): void {
    (this.controls.cluster as HTMLSelectElement).value = String(this.state.cluster);
    (this.controls.e0 as HTMLInputElement).value = String(this.state.e0);
    (this.controls.type as HTMLSelectElement).value = String(this.state.type);
    (this.controls.lambda as HTMLInputElement).value = String(this.state.lambda);
    (this.controls.engine as HTMLSelectElement).value = this.state.engine;
    this.updateSubclusterOptions();
    (this.controls.subcluster as HTMLSelectElement).value =
      this.state.subcluster === null ? "" : String(this.state.subcluster);
  }

  private updateSubclusterOptions(): void {
    const select = this.controls.subcluster as HTMLSelectElement;
    const typeMeta = this.meta.disruption_types.find((t) => t.id === this.state.type);
    const n = typeMeta ? typeMeta.n_subclusters : 0;
    select.textContent = "";
    const none = document.createElement("option");
    none.value = "";
    none.textContent = "type profile";
    select.appendChild(none);
    for (let k = 0; k < n; k++) {
      const opt = document.createElement("option");
      opt.value = String(k);
      opt.textContent = `sub-cluster ${k}`;
      select.appendChild(opt);
    }
  }

  private updateClusterBounds(): void {
    const cluster = this.meta.clusters.find((c) => c.id === this.state.cluster);
    if (!cluster) return;
    const slider = this.controls.e0 as HTMLInputElement;
    slider.min = cluster.e0_range[0].toFixed(1);
    slider.max = cluster.e0_range[1].toFixed(1);
  }

  private onControlChange(): void {
    this.state.cluster = Number((this.controls.cluster as HTMLSelectElement).value);
    this.state.e0 = Number((this.controls.e0 as HTMLInputElement).value);
    this.state.type = Number((this.controls.type as HTMLSelectElement).value);
    const sub = (this.controls.subcluster as HTMLSelectElement).value;
    this.state.subcluster = sub === "" ? null : Number(sub);
    this.state.lambda = Number((this.controls.lambda as HTMLInputElement).value);
    this.state.engine = (this.controls.engine as HTMLSelectElement).value as "lowess" | "neural";
    this.updateClusterBounds();
    this.updateSubclusterOptions();
    this.onStateChange();
    this.refresh();
  }

  /** Schedule a debounced fetch for the current state. */
  refresh(immediate = false): void {
    const params = {
      cluster: this.state.cluster,
      e0: this.state.e0,
      type: this.state.type,
      lambda: this.state.lambda,
      subcluster: this.state.subcluster,
      engine: this.state.engine,
    };
    const fn = (signal: AbortSignal) => this.client.schedule(params, signal);
    if (immediate) this.requester.immediate(fn);
    else this.requester.schedule(fn);
  }

  private onResponse(resp: ScheduleResponse): void {
    this.lastResponse = resp;
    this.hint.textContent = "";
    this.render();
  }

  private onRequestError(err: unknown): void {
    if (err instanceof ApiError && err.status === 422) {
      const detail = err.detail as RangeError422 | string;
      if (typeof detail === "object" && detail !== null && "supported_range" in detail) {
        const [lo, hi] = detail.supported_range;
        this.hint.textContent =
          `target e0 outside the supported range [${lo.toFixed(1)}, ${hi.toFixed(1)}]`;
        return;
      }
      this.hint.textContent = String(detail);
      return;
    }
    this.hint.textContent = "request failed";
  }

  render(): void {
    const resp = this.lastResponse;
    if (!resp) return;
    const series: Series[] = [];
    if (this.pinned) {
      series.push(
        { label: "pinned F", values: this.pinned.qx_female, color: "#b8b8d0", dashed: true },
        { label: "pinned M", values: this.pinned.qx_male, color: "#d0b8b8", dashed: true },
      );
    }
    series.push(
      { label: "female", values: resp.qx_female, color: "#3355bb" },
      { label: "male", values: resp.qx_male, color: "#bb3333" },
    );
    renderChart(this.chartBox, series, this.meta.n_ages);
    this.readouts.innerHTML = "";
    const rows: [string, string][] = [
      ["e0 female", resp.e0_female.toFixed(2)],
      ["e0 male", resp.e0_male.toFixed(2)],
      ["e0 mean", resp.e0_mean.toFixed(2)],
      ["Δe0 vs λ=0", resp.delta_e0_vs_baseline.toFixed(2)],
    ];
    for (const [k, v] of rows) {
      const div = document.createElement("div");
      div.className = "readout";
      div.innerHTML = `<span class="readout-label">${k}</span><span class="readout-value">${v}</span>`;
      this.readouts.appendChild(div);
    }
    const strip = document.createElement("div");
    strip.className = "delta-strip";
    const width = Math.min(100, Math.abs(resp.delta_e0_vs_baseline) * 12);
    strip.innerHTML =
      `<span class="strip-label">λ=${resp.params.lambda}</span>` +
      `<span class="strip-bar" style="width:${width.toFixed(1)}px"></span>`;
    this.readouts.appendChild(strip);
  }
}
