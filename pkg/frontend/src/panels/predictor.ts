/** Predictor panel: summary indicators in, full schedules out. */

import { ApiClient, ApiError } from "../api.js";
import { renderChart } from "../chart.js";
import type { ExplorerState } from "../state.js";
import type { Meta, PredictResponse } from "../types.js";

export class PredictorPanel {
  readonly root: HTMLElement;
  lastResponse: PredictResponse | null = null;

  private inputs: Record<string, HTMLInputElement> = {};
  private fieldErrors: Record<string, HTMLElement> = {};
  private badge: HTMLElement;
  private chartBox: HTMLElement;
  private readouts: HTMLElement;

  constructor(
    private client: ApiClient,
    private meta: Meta,
    private state: ExplorerState,
    private onStateChange: () => void,
  ) {
    this.root = document.createElement("section");
    this.root.className = "panel predictor-panel";
    this.root.innerHTML = "<h2>Predictor</h2>";
    const form = document.createElement("div");
    form.className = "controls";
    form.append(
      this.makeField("q5f", "5q0 female"),
      this.makeField("q5m", "5q0 male"),
      this.makeField("q45f", "45q15 female (optional)"),
      this.makeField("q45m", "45q15 male (optional)"),
    );
    const button = document.createElement("button");
    button.textContent = "Predict";
    button.addEventListener("click", () => void this.submit());
    form.appendChild(button);
    this.badge = document.createElement("span");
    this.badge.className = "variant-badge";
    form.appendChild(this.badge);
    this.root.appendChild(form);
    this.chartBox = document.createElement("div");
    this.chartBox.className = "chart-box";
    this.root.appendChild(this.chartBox);
    this.readouts = document.createElement("div");
    this.readouts.className = "readouts";
    this.root.appendChild(this.readouts);
    this.applyState();
  }

  private makeField(name: string, label: string): HTMLElement {
    const wrap = document.createElement("label");
    wrap.className = "control";
    wrap.textContent = label;
    const input = document.createElement("input");
    input.type = "number";
    input.step = "0.001";
    input.name = name;
    input.addEventListener("change", () => this.syncState());
    const err = document.createElement("span");
    err.className = "field-error";
    wrap.append(input, err);
    this.inputs[name] = input;
    this.fieldErrors[name] = err;
    return wrap;
  }

  private applyState(): void {
    this.inputs.q5f!.value = String(this.state.q5f);
    this.inputs.q5m!.value = String(this.state.q5m);
    this.inputs.q45f!.value = this.state.q45f === null ? "" : String(this.state.q45f);
    this.inputs.q45m!.value = this.state.q45m === null ? "" : String(this.state.q45m);
    this.updateBadge();
  }

  private syncState(): void {
    const val = (name: string): number | null => {
      const raw = this.inputs[name]!.value.trim();
      return raw === "" ? null : Number(raw);
    };
    this.state.q5f = val("q5f") ?? this.state.q5f;
    this.state.q5m = val("q5m") ?? this.state.q5m;
    this.state.q45f = val("q45f");
    this.state.q45m = val("q45m");
    this.updateBadge();
    this.onStateChange();
  }

  private updateBadge(): void {
    const two = this.state.q45f !== null && this.state.q45m !== null;
    this.badge.textContent = two ? "two-parameter model" : "one-parameter model";
    this.badge.dataset.variant = two ? "two" : "one";
  }

  private validate(): boolean {
    let ok = true;
    const check = (name: string, value: number | null, optional: boolean) => {
      const box = this.fieldErrors[name]!;
      box.textContent = "";
      if (value === null) {
        if (!optional) {
          box.textContent = "required";
          ok = false;
        }
        return;
      }
      if (!(value > 0 && value < 1)) {
        box.textContent = "must be a probability in (0, 1)";
        ok = false;
      }
    };
    check("q5f", this.state.q5f, false);
    check("q5m", this.state.q5m, false);
    check("q45f", this.state.q45f, true);
    check("q45m", this.state.q45m, true);
    return ok;
  }

  async submit(): Promise<PredictResponse | null> {
    this.syncState();
    if (!this.validate()) return null;
    const body: {
      q5_female: number;
      q5_male: number;
      q45_female?: number;
      q45_male?: number;
    } = { q5_female: this.state.q5f, q5_male: this.state.q5m };
    if (this.state.q45f !== null && this.state.q45m !== null) {
      body.q45_female = this.state.q45f;
      body.q45_male = this.state.q45m;
    }
    try {
      const resp = await this.client.predict(body);
      this.lastResponse = resp;
      this.render(resp);
      return resp;
    } catch (err) {
      const box = this.fieldErrors.q5f!;
      box.textContent = err instanceof ApiError ? String(err.detail) : String(err);
      return null;
    }
  }

  private render(resp: PredictResponse): void {
    this.badge.textContent =
      resp.variant === "two" ? "two-parameter model" : "one-parameter model";
    this.badge.dataset.variant = resp.variant;
    renderChart(
      this.chartBox,
      [
        { label: "female", values: resp.qx_female, color: "#3355bb" },
        { label: "male", values: resp.qx_male, color: "#bb3333" },
      ],
      this.meta.n_ages,
    );
    this.readouts.innerHTML =
      `<div class="readout"><span class="readout-label">e0 female</span>` +
      `<span class="readout-value">${resp.e0_female.toFixed(2)}</span></div>` +
      `<div class="readout"><span class="readout-label">e0 male</span>` +
      `<span class="readout-value">${resp.e0_male.toFixed(2)}</span></div>`;
  }
}
