/** Fitter panel: paste or upload a schedule, send it to the fit endpoint,
 * and show the three-curve decomposition plus per-type evidence bars. */

import { ApiClient, ApiError } from "../api.js";
import { renderBars, renderChart, Series } from "../chart.js";
import type { FitResponse, Meta } from "../types.js";

export interface ParsedSchedule {
  z: number[];
  errors: string[];
}

/** Parse a pasted CSV/whitespace schedule of 2A logit values.
 * Accepts one value per line, comma-separated rows, or an id column. */
export function parseScheduleCsv(text: string, nAges: number): ParsedSchedule {
  const errors: string[] = [];
  const values: number[] = [];
  const lines = text.split(/\r?\n/).filter((l) => l.trim().length > 0);
  for (const [i, line] of lines.entries()) {
    const cells = line.split(/[,;\s]+/).filter((c) => c.length > 0);
    for (const cell of cells) {
      const v = Number(cell);
      if (!Number.isFinite(v)) {
        errors.push(`row ${i + 1}: not a number: ${cell}`);
      } else {
        values.push(v);
      }
    }
  }
  if (values.length !== 2 * nAges) {
    errors.push(`expected ${2 * nAges} values, got ${values.length}`);
  }
  return { z: values, errors };
}

const TYPE_NAMES: Record<string, string> = { "1": "war", "2": "respiratory", "3": "enteric" };

export class FitterPanel {
  readonly root: HTMLElement;
  lastFit: FitResponse | null = null;

  private textarea: HTMLTextAreaElement;
  private errorBox: HTMLElement;
  private banner: HTMLElement;
  private chartBox: HTMLElement;
  private barsBox: HTMLElement;
  private summary: HTMLElement;

  constructor(
    private client: ApiClient,
    private meta: Meta,
  ) {
    this.root = document.createElement("section");
    this.root.className = "panel fitter-panel";
    this.root.innerHTML = `<h2>Fitter</h2>
      <p class="help">Paste ${2 * meta.n_ages} logit(qx) values (female ages then male ages).</p>`;
    this.textarea = document.createElement("textarea");
    this.textarea.rows = 5;
    this.root.appendChild(this.textarea);
    const button = document.createElement("button");
    button.textContent = "Fit schedule";
    button.addEventListener("click", () => void this.submit());
    this.root.appendChild(button);
    this.errorBox = document.createElement("ul");
    this.errorBox.className = "error-list";
    this.root.appendChild(this.errorBox);
    this.banner = document.createElement("div");
    this.banner.className = "fit-banner";
    this.root.appendChild(this.banner);
    this.chartBox = document.createElement("div");
    this.chartBox.className = "chart-box";
    this.root.appendChild(this.chartBox);
    this.barsBox = document.createElement("div");
    this.barsBox.className = "bars-box";
    this.root.appendChild(this.barsBox);
    this.summary = document.createElement("div");
    this.summary.className = "fit-summary";
    this.root.appendChild(this.summary);
  }

  setSchedule(z: number[]): void {
    this.textarea.value = z.map((v) => v.toPrecision(10)).join("\n");
  }

  async submit(): Promise<FitResponse | null> {
    this.errorBox.textContent = "";
    const parsed = parseScheduleCsv(this.textarea.value, this.meta.n_ages);
    if (parsed.errors.length > 0) {
      for (const msg of parsed.errors) {
        const li = document.createElement("li");
        li.textContent = msg;
        this.errorBox.appendChild(li);
      }
      return null;
    }
    try {
      const fit = await this.client.fit({ z: parsed.z });
      this.lastFit = fit;
      this.render(parsed.z, fit);
      return fit;
    } catch (err) {
      const li = document.createElement("li");
      li.textContent = err instanceof ApiError ? `service: ${JSON.stringify(err.detail)}` : String(err);
      this.errorBox.appendChild(li);
      return null;
    }
  }

  private render(observedZ: number[], fit: FitResponse): void {
    if (fit.d_hat === 0) {
      this.banner.textContent = "no disruption detected";
      this.banner.classList.add("banner-null");
    } else {
      const name = TYPE_NAMES[String(fit.d_hat)] ?? String(fit.d_hat);
      this.banner.textContent =
        `disruption: ${name}, intensity ${fit.lam_hat.toFixed(2)}`;
      this.banner.classList.remove("banner-null");
    }

    const expit = (y: number) => 1 / (1 + Math.exp(-y));
    const series: Series[] = [
      { label: "observed", values: observedZ.slice(0, this.meta.n_ages).map(expit), color: "#888888" },
    ];
    if (fit.baseline_logit_qx) {
      series.push({
        label: "baseline",
        values: fit.baseline_logit_qx.slice(0, this.meta.n_ages).map(expit),
        color: "#3355bb",
      });
    }
    if (fit.fitted_logit_qx && fit.d_hat !== 0) {
      series.push({
        label: "baseline + λδ",
        values: fit.fitted_logit_qx.slice(0, this.meta.n_ages).map(expit),
        color: "#bb3333",
        dashed: true,
      });
    }
    renderChart(this.chartBox, series, this.meta.n_ages);

    renderBars(
      this.barsBox,
      Object.entries(fit.log_bf).map(([lab, value]) => ({
        label: TYPE_NAMES[lab] ?? lab,
        value,
      })),
      "log Bayes factor per type",
    );
    this.summary.textContent =
      `cluster ${fit.cluster}, e0* ${fit.e0_star.toFixed(2)} (null ${fit.e0_null.toFixed(2)})`;
  }
}
