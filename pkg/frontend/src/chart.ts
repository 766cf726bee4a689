/** SVG line chart of qx on a log scale, ages 0-109 fixed on the x axis.
 *
 * Deterministic DOM output for a given series list, so view restoration
 * can be verified by direct DOM comparison.  Supports pinned comparison
 * curves rendered behind the live ones.
 */

export interface Series {
  label: string;
  values: number[]; // qx per age
  color: string;
  dashed?: boolean;
}

const WIDTH = 640;
const HEIGHT = 340;
const MARGIN = { left: 52, right: 12, top: 12, bottom: 30 };
const Q_MIN = 1e-6;
const Q_MAX = 1.0;

function xPos(age: number, nAges: number): number {
  const inner = WIDTH - MARGIN.left - MARGIN.right;
  return MARGIN.left + (age / (nAges - 1)) * inner;
}

function yPos(q: number): number {
  const inner = HEIGHT - MARGIN.top - MARGIN.bottom;
  const clamped = Math.min(Math.max(q, Q_MIN), Q_MAX);
  const t = (Math.log10(clamped) - Math.log10(Q_MIN)) / (Math.log10(Q_MAX) - Math.log10(Q_MIN));
  return MARGIN.top + inner * (1 - t);
}

function pathFor(values: number[], nAges: number): string {
  return values
    .map((q, age) => `${age === 0 ? "M" : "L"}${xPos(age, nAges).toFixed(2)},${yPos(q).toFixed(2)}`)
    .join("");
}

const SVG_NS = "http://www.w3.org/2000/svg";

export function renderChart(container: HTMLElement, series: Series[], nAges: number): void {
  container.textContent = "";
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("viewBox", `0 0 ${WIDTH} ${HEIGHT}`);
  svg.setAttribute("class", "qx-chart");

  for (let exp = -6; exp <= 0; exp++) {
    const q = Math.pow(10, exp);
    const y = yPos(q).toFixed(2);
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(MARGIN.left));
    line.setAttribute("x2", String(WIDTH - MARGIN.right));
    line.setAttribute("y1", y);
    line.setAttribute("y2", y);
    line.setAttribute("class", "gridline");
    svg.appendChild(line);
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(MARGIN.left - 6));
    label.setAttribute("y", y);
    label.setAttribute("class", "tick-label");
    label.setAttribute("text-anchor", "end");
    label.textContent = exp === 0 ? "1" : `1e${exp}`;
    svg.appendChild(label);
  }
  for (let age = 0; age <= nAges - 1; age += 20) {
    const x = xPos(age, nAges).toFixed(2);
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", x);
    label.setAttribute("y", String(HEIGHT - 8));
    label.setAttribute("class", "tick-label");
    label.setAttribute("text-anchor", "middle");
    label.textContent = String(age);
    svg.appendChild(label);
  }

  for (const s of series) {
    const path = document.createElementNS(SVG_NS, "path");
    path.setAttribute("d", pathFor(s.values, nAges));
    path.setAttribute("fill", "none");
    path.setAttribute("stroke", s.color);
    path.setAttribute("stroke-width", "1.6");
    if (s.dashed) path.setAttribute("stroke-dasharray", "5,3");
    path.setAttribute("data-label", s.label);
    svg.appendChild(path);
  }

  const legend = document.createElement("div");
  legend.className = "legend";
  for (const s of series) {
    const item = document.createElement("span");
    item.className = "legend-item";
    item.style.borderColor = s.color;
    item.textContent = s.label;
    legend.appendChild(item);
  }
  container.appendChild(svg);
  container.appendChild(legend);
}

export function renderBars(
  container: HTMLElement,
  entries: { label: string; value: number }[],
  title: string,
): void {
  container.textContent = "";
  const heading = document.createElement("h4");
  heading.textContent = title;
  container.appendChild(heading);
  const max = Math.max(1e-9, ...entries.map((e) => Math.abs(e.value)));
  for (const entry of entries) {
    const row = document.createElement("div");
    row.className = "bar-row";
    const label = document.createElement("span");
    label.className = "bar-label";
    label.textContent = entry.label;
    const bar = document.createElement("span");
    bar.className = "bar " + (entry.value >= 0 ? "bar-pos" : "bar-neg");
    bar.style.width = `${(Math.abs(entry.value) / max) * 60}%`;
    const value = document.createElement("span");
    value.className = "bar-value";
    value.textContent = entry.value.toFixed(2);
    row.append(label, bar, value);
    container.appendChild(row);
  }
}
