import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { FitterPanel, parseScheduleCsv } from "../src/panels/fitter.js";
import { PredictorPanel } from "../src/panels/predictor.js";
import { defaultState } from "../src/state.js";
import { MOCK_META, mockFetch, mockSchedule, N_AGES } from "./fixtures.js";

describe("parseScheduleCsv", () => {
  it("accepts newline- and comma-separated values", () => {
    const values = Array.from({ length: 2 * N_AGES }, (_, i) => -5 + i * 0.01);
    const text = values.slice(0, N_AGES).join(",") + "\n" + values.slice(N_AGES).join("\n");
    const parsed = parseScheduleCsv(text, N_AGES);
    expect(parsed.errors).toEqual([]);
    expect(parsed.z).toHaveLength(2 * N_AGES);
  });

  it("reports row-level errors for malformed cells", () => {
    const parsed = parseScheduleCsv("-5.0\nbogus\n-4.2", N_AGES);
    expect(parsed.errors.some((e) => e.includes("row 2"))).toBe(true);
  });

  it("reports a length mismatch", () => {
    const parsed = parseScheduleCsv("-5.0, -4.0", N_AGES);
    expect(parsed.errors.some((e) => e.includes(`expected ${2 * N_AGES}`))).toBe(true);
  });
});

describe("FitterPanel", () => {
  let panel: FitterPanel;
  beforeEach(() => {
    document.body.textContent = "";
    panel = new FitterPanel(new ApiClient("", mockFetch()), MOCK_META);
    document.body.appendChild(panel.root);
  });

  it("null schedule shows the no-disruption banner", async () => {
    panel.setSchedule(mockSchedule(1, 62.5, 0, 0).logit_qx);
    const fit = await panel.submit();
    expect(fit?.d_hat).toBe(0);
    const banner = panel.root.querySelector(".fit-banner") as HTMLElement;
    expect(banner.textContent).toContain("no disruption");
  });

  it("war schedule shows type and intensity with evidence bars", async () => {
    panel.setSchedule(mockSchedule(1, 62.5, 1, 2.0).logit_qx);
    const fit = await panel.submit();
    expect(fit?.d_hat).toBe(1);
    const banner = panel.root.querySelector(".fit-banner") as HTMLElement;
    expect(banner.textContent).toContain("war");
    const bars = panel.root.querySelectorAll(".bar-row");
    expect(bars.length).toBe(3);
    const paths = panel.root.querySelectorAll("path[data-label]");
    expect(paths.length).toBe(3); // observed, baseline, baseline + lambda delta
  });

  it("malformed input renders a row-level error list without a request", async () => {
    panel.setSchedule([]);
    (panel.root.querySelector("textarea") as HTMLTextAreaElement).value = "1,2,oops";
    const fit = await panel.submit();
    expect(fit).toBeNull();
    const items = panel.root.querySelectorAll(".error-list li");
    expect(items.length).toBeGreaterThan(0);
  });
});

describe("PredictorPanel", () => {
  function makePanel() {
    document.body.textContent = "";
    const state = defaultState();
    const panel = new PredictorPanel(
      new ApiClient("", mockFetch()),
      MOCK_META,
      state,
      () => {},
    );
    document.body.appendChild(panel.root);
    return { panel, state };
  }

  it("adult inputs toggle the variant badge", async () => {
    const { panel } = makePanel();
    const badge = panel.root.querySelector(".variant-badge") as HTMLElement;
    expect(badge.dataset.variant).toBe("one");
    (panel.root.querySelector('input[name="q45f"]') as HTMLInputElement).value = "0.15";
    (panel.root.querySelector('input[name="q45m"]') as HTMLInputElement).value = "0.2";
    (panel.root.querySelector('input[name="q45m"]') as HTMLInputElement).dispatchEvent(
      new Event("change"),
    );
    expect(badge.dataset.variant).toBe("two");
    const resp = await panel.submit();
    expect(resp?.variant).toBe("two");
  });

  it("raising child mortality lowers the displayed e0", async () => {
    const { panel } = makePanel();
    (panel.root.querySelector('input[name="q5f"]') as HTMLInputElement).value = "0.02";
    (panel.root.querySelector('input[name="q5f"]') as HTMLInputElement).dispatchEvent(
      new Event("change"),
    );
    const low = await panel.submit();
    (panel.root.querySelector('input[name="q5f"]') as HTMLInputElement).value = "0.2";
    (panel.root.querySelector('input[name="q5f"]') as HTMLInputElement).dispatchEvent(
      new Event("change"),
    );
    const high = await panel.submit();
    expect(high!.e0_female).toBeLessThan(low!.e0_female);
  });

  it("invalid probability shows a field-level error without a request", async () => {
    const { panel } = makePanel();
    (panel.root.querySelector('input[name="q5f"]') as HTMLInputElement).value = "1.5";
    (panel.root.querySelector('input[name="q5f"]') as HTMLInputElement).dispatchEvent(
      new Event("change"),
    );
    const resp = await panel.submit();
    expect(resp).toBeNull();
    const err = panel.root.querySelector(".field-error") as HTMLElement;
    expect(err.textContent).toContain("probability");
  });
});
