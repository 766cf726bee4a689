/** Integration tests against the real service over a real bundle.
 *
 * Builds a small pipeline bundle (cached under /tmp) and spawns the
 * Python service; requires python3 with the mdmx package installed.
 * Run via `npm run test:integration`.
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { existsSync } from "node:fs";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { FitterPanel } from "../src/panels/fitter.js";
import { GeneratorPanel } from "../src/panels/generator.js";
import { defaultState } from "../src/state.js";
import type { Meta } from "../src/types.js";

const BUNDLE_DIR = "/tmp/mdmx-ui-bundle";
const PORT = 8731;
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;
let client: ApiClient;
let meta: Meta;

async function waitForService(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const res = await fetch(`${BASE}/v1/meta`);
      if (res.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, 300));
  }
  throw new Error("service did not come up");
}

beforeAll(async () => {
  if (!existsSync(`${BUNDLE_DIR}/disruption/manifest.json`)) {
    execFileSync("python3", ["scripts/build_test_bundle.py", BUNDLE_DIR], {
      stdio: "inherit",
      timeout: 300_000,
    });
  }
  server = spawn(
    "python3",
    ["-m", "mdmx.cli", "serve", "--bundle", BUNDLE_DIR, "--port", String(PORT)],
    { stdio: "ignore" },
  );
  await waitForService();
  client = new ApiClient(BASE);
  meta = await client.meta();
}, 360_000);

afterAll(() => {
  server?.kill();
});

describe("real-service integration", () => {
  it("meta reports clusters, types, and a stable hash", async () => {
    expect(meta.clusters.length).toBeGreaterThan(0);
    expect(meta.n_ages).toBe(60);
    const again = await client.meta();
    expect(again.bundle_hash).toBe(meta.bundle_hash);
  });

  it("B1: lambda=0 curve is bit-equal (as JSON) to the pinned baseline", async () => {
    const state = defaultState();
    const regime = meta.clusters.find((c) => c.kind === "regime") ?? meta.clusters[0]!;
    state.cluster = regime.id;
    state.e0 = 0.5 * (regime.e0_range[0] + regime.e0_range[1]);
    const panel = new GeneratorPanel(client, meta, state, () => {}, 0);
    document.body.appendChild(panel.root);

    panel.refresh(true);
    await waitFor(() => panel.lastResponse !== null);
    (panel.root.querySelector(".pin-button") as HTMLButtonElement).click();
    const pinned = JSON.stringify(panel.pinned!.logit_qx);

    // burst of slider moves -> exactly one settled request (cancellation)
    const before = panel.requester.startedCount;
    const lamSlider = panel.root.querySelector('input[name="lambda"]') as HTMLInputElement;
    const typeSelect = panel.root.querySelector('select[name="type"]') as HTMLSelectElement;
    typeSelect.value = "1";
    typeSelect.dispatchEvent(new Event("change"));
    for (const v of ["0.4", "0.9", "1.3", "1.8"]) {
      lamSlider.value = v;
      lamSlider.dispatchEvent(new Event("input"));
    }
    await waitFor(() => panel.lastResponse!.params.lambda === 1.8);
    expect(panel.requester.startedCount - before).toBeLessThanOrEqual(2);

    lamSlider.value = "0";
    lamSlider.dispatchEvent(new Event("input"));
    await waitFor(() => panel.lastResponse!.params.lambda === 0);
    expect(JSON.stringify(panel.lastResponse!.logit_qx)).toBe(pinned);
  }, 60_000);

  it("B2: generate war lambda=2, fit the schedule, recover type and intensity", async () => {
    const regime = meta.clusters.find((c) => c.kind === "regime") ?? meta.clusters[0]!;
    const [lo, hi] = regime.e0_range;
    const resp = await client.schedule({
      cluster: regime.id,
      e0: 0.4 * lo + 0.6 * hi,
      type: 1,
      lambda: 2.0,
    });
    const fitter = new FitterPanel(client, meta);
    document.body.appendChild(fitter.root);
    fitter.setSchedule(resp.logit_qx); // the "downloaded" schedule
    const fit = await fitter.submit();
    expect(fit).not.toBeNull();
    expect(fit!.d_hat).toBe(1);
    expect(fit!.lam_hat).toBeGreaterThanOrEqual(1.8);
    expect(fit!.lam_hat).toBeLessThanOrEqual(2.2);
    const banner = fitter.root.querySelector(".fit-banner") as HTMLElement;
    expect(banner.textContent).toContain("war");
  }, 60_000);

  it("predict responds for both variants", async () => {
    const one = await client.predict({ q5_female: 0.05, q5_male: 0.06 });
    expect(one.variant).toBe("one");
    const two = await client.predict({
      q5_female: 0.05,
      q5_male: 0.06,
      q45_female: 0.12,
      q45_male: 0.17,
    });
    expect(two.variant).toBe("two");
  });
});

async function waitFor(cond: () => boolean, timeoutMs = 20_000): Promise<void> {
  const start = Date.now();
  while (!cond()) {
    if (Date.now() - start > timeoutMs) throw new Error("condition timed out");
    await new Promise((r) => setTimeout(r, 50));
  }
}
