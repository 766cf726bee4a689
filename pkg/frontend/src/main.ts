/** Explorer bootstrap: fetch metadata, build the three panels, and keep
 * the view state round-tripping through the URL fragment. */

import { ApiClient } from "./api.js";
import { FitterPanel } from "./panels/fitter.js";
import { GeneratorPanel } from "./panels/generator.js";
import { PredictorPanel } from "./panels/predictor.js";
import { readStateFromUrl, writeStateToUrl, type ExplorerState } from "./state.js";
import type { Meta } from "./types.js";

export interface App {
  generator: GeneratorPanel;
  fitter: FitterPanel;
  predictor: PredictorPanel;
  state: ExplorerState;
}

/** Build the app into `root`; exported for tests. */
export function buildApp(
  root: HTMLElement,
  client: ApiClient,
  meta: Meta,
  state: ExplorerState,
  options: { debounceMs?: number; syncUrl?: boolean } = {},
): App {
  const syncUrl = options.syncUrl ?? true;
  const onStateChange = () => {
    if (syncUrl) writeStateToUrl(state);
  };
  const generator = new GeneratorPanel(client, meta, state, onStateChange, options.debounceMs);
  const fitter = new FitterPanel(client, meta);
  const predictor = new PredictorPanel(client, meta, state, onStateChange);

  const header = document.createElement("header");
  header.innerHTML =
    `<h1>Mortality schedule explorer</h1>` +
    `<span class="bundle-hash">bundle ${meta.bundle_hash.slice(0, 12)}</span>`;
  root.textContent = "";
  root.append(header, generator.root, fitter.root, predictor.root);
  onStateChange();
  return { generator, fitter, predictor, state };
}

export async function start(root: HTMLElement, baseUrl = ""): Promise<App> {
  const client = new ApiClient(baseUrl);
  const meta = await client.meta();
  const state = readStateFromUrl();
  const first = meta.clusters[0];
  if (first && !meta.clusters.some((c) => c.id === state.cluster)) {
    state.cluster = first.id;
  }
  const app = buildApp(root, client, meta, state);
  app.generator.refresh(true);
  return app;
}

declare global {
  interface Window {
    mdmxApp?: Promise<App>;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  window.mdmxApp = start(document.getElementById("app")!);
}
