/** Explorer state and its URL-fragment serialization.
 *
 * The whole view is reproducible from the fragment: selected cluster and
 * engine, the e0 slider, the disruption controls, and the predictor
 * inputs.  Numbers round-trip exactly (encoded with full precision).
 */

export interface ExplorerState {
  cluster: number;
  engine: "lowess" | "neural";
  e0: number;
  type: number;
  subcluster: number | null;
  lambda: number;
  q5f: number;
  q5m: number;
  q45f: number | null;
  q45m: number | null;
}

export function defaultState(): ExplorerState {
  return {
    cluster: 0,
    engine: "lowess",
    e0: 65,
    type: 0,
    subcluster: null,
    lambda: 0,
    q5f: 0.05,
    q5m: 0.06,
    q45f: null,
    q45m: null,
  };
}

export function encodeState(state: ExplorerState): string {
  const q = new URLSearchParams();
  q.set("c", String(state.cluster));
  q.set("g", state.engine);
  q.set("e", String(state.e0));
  q.set("d", String(state.type));
  if (state.subcluster !== null) q.set("s", String(state.subcluster));
  q.set("l", String(state.lambda));
  q.set("qf", String(state.q5f));
  q.set("qm", String(state.q5m));
  if (state.q45f !== null) q.set("af", String(state.q45f));
  if (state.q45m !== null) q.set("am", String(state.q45m));
  return q.toString();
}

export function decodeState(fragment: string): ExplorerState {
  const clean = fragment.startsWith("#") ? fragment.slice(1) : fragment;
  const q = new URLSearchParams(clean);
  const state = defaultState();
  const num = (key: string): number | null => {
    const raw = q.get(key);
    if (raw === null || raw === "") return null;
    const v = Number(raw);
    return Number.isFinite(v) ? v : null;
  };
  state.cluster = num("c") ?? state.cluster;
  const engine = q.get("g");
  if (engine === "lowess" || engine === "neural") state.engine = engine;
  state.e0 = num("e") ?? state.e0;
  state.type = num("d") ?? state.type;
  state.subcluster = num("s");
  state.lambda = num("l") ?? state.lambda;
  state.q5f = num("qf") ?? state.q5f;
  state.q5m = num("qm") ?? state.q5m;
  state.q45f = num("af");
  state.q45m = num("am");
  return state;
}

export function writeStateToUrl(state: ExplorerState): void {
  const fragment = "#" + encodeState(state);
  if (window.location.hash !== fragment) {
    history.replaceState(null, "", fragment);
  }
}

export function readStateFromUrl(): ExplorerState {
  return decodeState(window.location.hash);
}
