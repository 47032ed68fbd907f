/**
 * Application wiring: one view with a mode toggle (text query box vs
 * image upload), a k selector, and the result grid. One search is in
 * flight at a time; submitting again aborts the previous request.
 */
import { ApiError, MAX_UPLOAD_BYTES, SearchClient } from "./api.js";
import { renderResults } from "./render.js";
import {
  DEFAULT_K,
  K_CHOICES,
  QueryState,
  canSubmit,
  hasQuery,
  initialState,
  phase,
} from "./state.js";

export interface App {
  root: HTMLElement;
  state: QueryState;
  /** Resolves when the in-flight request (if any) settles. */
  pending: Promise<void> | null;
}

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className: string,
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = className;
  if (text) node.textContent = text;
  return node;
}

export function createApp(root: HTMLElement, client: SearchClient): App {
  const state = initialState();
  const app: App = { root, state, pending: null };
  let controller: AbortController | null = null;

  const form = el("form", "query-form");
  form.addEventListener("submit", (e) => e.preventDefault());

  const modeText = el("button", "mode-toggle", "text search");
  modeText.type = "button";
  modeText.dataset.mode = "text";
  const modeImage = el("button", "mode-toggle", "image search");
  modeImage.type = "button";
  modeImage.dataset.mode = "image";

  const textInput = el("input", "text-input") as HTMLInputElement;
  textInput.type = "text";
  textInput.placeholder = "describe a painting, e.g. a man sitting with his dog";

  const fileInput = el("input", "file-input") as HTMLInputElement;
  fileInput.type = "file";
  fileInput.accept = "image/*";

  const kSelect = el("select", "k-select") as HTMLSelectElement;
  for (const k of K_CHOICES) {
    const opt = document.createElement("option");
    opt.value = String(k);
    opt.textContent = `top ${k}`;
    opt.selected = k === DEFAULT_K;
    kSelect.appendChild(opt);
  }

  const submit = el("button", "submit", "search");
  submit.type = "submit";

  const banner = el("div", "error-banner");
  banner.hidden = true;

  const status = el("p", "status", "enter a query to search the collection");
  const grid = el("div", "result-grid");

  form.append(modeText, modeImage, textInput, fileInput, kSelect, submit);
  root.append(form, banner, status, grid);

  function sync(): void {
    root.dataset.phase = phase(state);
    modeText.classList.toggle("active", state.mode === "text");
    modeImage.classList.toggle("active", state.mode === "image");
    textInput.hidden = state.mode !== "text";
    fileInput.hidden = state.mode !== "image";
    submit.disabled = !canSubmit(state);
    banner.hidden = state.error === null;
    banner.textContent = state.error ?? "";
    switch (phase(state)) {
      case "idle":
        status.textContent = "enter a query to search the collection";
        break;
      case "loading":
        status.textContent = "searching…";
        break;
      case "empty":
        status.textContent = "no results";
        break;
      case "results":
        status.textContent = `${state.results!.length} results`;
        break;
      case "error":
        // the banner carries the message; keep any prior results visible
        status.textContent = state.results ? `${state.results.length} results (stale)` : "";
        break;
    }
  }

  function setMode(mode: "text" | "image"): void {
    state.mode = mode;
    sync();
  }
  modeText.addEventListener("click", () => setMode("text"));
  modeImage.addEventListener("click", () => setMode("image"));

  textInput.addEventListener("input", () => {
    state.text = textInput.value;
    sync();
  });
  fileInput.addEventListener("change", () => {
    state.file = fileInput.files?.[0] ?? null;
    sync();
  });
  kSelect.addEventListener("change", () => {
    state.k = Number(kSelect.value);
  });

  async function run(): Promise<void> {
    // Oversize files never leave the browser.
    if (state.mode === "image" && state.file && state.file.size > MAX_UPLOAD_BYTES) {
      state.error = `file is larger than the ${MAX_UPLOAD_BYTES / (1 << 20)} MiB upload limit`;
      sync();
      return;
    }
    controller?.abort();
    controller = new AbortController();
    const signal = controller.signal;
    state.inFlight = true;
    state.error = null;
    sync();
    try {
      const results =
        state.mode === "text"
          ? await client.searchText(state.text.trim(), state.k, signal)
          : await client.searchImage(state.file!, state.k, signal);
      state.results = results;
      state.inFlight = false;
      renderResults(grid, results);
    } catch (err) {
      if (signal.aborted) return; // superseded by a newer search
      state.inFlight = false;
      state.error = err instanceof ApiError ? err.message : "search failed: server unreachable";
    }
    sync();
  }

  // The button is disabled while a search is in flight, but a submit that
  // arrives anyway (Enter in the text box) cancels the previous request
  // and starts a new one, keeping at most one in flight.
  form.addEventListener("submit", () => {
    if (!hasQuery(state)) return;
    app.pending = run();
  });

  sync();
  return app;
}
