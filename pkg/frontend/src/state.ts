/**
 * Query-form state. Exactly one mode is active at a time and at most one
 * search request is in flight; a new submission cancels the previous one
 * (the controller lives in app.ts, the flag lives here).
 */
import type { SearchResult } from "./api.js";

export type QueryMode = "text" | "image";

/** The five user-visible states, each styled distinctly. */
export type UiPhase = "idle" | "loading" | "results" | "empty" | "error";

export const K_CHOICES = [5, 10, 20] as const;
export const DEFAULT_K = 10;

export interface QueryState {
  mode: QueryMode;
  text: string;
  file: File | null;
  k: number;
  inFlight: boolean;
  error: string | null;
  /** Last successful result set; retained across errors. */
  results: SearchResult[] | null;
}

export function initialState(): QueryState {
  return {
    mode: "text",
    text: "",
    file: null,
    k: DEFAULT_K,
    inFlight: false,
    error: null,
    results: null,
  };
}

/** True when the active mode has a query to send. */
export function hasQuery(s: QueryState): boolean {
  return s.mode === "text" ? s.text.trim().length > 0 : s.file !== null;
}

/** The submit button requires a query and no request in flight. */
export function canSubmit(s: QueryState): boolean {
  return !s.inFlight && hasQuery(s);
}

export function phase(s: QueryState): UiPhase {
  if (s.inFlight) return "loading";
  if (s.error !== null) return "error";
  if (s.results === null) return "idle";
  return s.results.length === 0 ? "empty" : "results";
}
