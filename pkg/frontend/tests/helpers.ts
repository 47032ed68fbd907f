/**
 * Shared test plumbing: golden responses captured from the real service
 * and a stub fetch that replays them while recording every request.
 */
import { readFileSync } from "node:fs";
import { join } from "node:path";

import type { SearchResult } from "../src/api.js";

function golden<T>(name: string): T {
  // resolved from the package root; import.meta.url is virtualized in jsdom
  const path = join(process.cwd(), "tests", "golden", name);
  return JSON.parse(readFileSync(path, "utf8")) as T;
}

export const GOLDEN_TEXT_RESULTS = golden<SearchResult[]>("search_text.json");
export const GOLDEN_IMAGE_RESULTS = golden<SearchResult[]>("search_image.json");
export const GOLDEN_HEALTH = golden<Record<string, unknown>>("health.json");

export interface RecordedRequest {
  url: string;
  init: RequestInit;
}

export interface StubServer {
  fetch: typeof fetch;
  requests: RecordedRequest[];
}

/** Replays canned responses per endpoint, recording each request. */
export function stubServer(
  routes: Record<string, { status?: number; body: unknown }>,
): StubServer {
  const requests: RecordedRequest[] = [];
  const fetchFn = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    requests.push({ url, init: init ?? {} });
    const path = url.replace(/^https?:\/\/[^/]+/, "").split("?")[0] ?? "";
    const route = routes[path];
    if (!route) {
      return new Response(JSON.stringify({ error: `no route for ${path}` }), {
        status: 404,
        headers: { "Content-Type": "application/json" },
      });
    }
    return new Response(JSON.stringify(route.body), {
      status: route.status ?? 200,
      headers: { "Content-Type": "application/json" },
    });
  }) as typeof fetch;
  return { fetch: fetchFn, requests };
}

/** A fetch whose responses are released manually; honors abort signals. */
export function manualServer(body: unknown): StubServer & { release: () => void } {
  const requests: RecordedRequest[] = [];
  let pending: Array<() => void> = [];
  const fetchFn = (async (input: RequestInfo | URL, init?: RequestInit) => {
    requests.push({ url: String(input), init: init ?? {} });
    return new Promise<Response>((resolve, reject) => {
      init?.signal?.addEventListener("abort", () =>
        reject(new DOMException("aborted", "AbortError")),
      );
      pending.push(() =>
        resolve(
          new Response(JSON.stringify(body), {
            status: 200,
            headers: { "Content-Type": "application/json" },
          }),
        ),
      );
    });
  }) as typeof fetch;
  return {
    fetch: fetchFn,
    requests,
    release: () => {
      for (const fire of pending) fire();
      pending = [];
    },
  };
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
