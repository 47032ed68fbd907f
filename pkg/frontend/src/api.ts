/**
 * Typed client for the retrieval service HTTP API.
 *
 * Endpoints consumed (and nothing else):
 *   POST /search/text   JSON  {query, k}
 *   POST /search/image  multipart, field "image", k as query param
 *   GET  /items/{id}
 *   GET  /health
 */

export interface ScoreBreakdown {
  global: number;
  local: number;
  fused: number;
}

export interface SearchResult {
  rank: number;
  item_id: number;
  external_id: string;
  score: ScoreBreakdown;
  description: string;
  image_uri: string;
  source_url: string;
}

export interface HealthInfo {
  status: string;
  corpus_size: number;
  dims: { global: number; local: number };
  encoder_mode: string;
  uptime_s: number;
}

export interface ItemInfo {
  item_id: number;
  external_id: string;
  description: string;
  image_uri: string;
  source_url: string;
}

/** Server rejected the request; `status` is the HTTP code. */
export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

/** Matches the service default; larger files are rejected client-side. */
export const MAX_UPLOAD_BYTES = 8 * 1024 * 1024;

function isScore(x: unknown): x is ScoreBreakdown {
  if (typeof x !== "object" || x === null) return false;
  const s = x as Record<string, unknown>;
  return ["global", "local", "fused"].every((k) => typeof s[k] === "number");
}

function isSearchResult(x: unknown): x is SearchResult {
  if (typeof x !== "object" || x === null) return false;
  const r = x as Record<string, unknown>;
  return (
    typeof r.rank === "number" &&
    typeof r.item_id === "number" &&
    typeof r.external_id === "string" &&
    typeof r.description === "string" &&
    typeof r.image_uri === "string" &&
    typeof r.source_url === "string" &&
    isScore(r.score)
  );
}

async function errorMessage(resp: Response): Promise<string> {
  try {
    const body = (await resp.json()) as { error?: string };
    if (typeof body.error === "string" && body.error) return body.error;
  } catch {
    /* non-JSON error body; fall through to the status line */
  }
  return `request failed with HTTP ${resp.status}`;
}

async function parseResults(resp: Response): Promise<SearchResult[]> {
  if (!resp.ok) throw new ApiError(resp.status, await errorMessage(resp));
  const body: unknown = await resp.json();
  if (!Array.isArray(body) || !body.every(isSearchResult)) {
    throw new ApiError(resp.status, "malformed search response");
  }
  return body;
}

export class SearchClient {
  constructor(
    private readonly baseUrl = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args),
  ) {}

  async searchText(query: string, k: number, signal?: AbortSignal): Promise<SearchResult[]> {
    const resp = await this.fetchFn(`${this.baseUrl}/search/text`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ query, k }),
      signal,
    });
    return parseResults(resp);
  }

  async searchImage(file: Blob, k: number, signal?: AbortSignal): Promise<SearchResult[]> {
    if (file.size === 0) throw new ApiError(400, "selected file is empty");
    if (file.size > MAX_UPLOAD_BYTES) {
      throw new ApiError(400, `file exceeds the ${MAX_UPLOAD_BYTES} byte upload limit`);
    }
    const form = new FormData();
    form.append("image", file);
    const resp = await this.fetchFn(
      `${this.baseUrl}/search/image?k=${encodeURIComponent(k)}`,
      { method: "POST", body: form, signal },
    );
    return parseResults(resp);
  }

  async item(itemId: number): Promise<ItemInfo> {
    const resp = await this.fetchFn(`${this.baseUrl}/items/${itemId}`);
    if (!resp.ok) throw new ApiError(resp.status, await errorMessage(resp));
    return (await resp.json()) as ItemInfo;
  }

  async health(): Promise<HealthInfo> {
    const resp = await this.fetchFn(`${this.baseUrl}/health`);
    if (!resp.ok) throw new ApiError(resp.status, await errorMessage(resp));
    return (await resp.json()) as HealthInfo;
  }
}
