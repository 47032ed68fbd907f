/**
 * DOM rendering for the result grid. Cards appear strictly in response
 * rank order, link out in a new tab, and lazy-load thumbnails with a
 * placeholder fallback for broken URIs.
 */
import type { SearchResult } from "./api.js";

export const PLACEHOLDER_IMAGE =
  "data:image/svg+xml," +
  encodeURIComponent(
    '<svg xmlns="http://www.w3.org/2000/svg" width="200" height="150">' +
      '<rect width="100%" height="100%" fill="#d8d8d8"/>' +
      '<text x="50%" y="50%" text-anchor="middle" fill="#666" ' +
      'font-family="sans-serif" font-size="14">no image</text></svg>',
  );

function scoreRow(label: string, value: number): HTMLElement {
  const row = document.createElement("div");
  row.className = "score-row";
  row.textContent = `${label}: ${value.toFixed(4)}`;
  return row;
}

export function renderCard(result: SearchResult): HTMLElement {
  const card = document.createElement("article");
  card.className = "result-card";
  card.dataset.rank = String(result.rank);
  card.dataset.itemId = String(result.item_id);

  const img = document.createElement("img");
  img.className = "thumb";
  img.setAttribute("loading", "lazy");
  img.alt = result.description;
  img.src = result.image_uri || PLACEHOLDER_IMAGE;
  img.addEventListener("error", () => {
    if (img.src !== PLACEHOLDER_IMAGE) img.src = PLACEHOLDER_IMAGE;
  });
  card.appendChild(img);

  const desc = document.createElement("p");
  desc.className = "description";
  desc.textContent = result.description;
  card.appendChild(desc);

  // Score breakdown lives in a disclosure so the grid stays compact.
  const details = document.createElement("details");
  details.className = "scores";
  const summary = document.createElement("summary");
  summary.textContent = `#${result.rank} · fused ${result.score.fused.toFixed(4)}`;
  details.appendChild(summary);
  details.appendChild(scoreRow("global", result.score.global));
  details.appendChild(scoreRow("local", result.score.local));
  details.appendChild(scoreRow("fused", result.score.fused));
  card.appendChild(details);

  if (result.source_url) {
    const link = document.createElement("a");
    link.className = "source-link";
    link.href = result.source_url;
    link.target = "_blank";
    link.rel = "noopener noreferrer";
    link.textContent = "view source";
    card.appendChild(link);
  }

  return card;
}

export function renderResults(container: HTMLElement, results: SearchResult[]): void {
  container.replaceChildren(...results.map(renderCard));
}
