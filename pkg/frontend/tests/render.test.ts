import { describe, expect, it } from "vitest";

import { PLACEHOLDER_IMAGE, renderCard, renderResults } from "../src/render.js";
import { GOLDEN_TEXT_RESULTS } from "./helpers.js";

describe("renderResults", () => {
  it("renders cards in response rank order", () => {
    const grid = document.createElement("div");
    renderResults(grid, GOLDEN_TEXT_RESULTS);
    const cards = [...grid.querySelectorAll<HTMLElement>(".result-card")];
    expect(cards).toHaveLength(GOLDEN_TEXT_RESULTS.length);
    expect(cards.map((c) => Number(c.dataset.rank))).toEqual(
      GOLDEN_TEXT_RESULTS.map((r) => r.rank),
    );
  });

  it("replaces previous results instead of appending", () => {
    const grid = document.createElement("div");
    renderResults(grid, GOLDEN_TEXT_RESULTS);
    renderResults(grid, GOLDEN_TEXT_RESULTS.slice(0, 3));
    expect(grid.querySelectorAll(".result-card")).toHaveLength(3);
  });
});

describe("renderCard", () => {
  const result = GOLDEN_TEXT_RESULTS[0]!;

  it("shows the full score breakdown", () => {
    const card = renderCard(result);
    const rows = [...card.querySelectorAll(".score-row")].map((r) => r.textContent);
    expect(rows).toHaveLength(3);
    expect(rows[0]).toContain("global");
    expect(rows[1]).toContain("local");
    expect(rows[2]).toContain("fused");
    expect(rows[2]).toContain(result.score.fused.toFixed(4));
  });

  it("links to the source page in a new tab without opener access", () => {
    const card = renderCard(result);
    const link = card.querySelector<HTMLAnchorElement>(".source-link")!;
    expect(link.getAttribute("href")).toBe(result.source_url);
    expect(link.target).toBe("_blank");
    expect(link.rel).toContain("noopener");
  });

  it("hides the source link when the URL is empty", () => {
    const card = renderCard({ ...result, source_url: "" });
    expect(card.querySelector(".source-link")).toBeNull();
  });

  it("lazy-loads the thumbnail", () => {
    const img = renderCard(result).querySelector("img")!;
    expect(img.getAttribute("loading")).toBe("lazy");
    expect(img.alt).toBe(result.description);
  });

  it("falls back to a placeholder when the image fails to load", () => {
    const img = renderCard(result).querySelector("img")!;
    img.dispatchEvent(new Event("error"));
    expect(img.src).toBe(PLACEHOLDER_IMAGE);
  });

  it("uses the placeholder immediately for an empty image URI", () => {
    const img = renderCard({ ...result, image_uri: "" }).querySelector("img")!;
    expect(img.src).toBe(PLACEHOLDER_IMAGE);
  });
});
