import { describe, expect, it } from "vitest";

import { bestMatch, layerTitle, menuLayers, rankedMatches } from "../src/menu";
import type { Menu, SearchResult } from "../src/types";
import { recordedBody } from "./recordings";

const menu = () => recordedBody<Menu>("menu");
const matches = () => recordedBody<SearchResult>("search").matches;

describe("menu layers", () => {
  it("keeps the recorded top-down order: conclusions first, tables last", () => {
    const layers = menuLayers(menu());
    expect(layers.map((l) => l.rank)).toEqual([0, 1]);
    expect(layers[0].entries).toEqual([
      "some-name is an author , with email some-email , of some-title",
    ]);
    expect(layers[1].entries).toEqual([
      "some-subject is related by some-predicate to some-object",
    ]);
  });

  it("sorts layers by rank when they arrive shuffled", () => {
    const shuffled: Menu = { layers: [...menu().layers].reverse() };
    expect(menuLayers(shuffled).map((l) => l.rank)).toEqual([0, 1]);
  });

  it("titles the top layer as the questions the page answers", () => {
    expect(layerTitle(0)).toContain("questions");
    expect(layerTitle(2)).toContain("layer 2");
  });
});

describe("menu search", () => {
  it("ranks recorded matches best-first", () => {
    const ranked = rankedMatches(matches());
    expect(ranked[0].pattern).toBe(
      "some-name is an author , with email some-email , of some-title",
    );
    expect(ranked[0].score).toBeGreaterThan(0);
    expect(ranked[ranked.length - 1].score).toBe(0);
  });

  it("does not reorder equal scores or mutate its input", () => {
    const input = matches();
    const before = JSON.stringify(input);
    rankedMatches(input);
    expect(JSON.stringify(input)).toBe(before);

    const tied = [
      { pattern: "a", score: 0.5 },
      { pattern: "b", score: 0.5 },
    ];
    expect(rankedMatches(tied).map((m) => m.pattern)).toEqual(["a", "b"]);
  });

  it("bestMatch returns the top scorer, or null when nothing scored", () => {
    expect(bestMatch(matches())?.pattern).toContain("is an author");
    expect(bestMatch([{ pattern: "x", score: 0 }])).toBeNull();
    expect(bestMatch([])).toBeNull();
  });
});
