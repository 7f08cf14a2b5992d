/**
 * Question-menu view models: layered browsing and scored search.
 */

import type { Menu, MenuLayer, SearchMatch } from "./types";

export interface MenuLayerView extends MenuLayer {
  title: string;
}

export function layerTitle(rank: number): string {
  return rank === 0 ? "questions this page answers" : `building blocks, layer ${rank}`;
}

/** Layers ordered top-down: conclusions first, base tables deepest. */
export function menuLayers(menu: Menu): MenuLayerView[] {
  return [...menu.layers]
    .sort((a, b) => a.rank - b.rank)
    .map((layer) => ({ ...layer, title: layerTitle(layer.rank) }));
}

/**
 * Matches ordered best-first (stable for ties). The server scores every
 * menu entry, so zero-score entries are still listed — flagged by callers
 * via `score > 0` when they want to dim them.
 */
export function rankedMatches(matches: SearchMatch[]): SearchMatch[] {
  return [...matches].sort((a, b) => b.score - a.score);
}

export function bestMatch(matches: SearchMatch[]): SearchMatch | null {
  const ranked = rankedMatches(matches);
  return ranked.length > 0 && ranked[0].score > 0 ? ranked[0] : null;
}
