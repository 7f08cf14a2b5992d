/**
 * Editor state machine: dirty tracking, optimistic-revision saves, and the
 * stale-save conflict banner.
 *
 * All transitions are pure so they can be tested against recorded API
 * responses; the DOM layer only dispatches and renders.
 */

import { ApiError } from "./api";
import type { RulebaseDocument, SaveResult } from "./types";

export interface ConflictBanner {
  /** Revision the server actually holds. */
  currentRevision: number;
  /** Revision this editor's save asserted. */
  expectedRevision: number;
  /** Server's explanation of the rejected write. */
  message: string;
}

export interface EditorState {
  id: string;
  /** Text in the editor box. */
  source: string;
  /** Content last confirmed by the server. */
  savedSource: string;
  /** Revision the next save asserts via If-Match (0 creates the page). */
  revision: number;
  updatedAt: string | null;
  diagnostics: string[];
  conflict: ConflictBanner | null;
  saving: boolean;
  lastError: string | null;
}

export function freshEditor(id: string): EditorState {
  return {
    id,
    source: "",
    savedSource: "",
    revision: 0,
    updatedAt: null,
    diagnostics: [],
    conflict: null,
    saving: false,
    lastError: null,
  };
}

export function loadedEditor(doc: RulebaseDocument): EditorState {
  return {
    ...freshEditor(doc.id),
    source: doc.source,
    savedSource: doc.source,
    revision: doc.revision,
    updatedAt: doc.updated_at,
    diagnostics: doc.diagnostics,
  };
}

export function edited(state: EditorState, text: string): EditorState {
  return { ...state, source: text };
}

export function isDirty(state: EditorState): boolean {
  return state.source !== state.savedSource;
}

export function saveStarted(state: EditorState): EditorState {
  return { ...state, saving: true, lastError: null };
}

export function saveSucceeded(state: EditorState, result: SaveResult): EditorState {
  return {
    ...state,
    savedSource: state.source,
    revision: result.revision,
    updatedAt: result.updated_at,
    diagnostics: result.diagnostics,
    conflict: null,
    saving: false,
    lastError: null,
  };
}

export function saveFailed(state: EditorState, error: unknown): EditorState {
  const next = { ...state, saving: false };
  if (error instanceof ApiError && error.code === "revision_conflict") {
    const details = error.details ?? {};
    return {
      ...next,
      conflict: {
        currentRevision: Number(details["current_revision"]),
        expectedRevision: Number(details["expected_revision"]),
        message: error.message,
      },
    };
  }
  const message = error instanceof Error ? error.message : String(error);
  return { ...next, lastError: message };
}

/**
 * Resolve a conflict by taking the server's copy; local edits are dropped
 * (the caller is expected to confirm first).
 */
export function acceptServerCopy(state: EditorState, doc: RulebaseDocument): EditorState {
  return { ...loadedEditor(doc), lastError: state.lastError };
}

/**
 * Resolve a conflict by keeping the local text and re-asserting the
 * server's current revision, so the next save overwrites it.
 */
export function keepLocalCopy(state: EditorState): EditorState {
  if (state.conflict === null) {
    return state;
  }
  return { ...state, revision: state.conflict.currentRevision, conflict: null };
}

/** One-line banner text offering both ways out of a conflict. */
export function describeConflict(banner: ConflictBanner): string {
  return (
    `Someone else saved this page: the server is at revision ${banner.currentRevision}, ` +
    `but your save expected revision ${banner.expectedRevision}. ` +
    `Reload their copy (your edits are kept in the box until you do), or save again to overwrite.`
  );
}
