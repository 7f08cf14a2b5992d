/**
 * Answer-table view models and question constraints.
 */

import type { AnswerTable, Constraint } from "./types";

export interface AnswerRowView {
  values: string[];
  /** Proof-node id for this row, for the explanation drill-down. */
  explanationId: string;
}

export interface AnswerTableView {
  columns: string[];
  rows: AnswerRowView[];
  rendered: string;
  diagnostics: string[];
  isEmpty: boolean;
}

export function answerTableView(table: AnswerTable): AnswerTableView {
  return {
    columns: table.columns,
    rows: table.rows.map((values, i) => ({
      values,
      explanationId: table.explanations[i],
    })),
    rendered: table.rendered,
    diagnostics: table.diagnostics,
    isEmpty: table.rows.length === 0,
  };
}

// -- constraints -----------------------------------------------------------

export function equalsConstraint(variable: string, value: string): Constraint {
  return { variable, kind: "equals", value };
}

export function rangeConstraint(
  variable: string,
  minimum?: string,
  maximum?: string,
): Constraint {
  return { variable, kind: "range", minimum, maximum };
}

export function approxConstraint(
  variable: string,
  text: string,
  maxDistance = 2,
): Constraint {
  return { variable, kind: "approx", text, max_distance: maxDistance };
}

/**
 * Parse one line of the constraints box. Accepted forms:
 *
 *     some-amount = 600
 *     some-amount in 100 .. 900     (either bound may be omitted)
 *     some-name ~ Jean Broekstra    (approximate text match)
 */
export function parseConstraint(line: string): Constraint | null {
  const trimmed = line.trim();
  if (trimmed === "") {
    return null;
  }
  let m = trimmed.match(/^(\S+)\s*=\s*(.+)$/);
  if (m) {
    return equalsConstraint(m[1], m[2].trim());
  }
  m = trimmed.match(/^(\S+)\s+in\s+(\S*)\s*\.\.\s*(\S*)$/);
  if (m) {
    return rangeConstraint(m[1], m[2] || undefined, m[3] || undefined);
  }
  m = trimmed.match(/^(\S+)\s*~\s*(.+)$/);
  if (m) {
    return approxConstraint(m[1], m[2].trim());
  }
  return null;
}

/** Parse the whole constraints box; blank and unparsable lines are skipped. */
export function parseConstraints(text: string): Constraint[] {
  return text
    .split("\n")
    .map(parseConstraint)
    .filter((c): c is Constraint => c !== null);
}
