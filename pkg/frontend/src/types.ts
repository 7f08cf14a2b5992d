/**
 * JSON shapes of the wiki's HTTP API.
 *
 * Field names mirror the wire format exactly (snake_case where the server
 * uses it) so recorded responses type-check without translation.
 */

// -- rulebase documents ----------------------------------------------------

export interface RulebaseSummary {
  id: string;
  revision: number;
  updated_at: string;
}

export interface RulebaseList {
  rulebases: RulebaseSummary[];
}

/** GET /api/rulebases/{id} */
export interface RulebaseDocument extends RulebaseSummary {
  source: string;
  diagnostics: string[];
}

/** PUT /api/rulebases/{id} */
export interface SaveResult extends RulebaseSummary {
  diagnostics: string[];
}

// -- validation ------------------------------------------------------------

export interface SafetyReport {
  is_safe: boolean;
  errors: string[];
  warnings: string[];
  rendered: string;
}

export interface StratificationReport {
  is_stratified: boolean;
  strata: Record<string, number>;
  cycle: string[];
  rendered: string;
}

export interface ParseErrorInfo {
  message: string;
  line?: number;
}

/** POST /api/rulebases/{id}/validate — always 200; `ok` carries the verdict. */
export interface ValidationReport {
  ok: boolean;
  diagnostics: string[];
  parse_error?: ParseErrorInfo;
  safety?: SafetyReport;
  stratification?: StratificationReport;
}

// -- menus -----------------------------------------------------------------

export interface MenuLayer {
  rank: number;
  entries: string[];
}

export interface Menu {
  layers: MenuLayer[];
}

export interface SearchMatch {
  pattern: string;
  score: number;
}

export interface SearchResult {
  matches: SearchMatch[];
}

// -- questions -------------------------------------------------------------

export type ConstraintKind = "equals" | "range" | "approx";

export interface Constraint {
  variable: string;
  kind: ConstraintKind;
  value?: string;
  minimum?: string;
  maximum?: string;
  text?: string;
  max_distance?: number;
}

export interface QueryRequest {
  question: string;
  constraints?: Constraint[];
}

/** POST /api/rulebases/{id}/query */
export interface AnswerTable {
  columns: string[];
  rows: string[][];
  /** One proof-node id per row, aligned with `rows`. */
  explanations: string[];
  rendered: string;
  diagnostics: string[];
}

// -- explanations ----------------------------------------------------------

export type NodeKind = "rule" | "table-row" | "negation" | "builtin";

/** Shallow reference to a proof node, as listed in a parent's `children`. */
export interface NodeRef {
  id: string;
  kind: NodeKind;
  text: string;
}

/** GET /api/rulebases/{id}/explain/node/{node} */
export interface ExplanationNode extends NodeRef {
  conclusion?: string;
  /** Present on kind "rule": the rule label, e.g. "rule@1-7". */
  rule?: string;
  children: NodeRef[];
  /** Present on kind "table-row". */
  table?: string;
  row?: number;
  /** Present on kind "negation": why the negated sentence is not shown. */
  failure?: FailureInfo;
}

export interface FailureAttempt {
  rule: string;
  satisfied: string[];
  missing: string[];
  conclusion: string;
  note: string;
}

export interface FailureInfo {
  goal: string;
  attempts: FailureAttempt[];
}

export interface ProofExplanation {
  kind: "proof";
  root: ExplanationNode;
  text: string;
  html: string;
}

export interface FailureExplanation {
  kind: "failure";
  failure: FailureInfo;
  text: string;
  html: string;
}

/** POST /api/rulebases/{id}/explain */
export type Explanation = ProofExplanation | FailureExplanation;

// -- SQL bridge ------------------------------------------------------------

export interface SqlMapping {
  predicate: string;
  relation: string;
  columns: string[];
  source: string;
}

export interface SqlFetch {
  predicate: string;
  sql: string;
  columns: string[];
}

/** POST /api/rulebases/{id}/sql */
export interface SqlPlan {
  sql: string | null;
  dialect: string;
  columns: string[];
  fetches: SqlFetch[];
  /** Predicate sentences that must be evaluated in the engine, not in SQL. */
  in_engine: string[];
  mappings: SqlMapping[];
}

// -- errors ----------------------------------------------------------------

/** Every non-2xx body: `{code, message, details?}`. */
export interface ErrorBody {
  code: string;
  message: string;
  details?: Record<string, unknown>;
}
