/**
 * Typed client for the wiki's HTTP API.
 *
 * The fetch implementation is injectable so tests can serve recorded
 * responses without a running server.
 */

import type {
  AnswerTable,
  ErrorBody,
  Explanation,
  ExplanationNode,
  Menu,
  QueryRequest,
  RulebaseDocument,
  RulebaseList,
  RulebaseSummary,
  SaveResult,
  SearchMatch,
  SearchResult,
  SqlPlan,
  ValidationReport,
} from "./types";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** A non-2xx response, carrying the server's structured error body. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly details?: Record<string, unknown>,
  ) {
    super(message);
    this.name = "ApiError";
  }

  static fromBody(status: number, body: unknown): ApiError {
    if (body && typeof body === "object" && "code" in body) {
      const err = body as ErrorBody;
      return new ApiError(status, err.code, err.message, err.details);
    }
    return new ApiError(status, "http_error", `request failed with status ${status}`);
  }
}

interface RequestOptions {
  json?: unknown;
  headers?: Record<string, string>;
}

export class WikiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (...args) => fetch(...args),
  ) {}

  private async request<T>(method: string, path: string, options: RequestOptions = {}): Promise<T> {
    const headers: Record<string, string> = { ...options.headers };
    const init: RequestInit = { method, headers };
    if (options.json !== undefined) {
      headers["Content-Type"] = "application/json";
      init.body = JSON.stringify(options.json);
    }
    const response = await this.fetchImpl(this.base + path, init);
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      body = null;
    }
    if (!response.ok) {
      throw ApiError.fromBody(response.status, body);
    }
    return body as T;
  }

  listRulebases(): Promise<RulebaseSummary[]> {
    return this.request<RulebaseList>("GET", "/api/rulebases").then((r) => r.rulebases);
  }

  getRulebase(id: string): Promise<RulebaseDocument> {
    return this.request("GET", `/api/rulebases/${encodeURIComponent(id)}`);
  }

  /**
   * Save a rulebase source at an expected revision (0 creates the page).
   * A concurrent edit surfaces as an ApiError with code "revision_conflict".
   */
  saveRulebase(id: string, source: string, expectedRevision: number): Promise<SaveResult> {
    return this.request("PUT", `/api/rulebases/${encodeURIComponent(id)}`, {
      json: { source },
      headers: { "If-Match": `"${expectedRevision}"` },
    });
  }

  validateRulebase(id: string): Promise<ValidationReport> {
    return this.request("POST", `/api/rulebases/${encodeURIComponent(id)}/validate`);
  }

  menu(id: string): Promise<Menu> {
    return this.request("GET", `/api/rulebases/${encodeURIComponent(id)}/menu`);
  }

  searchMenu(id: string, text: string): Promise<SearchMatch[]> {
    return this.request<SearchResult>("POST", `/api/rulebases/${encodeURIComponent(id)}/menu/search`, {
      json: { text },
    }).then((r) => r.matches);
  }

  query(id: string, request: QueryRequest): Promise<AnswerTable> {
    return this.request("POST", `/api/rulebases/${encodeURIComponent(id)}/query`, {
      json: request,
    });
  }

  explain(id: string, goal: string): Promise<Explanation> {
    return this.request("POST", `/api/rulebases/${encodeURIComponent(id)}/explain`, {
      json: { goal },
    });
  }

  explainNode(id: string, nodeId: string): Promise<ExplanationNode> {
    return this.request(
      "GET",
      `/api/rulebases/${encodeURIComponent(id)}/explain/node/${encodeURIComponent(nodeId)}`,
    );
  }

  compileSql(id: string, question: string): Promise<SqlPlan> {
    return this.request("POST", `/api/rulebases/${encodeURIComponent(id)}/sql`, {
      json: { question },
    });
  }
}
