/**
 * Browser wiring: one page with an editor, question menu, answer table,
 * and expandable proof trees, all over the JSON API.
 */

import { ApiError, WikiClient } from "./api";
import { answerTableView, parseConstraints } from "./answers";
import {
  acceptServerCopy,
  describeConflict,
  edited,
  EditorState,
  freshEditor,
  isDirty,
  keepLocalCopy,
  loadedEditor,
  saveFailed,
  saveStarted,
  saveSucceeded,
} from "./editor";
import {
  attachChildren,
  escapeHtml,
  ProofTreeNode,
  renderFailureText,
  treeFromNode,
} from "./explanation";
import { menuLayers, rankedMatches } from "./menu";
import type { Explanation, ValidationReport } from "./types";

const client = new WikiClient();

function el<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (found === null) {
    throw new Error(`missing element #${id}`);
  }
  return found as T;
}

const ui = {
  pageList: () => el<HTMLSelectElement>("page-list"),
  newPageName: () => el<HTMLInputElement>("new-page-name"),
  newPageButton: () => el<HTMLButtonElement>("new-page"),
  editor: () => el<HTMLTextAreaElement>("editor"),
  editorStatus: () => el<HTMLElement>("editor-status"),
  saveButton: () => el<HTMLButtonElement>("save"),
  validateButton: () => el<HTMLButtonElement>("validate"),
  banner: () => el<HTMLElement>("conflict-banner"),
  diagnostics: () => el<HTMLElement>("diagnostics"),
  validation: () => el<HTMLElement>("validation"),
  menu: () => el<HTMLElement>("menu"),
  menuSearch: () => el<HTMLInputElement>("menu-search"),
  question: () => el<HTMLInputElement>("question"),
  constraints: () => el<HTMLTextAreaElement>("constraints"),
  askButton: () => el<HTMLButtonElement>("ask"),
  explainButton: () => el<HTMLButtonElement>("explain"),
  sqlButton: () => el<HTMLButtonElement>("sql"),
  answers: () => el<HTMLElement>("answers"),
  explanation: () => el<HTMLElement>("explanation"),
};

let state: EditorState | null = null;
let proofTree: ProofTreeNode | null = null;

function describeError(error: unknown): string {
  if (error instanceof ApiError) {
    return `${error.code}: ${error.message}`;
  }
  return error instanceof Error ? error.message : String(error);
}

// -- editor ----------------------------------------------------------------

function renderEditor(): void {
  if (state === null) {
    return;
  }
  const dirty = isDirty(state);
  ui.editorStatus().textContent = state.saving
    ? "saving…"
    : `${state.id} · revision ${state.revision}${dirty ? " · unsaved changes" : ""}`;
  ui.saveButton().disabled = state.saving || (!dirty && state.revision > 0);

  const banner = ui.banner();
  if (state.conflict !== null) {
    banner.hidden = false;
    banner.innerHTML =
      `<p>${escapeHtml(describeConflict(state.conflict))}</p>` +
      `<button id="conflict-reload">Reload their copy</button> ` +
      `<button id="conflict-overwrite">Save mine anyway</button>`;
    el<HTMLButtonElement>("conflict-reload").onclick = () => void reloadServerCopy();
    el<HTMLButtonElement>("conflict-overwrite").onclick = () => void overwriteServerCopy();
  } else {
    banner.hidden = true;
    banner.innerHTML = "";
  }

  const diagnostics = ui.diagnostics();
  diagnostics.hidden = state.diagnostics.length === 0 && state.lastError === null;
  diagnostics.innerHTML = [
    ...(state.lastError !== null ? [`<li class="error">${escapeHtml(state.lastError)}</li>`] : []),
    ...state.diagnostics.map((d) => `<li>${escapeHtml(d)}</li>`),
  ].join("");
}

async function openPage(id: string): Promise<void> {
  try {
    state = loadedEditor(await client.getRulebase(id));
  } catch (error) {
    if (error instanceof ApiError && error.code === "unknown_rulebase") {
      state = freshEditor(id);
    } else {
      ui.editorStatus().textContent = describeError(error);
      return;
    }
  }
  ui.editor().value = state.source;
  renderEditor();
  await refreshMenu();
}

async function save(): Promise<void> {
  if (state === null) {
    return;
  }
  state = saveStarted(edited(state, ui.editor().value));
  renderEditor();
  try {
    state = saveSucceeded(state, await client.saveRulebase(state.id, state.source, state.revision));
    await refreshPageList();
    await refreshMenu();
  } catch (error) {
    state = saveFailed(state, error);
  }
  renderEditor();
}

async function reloadServerCopy(): Promise<void> {
  if (state === null) {
    return;
  }
  state = acceptServerCopy(state, await client.getRulebase(state.id));
  ui.editor().value = state.source;
  renderEditor();
}

async function overwriteServerCopy(): Promise<void> {
  if (state === null) {
    return;
  }
  state = keepLocalCopy(state);
  renderEditor();
  await save();
}

function renderValidation(report: ValidationReport): void {
  const parts: string[] = [
    `<p class="${report.ok ? "ok" : "bad"}">${report.ok ? "ok" : "invalid"}</p>`,
  ];
  if (report.parse_error !== undefined) {
    parts.push(`<pre>${escapeHtml(report.parse_error.message)}</pre>`);
  }
  if (report.safety !== undefined && report.safety.rendered !== "") {
    parts.push(`<pre>${escapeHtml(report.safety.rendered)}</pre>`);
  }
  if (report.stratification !== undefined) {
    parts.push(`<pre>${escapeHtml(report.stratification.rendered)}</pre>`);
  }
  if (report.diagnostics.length > 0) {
    parts.push(`<pre>${escapeHtml(report.diagnostics.join("\n"))}</pre>`);
  }
  ui.validation().innerHTML = parts.join("");
}

async function validate(): Promise<void> {
  if (state === null) {
    return;
  }
  if (isDirty({ ...state, source: ui.editor().value })) {
    await save();
  }
  try {
    renderValidation(await client.validateRulebase(state.id));
  } catch (error) {
    ui.validation().textContent = describeError(error);
  }
}

// -- menu ------------------------------------------------------------------

function menuEntry(pattern: string, note = ""): string {
  return (
    `<li><a href="#" class="menu-entry" data-pattern="${escapeHtml(pattern)}">` +
    `${escapeHtml(pattern)}</a>${note}</li>`
  );
}

function wireMenuEntries(): void {
  for (const link of ui.menu().querySelectorAll<HTMLAnchorElement>(".menu-entry")) {
    link.onclick = (event) => {
      event.preventDefault();
      ui.question().value = link.dataset["pattern"] ?? "";
    };
  }
}

async function refreshMenu(): Promise<void> {
  if (state === null || state.revision === 0) {
    ui.menu().innerHTML = "<p>save the page to see its question menu</p>";
    return;
  }
  try {
    const layers = menuLayers(await client.menu(state.id));
    ui.menu().innerHTML = layers
      .map(
        (layer) =>
          `<h3>${escapeHtml(layer.title)}</h3>` +
          `<ul>${layer.entries.map((entry) => menuEntry(entry)).join("")}</ul>`,
      )
      .join("");
  } catch (error) {
    ui.menu().textContent = describeError(error);
  }
  wireMenuEntries();
}

async function searchMenu(): Promise<void> {
  if (state === null) {
    return;
  }
  const text = ui.menuSearch().value.trim();
  if (text === "") {
    await refreshMenu();
    return;
  }
  try {
    const matches = rankedMatches(await client.searchMenu(state.id, text));
    ui.menu().innerHTML =
      "<h3>search results</h3><ul>" +
      matches
        .map((m) =>
          menuEntry(m.pattern, m.score > 0 ? ` <small>${m.score.toFixed(2)}</small>` : ""),
        )
        .join("") +
      "</ul>";
  } catch (error) {
    ui.menu().textContent = describeError(error);
  }
  wireMenuEntries();
}

// -- questions and explanations --------------------------------------------

async function ask(): Promise<void> {
  if (state === null) {
    return;
  }
  try {
    const answers = await client.query(state.id, {
      question: ui.question().value,
      constraints: parseConstraints(ui.constraints().value),
    });
    const view = answerTableView(answers);
    if (view.isEmpty) {
      ui.answers().innerHTML = "<p>no answers — ask for an explanation to see why</p>";
      return;
    }
    ui.answers().innerHTML =
      "<table><thead><tr>" +
      view.columns.map((c) => `<th>${escapeHtml(c)}</th>`).join("") +
      "<th></th></tr></thead><tbody>" +
      view.rows
        .map(
          (row) =>
            "<tr>" +
            row.values.map((v) => `<td>${escapeHtml(v)}</td>`).join("") +
            `<td><a href="#" class="why" data-node="${row.explanationId}">why?</a></td></tr>`,
        )
        .join("") +
      "</tbody></table>";
    for (const link of ui.answers().querySelectorAll<HTMLAnchorElement>(".why")) {
      link.onclick = (event) => {
        event.preventDefault();
        void showProofNode(link.dataset["node"] ?? "");
      };
    }
  } catch (error) {
    ui.answers().innerHTML = `<p class="bad">${escapeHtml(describeError(error))}</p>`;
  }
}

function renderTree(node: ProofTreeNode): string {
  if (!node.expandable) {
    let extra = "";
    if (node.kind === "negation" && node.failure !== undefined) {
      extra = `<pre class="failure">${escapeHtml(renderFailureText(node.failure))}</pre>`;
    }
    return `<div class="leaf kind-${node.kind}">${escapeHtml(node.text)}${extra}</div>`;
  }
  const premises =
    node.children === null
      ? `<div class="loading">…</div>`
      : node.children.map(renderTree).join("");
  return (
    `<details open class="step" data-node="${node.id}"><summary>${escapeHtml(node.text)}</summary>` +
    `<div class="premises"><div class="bar"></div>${premises}</div></details>`
  );
}

function wireTree(): void {
  for (const step of ui.explanation().querySelectorAll<HTMLDetailsElement>("details.step")) {
    step.ontoggle = () => void expandNode(step);
  }
}

async function expandNode(step: HTMLDetailsElement): Promise<void> {
  const nodeId = step.dataset["node"] ?? "";
  if (state === null || proofTree === null || !step.open) {
    return;
  }
  const here = proofTree;
  const needsFetch = (function find(n: ProofTreeNode): boolean {
    if (n.id === nodeId) {
      return n.children === null;
    }
    return (n.children ?? []).some(find);
  })(here);
  if (!needsFetch) {
    return;
  }
  proofTree = attachChildren(here, nodeId, await client.explainNode(state.id, nodeId));
  ui.explanation().innerHTML = renderTree(proofTree);
  wireTree();
}

async function showProofNode(nodeId: string): Promise<void> {
  if (state === null) {
    return;
  }
  try {
    proofTree = treeFromNode(await client.explainNode(state.id, nodeId));
    ui.explanation().innerHTML = renderTree(proofTree);
    wireTree();
  } catch (error) {
    ui.explanation().textContent = describeError(error);
  }
}

async function explainGoal(): Promise<void> {
  if (state === null) {
    return;
  }
  try {
    const explanation: Explanation = await client.explain(state.id, ui.question().value);
    if (explanation.kind === "proof") {
      proofTree = treeFromNode(explanation.root);
      ui.explanation().innerHTML = renderTree(proofTree);
      wireTree();
    } else {
      proofTree = null;
      ui.explanation().innerHTML =
        `<h3>not shown — closest attempts</h3>` +
        `<pre class="failure">${escapeHtml(renderFailureText(explanation.failure))}</pre>`;
    }
  } catch (error) {
    ui.explanation().textContent = describeError(error);
  }
}

async function previewSql(): Promise<void> {
  if (state === null) {
    return;
  }
  try {
    const plan = await client.compileSql(state.id, ui.question().value);
    const parts: string[] = [];
    if (plan.sql !== null) {
      parts.push(`<h3>SQL (${escapeHtml(plan.dialect)})</h3><pre>${escapeHtml(plan.sql)}</pre>`);
    }
    if (plan.in_engine.length > 0) {
      parts.push(
        "<h3>evaluated in the engine, not in SQL</h3><pre>" +
          plan.in_engine.map(escapeHtml).join("\n") +
          "</pre>",
      );
    }
    parts.push(
      "<h3>relation mappings</h3><ul>" +
        plan.mappings
          .map(
            (m) =>
              `<li><code>${escapeHtml(m.predicate)}</code> → ` +
              `<code>${escapeHtml(m.relation)}(${m.columns.map(escapeHtml).join(", ")})</code>` +
              ` <small>${escapeHtml(m.source)}</small></li>`,
          )
          .join("") +
        "</ul>",
    );
    ui.explanation().innerHTML = parts.join("");
  } catch (error) {
    ui.explanation().textContent = describeError(error);
  }
}

// -- page list -------------------------------------------------------------

async function refreshPageList(): Promise<void> {
  const pages = await client.listRulebases();
  const list = ui.pageList();
  const current = state?.id ?? "";
  list.innerHTML = pages
    .map((p) => `<option value="${escapeHtml(p.id)}">${escapeHtml(p.id)}</option>`)
    .join("");
  if (current !== "" && pages.some((p) => p.id === current)) {
    list.value = current;
  }
}

async function main(): Promise<void> {
  await refreshPageList();
  ui.pageList().onchange = () => void openPage(ui.pageList().value);
  ui.newPageButton().onclick = () => {
    const id = ui.newPageName().value.trim();
    if (id !== "") {
      void openPage(id);
    }
  };
  ui.saveButton().onclick = () => void save();
  ui.validateButton().onclick = () => void validate();
  ui.editor().oninput = () => {
    if (state !== null) {
      state = edited(state, ui.editor().value);
      renderEditor();
    }
  };
  ui.menuSearch().oninput = () => void searchMenu();
  ui.askButton().onclick = () => void ask();
  ui.explainButton().onclick = () => void explainGoal();
  ui.sqlButton().onclick = () => void previewSql();

  const first = ui.pageList().value;
  if (first !== "") {
    await openPage(first);
  }
}

window.addEventListener("DOMContentLoaded", () => void main());
