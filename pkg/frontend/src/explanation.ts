/**
 * Proof-tree and why-not view models.
 *
 * A proof node is one inference step: its premises, a `---` bar, and its
 * conclusion. Children of kind "rule" are further steps whose own premises
 * are fetched on demand; table rows and builtins are leaves.
 */

import type {
  Explanation,
  ExplanationNode,
  FailureAttempt,
  FailureInfo,
  NodeKind,
  NodeRef,
} from "./types";

export interface ProofTreeNode {
  id: string;
  kind: NodeKind;
  text: string;
  /** Rule steps expand into their own premises; leaves do not. */
  expandable: boolean;
  /** null = expandable but not fetched yet. */
  children: ProofTreeNode[] | null;
  /** On "negation" nodes: why the negated sentence is not shown. */
  failure?: FailureInfo;
}

function fromRef(ref: NodeRef): ProofTreeNode {
  const expandable = ref.kind === "rule";
  return {
    id: ref.id,
    kind: ref.kind,
    text: ref.text,
    expandable,
    children: expandable ? null : [],
  };
}

/** Build the initial tree from a full node: its direct premises are known. */
export function treeFromNode(node: ExplanationNode): ProofTreeNode {
  return {
    ...fromRef(node),
    children: node.children.map(fromRef),
    failure: node.failure,
  };
}

/** Fill in a lazily-expanded node from its fetched full form. */
export function attachChildren(
  tree: ProofTreeNode,
  nodeId: string,
  fetched: ExplanationNode,
): ProofTreeNode {
  if (tree.id === nodeId) {
    return { ...tree, children: fetched.children.map(fromRef), failure: fetched.failure };
  }
  if (tree.children === null) {
    return tree;
  }
  return {
    ...tree,
    children: tree.children.map((child) => attachChildren(child, nodeId, fetched)),
  };
}

export function findNode(tree: ProofTreeNode, nodeId: string): ProofTreeNode | null {
  if (tree.id === nodeId) {
    return tree;
  }
  for (const child of tree.children ?? []) {
    const found = findNode(child, nodeId);
    if (found !== null) {
      return found;
    }
  }
  return null;
}

// -- text rendering --------------------------------------------------------

/** One inference step: premise lines, `---`, conclusion. */
export function proofStepLines(node: ExplanationNode): string[] {
  if (node.kind !== "rule") {
    return [node.text];
  }
  return [...node.children.map((child) => child.text), "---", node.text];
}

export function renderProofText(node: ExplanationNode): string {
  return proofStepLines(node).join("\n");
}

function attemptLines(attempt: FailureAttempt): string[] {
  return [
    ...attempt.satisfied,
    ...attempt.missing.map((line) => `${line} [missing]`),
    "---",
    `${attempt.conclusion} [${attempt.note}]`,
  ];
}

/**
 * Why-not layout: per candidate rule, the satisfied premises, the missing
 * ones marked `[missing]`, and the unreached conclusion; best attempt
 * first. No candidate rules at all means the goal names a bare table row.
 */
export function renderFailureText(failure: FailureInfo): string {
  if (failure.attempts.length === 0) {
    return `${failure.goal} [not shown]`;
  }
  return failure.attempts.map((a) => attemptLines(a).join("\n")).join("\n\n");
}

export function renderExplanationText(explanation: Explanation): string {
  return explanation.kind === "proof"
    ? renderProofText(explanation.root)
    : renderFailureText(explanation.failure);
}

// -- HTML helpers ----------------------------------------------------------

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** CSS class for a node row, e.g. "proof-node kind-table-row". */
export function nodeCssClass(node: ProofTreeNode): string {
  return `proof-node kind-${node.kind}`;
}
