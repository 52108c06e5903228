/** Dendrogram layout and SVG rendering from the server's tree JSON. */

import { TreeJson } from "./api.js";

export class DendrogramError extends Error {}

export interface Layout {
  leaves: Array<{ label: string; x: number; y: number }>;
  joins: Array<{ x: number; y0: number; y1: number; yMid: number; x0: number; x1: number }>;
  width: number;
  height: number;
}

interface Placed {
  x: number;
  y: number;
}

function validate(node: TreeJson): void {
  if (typeof node !== "object" || node === null || !Array.isArray(node.children)) {
    throw new DendrogramError("malformed tree JSON node");
  }
  if (node.children.length === 0) {
    if (typeof node.label !== "string") throw new DendrogramError("leaf without a label");
    return;
  }
  if (node.children.length !== 2) throw new DendrogramError("internal node must have two children");
  node.children.forEach(validate);
}

function depthOf(node: TreeJson): number {
  if (node.children.length === 0) return 0;
  return 1 + Math.max(...node.children.map(depthOf));
}

export function jsonToNewick(node: TreeJson): string {
  const part = (n: TreeJson): string =>
    n.children.length === 0 ? n.label! : `(${part(n.children[0])},${part(n.children[1])})`;
  return part(node) + ";";
}

/** Canonical text form: child subtrees sorted, for order-insensitive comparison. */
export function canonicalForm(node: TreeJson): string {
  if (node.children.length === 0) return node.label!;
  const kids = node.children.map(canonicalForm).sort();
  return `(${kids[0]},${kids[1]})`;
}

const ROW = 28;
const COL = 46;
const LABEL_SPACE = 140;

/** Leaves on the right, one per row; joins stacked leftward by height. */
export function layoutTree(root: TreeJson): Layout {
  validate(root);
  const leaves: Layout["leaves"] = [];
  const joins: Layout["joins"] = [];
  const depth = depthOf(root);
  let row = 0;

  const place = (node: TreeJson, height: number): Placed => {
    if (node.children.length === 0) {
      const pos = { x: depth * COL, y: (row++ + 0.5) * ROW };
      leaves.push({ label: node.label!, ...pos });
      return pos;
    }
    const a = place(node.children[0], height + 1);
    const b = place(node.children[1], height + 1);
    const x = Math.min(a.x, b.x) - COL;
    const yMid = (a.y + b.y) / 2;
    joins.push({ x, y0: a.y, y1: b.y, yMid, x0: a.x, x1: b.x });
    return { x, y: yMid };
  };

  place(root, 0);
  return { leaves, joins, width: depth * COL + LABEL_SPACE, height: row * ROW };
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function renderSvg(root: TreeJson): string {
  const l = layoutTree(root);
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${l.width} ${l.height}" width="${l.width}" height="${l.height}">`,
  );
  for (const j of l.joins) {
    parts.push(`<path class="join" d="M ${j.x0} ${j.y0} H ${j.x} V ${j.y1} H ${j.x1}" fill="none"/>`);
  }
  for (const leaf of l.leaves) {
    parts.push(`<circle class="leaf" cx="${leaf.x}" cy="${leaf.y}" r="3"/>`);
    parts.push(`<text class="label" x="${leaf.x + 8}" y="${leaf.y + 4}">${esc(leaf.label)}</text>`);
  }
  parts.push("</svg>");
  return parts.join("");
}
