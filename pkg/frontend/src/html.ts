/** HTML string builders shared by every tab.
 *
 * Cell values pass through untouched: what the server sent is what the page
 * shows. NULL gets a marker class so it can be styled, never a substitute
 * value baked into the data.
 */

import type { Cell } from "./api.js";

const REPLACEMENTS: Record<string, string> = {
  "&": "&amp;",
  "<": "&lt;",
  ">": "&gt;",
  '"': "&quot;",
  "'": "&#39;",
};

export function escapeHtml(s: string): string {
  return s.replace(/[&<>"']/g, (ch) => REPLACEMENTS[ch]);
}

/** Exact display text for one cell: strings byte-for-byte, numbers and
 * booleans through the same JSON engine that parsed them, null marked. */
export function cellText(v: Cell): string {
  if (v === null) return "NULL";
  if (typeof v === "string") return v;
  return String(v);
}

export interface Grid {
  columns: string[];
  rows: Cell[][];
}

export function renderTable(grid: Grid): string {
  const head = grid.columns.map((c) => `<th>${escapeHtml(c)}</th>`).join("");
  const body = grid.rows
    .map(
      (row) =>
        `<tr>${row
          .map((v) => `<td${v === null ? ' class="null"' : ""}>${escapeHtml(cellText(v))}</td>`)
          .join("")}</tr>`,
    )
    .join("");
  return (
    `<table class="grid"><thead><tr>${head}</tr></thead><tbody>${body}</tbody></table>` +
    `<p class="rowcount">(${grid.rows.length} row${grid.rows.length === 1 ? "" : "s"})</p>`
  );
}

export function kvRows(pairs: [string, string][]): string {
  const rows = pairs
    .map(([k, v]) => `<tr><th>${escapeHtml(k)}</th><td>${escapeHtml(v)}</td></tr>`)
    .join("");
  return `<table class="kv"><tbody>${rows}</tbody></table>`;
}

export function errorBlock(text: string): string {
  return `<pre class="error">${escapeHtml(text)}</pre>`;
}

export function noticeBlock(text: string): string {
  return `<p class="notice">${escapeHtml(text)}</p>`;
}
