/** Request tester: fire one real-time request at a deployed service and
 * display exactly what came back: every feature name, its declared type,
 * the value as sent, and the engine's own latency figure.
 */

import { api, type Cell, type RequestDoc } from "./api.js";
import { cellText, escapeHtml } from "./html.js";

export interface TesterView {
  doc: RequestDoc;
  html: string;
}

/** Parse the request-row textarea; must be a flat JSON object of scalars. */
export function parseRow(text: string): Record<string, Cell> {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (e) {
    throw new Error(`row is not valid JSON: ${(e as Error).message}`);
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new Error("row must be a JSON object of column: value pairs");
  }
  for (const [k, v] of Object.entries(doc)) {
    const t = typeof v;
    if (v !== null && t !== "string" && t !== "number" && t !== "boolean") {
      throw new Error(`column ${k} has a non-scalar value`);
    }
  }
  return doc as Record<string, Cell>;
}

export function renderRequestDoc(doc: RequestDoc): string {
  const rows = doc.names
    .map(
      (name, i) =>
        `<tr><td>${escapeHtml(name)}</td><td>${escapeHtml(doc.types[i])}</td>` +
        `<td${doc.values[i] === null ? ' class="null"' : ""}>${escapeHtml(cellText(doc.values[i]))}</td></tr>`,
    )
    .join("");
  let html =
    `<p class="meta">${escapeHtml(doc.service)} ${escapeHtml(doc.version)}</p>` +
    `<table class="grid"><thead><tr><th>feature</th><th>type</th><th>value</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>` +
    `<p class="latency">latency_us: ${doc.latency_us}</p>`;
  if (doc.signed) {
    html += `<pre class="libsvm">${escapeHtml(doc.signed.libsvm)}</pre>`;
  }
  return html;
}

export async function sendRequest(
  service: string,
  rowText: string,
  version?: string,
): Promise<TesterView> {
  const doc = await api.request(service, parseRow(rowText), version || undefined);
  return { doc, html: renderRequestDoc(doc) };
}
