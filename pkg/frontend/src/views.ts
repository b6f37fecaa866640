/** Read-only browsers for feature views, previews, and lineage. */

import { type LineageDoc, type ViewDoc } from "./api.js";
import { escapeHtml, kvRows } from "./html.js";

export function renderViewList(views: ViewDoc[]): string {
  if (views.length === 0) return `<p class="notice">no views defined</p>`;
  return views
    .map((v) => {
      const features = v.features
        .map(
          (f) =>
            `<li><code>${escapeHtml(f.name)}</code> ${escapeHtml(f.type)}` +
            (f.description ? ` — ${escapeHtml(f.description)}` : "") +
            `</li>`,
        )
        .join("");
      return (
        `<details class="view" data-view="${escapeHtml(v.name)}">` +
        `<summary>${escapeHtml(v.db)}.${escapeHtml(v.name)} (${v.features.length} features)</summary>` +
        `<pre class="sql">${escapeHtml(v.sql)}</pre><ul class="features">${features}</ul>` +
        `<button class="preview-btn" data-db="${escapeHtml(v.db)}" data-view="${escapeHtml(v.name)}">preview</button>` +
        `<div class="preview-slot"></div></details>`
      );
    })
    .join("");
}

export function renderLineage(doc: LineageDoc): string {
  return (
    kvRows([
      ["feature", doc.feature],
      ["view", doc.view],
      ["db", doc.db],
      ["type", doc.type],
      ["description", doc.description],
      ["source tables", doc.source_tables.join(", ")],
      ["source columns", doc.source_columns.join(", ")],
    ]) + `<pre class="sql">${escapeHtml(doc.sql)}</pre>`
  );
}
