/** Deployment browser: every service version the registry holds. */

import { type DeploymentDoc } from "./api.js";
import { escapeHtml } from "./html.js";

export function renderDeployments(deps: DeploymentDoc[]): string {
  if (deps.length === 0) return `<p class="notice">nothing deployed yet</p>`;
  const rows = deps
    .map(
      (d) =>
        `<tr class="status-${d.status.toLowerCase()}">` +
        `<td>${escapeHtml(d.service)}</td><td>${escapeHtml(d.version)}</td>` +
        `<td>${escapeHtml(d.status)}</td><td>${escapeHtml(d.db)}</td>` +
        `<td>${escapeHtml(d.views.join(", "))}</td>` +
        `<td><code class="hash">${escapeHtml(d.frozen_hash)}</code></td></tr>`,
    )
    .join("");
  return (
    `<table class="grid"><thead><tr><th>service</th><th>version</th><th>status</th>` +
    `<th>db</th><th>views</th><th>frozen hash</th></tr></thead><tbody>${rows}</tbody></table>`
  );
}
