/** SQL playground: ship a statement to /sql, render the reply verbatim.
 *
 * SELECT rows are displayed from the exact arrays the server returned; no
 * copying, rounding, or coercion happens on the way to the table. Parse
 * errors reproduce the CLI's caret: the offending source line with a marker
 * under the server-reported 1-based column.
 */

import { api, ApiError, type Cell, type SqlResponse } from "./api.js";
import { errorBlock, noticeBlock, renderTable } from "./html.js";

export interface PlaygroundResult {
  ok: boolean;
  /** Present for SELECTs: the response arrays themselves. */
  columns?: string[];
  rows?: Cell[][];
  html: string;
}

export function formatSqlError(sql: string, err: ApiError): string {
  const lines = [`error [${err.code}]: ${err.message}`];
  if (err.line !== undefined && err.column !== undefined) {
    const src = sql.split("\n")[err.line - 1] ?? "";
    lines.push("  " + src);
    lines.push("  " + " ".repeat(err.column - 1) + "^");
    if (err.expected && err.expected.length > 0) {
      lines.push(`expected one of: ${err.expected.join(", ")}`);
    }
  }
  return lines.join("\n");
}

function describe(doc: SqlResponse): PlaygroundResult {
  if (doc.kind === "select") {
    return {
      ok: true,
      columns: doc.columns,
      rows: doc.rows,
      html: renderTable({ columns: doc.columns, rows: doc.rows }),
    };
  }
  if (doc.kind === "insert") {
    return { ok: true, html: noticeBlock(`inserted ${doc.rows} row(s) into ${doc.table}`) };
  }
  return { ok: true, html: noticeBlock(`started job ${doc.job_id}: ${doc.target}`) };
}

export async function runStatement(db: string, sql: string, mode: string): Promise<PlaygroundResult> {
  try {
    return describe(await api.sql(db, sql, mode));
  } catch (e) {
    if (e instanceof ApiError) return { ok: false, html: errorBlock(formatSqlError(sql, e)) };
    throw e;
  }
}
