/** Typed client for the featstore HTTP API.
 *
 * Every number the UI shows comes out of one of these calls; nothing is
 * computed client-side.  Errors carry the server's machine code and, for
 * SQL syntax errors, the line/column/expected fields the editors render.
 */

export type Cell = string | number | boolean | null;

export interface SqlSelect {
  kind: "select";
  columns: string[];
  rows: Cell[][];
}

export interface SqlInsert {
  kind: "insert";
  table: string;
  rows: number;
}

export interface SqlLoad {
  kind: "load";
  job_id: number;
  target: string;
}

export type SqlResponse = SqlSelect | SqlInsert | SqlLoad;

export interface JobLogEntry {
  ts: string;
  message: string;
}

export interface JobSnapshot {
  job_id: number;
  kind: string;
  mode: string;
  target: string;
  status: "PENDING" | "RUNNING" | "DONE" | "FAILED";
  rows_ok: number;
  rows_rejected: number;
  log: JobLogEntry[];
}

export interface FeatureMeta {
  name: string;
  type: string;
  description: string;
  projection_index: number;
}

export interface ViewDoc {
  name: string;
  db: string;
  sql: string;
  features: FeatureMeta[];
  created_at: number;
}

export interface LineageDoc {
  feature: string;
  view: string;
  db: string;
  sql: string;
  type: string;
  description: string;
  source_tables: string[];
  source_columns: string[];
}

export interface DeploymentDoc {
  service: string;
  version: string;
  db: string;
  views: string[];
  sql: string;
  frozen_hash: string;
  status: "ACTIVE" | "RETAINED";
  description: string;
  created_at: number;
}

export interface RequestDoc {
  service: string;
  version: string;
  names: string[];
  types: string[];
  values: Cell[];
  latency_us: number;
  signed?: { slots: [number, number][]; libsvm: string };
}

export interface DagBlock {
  id: string;
  kind: "SOURCE" | "LAST_JOIN" | "WINDOW_AGG" | "PROJECT";
  params: Record<string, unknown>;
}

export interface DagPayload {
  blocks: DagBlock[];
  edges: { src: string; dst: string }[];
}

export interface SchemaDoc {
  name: string;
  columns: [string, string, boolean][];
  indexes: { key_columns: string[]; ts_column: string; ttl: Record<string, unknown> }[];
}

export interface TableInfo {
  schema: SchemaDoc;
  online_rows: number;
  offline_rows: number;
}

export interface CatalogDoc {
  databases: Record<string, Record<string, TableInfo>>;
  preagg: unknown;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public line?: number,
    public column?: number,
    public expected?: string[],
  ) {
    super(message);
  }
}

type Fetch = typeof fetch;

/** Swappable so tests can hand in a recorder; defaults to the real fetch. */
let fetcher: Fetch = (...args) => fetch(...args);

export function setFetcher(f: Fetch): void {
  fetcher = f;
}

async function call<T>(method: string, path: string, body?: unknown): Promise<T> {
  const res = await fetcher(path, {
    method,
    headers: body === undefined ? undefined : { "content-type": "application/json" },
    body: body === undefined ? undefined : JSON.stringify(body),
  });
  const text = await res.text();
  const doc = text ? JSON.parse(text) : null;
  if (!res.ok) {
    const err = (doc && doc.error) || {};
    throw new ApiError(
      res.status,
      err.code ?? "Unknown",
      err.message ?? `HTTP ${res.status}`,
      err.line ?? undefined,
      err.column ?? undefined,
      err.expected ?? undefined,
    );
  }
  return doc as T;
}

export const api = {
  catalog: () => call<CatalogDoc>("GET", "/catalog"),
  sql: (db: string, sql: string, mode = "online") =>
    call<SqlResponse>("POST", "/sql", { db, sql, mode }),
  dagToSql: (dag: DagPayload) => call<{ sql: string }>("POST", "/dag/sql", dag),
  startImport: (body: Record<string, unknown>) => call<JobSnapshot>("POST", "/imports", body),
  job: (id: number) => call<JobSnapshot>("GET", `/jobs/${id}`),
  jobs: () => call<{ jobs: JobSnapshot[] }>("GET", "/jobs"),
  views: (db?: string) => call<{ views: ViewDoc[] }>("GET", db ? `/views?db=${encodeURIComponent(db)}` : "/views"),
  preview: (db: string, name: string, limit = 10) =>
    call<{ columns: string[]; rows: Cell[][] }>(
      "GET",
      `/views/${encodeURIComponent(name)}/preview?db=${encodeURIComponent(db)}&limit=${limit}`,
    ),
  lineage: (db: string, feature: string) =>
    call<LineageDoc>("GET", `/lineage/${encodeURIComponent(db)}/${encodeURIComponent(feature)}`),
  deployments: (service?: string) =>
    call<{ deployments: DeploymentDoc[] }>(
      "GET",
      service ? `/deployments?service=${encodeURIComponent(service)}` : "/deployments",
    ),
  request: (service: string, row: Record<string, Cell>, version?: string) =>
    call<RequestDoc>("POST", `/services/${encodeURIComponent(service)}/request`, {
      row,
      ...(version ? { version } : {}),
    }),
};
