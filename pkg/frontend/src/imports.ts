/** CSV import form and job tracking.
 *
 * Polling is deliberately meek: at most one in-flight status request per
 * job, and the next poll is scheduled only after the previous reply lands.
 * Terminal jobs (DONE, FAILED) stop the loop.
 */

import { api, type JobSnapshot } from "./api.js";
import { escapeHtml, kvRows } from "./html.js";

export const TERMINAL_STATES = new Set(["DONE", "FAILED"]);

type FetchJob = (id: number) => Promise<JobSnapshot>;

export class JobPoller {
  polls = 0;
  snapshot: JobSnapshot | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight = false;
  private stopped = false;

  constructor(
    readonly jobId: number,
    private onUpdate: (snap: JobSnapshot) => void,
    private intervalMs = 500,
    private fetchJob: FetchJob = (id) => api.job(id),
    private onError: (err: unknown) => void = () => {},
  ) {}

  start(): void {
    this.stopped = false;
    this.schedule(0);
  }

  stop(): void {
    this.stopped = true;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
  }

  private schedule(ms: number): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => void this.tick(), ms);
  }

  private async tick(): Promise<void> {
    if (this.inFlight) return; // one request per job, never overlapping
    this.inFlight = true;
    try {
      const snap = await this.fetchJob(this.jobId);
      this.polls += 1;
      this.snapshot = snap;
      this.onUpdate(snap);
      if (!this.stopped && !TERMINAL_STATES.has(snap.status)) {
        this.schedule(this.intervalMs);
      }
    } catch (err) {
      this.onError(err); // a failed poll ends the loop; the user can re-open the job
    } finally {
      this.inFlight = false;
    }
  }
}

export function buildImportRequest(form: {
  db: string;
  table: string;
  path: string;
  mode: string;
  delimiter: string;
  header: boolean;
  nullToken: string;
}): Record<string, unknown> {
  const body: Record<string, unknown> = {
    db: form.db,
    table: form.table,
    path: form.path,
    mode: form.mode,
    delimiter: form.delimiter || ",",
    header: form.header,
  };
  if (form.nullToken !== "") body.null_token = form.nullToken;
  return body;
}

export function renderJob(snap: JobSnapshot): string {
  const head = kvRows([
    ["job", String(snap.job_id)],
    ["kind", snap.kind],
    ["target", snap.target],
    ["mode", snap.mode],
    ["status", snap.status],
    ["rows ok", String(snap.rows_ok)],
    ["rows rejected", String(snap.rows_rejected)],
  ]);
  const log = snap.log
    .map((entry) => `<li><time>${escapeHtml(entry.ts)}</time> ${escapeHtml(entry.message)}</li>`)
    .join("");
  return `<div class="job status-${snap.status.toLowerCase()}">${head}<ul class="joblog">${log}</ul></div>`;
}
