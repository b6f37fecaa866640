import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { type JobSnapshot } from "../src/api.js";
import { buildImportRequest, JobPoller, renderJob } from "../src/imports.js";
import { fixture } from "./helpers.js";

const DONE = fixture<JobSnapshot>("job_done.json");
const RUNNING: JobSnapshot = { ...DONE, status: "RUNNING" };

describe("job polling", () => {
  beforeEach(() => vi.useFakeTimers());
  afterEach(() => vi.useRealTimers());

  it("polls until the job is terminal, then stops", async () => {
    const replies = [RUNNING, RUNNING, DONE];
    const fetchJob = vi.fn(async () => replies.shift() ?? DONE);
    const seen: string[] = [];
    const poller = new JobPoller(DONE.job_id, (s) => seen.push(s.status), 500, fetchJob);

    poller.start();
    await vi.advanceTimersByTimeAsync(0);
    expect(fetchJob).toHaveBeenCalledTimes(1);
    await vi.advanceTimersByTimeAsync(500);
    expect(fetchJob).toHaveBeenCalledTimes(2);
    await vi.advanceTimersByTimeAsync(500);
    expect(fetchJob).toHaveBeenCalledTimes(3);

    // DONE landed; no amount of further time triggers another request
    await vi.advanceTimersByTimeAsync(60_000);
    expect(fetchJob).toHaveBeenCalledTimes(3);
    expect(seen).toEqual(["RUNNING", "RUNNING", "DONE"]);
    expect(poller.snapshot?.status).toBe("DONE");
  });

  it("keeps at most one request in flight per job", async () => {
    let release: (snap: JobSnapshot) => void = () => {};
    const fetchJob = vi.fn(
      () => new Promise<JobSnapshot>((resolve) => { release = resolve; }),
    );
    const poller = new JobPoller(1, () => {}, 500, fetchJob);

    poller.start();
    await vi.advanceTimersByTimeAsync(0); // first poll leaves, reply pending
    expect(fetchJob).toHaveBeenCalledTimes(1);

    poller.start(); // an eager second start while the reply is outstanding
    await vi.advanceTimersByTimeAsync(0);
    expect(fetchJob).toHaveBeenCalledTimes(1); // guarded: still just one

    release(RUNNING);
    await vi.advanceTimersByTimeAsync(0); // let the reply settle
    await vi.advanceTimersByTimeAsync(500); // next scheduled poll
    expect(fetchJob).toHaveBeenCalledTimes(2);
    poller.stop();
  });

  it("stop cancels the loop between polls", async () => {
    const fetchJob = vi.fn(async () => RUNNING);
    const poller = new JobPoller(1, () => {}, 500, fetchJob);
    poller.start();
    await vi.advanceTimersByTimeAsync(0);
    expect(fetchJob).toHaveBeenCalledTimes(1);
    poller.stop();
    await vi.advanceTimersByTimeAsync(10_000);
    expect(fetchJob).toHaveBeenCalledTimes(1);
  });

  it("a failed poll ends the loop and reports the error", async () => {
    const boom = new Error("gone");
    const fetchJob = vi.fn(async () => { throw boom; });
    const errors: unknown[] = [];
    const poller = new JobPoller(1, () => {}, 500, fetchJob, (e) => errors.push(e));
    poller.start();
    await vi.advanceTimersByTimeAsync(0);
    await vi.advanceTimersByTimeAsync(10_000);
    expect(fetchJob).toHaveBeenCalledTimes(1);
    expect(errors).toEqual([boom]);
  });
});

describe("import form", () => {
  it("builds the request the /imports endpoint expects", () => {
    expect(
      buildImportRequest({
        db: "shop", table: "orders", path: "/data/orders.csv",
        mode: "online", delimiter: "", header: true, nullToken: "",
      }),
    ).toEqual({
      db: "shop", table: "orders", path: "/data/orders.csv",
      mode: "online", delimiter: ",", header: true,
    });
  });

  it("passes a null token through only when set", () => {
    const body = buildImportRequest({
      db: "shop", table: "orders", path: "x.csv",
      mode: "offline", delimiter: ";", header: false, nullToken: "NA",
    });
    expect(body.null_token).toBe("NA");
    expect(body.delimiter).toBe(";");
    expect(body.header).toBe(false);
  });
});

describe("job rendering", () => {
  it("shows the recorded snapshot's counts and log", () => {
    const html = renderJob(DONE);
    expect(html).toContain(`status-${DONE.status.toLowerCase()}`);
    expect(html).toContain(`<td>${DONE.rows_ok}</td>`);
    expect(html).toContain(`<td>${DONE.rows_rejected}</td>`);
    expect(html).toContain(DONE.target);
    for (const entry of DONE.log) {
      expect(html).toContain(entry.message);
    }
  });
});
