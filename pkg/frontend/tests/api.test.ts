import { describe, expect, it } from "vitest";

import { api, ApiError } from "../src/api.js";
import { fixture, fixtureRaw, mockFetch } from "./helpers.js";

describe("error envelope", () => {
  it("carries code, message, and position for parse errors", async () => {
    mockFetch({ "POST /sql": { body: fixtureRaw("sql_error.json"), status: 400 } });
    const recorded = fixture<{ error: { code: string; message: string; line: number; column: number; expected: string[] } }>(
      "sql_error.json",
    ).error;
    const err = (await api.sql("shop", "SELECT user, FROM orders").catch((e) => e)) as ApiError;
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(400);
    expect(err.code).toBe(recorded.code);
    expect(err.message).toBe(recorded.message);
    expect(err.line).toBe(recorded.line);
    expect(err.column).toBe(recorded.column);
    expect(err.expected).toEqual(recorded.expected);
  });

  it("leaves position fields undefined for non-parse errors", async () => {
    mockFetch({
      "POST /services/spend_svc/request": { body: fixtureRaw("request_error.json"), status: 422 },
    });
    const err = (await api.request("spend_svc", { user: "x" }).catch((e) => e)) as ApiError;
    expect(err).toBeInstanceOf(ApiError);
    expect(err.line).toBeUndefined();
    expect(err.column).toBeUndefined();
    expect(err.expected).toBeUndefined();
  });

  it("copes with empty bodies on unexpected failures", async () => {
    mockFetch({ "GET /catalog": { body: "", status: 502 } });
    const err = (await api.catalog().catch((e) => e)) as ApiError;
    expect(err).toBeInstanceOf(ApiError);
    expect(err.code).toBe("Unknown");
    expect(err.message).toBe("HTTP 502");
  });
});

describe("request building", () => {
  it("query-escapes path parameters", async () => {
    const captured = mockFetch({
      "GET /lineage/my%20db/s%2Fx": { body: fixtureRaw("lineage.json") },
    });
    await api.lineage("my db", "s/x");
    expect(captured[0].url).toBe("/lineage/my%20db/s%2Fx");
  });

  it("only sends a views filter when one is given", async () => {
    const captured = mockFetch({
      "GET /views": { body: fixtureRaw("views.json") },
      "GET /views?db=shop": { body: fixtureRaw("views.json") },
    });
    await api.views();
    await api.views("shop");
    expect(captured.map((c) => c.url)).toEqual(["/views", "/views?db=shop"]);
  });
});
