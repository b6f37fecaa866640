import { describe, expect, it } from "vitest";

import { ApiError, type RequestDoc } from "../src/api.js";
import { cellText } from "../src/html.js";
import { parseRow, renderRequestDoc, sendRequest } from "../src/reqtester.js";
import { fixture, fixtureRaw, mockFetch } from "./helpers.js";

describe("request tester", () => {
  it("displays exactly the API's feature vector and latency", async () => {
    const raw = fixtureRaw("request.json");
    const doc = JSON.parse(raw) as RequestDoc;
    mockFetch({ "POST /services/spend_svc/request": { body: raw } });

    const view = await sendRequest("spend_svc", '{"user": "alice", "ts": 320}');
    // the view model is the response document itself
    expect(view.doc).toEqual(doc);
    expect(JSON.stringify(view.doc.values)).toBe(JSON.stringify(doc.values));

    // one table row per feature, nothing added, nothing dropped
    const bodyRows = view.html.split("<tbody>")[1].split("</tbody>")[0].split("</tr>").filter(Boolean);
    expect(bodyRows.length).toBe(doc.names.length);
    for (let i = 0; i < doc.names.length; i++) {
      expect(bodyRows[i]).toContain(`<td>${doc.names[i]}</td>`);
      expect(bodyRows[i]).toContain(`<td>${doc.types[i]}</td>`);
      expect(bodyRows[i]).toContain(`>${cellText(doc.values[i])}</td>`);
    }
    // the engine's own latency figure, digit for digit
    expect(view.html).toContain(`latency_us: ${doc.latency_us}</p>`);
    expect(view.html).toContain(`${doc.service} ${doc.version}`);
  });

  it("sends the row as given and omits version unless set", async () => {
    const captured = mockFetch({ "POST /services/spend_svc/request": { body: fixtureRaw("request.json") } });
    await sendRequest("spend_svc", '{"user": "alice", "ts": 320}');
    expect(JSON.parse(captured[0].body!)).toEqual({ row: { user: "alice", ts: 320 } });

    await sendRequest("spend_svc", '{"user": "alice", "ts": 320}', "v1");
    expect(JSON.parse(captured[1].body!)).toEqual({ row: { user: "alice", ts: 320 }, version: "v1" });
  });

  it("propagates the engine's schema errors with their code", async () => {
    mockFetch({
      "POST /services/spend_svc/request": { body: fixtureRaw("request_error.json"), status: 422 },
    });
    const recorded = fixture<{ error: { code: string; message: string } }>("request_error.json").error;
    const err = await sendRequest("spend_svc", '{"user": "alice", "ts": 320, "bogus": 1}').catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).code).toBe(recorded.code);
    expect((err as ApiError).message).toBe(recorded.message);
  });

  it("renders the signed vector verbatim when present", () => {
    const doc = fixture<RequestDoc>("request.json");
    const signed: RequestDoc = {
      ...doc,
      signed: { slots: [[3, 1], [17, 2.5]], libsvm: "3:1 17:2.5" },
    };
    expect(renderRequestDoc(signed)).toContain(">3:1 17:2.5</pre>");
    expect(renderRequestDoc(doc)).not.toContain("libsvm");
  });
});

describe("row parsing", () => {
  it("accepts flat objects of scalars including null", () => {
    expect(parseRow('{"user": "alice", "ts": 320, "amount": null, "flag": true}')).toEqual({
      user: "alice",
      ts: 320,
      amount: null,
      flag: true,
    });
  });

  it("rejects everything else with a readable message", () => {
    expect(() => parseRow("not json")).toThrow(/not valid JSON/);
    expect(() => parseRow("[1, 2]")).toThrow(/JSON object/);
    expect(() => parseRow('"alice"')).toThrow(/JSON object/);
    expect(() => parseRow('{"user": {"nested": 1}}')).toThrow(/non-scalar/);
  });
});
