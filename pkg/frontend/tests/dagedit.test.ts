import { describe, expect, it } from "vitest";

import { ApiError, type DagPayload } from "../src/api.js";
import { DagEditor, SCRIPTED_GRAPHS } from "../src/dagedit.js";
import { fixture, fixtureRaw, mockFetch } from "./helpers.js";

interface RecordedGraph {
  name: string;
  payload: DagPayload;
  sql: string;
}

const RECORDED = fixture<RecordedGraph[]>("dag_graphs.json");

describe("scripted graph parity", () => {
  it("ships ten scripted graphs, matching the recorded corpus", () => {
    expect(SCRIPTED_GRAPHS.length).toBe(10);
    expect(RECORDED.map((g) => g.name)).toEqual(SCRIPTED_GRAPHS.map((g) => g.name));
  });

  for (const recorded of RECORDED) {
    it(`preview of "${recorded.name}" equals the translator's SQL`, async () => {
      const graph = SCRIPTED_GRAPHS.find((g) => g.name === recorded.name)!;
      const editor = graph.build(new DagEditor());

      // the editor reproduces the recorded graph document exactly
      expect(JSON.stringify(editor.toPayload())).toBe(JSON.stringify(recorded.payload));

      const captured = mockFetch({
        "POST /dag/sql": { body: JSON.stringify({ sql: recorded.sql }) },
      });
      const sql = await editor.preview();
      // what went over the wire is the same document, byte for byte
      expect(captured[0].body).toBe(JSON.stringify(recorded.payload));
      // and the preview pane shows the reply verbatim
      expect(sql).toBe(recorded.sql);
      expect(editor.lastSql).toBe(recorded.sql);
    });
  }
});

describe("editor operations", () => {
  it("removing a block drops its edges too", () => {
    const editor = SCRIPTED_GRAPHS[8].build(new DagEditor()); // two windows with arithmetic
    const before = editor.edges.length;
    editor.removeBlock("w2");
    expect(editor.blocks.some((b) => b.id === "w2")).toBe(false);
    expect(editor.edges.some((e) => e.src === "w2" || e.dst === "w2")).toBe(false);
    expect(editor.edges.length).toBeLessThan(before);
  });

  it("removeEdge only touches the named pair", () => {
    const editor = new DagEditor()
      .addSource("a", "events")
      .addSource("b", "profiles")
      .addLastJoin("j", { order_column: "pts", left: "user", right: "uid" })
      .connect("a", "j")
      .connect("b", "j");
    editor.removeEdge("a", "j");
    expect(editor.edges).toEqual([{ src: "b", dst: "j" }]);
  });

  it("clear resets blocks, edges, and the last preview", () => {
    const editor = SCRIPTED_GRAPHS[1].build(new DagEditor());
    editor.lastSql = "SELECT 1";
    editor.clear();
    expect(editor.blocks).toEqual([]);
    expect(editor.edges).toEqual([]);
    expect(editor.lastSql).toBeNull();
  });
});

describe("rejected graphs", () => {
  it("surfaces the server's designated cycle error untouched", async () => {
    mockFetch({
      "POST /dag/sql": { body: fixtureRaw("dag_error_cycle.json"), status: 400 },
    });
    const editor = new DagEditor()
      .addProject("a", [{ expr: "x" }])
      .addProject("b", [{ expr: "x" }])
      .connect("a", "b")
      .connect("b", "a");
    const err = await editor.preview().catch((e) => e as ApiError);
    expect(err).toBeInstanceOf(ApiError);
    const recorded = fixture<{ error: { code: string; message: string } }>("dag_error_cycle.json").error;
    expect((err as ApiError).code).toBe(recorded.code);
    expect((err as ApiError).message).toBe(recorded.message);
    expect(recorded.code).toBe("CyclicDag");
    expect(editor.lastSql).toBeNull();
  });
});
