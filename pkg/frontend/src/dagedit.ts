/** Visual pipeline editor model: blocks, edges, and a server-side preview.
 *
 * The editor only assembles the graph document. Translation to SQL happens
 * exclusively on the server (/dag/sql), and the preview pane shows that
 * reply verbatim; rejected graphs surface the server's designated error
 * (CyclicDag, MultipleSinks, ArityMismatch, ...) untouched.
 */

import { api, type DagBlock, type DagPayload } from "./api.js";

export interface AggSpec {
  fn: string;
  arg: string;
  alias: string;
  n?: number;
}

export interface FrameSpec {
  kind: "rows" | "range" | "unbounded";
  size?: number;
  max_size?: number;
}

export interface WindowSpec {
  name: string;
  partition_columns: string[];
  order_column: string;
  frame: FrameSpec;
  union_tables: string[];
}

export class DagEditor {
  blocks: DagBlock[] = [];
  edges: { src: string; dst: string }[] = [];
  lastSql: string | null = null;

  addSource(id: string, table: string): this {
    this.blocks.push({ id, kind: "SOURCE", params: { table } });
    return this;
  }

  addLastJoin(id: string, params: { order_column: string; left: string; right: string }): this {
    this.blocks.push({ id, kind: "LAST_JOIN", params });
    return this;
  }

  addWindowAgg(id: string, window: WindowSpec, aggs: AggSpec[]): this {
    this.blocks.push({ id, kind: "WINDOW_AGG", params: { window, aggs } });
    return this;
  }

  addProject(id: string, exprs: { expr: string; alias?: string }[]): this {
    this.blocks.push({ id, kind: "PROJECT", params: { exprs } });
    return this;
  }

  connect(src: string, dst: string): this {
    this.edges.push({ src, dst });
    return this;
  }

  removeBlock(id: string): void {
    this.blocks = this.blocks.filter((b) => b.id !== id);
    this.edges = this.edges.filter((e) => e.src !== id && e.dst !== id);
  }

  removeEdge(src: string, dst: string): void {
    this.edges = this.edges.filter((e) => !(e.src === src && e.dst === dst));
  }

  clear(): void {
    this.blocks = [];
    this.edges = [];
    this.lastSql = null;
  }

  toPayload(): DagPayload {
    return {
      blocks: this.blocks.map((b) => ({ id: b.id, kind: b.kind, params: b.params })),
      edges: this.edges.map((e) => ({ src: e.src, dst: e.dst })),
    };
  }

  /** Ask the server for this graph's SQL; the returned text is displayed as is. */
  async preview(): Promise<string> {
    const res = await api.dagToSql(this.toPayload());
    this.lastSql = res.sql;
    return res.sql;
  }
}

function windowSpec(name: string, frame: FrameSpec, opts: Partial<WindowSpec> = {}): WindowSpec {
  return {
    name,
    partition_columns: opts.partition_columns ?? ["user"],
    order_column: opts.order_column ?? "ts",
    frame,
    union_tables: opts.union_tables ?? [],
  };
}

export interface ScriptedGraph {
  name: string;
  build: (ed: DagEditor) => DagEditor;
}

/** Example gallery shipped with the editor; also the parity corpus the UI
 * tests replay against recorded /dag/sql answers. */
export const SCRIPTED_GRAPHS: ScriptedGraph[] = [
  {
    name: "events passthrough",
    build: (ed) => ed.addSource("src", "events"),
  },
  {
    name: "rolling spend",
    build: (ed) =>
      ed
        .addSource("src", "events")
        .addWindowAgg("w", windowSpec("w0", { kind: "rows", size: 5 }), [
          { fn: "sum", arg: "amount", alias: "s" },
          { fn: "count", arg: "*", alias: "c" },
        ])
        .connect("src", "w"),
  },
  {
    name: "ten second averages",
    build: (ed) =>
      ed
        .addSource("src", "events")
        .addWindowAgg("w", windowSpec("w0", { kind: "range", size: 10000 }), [
          { fn: "avg", arg: "qty", alias: "mean_qty" },
          { fn: "max", arg: "price", alias: "top_price" },
        ])
        .connect("src", "w"),
  },
  {
    name: "lifetime totals",
    build: (ed) =>
      ed
        .addSource("src", "events")
        .addWindowAgg("w", windowSpec("w0", { kind: "unbounded" }), [
          { fn: "sum", arg: "amount", alias: "total" },
          { fn: "distinct_count", arg: "cat", alias: "cats" },
        ])
        .connect("src", "w"),
  },
  {
    name: "capped range window",
    build: (ed) =>
      ed
        .addSource("src", "events")
        .addWindowAgg("w", windowSpec("w0", { kind: "range", size: 50000, max_size: 4 }), [
          { fn: "min", arg: "amount", alias: "lo" },
        ])
        .connect("src", "w"),
  },
  {
    name: "history union",
    build: (ed) =>
      ed
        .addSource("src", "events")
        .addWindowAgg(
          "w",
          windowSpec("w0", { kind: "rows", size: 9 }, { union_tables: ["events_hist"] }),
          [
            { fn: "sum", arg: "price", alias: "p" },
            { fn: "count", arg: "flag", alias: "flags" },
          ],
        )
        .connect("src", "w"),
  },
  {
    name: "profile join",
    build: (ed) =>
      ed
        .addSource("base", "events")
        .addSource("right", "profiles")
        .addLastJoin("j", { order_column: "pts", left: "user", right: "uid" })
        .addProject("p", [{ expr: "user" }, { expr: "level" }])
        .connect("base", "j")
        .connect("right", "j")
        .connect("j", "p"),
  },
  {
    name: "join then window",
    build: (ed) =>
      ed
        .addSource("base", "events")
        .addSource("right", "profiles")
        .addLastJoin("j", { order_column: "pts", left: "user", right: "uid" })
        .addWindowAgg("w", windowSpec("w0", { kind: "rows", size: 3 }), [
          { fn: "count", arg: "*", alias: "c" },
        ])
        .addProject("p", [{ expr: "user" }, { expr: "c", alias: "c" }, { expr: "level", alias: "level" }])
        .connect("base", "j")
        .connect("right", "j")
        .connect("j", "w")
        .connect("w", "p"),
  },
  {
    name: "two windows with arithmetic",
    build: (ed) =>
      ed
        .addSource("src", "events")
        .addWindowAgg("w1", windowSpec("wa", { kind: "rows", size: 5 }), [
          { fn: "sum", arg: "amount", alias: "s" },
        ])
        .addWindowAgg("w2", windowSpec("wb", { kind: "range", size: 20000 }), [
          { fn: "count", arg: "*", alias: "c" },
        ])
        .addProject("p", [
          { expr: "user" },
          { expr: "ts" },
          { expr: "s", alias: "s" },
          { expr: "c", alias: "c" },
          { expr: "s + c", alias: "combo" },
        ])
        .connect("src", "w1")
        .connect("w1", "w2")
        .connect("w2", "p"),
  },
  {
    name: "top categories",
    build: (ed) =>
      ed
        .addSource("src", "events")
        .addWindowAgg("w", windowSpec("w0", { kind: "rows", size: 7 }), [
          { fn: "top_n_freq", arg: "cat", alias: "top_cats", n: 2 },
        ])
        .addProject("p", [{ expr: "user" }, { expr: "top_cats", alias: "top_cats" }])
        .connect("src", "w")
        .connect("w", "p"),
  },
];
