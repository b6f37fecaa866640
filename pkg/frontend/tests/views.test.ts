import { describe, expect, it } from "vitest";

import { type Cell, type DeploymentDoc, type LineageDoc, type ViewDoc } from "../src/api.js";
import { renderDeployments } from "../src/deployments.js";
import { renderTable } from "../src/html.js";
import { renderLineage, renderViewList } from "../src/views.js";
import { fixture, fixtureRaw } from "./helpers.js";

describe("view browser", () => {
  it("lists every view with its SQL and feature descriptions", () => {
    const views = fixture<{ views: ViewDoc[] }>("views.json").views;
    const html = renderViewList(views);
    for (const v of views) {
      expect(html).toContain(`${v.db}.${v.name} (${v.features.length} features)`);
      expect(html).toContain(v.sql);
      for (const f of v.features) {
        expect(html).toContain(`<code>${f.name}</code> ${f.type}`);
        if (f.description) expect(html).toContain(f.description);
      }
    }
  });

  it("renders previews from the response arrays untouched", () => {
    const raw = fixtureRaw("preview.json");
    const doc = JSON.parse(raw) as { columns: string[]; rows: Cell[][] };
    const html = renderTable(doc);
    expect(raw.includes(JSON.stringify(doc.rows))).toBe(true);
    for (const col of doc.columns) expect(html).toContain(`<th>${col}</th>`);
    expect(html).toContain(`(${doc.rows.length} rows)`);
  });
});

describe("lineage", () => {
  it("shows source tables and columns in the server's order", () => {
    const doc = fixture<LineageDoc>("lineage.json");
    const html = renderLineage(doc);
    expect(html).toContain(doc.feature);
    expect(html).toContain(doc.view);
    expect(html).toContain(doc.source_tables.join(", "));
    expect(html).toContain(doc.source_columns.join(", "));
    expect(html).toContain(doc.sql);
  });
});

describe("deployments", () => {
  it("lists each version with its full frozen hash", () => {
    const deps = fixture<{ deployments: DeploymentDoc[] }>("deployments.json").deployments;
    const html = renderDeployments(deps);
    for (const d of deps) {
      expect(html).toContain(`<td>${d.service}</td><td>${d.version}</td>`);
      expect(html).toContain(d.status);
      expect(html).toContain(d.frozen_hash);
      expect(html).toContain(d.views.join(", "));
    }
  });

  it("says so when nothing is deployed", () => {
    expect(renderDeployments([])).toContain("nothing deployed yet");
  });
});
