/** Browser entry point: tab shell and form wiring.
 *
 * Every pane is rendered from server responses by the pure modules; this
 * file only moves strings in and out of the DOM. It is the one module that
 * touches `document`, which keeps the rest testable without a browser.
 */

import { api, ApiError } from "./api.js";
import { errorBlock, escapeHtml, renderTable } from "./html.js";
import { runStatement } from "./playground.js";
import { DagEditor, SCRIPTED_GRAPHS } from "./dagedit.js";
import { sendRequest } from "./reqtester.js";
import { buildImportRequest, JobPoller, renderJob } from "./imports.js";
import { renderLineage, renderViewList } from "./views.js";
import { renderDeployments } from "./deployments.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function describeError(err: unknown): string {
  if (err instanceof ApiError) return `error [${err.code}]: ${err.message}`;
  return `error: ${(err as Error).message}`;
}

// --- tabs --------------------------------------------------------------------

function initTabs() {
  const buttons = Array.from(document.querySelectorAll<HTMLButtonElement>("nav button"));
  for (const btn of buttons) {
    btn.addEventListener("click", () => {
      for (const other of buttons) other.classList.toggle("active", other === btn);
      for (const section of Array.from(document.querySelectorAll<HTMLElement>("main > section"))) {
        section.hidden = section.id !== `tab-${btn.dataset.tab}`;
      }
    });
  }
}

// --- playground ----------------------------------------------------------------

function initPlayground() {
  const out = el<HTMLDivElement>("pg-out");
  el<HTMLFormElement>("pg-form").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const db = el<HTMLInputElement>("pg-db").value.trim();
    const sql = el<HTMLTextAreaElement>("pg-sql").value;
    const mode = el<HTMLSelectElement>("pg-mode").value;
    try {
      out.innerHTML = (await runStatement(db, sql, mode)).html;
    } catch (err) {
      out.innerHTML = errorBlock(describeError(err));
    }
  });
}

// --- pipeline editor --------------------------------------------------------------

const editor = new DagEditor();

function renderEditorState() {
  const blocks = editor.blocks
    .map(
      (b) =>
        `<li><code>${escapeHtml(b.id)}</code> <b>${escapeHtml(b.kind)}</b> ` +
        `<small>${escapeHtml(JSON.stringify(b.params))}</small> ` +
        `<button type="button" class="rm-block" data-id="${escapeHtml(b.id)}">remove</button></li>`,
    )
    .join("");
  const edges = editor.edges
    .map(
      (e) =>
        `<li><code>${escapeHtml(e.src)}</code> &rarr; <code>${escapeHtml(e.dst)}</code> ` +
        `<button type="button" class="rm-edge" data-src="${escapeHtml(e.src)}" data-dst="${escapeHtml(e.dst)}">remove</button></li>`,
    )
    .join("");
  el<HTMLDivElement>("dag-state").innerHTML =
    `<h3>blocks</h3><ul>${blocks || "<li>none</li>"}</ul><h3>edges</h3><ul>${edges || "<li>none</li>"}</ul>`;
}

function initDagEditor() {
  const gallery = el<HTMLSelectElement>("dag-gallery");
  for (let i = 0; i < SCRIPTED_GRAPHS.length; i++) {
    const opt = document.createElement("option");
    opt.value = String(i);
    opt.textContent = SCRIPTED_GRAPHS[i].name;
    gallery.appendChild(opt);
  }
  el<HTMLButtonElement>("dag-load").addEventListener("click", () => {
    editor.clear();
    SCRIPTED_GRAPHS[Number(gallery.value)].build(editor);
    renderEditorState();
    el<HTMLPreElement>("dag-sql").textContent = "";
  });
  el<HTMLButtonElement>("dag-clear").addEventListener("click", () => {
    editor.clear();
    renderEditorState();
    el<HTMLPreElement>("dag-sql").textContent = "";
  });
  el<HTMLDivElement>("dag-state").addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    if (target.classList.contains("rm-block")) {
      editor.removeBlock(target.dataset.id!);
      renderEditorState();
    } else if (target.classList.contains("rm-edge")) {
      editor.removeEdge(target.dataset.src!, target.dataset.dst!);
      renderEditorState();
    }
  });
  el<HTMLFormElement>("dag-add-block").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const id = el<HTMLInputElement>("dag-block-id").value.trim();
    const kind = el<HTMLSelectElement>("dag-block-kind").value;
    const paramsText = el<HTMLTextAreaElement>("dag-block-params").value.trim() || "{}";
    try {
      const params = JSON.parse(paramsText);
      if (kind === "SOURCE") editor.addSource(id, params.table);
      else if (kind === "LAST_JOIN") editor.addLastJoin(id, params);
      else if (kind === "WINDOW_AGG") editor.addWindowAgg(id, params.window, params.aggs);
      else editor.addProject(id, params.exprs);
      renderEditorState();
    } catch (err) {
      el<HTMLPreElement>("dag-sql").textContent = describeError(err);
    }
  });
  el<HTMLFormElement>("dag-add-edge").addEventListener("submit", (ev) => {
    ev.preventDefault();
    editor.connect(el<HTMLInputElement>("dag-edge-src").value.trim(), el<HTMLInputElement>("dag-edge-dst").value.trim());
    renderEditorState();
  });
  el<HTMLButtonElement>("dag-preview").addEventListener("click", async () => {
    const pane = el<HTMLPreElement>("dag-sql");
    try {
      pane.textContent = await editor.preview(); // the server's SQL, verbatim
      pane.className = "sql";
    } catch (err) {
      pane.textContent = describeError(err);
      pane.className = "error";
    }
  });
  renderEditorState();
}

// --- request tester -----------------------------------------------------------------

function initRequestTester() {
  const out = el<HTMLDivElement>("req-out");
  el<HTMLFormElement>("req-form").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const service = el<HTMLInputElement>("req-service").value.trim();
    const version = el<HTMLInputElement>("req-version").value.trim();
    try {
      const view = await sendRequest(service, el<HTMLTextAreaElement>("req-row").value, version);
      out.innerHTML = view.html;
    } catch (err) {
      out.innerHTML = errorBlock(describeError(err));
    }
  });
}

// --- imports --------------------------------------------------------------------------

const pollers = new Map<number, JobPoller>();

function watchJob(jobId: number) {
  const out = el<HTMLDivElement>("imp-jobs");
  const slotId = `job-${jobId}`;
  if (!document.getElementById(slotId)) {
    const slot = document.createElement("div");
    slot.id = slotId;
    out.prepend(slot);
  }
  pollers.get(jobId)?.stop();
  const poller = new JobPoller(
    jobId,
    (snap) => {
      el<HTMLDivElement>(slotId).innerHTML = renderJob(snap);
    },
    500,
    (id) => api.job(id),
    (err) => {
      el<HTMLDivElement>(slotId).innerHTML = errorBlock(describeError(err));
    },
  );
  pollers.set(jobId, poller);
  poller.start();
}

function initImports() {
  el<HTMLFormElement>("imp-form").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const body = buildImportRequest({
      db: el<HTMLInputElement>("imp-db").value.trim(),
      table: el<HTMLInputElement>("imp-table").value.trim(),
      path: el<HTMLInputElement>("imp-path").value.trim(),
      mode: el<HTMLSelectElement>("imp-mode").value,
      delimiter: el<HTMLInputElement>("imp-delim").value,
      header: el<HTMLInputElement>("imp-header").checked,
      nullToken: el<HTMLInputElement>("imp-null").value,
    });
    try {
      const job = await api.startImport(body);
      watchJob(job.job_id);
    } catch (err) {
      el<HTMLDivElement>("imp-jobs").innerHTML = errorBlock(describeError(err));
    }
  });
}

// --- views and lineage ---------------------------------------------------------------

function initViews() {
  const list = el<HTMLDivElement>("views-list");
  el<HTMLButtonElement>("views-refresh").addEventListener("click", async () => {
    const db = el<HTMLInputElement>("views-db").value.trim();
    try {
      list.innerHTML = renderViewList((await api.views(db || undefined)).views);
    } catch (err) {
      list.innerHTML = errorBlock(describeError(err));
    }
  });
  list.addEventListener("click", async (ev) => {
    const btn = ev.target as HTMLElement;
    if (!btn.classList.contains("preview-btn")) return;
    const slot = btn.parentElement!.querySelector<HTMLDivElement>(".preview-slot")!;
    try {
      const doc = await api.preview(btn.dataset.db!, btn.dataset.view!);
      slot.innerHTML = renderTable(doc);
    } catch (err) {
      slot.innerHTML = errorBlock(describeError(err));
    }
  });
  el<HTMLFormElement>("lin-form").addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const out = el<HTMLDivElement>("lin-out");
    try {
      const doc = await api.lineage(
        el<HTMLInputElement>("lin-db").value.trim(),
        el<HTMLInputElement>("lin-feature").value.trim(),
      );
      out.innerHTML = renderLineage(doc);
    } catch (err) {
      out.innerHTML = errorBlock(describeError(err));
    }
  });
}

// --- deployments -------------------------------------------------------------------------

function initDeployments() {
  const out = el<HTMLDivElement>("dep-list");
  el<HTMLButtonElement>("dep-refresh").addEventListener("click", async () => {
    const service = el<HTMLInputElement>("dep-service").value.trim();
    try {
      out.innerHTML = renderDeployments((await api.deployments(service || undefined)).deployments);
    } catch (err) {
      out.innerHTML = errorBlock(describeError(err));
    }
  });
}

// --- catalog -------------------------------------------------------------------------------

function initCatalog() {
  const out = el<HTMLDivElement>("cat-out");
  el<HTMLButtonElement>("cat-refresh").addEventListener("click", async () => {
    try {
      const doc = await api.catalog();
      const rows: (string | number)[][] = [];
      for (const [db, tables] of Object.entries(doc.databases)) {
        for (const [table, info] of Object.entries(tables)) {
          rows.push([
            db,
            table,
            info.schema.columns.map(([n, t]) => `${n}:${t}`).join(" "),
            info.online_rows,
            info.offline_rows,
          ]);
        }
      }
      out.innerHTML = renderTable({
        columns: ["db", "table", "columns", "online rows", "offline rows"],
        rows,
      });
    } catch (err) {
      out.innerHTML = errorBlock(describeError(err));
    }
  });
}

initTabs();
initPlayground();
initDagEditor();
initRequestTester();
initImports();
initViews();
initDeployments();
initCatalog();
el<HTMLButtonElement>("cat-refresh").click();
