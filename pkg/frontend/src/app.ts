/** DOM shell for the review workbench.
 *
 * Keyboard-first: digits bin the current error into a category, `g`/`v`
 * submit a corrected label, `h` toggles the hint panel, arrows navigate.
 * Every number on screen comes from the server; the only client state is the
 * cursor and the hint toggle, both rebuildable from scratch.
 */

import { ApiClient, ApiError } from "./api.js";
import {
  ReviewSession,
  advance,
  binCurrent,
  categoryForHotkey,
  createSession,
  currentItem,
  hintState,
  isDone,
  labelCurrent,
  retreat,
  toggleHints,
} from "./review.js";
import type { Category, RunReport, VerdictResponse } from "./types.js";

const client = new ApiClient("");
let session: ReviewSession | null = null;
let categories: Category[] = [];
let report: RunReport | null = null;
let verdict: VerdictResponse | null = null;
let statusLine = "";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function fmt(value: number | null): string {
  return value === null ? "n/a" : `${(value * 100).toFixed(0)}%`;
}

function setStatus(text: string): void {
  statusLine = text;
  render();
}

async function loadRun(runId: string): Promise<void> {
  const [errors, cats, rep] = await Promise.all([
    client.getErrors(runId),
    client.getCategories(),
    client.getReport(runId),
  ]);
  session = createSession(runId, errors);
  categories = cats;
  report = rep;
  await refreshVerdict();
  render();
}

async function refreshVerdict(): Promise<void> {
  verdict = null;
  if (session && currentItem(session)) {
    verdict = await client.getVerdict(
      currentItem(session)!.advertiser_id,
      session.runId,
      hintState(session),
    );
  }
}

function render(): void {
  const queuePane = el("queue");
  const detailPane = el("detail");
  const reportPane = el("report");
  el("status").textContent = statusLine;

  if (!session) {
    queuePane.textContent = "Pick a run to review.";
    detailPane.textContent = "";
    reportPane.textContent = "";
    return;
  }

  reportPane.textContent = report
    ? `accuracy ${fmt(report.accuracy)} | precision ${fmt(report.precision)} | ` +
      `recall ${fmt(report.recall)} (positive class: good advertiser)`
    : "";

  if (session.queue.length === 0) {
    queuePane.textContent = "No errors in this run. Nothing to review.";
    detailPane.textContent = "";
    return;
  }

  queuePane.replaceChildren(
    ...session.queue.map((item, index) => {
      const row = document.createElement("div");
      row.className = index === session!.index ? "row current" : "row";
      const binned = item.current_category_id ? ` -> ${item.current_category_id}` : "";
      row.textContent = `${item.kind.toUpperCase()} ${item.advertiser_id}${binned}`;
      return row;
    }),
  );

  const item = currentItem(session);
  if (!item) {
    detailPane.textContent = "Queue finished. Record a revision or pick another run.";
    return;
  }
  const hints = session.hintsVisible && verdict?.outcome.kind === "verdict"
    ? `HINTS\n summary: ${verdict.outcome.advertiser_summary}\n products: ${verdict.outcome.products_services}\n`
    : "hints hidden (press h)\n";
  const lines = [
    `advertiser: ${item.advertiser_id} (${item.kind})`,
    `model decision: ${item.decision ?? "unparsed"}  truth: ${item.truth ?? "?"}`,
    `rationale: ${item.rationale || item.parse_detail}`,
    "",
    hints,
    "keys: 1-9 bin | g label good | v label bad | h hints | arrows move",
    ...categories.map((c, i) => `  ${i + 1}. ${c.title}`),
  ];
  detailPane.textContent = lines.join("\n");
}

async function handleKey(event: KeyboardEvent): Promise<void> {
  if (!session) return;
  try {
    if (event.key === "h") {
      session = toggleHints(session);
      await refreshVerdict();
    } else if (event.key === "ArrowRight") {
      session = advance(session);
      await refreshVerdict();
    } else if (event.key === "ArrowLeft") {
      session = retreat(session);
      await refreshVerdict();
    } else if (event.key === "g" || event.key === "v") {
      const label = event.key === "g" ? "NON_VIOLATING" : "VIOLATING";
      await labelCurrent(client, session, label, reviewerName());
      setStatus(`label ${label} submitted (hints ${hintState(session)})`);
      session = advance(session);
      await refreshVerdict();
    } else {
      const category = categoryForHotkey(categories, event.key);
      if (category && !isDone(session)) {
        await binCurrent(client, session, category.category_id);
        setStatus(`binned into ${category.category_id}`);
        session = createSession(session.runId, await client.getErrors(session.runId));
      }
    }
  } catch (error) {
    // Surface server rejections (especially HoldoutViolation) verbatim; never
    // retry or mutate the request.
    if (error instanceof ApiError) {
      setStatus(`${error.code}: ${error.message}`);
    } else {
      setStatus(String(error));
    }
  }
  render();
}

function reviewerName(): string {
  return (el("reviewer") as HTMLInputElement).value || "anonymous";
}

async function init(): Promise<void> {
  const runs = await client.getRuns();
  const picker = el("runs");
  picker.replaceChildren(
    ...runs.map((run) => {
      const button = document.createElement("button");
      button.textContent = `${run.run_id.slice(0, 12)} (${run.status}, ${run.candidate_count} advertisers)`;
      button.onclick = () => void loadRun(run.run_id).catch((e) => setStatus(String(e)));
      return button;
    }),
  );
  document.addEventListener("keydown", (event) => void handleKey(event));
  render();
}

if (typeof document !== "undefined") {
  void init().catch((error) => setStatus(String(error)));
}
