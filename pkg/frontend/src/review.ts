/** Review session state machine.
 *
 * The queue is exactly the server's /runs/{id}/errors order; the client never
 * re-sorts it or computes metrics locally. The hint panel defaults to hidden
 * and its visibility travels with every verdict view and label submission, so
 * hints-vs-no-hints reviewer sessions can be compared downstream.
 */

import { ApiClient } from "./api.js";
import type { Category, Decision, HintState, ReviewQueueItem } from "./types.js";

export interface ReviewSession {
  runId: string;
  queue: ReviewQueueItem[];
  index: number;
  hintsVisible: boolean;
}

export function createSession(runId: string, errors: ReviewQueueItem[]): ReviewSession {
  return { runId, queue: [...errors], index: 0, hintsVisible: false };
}

export function currentItem(session: ReviewSession): ReviewQueueItem | null {
  return session.queue[session.index] ?? null;
}

export function isDone(session: ReviewSession): boolean {
  return session.index >= session.queue.length;
}

export function advance(session: ReviewSession): ReviewSession {
  return { ...session, index: Math.min(session.index + 1, session.queue.length) };
}

export function retreat(session: ReviewSession): ReviewSession {
  return { ...session, index: Math.max(session.index - 1, 0) };
}

export function toggleHints(session: ReviewSession): ReviewSession {
  return { ...session, hintsVisible: !session.hintsVisible };
}

export function hintState(session: ReviewSession): HintState {
  return session.hintsVisible ? "shown" : "hidden";
}

/** Digit hotkeys 1..9 map to categories in server order. */
export function categoryForHotkey(categories: Category[], key: string): Category | null {
  if (!/^[1-9]$/.test(key)) return null;
  return categories[Number(key) - 1] ?? null;
}

/** Fetch the current item's verdict, reporting hint-panel exposure. */
export async function viewCurrentVerdict(client: ApiClient, session: ReviewSession) {
  const item = currentItem(session);
  if (!item) return null;
  return client.getVerdict(item.advertiser_id, session.runId, hintState(session));
}

/** Bin the current error into a category; the server enforces holdout
 * discipline and the rejection surfaces unmodified. */
export async function binCurrent(
  client: ApiClient,
  session: ReviewSession,
  categoryId: string,
  note = "",
): Promise<{ assignment_id: string }> {
  const item = currentItem(session);
  if (!item) throw new Error("review queue is empty");
  return client.createAssignment({
    run_id: session.runId,
    advertiser_id: item.advertiser_id,
    category_id: categoryId,
    note,
  });
}

/** Submit a corrected label for the current item. hints_were_shown is the
 * session's live hint-panel state, sent with every submission. */
export async function labelCurrent(
  client: ApiClient,
  session: ReviewSession,
  label: Decision,
  reviewer: string,
): Promise<void> {
  const item = currentItem(session);
  if (!item) throw new Error("review queue is empty");
  await client.submitLabel({
    advertiser_id: item.advertiser_id,
    label,
    reviewer,
    hints_were_shown: session.hintsVisible,
  });
}

/** Record a prompt revision addressing the categories used this session. */
export async function recordRevision(
  client: ApiClient,
  templateId: string,
  fromRevision: number,
  categoryIds: string[],
  changeNote: string,
): Promise<{ position: number; to_revision: number }> {
  return client.createRevision({
    template_id: templateId,
    from_revision: fromRevision,
    addressed_category_ids: categoryIds,
    change_note: changeNote,
  });
}
