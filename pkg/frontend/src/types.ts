/** Wire types mirroring the review service responses exactly.
 * The client never derives ground truth or metrics from these; the server is
 * the single source of truth. */

export type Decision = "VIOLATING" | "NON_VIOLATING";
export type ErrorKind = "fp" | "fn" | "unparsed";
export type HintState = "shown" | "hidden";

export interface RunSummary {
  run_id: string;
  status: "RUNNING" | "COMPLETE" | "FAILED";
  template_id: string;
  template_revision: number;
  policy_id: string;
  backend_kind: string;
  candidate_count: number;
  started_at: string;
  finished_at: string | null;
}

export interface ConfusionMatrix {
  tp: number;
  fp: number;
  tn: number;
  fn: number;
  unparsed: number;
}

export interface RunReport {
  run_id: string;
  split: string | null;
  positive_class: "NON_VIOLATING";
  matrix: ConfusionMatrix;
  accuracy: number | null;
  precision: number | null;
  recall: number | null;
  parse_failure_rate: number | null;
  template_revision: number;
}

/** One reviewable error case from GET /runs/{id}/errors. */
export interface ReviewQueueItem {
  advertiser_id: string;
  kind: ErrorKind;
  truth: Decision | null;
  decision: Decision | null;
  summary: string;
  rationale: string;
  parse_detail: string;
  current_category_id: string | null;
}

export interface ProfileItem {
  text: string;
  source_ad_ids: string[];
  occurrence_count: number;
  baseline_score: number;
  label: Decision | null;
  conflicting_labels: Decision[];
}

export interface ContentProfile {
  advertiser_id: string;
  display_name: string;
  buckets: Record<string, ProfileItem[]>;
  targeting_terms: string[];
  domains: string[];
  knowledge_snippets: string[];
  dedup_stats: { input_items: number; output_items: number };
}

export interface VerdictOutcome {
  kind: "verdict" | "parse_error" | "backend_error";
  decision?: Decision;
  advertiser_summary?: string;
  products_services?: string;
  rationale?: string;
  error?: string;
  detail?: string;
}

export interface VerdictResponse {
  advertiser_id: string;
  run_id: string;
  hints: HintState | null;
  outcome: VerdictOutcome;
}

export interface Category {
  category_id: string;
  title: string;
  description: string;
  created_in_revision: number;
}

export interface StoredLabel {
  advertiser_id: string;
  label: Decision;
  reviewer: string;
  hints_were_shown: boolean;
  timestamp: string;
}

export interface StoredAssignment {
  run_id: string;
  advertiser_id: string;
  category_id: string;
  reviewer_note: string;
  timestamp: string;
}

export interface RevisionEntry {
  template_id: string;
  from_revision: number;
  to_revision: number;
  addressed_category_ids: string[];
  change_note: string;
  timestamp: string;
}

export interface ApiErrorBody {
  code: string;
  message: string;
}
