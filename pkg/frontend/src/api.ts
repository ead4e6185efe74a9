/** Typed client for the review service. Errors surface the server's machine
 * code verbatim; the client never retries or mutates a rejected request. */

import type {
  Category,
  ContentProfile,
  HintState,
  ReviewQueueItem,
  RevisionEntry,
  RunReport,
  RunSummary,
  StoredAssignment,
  StoredLabel,
  VerdictResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(private readonly baseUrl: string) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`, init);
    const body = await response.json().catch(() => null);
    if (!response.ok) {
      const code = body && typeof body.code === "string" ? body.code : "HttpError";
      const message =
        body && typeof body.message === "string" ? body.message : response.statusText;
      throw new ApiError(response.status, code, message);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  getRuns(): Promise<RunSummary[]> {
    return this.request("/runs");
  }

  getReport(runId: string): Promise<RunReport> {
    return this.request(`/runs/${runId}/report`);
  }

  getErrors(runId: string): Promise<ReviewQueueItem[]> {
    return this.request(`/runs/${runId}/errors`);
  }

  getProfile(advertiserId: string): Promise<ContentProfile> {
    return this.request(`/advertisers/${advertiserId}/profile`);
  }

  /** `hints` reports whether the hint panel is exposed for this view; the
   * server logs the exposure. */
  getVerdict(
    advertiserId: string,
    runId: string,
    hints?: HintState,
  ): Promise<VerdictResponse> {
    const params = new URLSearchParams({ run: runId });
    if (hints) params.set("hints", hints);
    return this.request(`/advertisers/${advertiserId}/verdict?${params}`);
  }

  submitLabel(payload: {
    advertiser_id: string;
    label: string;
    reviewer: string;
    hints_were_shown: boolean;
  }): Promise<{ stored: boolean }> {
    return this.post("/labels", payload);
  }

  getLabels(): Promise<StoredLabel[]> {
    return this.request("/labels");
  }

  getCategories(): Promise<Category[]> {
    return this.request("/triage/categories");
  }

  createCategory(title: string, description = ""): Promise<Category> {
    return this.post("/triage/categories", { title, description });
  }

  createAssignment(payload: {
    run_id: string;
    advertiser_id: string;
    category_id: string;
    note: string;
  }): Promise<{ assignment_id: string }> {
    return this.post("/triage/assignments", payload);
  }

  getAssignments(runId: string): Promise<StoredAssignment[]> {
    return this.request(`/triage/assignments?run=${runId}`);
  }

  createRevision(payload: {
    template_id: string;
    from_revision: number;
    addressed_category_ids: string[];
    change_note: string;
  }): Promise<{ position: number; to_revision: number }> {
    return this.post("/triage/revisions", payload);
  }

  getRevisions(templateId?: string): Promise<RevisionEntry[]> {
    const suffix = templateId ? `?template=${templateId}` : "";
    return this.request(`/triage/revisions${suffix}`);
  }
}
