import type {
  BatchView,
  Correction,
  InstructionFields,
  RoundStatus,
  TaskPayload,
  Verdict,
  VerdictResult,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }

  get staleLease(): boolean {
    return this.status === 409;
  }
}

async function parseError(resp: Response): Promise<never> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(resp.status, detail);
}

export class ReviewClient {
  constructor(readonly baseUrl: string) {}

  private async get<T>(path: string): Promise<T> {
    const resp = await fetch(this.baseUrl + path);
    if (!resp.ok) await parseError(resp);
    return resp.json() as Promise<T>;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const resp = await fetch(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) await parseError(resp);
    return resp.json() as Promise<T>;
  }

  health(): Promise<{ ok: boolean }> {
    return this.get("/health");
  }

  listBatches(): Promise<BatchView[]> {
    return this.get("/batches");
  }

  batch(batchId: string): Promise<BatchView> {
    return this.get(`/batches/${batchId}`);
  }

  openBatch(
    domain: string,
    recordIds: string[],
    minRounds = 3,
    rngSeed = 0,
  ): Promise<BatchView> {
    return this.post("/batches", {
      domain,
      record_ids: recordIds,
      min_rounds: minRounds,
      rng_seed: rngSeed,
    });
  }

  nextTask(batchId: string, reviewerId: string): Promise<TaskPayload | RoundStatus> {
    const params = new URLSearchParams({ reviewer_id: reviewerId });
    return this.get(`/batches/${batchId}/next-task?${params}`);
  }

  submitVerdict(
    taskId: string,
    batchId: string,
    reviewerId: string,
    verdict: Verdict,
    correction?: Correction,
  ): Promise<VerdictResult> {
    return this.post(`/tasks/${taskId}/verdict`, {
      batch_id: batchId,
      reviewer_id: reviewerId,
      verdict,
      correction: correction ?? null,
    });
  }

  advance(batchId: string): Promise<BatchView> {
    return this.post(`/batches/${batchId}/advance`, {});
  }

  records(filter: { review_state?: string; domain?: string } = {}): Promise<InstructionFields[]> {
    const params = new URLSearchParams();
    if (filter.review_state) params.set("review_state", filter.review_state);
    if (filter.domain) params.set("domain", filter.domain);
    const suffix = params.size ? `?${params}` : "";
    return this.get(`/records${suffix}`);
  }

  blobUrl(contentId: string): string {
    return `${this.baseUrl}/blobs/${contentId}`;
  }
}
