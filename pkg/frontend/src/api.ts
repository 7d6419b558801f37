import type {
  ArmComparisonDoc,
  AuditEvent,
  DeltaReport,
  DisagreementPage,
  PromptInfo,
} from "./types";

export type FetchFn = typeof fetch;

/** Service reachable but refused the request (4xx/5xx). */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

/** Network-level failure: the service is down or unreachable. */
export class ApiOffline extends Error {}

export interface DisagreementFilter {
  status?: string | null;
  promptVersion?: number | null;
}

export class ApiClient {
  constructor(
    private readonly fetchFn: FetchFn = (...a) => fetch(...a),
    private readonly base: string = "",
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let res: Response;
    try {
      res = await this.fetchFn(this.base + path, init);
    } catch {
      throw new ApiOffline(`service unreachable at ${path}`);
    }
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = (await res.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(res.status, detail);
    }
    return res.json();
  }

  async tasks(): Promise<string[]> {
    const doc = (await this.request("/api/v1/tasks")) as { tasks: string[] };
    return doc.tasks;
  }

  async disagreements(
    task: string,
    filter: DisagreementFilter = {},
  ): Promise<DisagreementPage> {
    const params = new URLSearchParams();
    if (filter.status != null) params.set("status", filter.status);
    if (filter.promptVersion != null) {
      params.set("prompt_version", String(filter.promptVersion));
    }
    const qs = params.toString();
    const path = `/api/v1/tasks/${encodeURIComponent(task)}/disagreements${qs ? "?" + qs : ""}`;
    return (await this.request(path)) as DisagreementPage;
  }

  async setStatus(
    task: string,
    sampleId: string,
    status: string,
    note = "",
    actor = "",
  ): Promise<AuditEvent> {
    const path =
      `/api/v1/tasks/${encodeURIComponent(task)}` +
      `/disagreements/${encodeURIComponent(sampleId)}/status`;
    return (await this.request(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ status, note, actor }),
    })) as AuditEvent;
  }

  async prompts(task: string): Promise<PromptInfo[]> {
    const doc = (await this.request(
      `/api/v1/tasks/${encodeURIComponent(task)}/prompts`,
    )) as { versions: PromptInfo[] };
    return doc.versions;
  }

  async promptDelta(
    task: string,
    versionA: number,
    versionB: number,
  ): Promise<DeltaReport> {
    const path =
      `/api/v1/tasks/${encodeURIComponent(task)}/prompt-delta` +
      `?version_a=${versionA}&version_b=${versionB}`;
    return (await this.request(path)) as DeltaReport;
  }

  async arms(task: string): Promise<ArmComparisonDoc> {
    return (await this.request(
      `/api/v1/tasks/${encodeURIComponent(task)}/arms`,
    )) as ArmComparisonDoc;
  }

  async audit(task?: string): Promise<AuditEvent[]> {
    const qs = task ? `?task=${encodeURIComponent(task)}` : "";
    const doc = (await this.request(`/api/v1/audit${qs}`)) as {
      events: AuditEvent[];
    };
    return doc.events;
  }
}
