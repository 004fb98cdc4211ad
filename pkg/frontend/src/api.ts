import type {
  CandidateDetail,
  LabelPayload,
  QueueResponse,
  SubmitResponse,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(message: string, readonly status: number | null = null) {
    super(message);
    this.name = "ApiError";
  }
}

const errorMessage = async (response: Response): Promise<string> => {
  try {
    const body = await response.json();
    if (body && typeof body.error === "string") {
      return body.error;
    }
  } catch {
    // non-JSON error body, fall through to the status line
  }
  return `request failed with status ${response.status}`;
};

/** Thin typed client over the review-service routes. */
export class ReviewApi {
  private readonly fetchImpl: FetchLike;

  constructor(readonly baseUrl: string = "", fetchImpl?: FetchLike) {
    // Default to the global fetch bound to globalThis; an injected stub
    // keeps the unit tests free of sockets.
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(`service unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      throw new ApiError(await errorMessage(response), response.status);
    }
    return response;
  }

  async queue(status?: "pending" | "labeled"): Promise<QueueResponse> {
    const suffix = status ? `?status=${status}` : "";
    const response = await this.request(`/api/queue${suffix}`);
    return (await response.json()) as QueueResponse;
  }

  async candidate(candidateId: string): Promise<CandidateDetail> {
    const response = await this.request(
      `/api/candidates/${encodeURIComponent(candidateId)}`,
    );
    return (await response.json()) as CandidateDetail;
  }

  async submitLabel(payload: LabelPayload): Promise<SubmitResponse> {
    const response = await this.request("/api/labels", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    return (await response.json()) as SubmitResponse;
  }

  /**
   * Raw body of GET /api/report. Kept as text so the report view renders
   * from the exact bytes the server sent; parsing happens at the call site.
   */
  async reportText(): Promise<string> {
    const response = await this.request("/api/report");
    return await response.text();
  }
}
