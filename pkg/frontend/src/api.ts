/** Thin fetch client for the control service. Service-side validation
 * errors and network failures surface as distinct types so the UI can show
 * an inline message for one and a retry affordance for the other. */

import type {
  GenerateRequest,
  GenerateResponse,
  ModelsResponse,
  ScoreResponse,
  SessionRecord,
} from "./types.js";

export class ServiceError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(detail);
    this.name = "ServiceError";
    this.status = status;
  }
}

export class NetworkError extends Error {
  constructor(cause: unknown) {
    super(`service unreachable: ${String(cause)}`);
    this.name = "NetworkError";
  }
}

async function parseError(response: Response): Promise<ServiceError> {
  let detail = `${response.status} ${response.statusText}`;
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") detail = body.detail;
    else if (body.detail !== undefined) detail = JSON.stringify(body.detail);
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ServiceError(response.status, detail);
}

export class ConsoleClient {
  readonly baseUrl: string;

  constructor(baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await fetch(this.baseUrl + path, init);
    } catch (cause) {
      throw new NetworkError(cause);
    }
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  models(): Promise<ModelsResponse> {
    return this.request<ModelsResponse>("/models");
  }

  generate(request: GenerateRequest): Promise<GenerateResponse> {
    return this.post<GenerateResponse>("/generate", request);
  }

  score(text: string, attributes?: string[]): Promise<ScoreResponse> {
    return this.post<ScoreResponse>("/score", { text, attributes });
  }

  session(sessionId: string): Promise<SessionRecord> {
    return this.request<SessionRecord>(`/sessions/${encodeURIComponent(sessionId)}`);
  }
}
