/** Thin typed client over the generation service's JSON endpoints. */
import {
  ApiErrorBody,
  ConditionSetJson,
  GenerateRequest,
  GenerateResponse,
  LayoutJson,
  MetricsResponse,
  SchemaResponse,
  SessionCreateResponse,
  SessionStepResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    readonly detail: string,
  ) {
    super(`${code}: ${detail}`);
  }
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = globalThis.fetch.bind(globalThis),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body !== undefined ? { "Content-Type": "application/json" } : {},
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const payload = await resp.json();
    if (!resp.ok) {
      const err = payload as ApiErrorBody;
      throw new ApiError(resp.status, err.error ?? "unknown", err.detail ?? "");
    }
    return payload as T;
  }

  schema(): Promise<SchemaResponse> {
    return this.request("GET", "/schema");
  }

  generate(req: GenerateRequest): Promise<GenerateResponse> {
    return this.request("POST", "/generate", req);
  }

  extractConditions(
    layout: LayoutJson,
    prompt?: string[] | null,
  ): Promise<{ conditions: ConditionSetJson }> {
    const body: Record<string, unknown> = { layout };
    if (prompt !== undefined) body.prompt = prompt;
    return this.request("POST", "/extract-conditions", body);
  }

  metrics(
    generated: LayoutJson,
    conditions: ConditionSetJson | null,
  ): Promise<MetricsResponse> {
    return this.request("POST", "/metrics", { generated, conditions });
  }

  createSession(): Promise<SessionCreateResponse> {
    return this.request("POST", "/session", {});
  }

  sessionStep(
    sid: string,
    req: Omit<GenerateRequest, "count">,
  ): Promise<SessionStepResponse> {
    return this.request("POST", `/session/${sid}/step`, req);
  }

  getSession(sid: string): Promise<{ session_id: string; history: unknown[] }> {
    return this.request("GET", `/session/${sid}`);
  }
}
