/**
 * Fetch-based client for the signvec query service.
 *
 * Error contract mirrors the service: ApiError carries the HTTP status and
 * the server's message so the UI can distinguish duplicates (409), bad
 * documents (400), and normalization failures (422) from network loss.
 */

import {
  parseLabels,
  parsePoseseqDocument,
  parseQueryResponse,
  parseSupportInfo,
  type PoseseqDocument,
  type QueryResponse,
  type SupportInfo,
} from "./schema.js";

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class ServiceUnreachableError extends Error {}

async function readError(response: Response): Promise<ApiError> {
  let message = `${response.status} ${response.statusText}`;
  try {
    const body: unknown = await response.json();
    if (typeof body === "object" && body !== null && "error" in body) {
      message = String((body as { error: unknown }).error);
    }
  } catch {
    // keep the status line
  }
  return new ApiError(response.status, message);
}

export class ApiClient {
  constructor(readonly baseUrl: string) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let response: Response;
    try {
      response = await fetch(`${this.baseUrl}${path}`, init);
    } catch (e) {
      throw new ServiceUnreachableError(
        `service unreachable at ${this.baseUrl}: ${(e as Error).message}`,
      );
    }
    if (!response.ok) {
      throw await readError(response);
    }
    return response.json();
  }

  async health(): Promise<boolean> {
    try {
      const body = await this.request("/healthz");
      return (
        typeof body === "object" && body !== null &&
        (body as { status?: unknown }).status === "ok"
      );
    } catch {
      return false;
    }
  }

  async info(): Promise<SupportInfo> {
    return parseSupportInfo(await this.request("/v1/support/info"));
  }

  async labels(): Promise<string[]> {
    return parseLabels(await this.request("/v1/labels"));
  }

  async query(
    document: PoseseqDocument,
    k: number,
    temperature?: number,
  ): Promise<QueryResponse> {
    const body: Record<string, unknown> = { poseseq: document, k };
    if (temperature !== undefined) {
      body.temperature = temperature;
    }
    const data = await this.request("/v1/query", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return parseQueryResponse(data);
  }

  async addSign(label: string, document: PoseseqDocument): Promise<SupportInfo> {
    const data = await this.request("/v1/support/add", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ label, poseseq: document }),
    });
    return parseSupportInfo(data);
  }
}

export { parsePoseseqDocument };
