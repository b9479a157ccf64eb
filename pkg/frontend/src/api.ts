/** Thin typed client for the /api/v1 endpoints with stale-response
 * discarding: each view keys its requests with an increasing sequence
 * and drops answers that arrive out of order. */

import {
  FilterRequest,
  FilterResultPayload,
  ModelInfo,
  NodesResponse,
  PcpPayload,
  TrainingStatus,
  VariablesResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function check(response: Response): Promise<any> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    throw new ApiError(response.status, body.detail ?? response.statusText);
  }
  return body;
}

export class ApiClient {
  sessionId: string | null = null;

  constructor(private base: string = "/api/v1",
              private fetcher: typeof fetch = fetch.bind(globalThis)) {}

  private url(path: string): string {
    return `${this.base}/sessions/${this.sessionId}${path}`;
  }

  async createSession(): Promise<string> {
    const body = await check(await this.fetcher(`${this.base}/sessions`,
                                                { method: "POST" }));
    this.sessionId = body.id;
    return body.id;
  }

  async uploadCsv(data: Blob | string): Promise<VariablesResponse> {
    return check(await this.fetcher(this.url("/dataset"), {
      method: "POST",
      headers: { "content-type": "text/csv" },
      body: data,
    }));
  }

  async variables(): Promise<VariablesResponse> {
    return check(await this.fetcher(this.url("/variables")));
  }

  async patchVariable(name: string, patch: Record<string, unknown>):
      Promise<VariablesResponse> {
    return check(await this.fetcher(
      this.url(`/variables/${encodeURIComponent(name)}`), {
        method: "PATCH",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(patch),
      }));
  }

  async setThreshold(value: number | "mid" | "median"):
      Promise<VariablesResponse> {
    return check(await this.fetcher(this.url("/threshold"), {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ threshold: value }),
    }));
  }

  async startTraining(config: Record<string, number>): Promise<number> {
    const body = await check(await this.fetcher(this.url("/train"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(config),
    }));
    return body.jobId;
  }

  async trainingStatus(): Promise<TrainingStatus> {
    return check(await this.fetcher(this.url("/train/status")));
  }

  async models(): Promise<ModelInfo[]> {
    const body = await check(await this.fetcher(this.url("/models")));
    return body.models;
  }

  async nodes(modelId: number, inputBins: number, targetBins: number,
              coverageMode: string): Promise<NodesResponse> {
    const qs = `inputBins=${inputBins}&targetBins=${targetBins}` +
      `&coverageMode=${coverageMode}`;
    return check(await this.fetcher(
      this.url(`/models/${modelId}/nodes?${qs}`)));
  }

  async pcp(modelId: number, node: number,
            membershipThreshold = 0.1): Promise<PcpPayload> {
    return check(await this.fetcher(this.url(
      `/models/${modelId}/nodes/${node}/pcp` +
      `?membershipThreshold=${membershipThreshold}`)));
  }

  async evalFilter(request: FilterRequest): Promise<FilterResultPayload> {
    return check(await this.fetcher(this.url("/filters/eval"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    }));
  }
}

/** Drops responses that arrive after a newer request was issued. */
export class LatestOnly {
  private seq = 0;

  async run<T>(task: () => Promise<T>): Promise<T | null> {
    const ticket = ++this.seq;
    const result = await task();
    return ticket === this.seq ? result : null;
  }
}
