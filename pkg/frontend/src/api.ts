/**
 * Typed client for the fieldfuse query service. All similarity math stays
 * on the server; this module only decodes wire payloads.
 */

export interface SceneSummary {
  id: string;
  num_points: number;
  feature_dim: number;
}

export interface CloudPayload {
  positions: Float32Array; // x,y,z triples, stride applied server-side
  numPoints: number;
  stride: number;
  count: number;
}

export interface QueryPayload {
  scores: Uint8Array;
  stride: number;
}

export interface SegmentPayload {
  labels: Uint16Array;
  legend: string[];
}

/** A non-2xx response; `body` carries the server's message verbatim. */
export class ApiError extends Error {
  constructor(public readonly status: number, public readonly body: string) {
    super(`HTTP ${status}: ${body}`);
  }
}

/** The service could not be reached at all (offline, refused, DNS). */
export class OfflineError extends Error {
  constructor(cause: unknown) {
    super(`service unreachable: ${String(cause)}`);
  }
}

export type FetchFn = (input: string, init?: RequestInit) => Promise<Response>;

export function decodeBase64(b64: string): Uint8Array {
  const raw = atob(b64);
  const out = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) {
    out[i] = raw.charCodeAt(i);
  }
  return out;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchFn = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new OfflineError(err);
    }
    const text = await response.text();
    if (!response.ok) {
      throw new ApiError(response.status, text);
    }
    return JSON.parse(text);
  }

  async listScenes(): Promise<SceneSummary[]> {
    return (await this.request("/v1/scenes")) as SceneSummary[];
  }

  async fetchCloud(sceneId: string, stride: number): Promise<CloudPayload> {
    const body = (await this.request(
      `/v1/scenes/${encodeURIComponent(sceneId)}/cloud?stride=${stride}`,
    )) as { positions_b64: string; num_points: number; stride: number; count: number };
    const bytes = decodeBase64(body.positions_b64);
    return {
      positions: new Float32Array(bytes.buffer, bytes.byteOffset, bytes.length / 4),
      numPoints: body.num_points,
      stride: body.stride,
      count: body.count,
    };
  }

  async query(sceneId: string, text: string, stride: number): Promise<QueryPayload> {
    const body = (await this.request(
      `/v1/scenes/${encodeURIComponent(sceneId)}/query?stride=${stride}`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ text }),
      },
    )) as { scores_u8: string; stride: number };
    return { scores: decodeBase64(body.scores_u8), stride: body.stride };
  }

  async segmentView(
    sceneId: string,
    labels: string[],
    engineerPrompts: boolean,
    stride: number,
  ): Promise<SegmentPayload> {
    const body = (await this.request(
      `/v1/scenes/${encodeURIComponent(sceneId)}/segment?stride=${stride}`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ labels, engineer_prompts: engineerPrompts }),
      },
    )) as { labels_u16: string; legend: string[] };
    const bytes = decodeBase64(body.labels_u16);
    return {
      labels: new Uint16Array(bytes.buffer, bytes.byteOffset, bytes.length / 2),
      legend: body.legend,
    };
  }
}
