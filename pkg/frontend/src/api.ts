/** Typed client for the /v1 inference service. */

export interface GridSpec {
  nx: number;
  ny: number;
  nz: number;
  dx: number;
}

export interface MaterialTable {
  eta: number;
  rho: number;
  cp: number;
  dT_m: number;
  diffusivity: number;
  sigma_beam: number;
  t_solidus: number;
  t_liquidus: number;
  t_boil: number;
}

export interface ModelInfo {
  parameter_count: number;
  config: { material: MaterialTable; modes: number[]; [k: string]: unknown };
  default_grid: { nx: number; ny: number; nz: number; dx: number };
  trained_window: {
    power_w: [number, number];
    v_scan_m_s: [number, number];
  } | null;
}

export interface MeltpoolSummary {
  cells: number;
  length_cells: number;
  width_cells: number;
  depth_cells: number;
  length_m: number;
  width_m: number;
  depth_m: number;
  max_T_metal_k: number | null;
}

export interface InferRequest {
  power_w: number;
  v_scan_m_s: number;
  grid?: { nx: number; ny: number; nz: number; dx_m: number };
  fields?: string[];
  encoding?: "base64-f32" | "json-stats";
}

export interface InferResponse {
  grid: { nx: number; ny: number; nz: number; dx: number };
  layout: string;
  encoding: string;
  power_w: number;
  v_scan_m_s: number;
  h_star: number;
  extrapolation: boolean;
  fields: Record<string, string>;
  meltpool: MeltpoolSummary;
}

export interface ProcessMapRow {
  id: string;
  power_w: number;
  v_scan_m_s: number;
  h_star: number;
  [metric: string]: number | string;
}

export class ServiceError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
  }
}

/** Decode a base64 little-endian float32 payload into a Float32Array. */
export function decodeF32(b64: string): Float32Array {
  const binary = typeof atob === "function"
    ? atob(b64)
    : Buffer.from(b64, "base64").toString("binary");
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) bytes[i] = binary.charCodeAt(i);
  if (bytes.length % 4 !== 0) {
    throw new ServiceError(`field payload of ${bytes.length} bytes is not f32`);
  }
  const view = new DataView(bytes.buffer);
  const out = new Float32Array(bytes.length / 4);
  for (let i = 0; i < out.length; i++) out[i] = view.getFloat32(4 * i, true);
  return out;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async getJson<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchImpl(this.baseUrl + path, init);
    } catch (err) {
      throw new ServiceError(`service unreachable: ${String(err)}`);
    }
    if (!resp.ok) {
      const text = await resp.text().catch(() => "");
      throw new ServiceError(`${path} -> ${resp.status}: ${text}`, resp.status);
    }
    return (await resp.json()) as T;
  }

  modelInfo(): Promise<ModelInfo> {
    return this.getJson<ModelInfo>("/v1/model/info");
  }

  infer(req: InferRequest, signal?: AbortSignal): Promise<InferResponse> {
    return this.getJson<InferResponse>("/v1/infer", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
      signal,
    });
  }

  async processMap(metric?: string): Promise<ProcessMapRow[]> {
    const query = metric ? `?metric=${encodeURIComponent(metric)}` : "";
    const body = await this.getJson<{ rows: ProcessMapRow[] }>(
      `/v1/process-map${query}`,
    );
    return body.rows;
  }

  healthy(): Promise<boolean> {
    return this.getJson<{ status: string }>("/v1/healthz")
      .then((b) => b.status === "ok")
      .catch(() => false);
  }
}
