/** Re-exports plus the small response-to-grid glue used by the controller. */
import type { GridSpec, InferResponse } from "./api.js";

export { decodeF32, ServiceClient, ServiceError } from "./api.js";
export type {
  InferRequest,
  InferResponse,
  MaterialTable,
  MeltpoolSummary,
  ModelInfo,
  ProcessMapRow,
} from "./api.js";

export function Field3GridOf(response: InferResponse): GridSpec {
  const g = response.grid;
  return { nx: g.nx, ny: g.ny, nz: g.nz, dx: g.dx };
}
