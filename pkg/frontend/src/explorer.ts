/** Explorer controller: one selected process point -> one /infer call ->
 * slice render data plus a history entry. All numbers shown come from the
 * service response; everything computed here is presentation (slice
 * extraction, contours, color mapping inputs). */
import {
  decodeF32,
  Field3GridOf,
  InferResponse,
  ServiceClient,
} from "./apiHelpers.js";
import { Field3, longitudinalSlice, poolCenterX, Slice2, transverseSlice } from "./field.js";
import { marchingSquares, Segment } from "./marchingSquares.js";
import { LatestWins, RateLimiter } from "./requestGate.js";
import { SessionState } from "./session.js";

export interface ContourSet {
  meltpool: Segment[]; // fl = 0.5
  gas: Segment[];      // alpha = 0.5
}

export interface SliceRender {
  slice: Slice2;
  contours: ContourSet;
}

export interface ExplorerView {
  response: InferResponse;
  longitudinal: SliceRender;
  transverse: SliceRender;
  superResolved: boolean;
}

export interface SelectOptions {
  superResolve?: boolean;
  bypassRateLimit?: boolean;
}

export class ExplorerController {
  readonly session: SessionState;
  private readonly gate = new LatestWins<InferResponse>();
  private readonly limiter: RateLimiter;
  offline = false;

  constructor(
    private readonly client: ServiceClient,
    session?: SessionState,
    maxRequestsPerSecond = 5,
    now?: () => number,
  ) {
    this.session = session ?? new SessionState(client.baseUrl);
    this.limiter = new RateLimiter(maxRequestsPerSecond, now);
  }

  /** Select a process point; resolves the render bundle, or null when the
   * request was rate-limited or superseded by a newer selection. */
  async select(
    powerW: number,
    vScan: number,
    opts: SelectOptions = {},
  ): Promise<ExplorerView | null> {
    if (!opts.bypassRateLimit && !this.limiter.tryAcquire()) return null;

    let response: InferResponse | null;
    try {
      response = await this.gate.run((signal) => {
        const grid = opts.superResolve ? this.superResolvedGrid() : undefined;
        return this.client.infer(
          {
            power_w: powerW,
            v_scan_m_s: vScan,
            fields: ["T", "alpha", "fl", "meltpool_mask"],
            encoding: "base64-f32",
            ...(grid ? { grid } : {}),
          },
          signal,
        );
      });
    } catch (err) {
      this.offline = true;
      throw err;
    }
    this.offline = false;
    if (response === null) return null; // superseded

    const view = buildView(response, Boolean(opts.superResolve));
    this.session.append({
      power_w: response.power_w,
      v_scan_m_s: response.v_scan_m_s,
      h_star: response.h_star,
      extrapolation: response.extrapolation,
      meltpool: response.meltpool,
    });
    return view;
  }

  private defaultGrid: { nx: number; ny: number; nz: number; dx_m: number } | null =
    null;

  setDefaultGrid(grid: { nx: number; ny: number; nz: number; dx: number }): void {
    this.defaultGrid = { nx: grid.nx, ny: grid.ny, nz: grid.nz, dx_m: grid.dx };
  }

  private superResolvedGrid() {
    if (!this.defaultGrid) {
      throw new Error("default grid unknown; fetch /v1/model/info first");
    }
    return {
      nx: this.defaultGrid.nx * 2,
      ny: this.defaultGrid.ny * 2,
      nz: this.defaultGrid.nz * 2,
      dx_m: this.defaultGrid.dx_m / 2,
    };
  }
}

/** Pure assembly of render data from a decoded response. */
export function buildView(response: InferResponse, superResolved: boolean): ExplorerView {
  const grid = Field3GridOf(response);
  const need = ["T", "alpha", "fl"];
  for (const name of need) {
    if (!(name in response.fields)) {
      throw new Error(`response is missing field ${name}`);
    }
  }
  const T = new Field3(grid, decodeF32(response.fields.T));
  const alpha = new Field3(grid, decodeF32(response.fields.alpha));
  const fl = new Field3(grid, decodeF32(response.fields.fl));
  const mask = response.fields.meltpool_mask
    ? new Field3(grid, decodeF32(response.fields.meltpool_mask))
    : fl;

  const iy = Math.floor(grid.ny / 2);
  const ixPool = poolCenterX(mask);
  const longitudinal = renderSlice(T, alpha, fl, "longitudinal", iy);
  const transverse = renderSlice(T, alpha, fl, "transverse", ixPool);
  return { response, longitudinal, transverse, superResolved };
}

function renderSlice(
  T: Field3,
  alpha: Field3,
  fl: Field3,
  kind: "longitudinal" | "transverse",
  index: number,
): SliceRender {
  const cut = kind === "longitudinal" ? longitudinalSlice : transverseSlice;
  const tSlice = cut(T, index);
  const aSlice = cut(alpha, index);
  const fSlice = cut(fl, index);
  return {
    slice: tSlice,
    contours: {
      meltpool: marchingSquares(fSlice, 0.5),
      gas: marchingSquares(aSlice, 0.5),
    },
  };
}
