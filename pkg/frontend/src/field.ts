/** Flat field arrays in the service layout (x slowest, z fastest) plus the
 * 2D slice extraction the viewers render. */
import type { GridSpec } from "./api.js";

export class Field3 {
  constructor(readonly grid: GridSpec, readonly values: Float32Array) {
    const n = grid.nx * grid.ny * grid.nz;
    if (values.length !== n) {
      throw new Error(`field length ${values.length} != grid cells ${n}`);
    }
  }

  at(ix: number, iy: number, iz: number): number {
    const { nx, ny, nz } = this.grid;
    if (ix < 0 || ix >= nx || iy < 0 || iy >= ny || iz < 0 || iz >= nz) {
      throw new Error(`index (${ix},${iy},${iz}) outside ${nx}x${ny}x${nz}`);
    }
    return this.values[(ix * ny + iy) * nz + iz];
  }
}

export interface Slice2 {
  /** rows x cols values; rows advance along the first retained axis. */
  rows: number;
  cols: number;
  values: Float64Array;
  axes: [string, string];
  index: number;
}

/** x-z plane at a fixed y index (the view along the scan direction). */
export function longitudinalSlice(field: Field3, iy?: number): Slice2 {
  const { nx, ny, nz } = field.grid;
  const y = iy ?? Math.floor(ny / 2);
  const values = new Float64Array(nx * nz);
  for (let ix = 0; ix < nx; ix++) {
    for (let iz = 0; iz < nz; iz++) {
      values[ix * nz + iz] = field.at(ix, y, iz);
    }
  }
  return { rows: nx, cols: nz, values, axes: ["x", "z"], index: y };
}

/** y-z plane at a fixed x index (the cross-track view). */
export function transverseSlice(field: Field3, ix: number): Slice2 {
  const { ny, nz } = field.grid;
  const values = new Float64Array(ny * nz);
  for (let iy = 0; iy < ny; iy++) {
    for (let iz = 0; iz < nz; iz++) {
      values[iy * nz + iz] = field.at(ix, iy, iz);
    }
  }
  return { rows: ny, cols: nz, values, axes: ["y", "z"], index: ix };
}

/** x index with the most melt-pool cells (pure presentation bookkeeping:
 * derived from the returned mask, no physics). Falls back to mid-x. */
export function poolCenterX(mask: Field3): number {
  const { nx, ny, nz } = mask.grid;
  let best = -1;
  let bestCount = 0;
  for (let ix = 0; ix < nx; ix++) {
    let count = 0;
    for (let iy = 0; iy < ny; iy++) {
      for (let iz = 0; iz < nz; iz++) {
        if (mask.at(ix, iy, iz) >= 0.5) count++;
      }
    }
    if (count > bestCount) {
      bestCount = count;
      best = ix;
    }
  }
  return best >= 0 ? best : Math.floor(nx / 2);
}
