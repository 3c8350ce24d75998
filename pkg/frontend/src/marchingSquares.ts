/** Marching-squares contour extraction on a 2D slice.
 *
 * Cells are squares between four neighboring sample points; each cell
 * contributes 0, 1, or 2 line segments of the iso-line at the requested
 * level, with linear interpolation along the crossed edges. The ambiguous
 * saddle cases (5 and 10) are resolved by the cell-center average, the
 * usual disambiguation.
 */
import type { Slice2 } from "./field.js";

export interface Segment {
  x0: number;
  y0: number;
  x1: number;
  y1: number;
}

function lerp(level: number, a: number, b: number): number {
  return a === b ? 0.5 : (level - a) / (b - a);
}

export function marchingSquares(slice: Slice2, level: number): Segment[] {
  const { rows, cols, values } = slice;
  const v = (r: number, c: number) => values[r * cols + c];
  const segments: Segment[] = [];

  for (let r = 0; r < rows - 1; r++) {
    for (let c = 0; c < cols - 1; c++) {
      const tl = v(r, c);
      const tr = v(r, c + 1);
      const br = v(r + 1, c + 1);
      const bl = v(r + 1, c);
      let caseIndex = 0;
      if (tl >= level) caseIndex |= 8;
      if (tr >= level) caseIndex |= 4;
      if (br >= level) caseIndex |= 2;
      if (bl >= level) caseIndex |= 1;
      if (caseIndex === 0 || caseIndex === 15) continue;

      // edge crossing points in (col, row) coordinates
      const top = { x: c + lerp(level, tl, tr), y: r };
      const right = { x: c + 1, y: r + lerp(level, tr, br) };
      const bottom = { x: c + lerp(level, bl, br), y: r + 1 };
      const left = { x: c, y: r + lerp(level, tl, bl) };
      const add = (a: { x: number; y: number }, b: { x: number; y: number }) =>
        segments.push({ x0: a.x, y0: a.y, x1: b.x, y1: b.y });

      switch (caseIndex) {
        case 1: case 14: add(left, bottom); break;
        case 2: case 13: add(bottom, right); break;
        case 3: case 12: add(left, right); break;
        case 4: case 11: add(top, right); break;
        case 6: case 9: add(top, bottom); break;
        case 7: case 8: add(left, top); break;
        case 5: case 10: {
          const center = (tl + tr + br + bl) / 4;
          const centerHigh = center >= level;
          const tlHigh = caseIndex === 10;
          if (tlHigh === centerHigh) {
            add(left, top);
            add(bottom, right);
          } else {
            add(left, bottom);
            add(top, right);
          }
          break;
        }
      }
    }
  }
  return segments;
}

/** Number of distinct cells contributing at least one contour segment. */
export function contourCellCount(slice: Slice2, level: number): number {
  const { rows, cols, values } = slice;
  const v = (r: number, c: number) => values[r * cols + c];
  let count = 0;
  for (let r = 0; r < rows - 1; r++) {
    for (let c = 0; c < cols - 1; c++) {
      const corners = [v(r, c), v(r, c + 1), v(r + 1, c + 1), v(r + 1, c)];
      const high = corners.filter((x) => x >= level).length;
      if (high > 0 && high < 4) count++;
    }
  }
  return count;
}
