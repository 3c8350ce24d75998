import { describe, expect, it } from "vitest";
import type { Slice2 } from "../src/field.js";
import { contourCellCount, marchingSquares } from "../src/marchingSquares.js";

function slice(rows: number, cols: number, fill: (r: number, c: number) => number): Slice2 {
  const values = new Float64Array(rows * cols);
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) values[r * cols + c] = fill(r, c);
  }
  return { rows, cols, values, axes: ["x", "z"], index: 0 };
}

/** Independent oracle: enumerate cells straddling the level and, per cell,
 * count crossed edges the slow way (adjacent corner sign changes). */
function oracleSegmentsPerCell(s: Slice2, level: number): Map<string, number> {
  const v = (r: number, c: number) => s.values[r * s.cols + c];
  const out = new Map<string, number>();
  for (let r = 0; r < s.rows - 1; r++) {
    for (let c = 0; c < s.cols - 1; c++) {
      const corners = [v(r, c), v(r, c + 1), v(r + 1, c + 1), v(r + 1, c)];
      const signs = corners.map((x) => x >= level);
      let crossings = 0;
      for (let i = 0; i < 4; i++) {
        if (signs[i] !== signs[(i + 1) % 4]) crossings++;
      }
      if (crossings > 0) out.set(`${r},${c}`, crossings / 2);
    }
  }
  return out;
}

describe("marchingSquares", () => {
  it("empty when the level misses the data", () => {
    const s = slice(4, 4, () => 1.0);
    expect(marchingSquares(s, 2.0)).toHaveLength(0);
    expect(contourCellCount(s, 2.0)).toBe(0);
  });

  it("single straddling column produces one segment per cell row", () => {
    const s = slice(3, 4, (_r, c) => (c < 2 ? 0.0 : 1.0));
    const segs = marchingSquares(s, 0.5);
    expect(segs).toHaveLength(2); // (rows-1) cells straddle in one column
    for (const seg of segs) {
      // crossing interpolates to the middle of the 1->2 column edge pair
      expect(seg.x0).toBeCloseTo(1.5, 12);
      expect(seg.x1).toBeCloseTo(1.5, 12);
    }
  });

  it("closed blob: every contour cell matches the per-cell oracle", () => {
    const s = slice(20, 24, (r, c) => {
      const d2 = (r - 9.3) ** 2 + (c - 11.7) ** 2;
      return Math.exp(-d2 / 18.0);
    });
    const level = 0.5;
    const segs = marchingSquares(s, level);
    const perCell = new Map<string, number>();
    for (const seg of segs) {
      // attribute each segment to its cell by its midpoint
      const r = Math.min(Math.floor((seg.y0 + seg.y1) / 2), s.rows - 2);
      const c = Math.min(Math.floor((seg.x0 + seg.x1) / 2), s.cols - 2);
      const key = `${r},${c}`;
      perCell.set(key, (perCell.get(key) ?? 0) + 1);
    }
    const oracle = oracleSegmentsPerCell(s, level);
    expect(contourCellCount(s, level)).toBe(oracle.size);
    expect(perCell.size).toBe(oracle.size);
    for (const [key, n] of oracle) {
      expect(perCell.get(key), `cell ${key}`).toBe(n);
    }
  });

  it("random field: contour cell count equals the oracle count", () => {
    let seed = 12345;
    const rand = () => {
      seed = (seed * 1103515245 + 12345) % 2147483648;
      return seed / 2147483648;
    };
    const s = slice(15, 17, () => rand());
    for (const level of [0.2, 0.5, 0.8]) {
      expect(contourCellCount(s, level)).toBe(
        oracleSegmentsPerCell(s, level).size,
      );
    }
  });

  it("segment endpoints interpolate linearly on edges", () => {
    const s = slice(2, 2, (r, c) => (r === 0 && c === 0 ? 1.0 : 0.0));
    const segs = marchingSquares(s, 0.25);
    expect(segs).toHaveLength(1);
    const [seg] = segs;
    // crossing at 3/4 of the way from corner (value 1) toward 0 corners
    const xs = [seg.x0, seg.x1].sort();
    const ys = [seg.y0, seg.y1].sort();
    expect(xs[0]).toBeCloseTo(0.0, 12);
    expect(ys[0]).toBeCloseTo(0.0, 12);
    expect(xs[1]).toBeCloseTo(0.75, 12);
    expect(ys[1]).toBeCloseTo(0.75, 12);
  });

  it("saddle cells contribute two segments", () => {
    const s = slice(2, 2, (r, c) => ((r + c) % 2 === 0 ? 1.0 : 0.0));
    const segs = marchingSquares(s, 0.5);
    expect(segs).toHaveLength(2);
  });
});
