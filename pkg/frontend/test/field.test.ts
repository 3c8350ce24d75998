import { describe, expect, it } from "vitest";
import { decodeF32 } from "../src/api.js";
import { Field3, longitudinalSlice, poolCenterX, transverseSlice } from "../src/field.js";

const GRID = { nx: 3, ny: 4, nz: 5, dx: 1e-5 };

function rampField(): Field3 {
  const values = new Float32Array(3 * 4 * 5);
  for (let i = 0; i < values.length; i++) values[i] = i;
  return new Field3(GRID, values);
}

describe("Field3", () => {
  it("uses the x-slowest z-fastest layout", () => {
    const f = rampField();
    // flat index (ix * ny + iy) * nz + iz, enumerated by hand
    expect(f.at(0, 0, 0)).toBe(0);
    expect(f.at(0, 0, 4)).toBe(4);
    expect(f.at(0, 1, 0)).toBe(5);
    expect(f.at(1, 0, 0)).toBe(20);
    expect(f.at(2, 3, 4)).toBe(59);
  });

  it("rejects wrong lengths", () => {
    expect(() => new Field3(GRID, new Float32Array(10))).toThrowError();
  });

  it("rejects out-of-range indices", () => {
    expect(() => rampField().at(3, 0, 0)).toThrowError();
  });
});

describe("slices", () => {
  it("longitudinal slice takes the mid-y plane by default", () => {
    const s = longitudinalSlice(rampField());
    expect(s.rows).toBe(3);
    expect(s.cols).toBe(5);
    expect(s.index).toBe(2);
    expect(s.values[0]).toBe(rampField().at(0, 2, 0));
    expect(s.values[1 * 5 + 3]).toBe(rampField().at(1, 2, 3));
  });

  it("transverse slice fixes x", () => {
    const s = transverseSlice(rampField(), 1);
    expect(s.rows).toBe(4);
    expect(s.cols).toBe(5);
    expect(s.values[2 * 5 + 4]).toBe(rampField().at(1, 2, 4));
  });

  it("pool center picks the x plane with the most mask cells", () => {
    const values = new Float32Array(3 * 4 * 5);
    const f = (ix: number, iy: number, iz: number) => (ix * 4 + iy) * 5 + iz;
    values[f(1, 0, 0)] = 1;
    values[f(1, 1, 0)] = 1;
    values[f(2, 0, 0)] = 1;
    expect(poolCenterX(new Field3(GRID, values))).toBe(1);
  });

  it("pool center falls back to mid-x for empty masks", () => {
    expect(poolCenterX(new Field3(GRID, new Float32Array(60)))).toBe(1);
  });
});

describe("decodeF32", () => {
  it("round-trips little-endian payloads", () => {
    const arr = new Float32Array([1.5, -2.25, 3e7, 0]);
    const b64 = Buffer.from(new Uint8Array(arr.buffer)).toString("base64");
    const back = decodeF32(b64);
    expect(Array.from(back)).toEqual(Array.from(arr));
  });

  it("rejects lengths that are not multiples of four", () => {
    const b64 = Buffer.from(new Uint8Array([1, 2, 3])).toString("base64");
    expect(() => decodeF32(b64)).toThrowError();
  });
});
