/** Scalar-to-color mapping for the map and slice canvases. */

export interface Rgb {
  r: number;
  g: number;
  b: number;
}

/** Piecewise-linear heat ramp (dark blue -> red -> yellow-white). */
export function heatColor(t: number): Rgb {
  const x = Math.min(1, Math.max(0, t));
  const stops: Array<[number, Rgb]> = [
    [0.0, { r: 12, g: 18, b: 72 }],
    [0.35, { r: 66, g: 30, b: 150 }],
    [0.65, { r: 216, g: 62, b: 42 }],
    [0.85, { r: 250, g: 166, b: 32 }],
    [1.0, { r: 255, g: 250, b: 200 }],
  ];
  for (let i = 1; i < stops.length; i++) {
    const [t1, c1] = stops[i];
    const [t0, c0] = stops[i - 1];
    if (x <= t1) {
      const u = (x - t0) / (t1 - t0);
      return {
        r: Math.round(c0.r + u * (c1.r - c0.r)),
        g: Math.round(c0.g + u * (c1.g - c0.g)),
        b: Math.round(c0.b + u * (c1.b - c0.b)),
      };
    }
  }
  return stops[stops.length - 1][1];
}

export function normalize(value: number, min: number, max: number): number {
  if (max <= min) return 0.5;
  return (value - min) / (max - min);
}

export function cssColor(c: Rgb): string {
  return `rgb(${c.r},${c.g},${c.b})`;
}
