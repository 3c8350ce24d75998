/** Normalized-enthalpy helpers for the map overlays.
 *
 * The material table comes from /v1/model/info, so the curves drawn here are
 * consistent with what the service itself uses.
 */
import type { MaterialTable } from "./api.js";

export function normalizedEnthalpy(
  powerW: number,
  vScan: number,
  mat: MaterialTable,
): number {
  if (powerW <= 0 || vScan <= 0) throw new Error("power and speed must be > 0");
  const denom =
    mat.rho *
    mat.cp *
    mat.dT_m *
    Math.sqrt(Math.PI * mat.diffusivity * mat.sigma_beam ** 3 * vScan);
  return (mat.eta * powerW) / denom;
}

export function speedFromEnthalpy(
  hStar: number,
  powerW: number,
  mat: MaterialTable,
): number {
  if (hStar <= 0 || powerW <= 0) throw new Error("h* and power must be > 0");
  const a = (mat.eta * powerW) / (mat.rho * mat.cp * mat.dT_m * hStar);
  return (a * a) / (Math.PI * mat.diffusivity * mat.sigma_beam ** 3);
}

export interface IsoCurve {
  hStar: number;
  points: Array<{ powerW: number; vScan: number }>;
}

/** Iso-H* guide curves over a power range, clipped to a speed window. */
export function isoEnthalpyCurves(
  levels: number[],
  pRange: [number, number],
  vRange: [number, number],
  mat: MaterialTable,
  nPoints = 64,
): IsoCurve[] {
  const [p0, p1] = pRange;
  return levels.map((hStar) => {
    const points: Array<{ powerW: number; vScan: number }> = [];
    for (let i = 0; i < nPoints; i++) {
      const powerW = p0 + ((p1 - p0) * i) / (nPoints - 1);
      const vScan = speedFromEnthalpy(hStar, powerW, mat);
      if (vScan >= vRange[0] && vScan <= vRange[1]) points.push({ powerW, vScan });
    }
    return { hStar, points };
  });
}
