/** Single-page wiring: process map on the left, two slice canvases on the
 * right, P/V sliders, resolution toggle, history export. The DOM layer only
 * paints what the controller hands it. */
import { ServiceClient } from "./api.js";
import { cssColor, heatColor, normalize } from "./colors.js";
import { isoEnthalpyCurves, normalizedEnthalpy } from "./enthalpy.js";
import { ExplorerController, ExplorerView, SliceRender } from "./explorer.js";
import type { MaterialTable, ModelInfo, ProcessMapRow } from "./api.js";

const baseUrl = (window as unknown as { MELTFNO_URL?: string }).MELTFNO_URL
  ?? `${location.protocol}//${location.host}`;
const client = new ServiceClient(baseUrl);
const controller = new ExplorerController(client);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const mapCanvas = el<HTMLCanvasElement>("process-map");
const longCanvas = el<HTMLCanvasElement>("slice-long");
const transCanvas = el<HTMLCanvasElement>("slice-trans");
const powerSlider = el<HTMLInputElement>("power");
const speedSlider = el<HTMLInputElement>("speed");
const detail = el<HTMLDivElement>("detail");
const banner = el<HTMLDivElement>("offline-banner");
const resToggle = el<HTMLInputElement>("superres");
const exportBtn = el<HTMLButtonElement>("export-history");

interface MapExtent {
  p: [number, number];
  v: [number, number];
}

let material: MaterialTable | null = null;
let extent: MapExtent = { p: [40, 190], v: [0.1, 1.0] };
let rows: ProcessMapRow[] = [];
let pinned: { powerW: number; vScan: number } | null = null;

function mapToCanvas(powerW: number, vScan: number): [number, number] {
  const x = normalize(powerW, extent.p[0], extent.p[1]) * mapCanvas.width;
  const y = (1 - normalize(vScan, extent.v[0], extent.v[1])) * mapCanvas.height;
  return [x, y];
}

function canvasToMap(x: number, y: number): [number, number] {
  const p = extent.p[0] + (x / mapCanvas.width) * (extent.p[1] - extent.p[0]);
  const v = extent.v[0]
    + (1 - y / mapCanvas.height) * (extent.v[1] - extent.v[0]);
  return [p, v];
}

function drawProcessMap(): void {
  const ctx = mapCanvas.getContext("2d");
  if (!ctx) return;
  ctx.fillStyle = "#10131c";
  ctx.fillRect(0, 0, mapCanvas.width, mapCanvas.height);

  if (rows.length) {
    const metric = "rel_rmse_T";
    const vals = rows.map((r) => Number(r[metric] ?? 0));
    const lo = Math.min(...vals);
    const hi = Math.max(...vals);
    for (const row of rows) {
      const [x, y] = mapToCanvas(row.power_w, row.v_scan_m_s);
      ctx.fillStyle = cssColor(heatColor(normalize(Number(row[metric] ?? 0), lo, hi)));
      ctx.beginPath();
      ctx.arc(x, y, 7, 0, 2 * Math.PI);
      ctx.fill();
    }
  }

  if (material) {
    ctx.strokeStyle = "rgba(255,255,255,0.35)";
    ctx.fillStyle = "rgba(255,255,255,0.6)";
    ctx.font = "11px sans-serif";
    for (const curve of isoEnthalpyCurves([2, 4, 6, 8], extent.p, extent.v,
                                          material)) {
      ctx.beginPath();
      curve.points.forEach((pt, i) => {
        const [x, y] = mapToCanvas(pt.powerW, pt.vScan);
        if (i === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      });
      ctx.stroke();
      const last = curve.points[curve.points.length - 1];
      if (last) {
        const [x, y] = mapToCanvas(last.powerW, last.vScan);
        ctx.fillText(`H*=${curve.hStar}`, Math.min(x, mapCanvas.width - 44), y - 4);
      }
    }
  }

  if (pinned) {
    const [x, y] = mapToCanvas(pinned.powerW, pinned.vScan);
    ctx.strokeStyle = "#7ef29b";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(x, y, 10, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.lineWidth = 1;
  }
}

function drawSlice(canvas: HTMLCanvasElement, render: SliceRender,
                   tMin: number, tMax: number): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { rows: nr, cols: nc, values } = render.slice;
  const cw = canvas.width / nr;
  const ch = canvas.height / nc;
  for (let r = 0; r < nr; r++) {
    for (let c = 0; c < nc; c++) {
      ctx.fillStyle = cssColor(heatColor(normalize(values[r * nc + c], tMin, tMax)));
      // depth (z) grows downward on screen
      ctx.fillRect(r * cw, c * ch, cw + 1, ch + 1);
    }
  }
  const drawSegs = (segs: typeof render.contours.meltpool, color: string) => {
    ctx.strokeStyle = color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    for (const s of segs) {
      ctx.moveTo((s.y0 + 0.5) * cw, (s.x0 + 0.5) * ch);
      ctx.lineTo((s.y1 + 0.5) * cw, (s.x1 + 0.5) * ch);
    }
    ctx.stroke();
  };
  drawSegs(render.contours.meltpool, "#7ef29b");
  if (render.contours.gas.length) drawSegs(render.contours.gas, "#5db6ff");
}

function showView(view: ExplorerView): void {
  const pool = view.response.meltpool;
  const hStar = view.response.h_star;
  detail.innerHTML = [
    `P = ${view.response.power_w.toFixed(1)} W, `,
    `V = ${view.response.v_scan_m_s.toFixed(3)} m/s, `,
    `H* = ${hStar.toFixed(2)}`,
    view.response.extrapolation ? " (extrapolating)" : "",
    `<br>melt pool: depth ${pool.depth_cells} cells `,
    `(${(pool.depth_m * 1e6).toFixed(0)} um), `,
    `width ${pool.width_cells}, length ${pool.length_cells}; `,
    pool.max_T_metal_k !== null
      ? `max T ${pool.max_T_metal_k.toFixed(0)} K`
      : "no metal",
  ].join("");
  const lo = 300;
  const hi = Math.max(3200, pool.max_T_metal_k ?? 0);
  drawSlice(longCanvas, view.longitudinal, lo, hi);
  drawSlice(transCanvas, view.transverse, lo, hi);
  drawProcessMap();
}

async function selectPoint(powerW: number, vScan: number,
                           bypassRateLimit = false): Promise<void> {
  pinned = { powerW, vScan };
  try {
    const view = await controller.select(powerW, vScan, {
      superResolve: resToggle.checked,
      bypassRateLimit,
    });
    banner.style.display = controller.offline ? "block" : "none";
    if (view) showView(view);
  } catch {
    banner.style.display = "block";
  }
}

mapCanvas.addEventListener("click", (ev) => {
  const rect = mapCanvas.getBoundingClientRect();
  const [p, v] = canvasToMap(ev.clientX - rect.left, ev.clientY - rect.top);
  powerSlider.value = String(p);
  speedSlider.value = String(v);
  void selectPoint(p, v, true);
});

for (const slider of [powerSlider, speedSlider]) {
  slider.addEventListener("input", () => {
    void selectPoint(Number(powerSlider.value), Number(speedSlider.value));
  });
}

resToggle.addEventListener("change", () => {
  if (pinned) void selectPoint(pinned.powerW, pinned.vScan, true);
});

exportBtn.addEventListener("click", () => {
  const blob = new Blob([controller.session.exportJson()],
                        { type: "application/json" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = "exploration-session.json";
  a.click();
  URL.revokeObjectURL(a.href);
});

async function boot(): Promise<void> {
  let info: ModelInfo | null = null;
  try {
    info = await client.modelInfo();
  } catch {
    banner.style.display = "block";
  }
  if (info) {
    material = info.config.material;
    controller.setDefaultGrid(info.default_grid);
    if (info.trained_window) {
      extent = {
        p: info.trained_window.power_w,
        v: info.trained_window.v_scan_m_s,
      };
      powerSlider.min = String(extent.p[0]);
      powerSlider.max = String(extent.p[1]);
      speedSlider.min = String(extent.v[0]);
      speedSlider.max = String(extent.v[1]);
    }
    if (material) {
      const mid = normalizedEnthalpy(
        (extent.p[0] + extent.p[1]) / 2,
        (extent.v[0] + extent.v[1]) / 2,
        material,
      );
      detail.textContent = `model loaded; window center H* = ${mid.toFixed(2)}`;
    }
  }
  rows = await client.processMap().catch(() => []);
  drawProcessMap();
}

void boot();
