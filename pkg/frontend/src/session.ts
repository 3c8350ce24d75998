/** Session state: an append-only log of explored process points. */
import type { MeltpoolSummary } from "./api.js";

export interface HistoryEntry {
  power_w: number;
  v_scan_m_s: number;
  h_star: number;
  extrapolation: boolean;
  meltpool: MeltpoolSummary;
  timestamp: string;
}

export interface SliceAxesState {
  longitudinalY: number | null;
  transverseX: number | null;
}

export class SessionState {
  private readonly history: HistoryEntry[] = [];
  sliceAxes: SliceAxesState = { longitudinalY: null, transverseX: null };
  colorScale: { min: number; max: number } = { min: 300, max: 3200 };

  constructor(readonly serviceUrl: string,
              private readonly clock: () => Date = () => new Date()) {}

  append(entry: Omit<HistoryEntry, "timestamp">): HistoryEntry {
    const stamped = { ...entry, timestamp: this.clock().toISOString() };
    this.history.push(stamped);
    return stamped;
  }

  get entries(): readonly HistoryEntry[] {
    return this.history;
  }

  get length(): number {
    return this.history.length;
  }

  exportJson(): string {
    return JSON.stringify(
      {
        service_url: this.serviceUrl,
        color_scale: this.colorScale,
        history: this.history,
      },
      null,
      2,
    );
  }
}
