/**
 * View state and query sequencing. The UI never computes similarities;
 * every repaint is driven by bytes the service returned. A sequence number
 * guards against stale responses painting over newer ones, and the query
 * history is append-only so past queries replay with identical requests.
 */

import { ApiClient, ApiError, OfflineError, QueryPayload, SegmentPayload } from "./api.js";

export type PaintMode = "idle" | "heatmap" | "segmentation";

export interface HistoryEntry {
  text: string;
  stride: number;
}

export interface ViewEvents {
  onHeatmap?(scores: Uint8Array): void;
  onSegmentation?(labels: Uint16Array, legend: string[]): void;
  onError?(message: string): void;
  onOffline?(): void;
}

export class ViewState {
  readonly history: HistoryEntry[] = [];
  mode: PaintMode = "idle";
  scores: Uint8Array | null = null;
  labels: Uint16Array | null = null;
  legend: string[] = [];

  private sequence = 0;

  constructor(
    private readonly api: ApiClient,
    readonly sceneId: string,
    readonly stride: number,
    private readonly events: ViewEvents = {},
  ) {}

  /**
   * Run a text query and repaint on success. Empty or whitespace-only text
   * sends nothing. Responses that arrive after a newer submission are
   * dropped. Returns true when this query's result was applied.
   */
  async runQuery(text: string): Promise<boolean> {
    if (text.trim() === "") {
      return false;
    }
    const ticket = ++this.sequence;
    this.history.push({ text, stride: this.stride });
    let payload: QueryPayload;
    try {
      payload = await this.api.query(this.sceneId, text, this.stride);
    } catch (err) {
      this.reportError(err);
      return false;
    }
    if (ticket !== this.sequence) {
      return false; // a newer query superseded this one
    }
    this.mode = "heatmap";
    this.scores = payload.scores;
    this.events.onHeatmap?.(payload.scores);
    return true;
  }

  /** Re-run a past query; issues a request identical to the original. */
  async replay(index: number): Promise<boolean> {
    const entry = this.history[index];
    if (!entry) {
      return false;
    }
    return this.runQuery(entry.text);
  }

  /** Categorical repaint against a label list. */
  async segmentView(labels: string[], engineerPrompts = false): Promise<boolean> {
    if (labels.length === 0) {
      return false;
    }
    const ticket = ++this.sequence;
    let payload: SegmentPayload;
    try {
      payload = await this.api.segmentView(this.sceneId, labels, engineerPrompts, this.stride);
    } catch (err) {
      this.reportError(err);
      return false;
    }
    if (ticket !== this.sequence) {
      return false;
    }
    this.mode = "segmentation";
    this.labels = payload.labels;
    this.legend = payload.legend;
    this.events.onSegmentation?.(payload.labels, payload.legend);
    return true;
  }

  private reportError(err: unknown): void {
    if (err instanceof OfflineError) {
      this.events.onOffline?.();
    } else if (err instanceof ApiError) {
      this.events.onError?.(err.body);
    } else {
      this.events.onError?.(String(err));
    }
  }
}
