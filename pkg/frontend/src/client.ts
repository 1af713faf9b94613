/** Engine protocol client.
 *
 * Concurrency contract: at most one in-flight recommend (a newer long-press
 * aborts the superseded request) and at most one in-flight feedback (rapid
 * re-confirms while one is in flight are dropped, never double-submitted).
 * Sensor batches that fail to send are queued and flushed with exponential
 * backoff once the server is reachable again.
 */

import type {
  FontParams,
  LabelBody,
  PersonalFlags,
  RecommendationBody,
  SensorSampleBody,
} from "./types.js";
import { NEUTRAL_FLAGS, clampParams } from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export interface ClientEvents {
  /** entered offline mode; queued = batches waiting */
  onOffline?: (queued: number) => void;
  /** back online after a successful flush */
  onOnline?: () => void;
}

export interface ClientOptions {
  fetchImpl?: FetchLike;
  events?: ClientEvents;
  /** injectable for tests */
  sleep?: (ms: number) => Promise<void>;
  backoffBaseMs?: number;
  backoffCapMs?: number;
  maxQueuedBatches?: number;
}

const realSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class EngineClient {
  readonly baseUrl: string;
  sessionId: string | null = null;
  userId: string | null = null;

  private fetchImpl: FetchLike;
  private events: ClientEvents;
  private sleep: (ms: number) => Promise<void>;
  private backoffBaseMs: number;
  private backoffCapMs: number;
  private maxQueuedBatches: number;

  private queue: SensorSampleBody[][] = [];
  private flushing = false;
  private offline = false;

  private recommendAbort: AbortController | null = null;
  private feedbackInFlight = false;
  feedbackPostCount = 0;

  constructor(baseUrl: string, options: ClientOptions = {}) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchImpl = options.fetchImpl ?? ((url, init) => fetch(url, init));
    this.events = options.events ?? {};
    this.sleep = options.sleep ?? realSleep;
    this.backoffBaseMs = options.backoffBaseMs ?? 250;
    this.backoffCapMs = options.backoffCapMs ?? 4000;
    this.maxQueuedBatches = options.maxQueuedBatches ?? 120;
  }

  private async post(path: string, body: unknown, signal?: AbortSignal): Promise<any> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    if (!resp.ok) {
      throw new Error(`${path} -> ${resp.status}: ${await resp.text()}`);
    }
    return resp.json();
  }

  async openSession(
    userId: string,
    ipdCm?: number,
    environmentHint?: string,
  ): Promise<string> {
    const body: Record<string, unknown> = { user_id: userId };
    if (ipdCm !== undefined) body.ipd_cm = ipdCm;
    if (environmentHint !== undefined) body.environment_hint = environmentHint;
    const data = await this.post("/sessions", body);
    this.sessionId = data.session_id;
    this.userId = userId;
    return data.session_id;
  }

  private requireSession(): string {
    if (!this.sessionId) throw new Error("no session bound");
    return this.sessionId;
  }

  /** Queue a batch and flush everything queued, oldest first. Failures keep
   * the batch queued and retry with backoff; order is preserved. */
  async ingest(samples: SensorSampleBody[]): Promise<void> {
    this.requireSession();
    this.queue.push(samples);
    while (this.queue.length > this.maxQueuedBatches) {
      this.queue.shift(); // shed oldest under prolonged offline
    }
    await this.flush();
  }

  private async flush(): Promise<void> {
    if (this.flushing) return;
    this.flushing = true;
    let attempt = 0;
    try {
      while (this.queue.length > 0) {
        const batch = this.queue[0];
        try {
          await this.post(`/sessions/${this.sessionId}/sensors`, {
            samples: batch,
          });
          this.queue.shift();
          attempt = 0;
          if (this.offline) {
            this.offline = false;
            this.events.onOnline?.();
          }
        } catch (err) {
          if (err instanceof Error && err.message.includes("-> 4")) {
            this.queue.shift(); // rejected by the server, retrying won't help
            continue;
          }
          if (!this.offline) {
            this.offline = true;
            this.events.onOffline?.(this.queue.length);
          }
          if (attempt >= 3) return; // give up for now; next ingest retries
          const delay = Math.min(
            this.backoffCapMs,
            this.backoffBaseMs * 2 ** attempt,
          );
          attempt += 1;
          await this.sleep(delay);
        }
      }
    } finally {
      this.flushing = false;
    }
  }

  get queuedBatches(): number {
    return this.queue.length;
  }

  get isOffline(): boolean {
    return this.offline;
  }

  /** Long-press path. A newer call aborts the previous one, which resolves
   * to null (superseded). */
  async recommend(
    flags: PersonalFlags = NEUTRAL_FLAGS,
    environmentHint?: string,
  ): Promise<RecommendationBody | null> {
    const sid = this.requireSession();
    this.recommendAbort?.abort();
    const controller = new AbortController();
    this.recommendAbort = controller;
    const body: Record<string, unknown> = { flags };
    if (environmentHint !== undefined) body.environment_hint = environmentHint;
    try {
      const data = await this.post(
        `/sessions/${sid}/recommend`,
        body,
        controller.signal,
      );
      return data as RecommendationBody;
    } catch (err) {
      if (controller.signal.aborted) return null;
      throw err;
    } finally {
      if (this.recommendAbort === controller) this.recommendAbort = null;
    }
  }

  /** Confirm adjusted parameters. Exactly one POST per accepted confirm;
   * returns null when dropped because one is already in flight. Parameters
   * are clamped to the engine's ranges before sending. */
  async confirm(
    params: FontParams,
    flags: PersonalFlags = NEUTRAL_FLAGS,
  ): Promise<number | null> {
    const sid = this.requireSession();
    if (this.feedbackInFlight) return null;
    this.feedbackInFlight = true;
    try {
      this.feedbackPostCount += 1;
      const data = await this.post(`/sessions/${sid}/feedback`, {
        params: clampParams(params),
        flags,
      });
      return data.model_version as number;
    } finally {
      this.feedbackInFlight = false;
    }
  }

  async getLabel(): Promise<LabelBody> {
    const sid = this.requireSession();
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions/${sid}/label`);
    if (!resp.ok) throw new Error(`label -> ${resp.status}`);
    return resp.json();
  }

  async setLabel(label?: string, confirm = false): Promise<LabelBody> {
    const sid = this.requireSession();
    return this.post(`/sessions/${sid}/label`, { label, confirm });
  }

  async editLabel(instruction: string): Promise<LabelBody> {
    const sid = this.requireSession();
    const resp = await this.fetchImpl(`${this.baseUrl}/sessions/${sid}/label`, {
      method: "PATCH",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ instruction }),
    });
    if (!resp.ok) throw new Error(`label edit -> ${resp.status}`);
    return resp.json();
  }

  async getModel(scenario: string, userId?: string): Promise<any> {
    const qs = userId ? `?user_id=${encodeURIComponent(userId)}` : "";
    const resp = await this.fetchImpl(
      `${this.baseUrl}/models/${encodeURIComponent(scenario)}${qs}`,
    );
    if (!resp.ok) throw new Error(`model -> ${resp.status}`);
    return resp.json();
  }
}
