/** Environment simulation: turns the UI controls (lux slider, motion preset,
 * distance slider) into 10 Hz sensor batches, or replays a recorded trace.
 * Jitter is seeded so a fixed control state replays identically. */

import type { SensorSampleBody } from "./types.js";

export type MotionPreset = "Still" | "Walking" | "Running";

/** Per-axis vibration offset means (m/s^2) of the calibration study's motion
 * states, pooled over locations. */
export const MOTION_PRESETS: Record<MotionPreset, [number, number, number]> = {
  Still: [0.17, 0.1, 0.25],
  Walking: [0.53, 0.67, 0.79],
  Running: [1.48, 1.48, 1.65],
};

export const LUX_MAX = 60000;
export const SAMPLES_PER_SECOND = 10;

/** Log-scaled slider position [0,1] -> lux [0, 60000]; 0 maps to exactly 0. */
export function sliderToLux(position: number): number {
  const p = Math.min(1, Math.max(0, position));
  if (p === 0) return 0;
  return Math.expm1(p * Math.log1p(LUX_MAX));
}

export function luxToSlider(lux: number): number {
  const v = Math.min(LUX_MAX, Math.max(0, lux));
  return Math.log1p(v) / Math.log1p(LUX_MAX);
}

export interface SimulatorControls {
  luxSlider: number; // [0, 1], log-scaled
  motion: MotionPreset;
  distanceCm: number; // [10, 60]
}

/** Small deterministic PRNG (mulberry32). */
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export class SensorSimulator {
  private rand: () => number;
  private nextTs = 0;

  constructor(seed = 1) {
    this.rand = mulberry32(seed);
  }

  /** One second of samples (10 at 10 Hz) for the current control state.
   * Vibration jitters around the preset means; values never go negative. */
  nextBatch(controls: SimulatorControls): SensorSampleBody[] {
    const lux = sliderToLux(controls.luxSlider);
    const [mx, my, mz] = MOTION_PRESETS[controls.motion];
    const distance = Math.min(60, Math.max(10, controls.distanceCm));
    const samples: SensorSampleBody[] = [];
    for (let i = 0; i < SAMPLES_PER_SECOND; i++) {
      const jitter = () => (this.rand() - 0.5) * 0.1;
      samples.push({
        ts_ms: this.nextTs,
        lux: Math.max(0, lux * (1 + (this.rand() - 0.5) * 0.05)),
        ax: Math.max(0, mx * (1 + jitter())),
        ay: Math.max(0, my * (1 + jitter())),
        az: Math.max(0, mz * (1 + jitter())),
        dist_cm: distance,
      });
      this.nextTs += 1000 / SAMPLES_PER_SECOND;
    }
    return samples;
  }
}

/** Parse a recorded JSON Lines trace (same format the engine's replay tool
 * reads) for reproducible demos. Throws with the line number on bad input. */
export function parseTrace(text: string): SensorSampleBody[] {
  const samples: SensorSampleBody[] = [];
  const lines = text.split("\n");
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    let obj: any;
    try {
      obj = JSON.parse(line);
    } catch {
      throw new Error(`trace line ${i + 1}: invalid JSON`);
    }
    for (const key of ["ts_ms", "lux", "ax", "ay", "az"]) {
      if (typeof obj[key] !== "number") {
        throw new Error(`trace line ${i + 1}: missing ${key}`);
      }
    }
    samples.push(obj as SensorSampleBody);
  }
  return samples;
}

/** Split a trace into 1 s batches aligned to its own timestamps. */
export function traceBatches(samples: SensorSampleBody[]): SensorSampleBody[][] {
  if (samples.length === 0) return [];
  const batches: SensorSampleBody[][] = [];
  let current: SensorSampleBody[] = [];
  let windowStart = samples[0].ts_ms;
  for (const s of samples) {
    if (s.ts_ms - windowStart >= 1000 && current.length > 0) {
      batches.push(current);
      current = [];
      windowStart = s.ts_ms;
    }
    current.push(s);
  }
  if (current.length > 0) batches.push(current);
  return batches;
}
