/** Protocol types and parameter ranges shared across the client. */

export interface FontParams {
  size_sp: number;
  weight_px: number;
  line_spacing_em: number;
  letter_spacing_em: number;
}

export interface PersonalFlags {
  fatigued: boolean;
  distracted: boolean;
  vision_reduced: boolean;
}

export const NEUTRAL_FLAGS: PersonalFlags = {
  fatigued: false,
  distracted: false,
  vision_reduced: false,
};

/** Same bounds the engine enforces; sliders clamp to these. */
export const PARAM_RANGES: Record<keyof FontParams, [number, number]> = {
  size_sp: [12, 40],
  weight_px: [0, 3],
  line_spacing_em: [0, 1],
  letter_spacing_em: [0, 0.5],
};

export function clampParams(params: FontParams): FontParams {
  const out = { ...params };
  for (const key of Object.keys(PARAM_RANGES) as (keyof FontParams)[]) {
    const [lo, hi] = PARAM_RANGES[key];
    out[key] = Math.min(hi, Math.max(lo, out[key]));
  }
  return out;
}

export function paramsInRange(params: FontParams): boolean {
  return (Object.keys(PARAM_RANGES) as (keyof FontParams)[]).every((key) => {
    const [lo, hi] = PARAM_RANGES[key];
    return params[key] >= lo && params[key] <= hi;
  });
}

export interface SensorSampleBody {
  ts_ms: number;
  lux: number;
  ax: number;
  ay: number;
  az: number;
  eye_px?: number;
  dist_cm?: number;
}

export interface RecommendationBody {
  params: FontParams;
  scenario: string;
  model_scenario: string;
  model_version: number;
  features_used: number[];
  latency_ms: number;
}

export interface LabelBody {
  scenario: string;
  confirmed: boolean;
  placeholder: boolean;
  warning?: string;
}
