/** Pure mapping from font parameters to CSS text styles. */

import type { FontParams } from "./types.js";
import { PARAM_RANGES } from "./types.js";

/** Device-independent sp -> CSS px scale for the demo surface. */
export const SP_TO_PX = 1.0;

/** Variable-font weight range the stroke-weight offset maps onto. */
export const FONT_WEIGHT_MIN = 400;
export const FONT_WEIGHT_MAX = 700;

export interface TextStyle {
  fontSizePx: number;
  fontWeight: number;
  lineHeight: number;
  letterSpacingEm: number;
}

/** weight_px in [0, 3] maps linearly onto variable-font weight 400-700
 * (presentation-only; the engine reasons in px offsets). */
export function weightToFontWeight(weightPx: number): number {
  const [lo, hi] = PARAM_RANGES.weight_px;
  const t = (Math.min(hi, Math.max(lo, weightPx)) - lo) / (hi - lo);
  return Math.round(FONT_WEIGHT_MIN + t * (FONT_WEIGHT_MAX - FONT_WEIGHT_MIN));
}

/** Deterministic: the same params always produce the same computed style.
 * Line spacing is relative to font size (a 0.05em gap means 5% of the font
 * size between lines), hence line-height = 1 + gap. */
export function computeTextStyle(params: FontParams): TextStyle {
  return {
    fontSizePx: params.size_sp * SP_TO_PX,
    fontWeight: weightToFontWeight(params.weight_px),
    lineHeight: 1 + params.line_spacing_em,
    letterSpacingEm: params.letter_spacing_em,
  };
}

export function applyTextStyle(el: HTMLElement, params: FontParams): void {
  const style = computeTextStyle(params);
  el.style.fontSize = `${style.fontSizePx}px`;
  el.style.fontWeight = String(style.fontWeight);
  el.style.lineHeight = String(style.lineHeight);
  el.style.letterSpacing = `${style.letterSpacingEm}em`;
}
