/** DOM wiring for the reader demo: binds gestures, environment controls, the
 * adjustment panel, and the engine client to the page in index.html. */

import { EngineClient } from "./client.js";
import { DoubleTapTracker, LongPressTracker } from "./gestures.js";
import { applyTextStyle } from "./render.js";
import {
  MOTION_PRESETS,
  SensorSimulator,
  parseTrace,
  traceBatches,
  sliderToLux,
  type MotionPreset,
  type SimulatorControls,
} from "./simulator.js";
import {
  NEUTRAL_FLAGS,
  PARAM_RANGES,
  type FontParams,
  type PersonalFlags,
} from "./types.js";

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

function currentFlags(): PersonalFlags {
  return {
    fatigued: ($("flag-fatigued") as HTMLInputElement).checked,
    distracted: ($("flag-distracted") as HTMLInputElement).checked,
    vision_reduced: ($("flag-vision") as HTMLInputElement).checked,
  };
}

export function startApp(baseUrl: string): void {
  const reader = $("reader");
  const panel = $("panel");
  const banner = $("banner");
  const versionBadge = $("version-badge");
  const scenarioBadge = $("scenario-badge");
  const luxValue = $("lux-value");

  const client = new EngineClient(baseUrl, {
    events: {
      onOffline: (queued) => {
        banner.textContent = `offline: ${queued} batch(es) queued, retrying`;
        banner.hidden = false;
      },
      onOnline: () => {
        banner.hidden = true;
      },
    },
  });

  let params: FontParams = {
    size_sp: 18,
    weight_px: 0.5,
    line_spacing_em: 0.25,
    letter_spacing_em: 0.05,
  };
  applyTextStyle(reader, params);

  const controls: SimulatorControls = {
    luxSlider: 0.35,
    motion: "Still",
    distanceCm: 33,
  };
  const simulator = new SensorSimulator(7);
  let trace: ReturnType<typeof traceBatches> | null = null;
  let traceIndex = 0;

  // environment controls
  const luxSlider = $("lux-slider") as HTMLInputElement;
  luxSlider.addEventListener("input", () => {
    controls.luxSlider = Number(luxSlider.value);
    luxValue.textContent = `${Math.round(sliderToLux(controls.luxSlider))} lux`;
  });
  const distSlider = $("distance-slider") as HTMLInputElement;
  distSlider.addEventListener("input", () => {
    controls.distanceCm = Number(distSlider.value);
    $("distance-value").textContent = `${controls.distanceCm} cm`;
  });
  for (const preset of Object.keys(MOTION_PRESETS) as MotionPreset[]) {
    $(`motion-${preset.toLowerCase()}`).addEventListener("click", () => {
      controls.motion = preset;
      document
        .querySelectorAll(".motion-btn")
        .forEach((b) => b.classList.remove("active"));
      $(`motion-${preset.toLowerCase()}`).classList.add("active");
    });
  }

  ($("trace-input") as HTMLInputElement).addEventListener("change", async (ev) => {
    const file = (ev.target as HTMLInputElement).files?.[0];
    if (!file) return;
    trace = traceBatches(parseTrace(await file.text()));
    traceIndex = 0;
    banner.hidden = false;
    banner.textContent = `replaying trace: ${trace.length} batches`;
  });

  // sensor loop: one batch per second
  setInterval(async () => {
    if (!client.sessionId) return;
    try {
      if (trace && traceIndex < trace.length) {
        await client.ingest(trace[traceIndex++]);
      } else {
        await client.ingest(simulator.nextBatch(controls));
      }
    } catch {
      /* queued by the client; banner already shown */
    }
  }, 1000);

  // long-press -> recommend
  const longPress = new LongPressTracker({
    onLongPress: async () => {
      reader.classList.add("thinking");
      try {
        const rec = await client.recommend(currentFlags());
        if (rec) {
          params = rec.params;
          applyTextStyle(reader, params);
          versionBadge.textContent = `model v${rec.model_version} (${rec.model_scenario})`;
          scenarioBadge.textContent = rec.scenario;
        }
      } catch (err) {
        banner.hidden = false;
        banner.textContent = `recommendation failed: ${err}`;
      } finally {
        reader.classList.remove("thinking");
      }
    },
  });
  reader.addEventListener("pointerdown", () => longPress.pointerDown());
  reader.addEventListener("pointerup", () => longPress.pointerUp());
  reader.addEventListener("pointercancel", () => longPress.cancel());
  reader.addEventListener("pointerleave", () => longPress.cancel());

  // double-tap -> adjustment panel anchored at the tap
  const sliders: Record<keyof FontParams, HTMLInputElement> = {
    size_sp: $("adj-size") as HTMLInputElement,
    weight_px: $("adj-weight") as HTMLInputElement,
    line_spacing_em: $("adj-line") as HTMLInputElement,
    letter_spacing_em: $("adj-letter") as HTMLInputElement,
  };
  for (const key of Object.keys(sliders) as (keyof FontParams)[]) {
    const [lo, hi] = PARAM_RANGES[key];
    sliders[key].min = String(lo);
    sliders[key].max = String(hi);
    sliders[key].addEventListener("input", () => {
      params = { ...params, [key]: Number(sliders[key].value) };
      applyTextStyle(reader, params);
    });
  }

  const doubleTap = new DoubleTapTracker({
    onDoubleTap: (x, y) => {
      for (const key of Object.keys(sliders) as (keyof FontParams)[]) {
        sliders[key].value = String(params[key]);
      }
      panel.style.left = `${Math.min(x, window.innerWidth - 280)}px`;
      panel.style.top = `${y}px`;
      panel.hidden = false;
    },
  });
  reader.addEventListener("click", (ev) =>
    doubleTap.tap(ev.clientX, ev.clientY, performance.now()),
  );

  // tapping blank space with the panel open confirms the adjustment
  document.body.addEventListener("click", async (ev) => {
    if (panel.hidden) return;
    if (panel.contains(ev.target as Node) || reader.contains(ev.target as Node)) {
      return;
    }
    panel.hidden = true;
    const version = await client.confirm(params, currentFlags());
    if (version !== null) {
      versionBadge.textContent = `model v${version} (personal)`;
    }
  });

  // session binding
  $("connect").addEventListener("click", async () => {
    const user = ($("user-id") as HTMLInputElement).value || "demo";
    const hint = ($("env-hint") as HTMLInputElement).value || undefined;
    await client.openSession(user, undefined, hint);
    $("connect").textContent = "connected";
    ($("connect") as HTMLButtonElement).disabled = true;
  });
}

declare global {
  interface Window {
    startApp: typeof startApp;
  }
}
if (typeof window !== "undefined") {
  window.startApp = startApp;
}
