/** Gesture state machines, decoupled from the DOM via injected timestamps
 * and timers so they are testable headless. */

export const LONG_PRESS_MS = 1000;
export const DOUBLE_TAP_MS = 300;

type TimerHandle = ReturnType<typeof setTimeout>;

export interface LongPressOptions {
  thresholdMs?: number;
  onLongPress: () => void;
  /** injectable for tests; defaults to real timers */
  setTimer?: (fn: () => void, ms: number) => TimerHandle;
  clearTimer?: (handle: TimerHandle) => void;
}

/** Fires onLongPress once the pointer has been held for the threshold.
 * Releasing earlier (e.g. a 400 ms press) fires nothing; movement cancels. */
export class LongPressTracker {
  private thresholdMs: number;
  private onLongPress: () => void;
  private setTimer: (fn: () => void, ms: number) => TimerHandle;
  private clearTimer: (handle: TimerHandle) => void;
  private timer: TimerHandle | null = null;
  private fired = false;

  constructor(options: LongPressOptions) {
    this.thresholdMs = options.thresholdMs ?? LONG_PRESS_MS;
    this.onLongPress = options.onLongPress;
    this.setTimer = options.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
    this.clearTimer = options.clearTimer ?? ((h) => clearTimeout(h));
  }

  pointerDown(): void {
    this.cancel();
    this.fired = false;
    this.timer = this.setTimer(() => {
      this.fired = true;
      this.timer = null;
      this.onLongPress();
    }, this.thresholdMs);
  }

  pointerUp(): boolean {
    this.cancel();
    const didFire = this.fired;
    this.fired = false;
    return didFire;
  }

  cancel(): void {
    if (this.timer !== null) {
      this.clearTimer(this.timer);
      this.timer = null;
    }
  }
}

export interface DoubleTapOptions {
  windowMs?: number;
  onDoubleTap: (x: number, y: number) => void;
}

/** Two taps within the window trigger onDoubleTap at the second tap's
 * location (the adjustment panel anchors there). */
export class DoubleTapTracker {
  private windowMs: number;
  private onDoubleTap: (x: number, y: number) => void;
  private lastTapAt: number | null = null;

  constructor(options: DoubleTapOptions) {
    this.windowMs = options.windowMs ?? DOUBLE_TAP_MS;
    this.onDoubleTap = options.onDoubleTap;
  }

  tap(x: number, y: number, now: number): void {
    if (this.lastTapAt !== null && now - this.lastTapAt <= this.windowMs) {
      this.lastTapAt = null;
      this.onDoubleTap(x, y);
    } else {
      this.lastTapAt = now;
    }
  }
}
