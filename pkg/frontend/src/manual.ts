// Keyboard manual drive.  Arrows steer (up = forward, left/right = yaw),
// W/S climbs.  While any drive key is held and the selected blimp is in
// Manual, a manual command goes out every 100 ms; releasing the last key
// sends a single zero command so the blimp coasts to a stop.

import { Session } from "./session.js";

export interface ManualAxes {
  forward: number;
  yaw_rate: number;
  climb: number;
}

const KEY_AXES: Record<string, Partial<ManualAxes>> = {
  ArrowUp: { forward: 1 },
  ArrowLeft: { yaw_rate: 1 }, // turn left = positive yaw rate
  ArrowRight: { yaw_rate: -1 },
  KeyW: { climb: 1 },
  KeyS: { climb: -1 },
};

export const DRIVE_KEYS = Object.keys(KEY_AXES);

export function axesFromKeys(held: Iterable<string>): ManualAxes {
  const axes: ManualAxes = { forward: 0, yaw_rate: 0, climb: 0 };
  for (const code of held) {
    const a = KEY_AXES[code];
    if (!a) continue;
    axes.forward = Math.min(1, axes.forward + (a.forward ?? 0));
    axes.yaw_rate = Math.max(-1, Math.min(1, axes.yaw_rate + (a.yaw_rate ?? 0)));
    axes.climb = Math.max(-1, Math.min(1, axes.climb + (a.climb ?? 0)));
  }
  return axes;
}

export const MANUAL_PERIOD_MS = 100;

export class ManualDriver {
  held = new Set<string>();
  /** set when input is rejected because the blimp is not in Manual */
  blockedPrompt: string | null = null;
  private needStop = false;

  constructor(private session: Session) {}

  keyDown(code: string): boolean {
    if (!(code in KEY_AXES)) return false;
    const blimp = this.session.selectedBlimp();
    if (!blimp || blimp.mode !== "Manual") {
      this.blockedPrompt = blimp
        ? `blimp ${blimp.id} is in ${blimp?.mode}; switch it to Manual to drive`
        : "select a blimp first";
      return false;
    }
    this.blockedPrompt = null;
    this.held.add(code);
    return true;
  }

  keyUp(code: string): void {
    if (this.held.delete(code) && this.held.size === 0) {
      this.needStop = true;
    }
  }

  /** Call every MANUAL_PERIOD_MS. */
  tick(): void {
    const blimp = this.session.selectedBlimp();
    if (!blimp) return;
    if (this.held.size > 0) {
      if (blimp.mode !== "Manual") {
        // mode changed under our feet: stop driving, prompt the operator
        this.held.clear();
        this.blockedPrompt =
          `blimp ${blimp.id} left Manual; input blocked`;
        this.sendZero(blimp.id);
        return;
      }
      const axes = axesFromKeys(this.held);
      this.session.send({ manual: { id: blimp.id, ...axes } });
    } else if (this.needStop) {
      this.needStop = false;
      this.sendZero(blimp.id);
    }
  }

  private sendZero(id: number): void {
    this.session.send({ manual: { id, forward: 0, yaw_rate: 0, climb: 0 } });
  }
}
