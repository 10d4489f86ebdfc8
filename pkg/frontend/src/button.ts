/**
 * Button gesture handling: turns pointer activity on the panel's button
 * element into press/release commands, guaranteeing that every press is
 * eventually paired with a release and that presses never double up.
 */

import type { Command } from "./protocol.js";

export interface ButtonGestureEvents {
  pointerdown(): void;
  pointerup(): void;
  /** pointercancel / pointer leaving the element while held */
  pointercancel(): void;
  /** transport dropped; any in-flight gesture is discarded, nothing sent */
  disconnected(): void;
}

/**
 * The sink receives fully-formed commands in order. A disconnect while the
 * button is held discards the gesture without emitting a release, because
 * there is no session left to receive it; the next connection starts with
 * the button uncovered (server state, not client memory).
 */
export function buttonGestures(send: (c: Command) => void): ButtonGestureEvents {
  let held = false;
  return {
    pointerdown() {
      if (held) return;
      held = true;
      send({ cmd: "press_button" });
    },
    pointerup() {
      if (!held) return;
      held = false;
      send({ cmd: "release_button" });
    },
    pointercancel() {
      if (!held) return;
      held = false;
      send({ cmd: "release_button" });
    },
    disconnected() {
      held = false;
    },
  };
}
