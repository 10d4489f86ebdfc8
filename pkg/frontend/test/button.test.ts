import { describe, expect, it } from "vitest";

import { buttonGestures } from "../src/button.js";
import type { Command } from "../src/protocol.js";

function harness() {
  const sent: Command[] = [];
  const g = buttonGestures((c) => sent.push(c));
  return { sent, g };
}

describe("buttonGestures", () => {
  it("pairs every press with exactly one release", () => {
    const { sent, g } = harness();
    g.pointerdown();
    g.pointerup();
    expect(sent.map((c) => c.cmd)).toEqual(["press_button", "release_button"]);
  });

  it("ignores repeated downs while held and ups while idle", () => {
    const { sent, g } = harness();
    g.pointerup();
    g.pointerdown();
    g.pointerdown();
    g.pointerup();
    g.pointerup();
    expect(sent.map((c) => c.cmd)).toEqual(["press_button", "release_button"]);
  });

  it("treats pointercancel as a release", () => {
    const { sent, g } = harness();
    g.pointerdown();
    g.pointercancel();
    expect(sent.map((c) => c.cmd)).toEqual(["press_button", "release_button"]);
  });

  it("discards a held gesture on disconnect without sending anything", () => {
    const { sent, g } = harness();
    g.pointerdown();
    g.disconnected();
    g.pointerup();
    expect(sent.map((c) => c.cmd)).toEqual(["press_button"]);
    // a fresh gesture after reconnect starts clean
    g.pointerdown();
    g.pointerup();
    expect(sent.map((c) => c.cmd)).toEqual([
      "press_button",
      "press_button",
      "release_button",
    ]);
  });
});
