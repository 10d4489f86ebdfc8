/**
 * Static chip layouts: where each valve, probe, and the button sit on the
 * panel. Ids match the simulator's netlist ids exactly; the renderer joins
 * a snapshot to a layout by id and ignores anything the layout omits.
 */

export interface PlacedItem {
  id: string;
  x: number;
  y: number;
}

export interface ChipLayout {
  width: number;
  height: number;
  valves: PlacedItem[];
  probes: PlacedItem[];
  button: { x: number; y: number } | null;
}

function grid(ids: string[], x0: number, y0: number, perRow: number, pitch: number): PlacedItem[] {
  return ids.map((id, i) => ({
    id,
    x: x0 + (i % perRow) * pitch,
    y: y0 + Math.floor(i / perRow) * pitch,
  }));
}

const PLA_VALVES = [0, 1, 2, 3].flatMap((r) =>
  [0, 1, 2].map((v) => `pla.and${r}.v${v}`),
).concat([0, 1].flatMap((o) => [0, 1, 2].map((v) => `pla.or${o}.v${v}`)));

const REGISTER_VALVES = ["b1", "b0"].flatMap((b) =>
  ["ld", "i1", "i2", "fd", "i3", "i4"].map((v) => `reg.${b}.${v}`),
).concat(["reg.vck"]);

const RING_VALVES = [0, 1, 2, 3, 4].map((i) => `osc.ring.v${i}`);

const CORE_PROBES = ["clk", "a", "n1", "n0", "q1", "q0"];
const RING_PROBES = [0, 1, 2, 3, 4].map((i) => `osc.ring.x${i}`);

function chipCore(): Omit<ChipLayout, "button"> {
  return {
    width: 320,
    height: 240,
    valves: [
      ...grid(PLA_VALVES, 40, 40, 6, 28),
      ...grid(REGISTER_VALVES, 40, 150, 7, 28),
      ...grid(RING_VALVES, 40, 210, 7, 28),
      { id: "inv_a", x: 260, y: 150 },
    ],
    probes: [...grid(CORE_PROBES, 260, 40, 2, 24), ...grid(RING_PROBES, 190, 210, 5, 24)],
  };
}

export const MIXER_LAYOUT: ChipLayout = {
  ...chipCore(),
  valves: [...chipCore().valves, { id: "btn.v", x: 292, y: 210 }],
  button: { x: 292, y: 186 },
};

export const DILUTION_LAYOUT: ChipLayout = {
  ...chipCore(),
  button: null,
};

export function layoutFor(profile: "mixer" | "dilution"): ChipLayout {
  return profile === "mixer" ? MIXER_LAYOUT : DILUTION_LAYOUT;
}
