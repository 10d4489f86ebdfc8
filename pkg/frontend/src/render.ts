/**
 * Pure SVG rendering: panel state + chip layout in, SVG markup out.
 * No DOM access, so it unit-tests as a string transform and can be
 * assigned to an element's innerHTML or served directly.
 */

import type { ChipLayout } from "./layout.js";
import type { PanelState } from "./viewmodel.js";
import { describeActivity } from "./viewmodel.js";

const VALVE_R = 9;
const PROBE_R = 6;

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

/** Pressure 0..1 (atmosphere..vacuum) to a grey-to-blue fill. */
export function pressureColor(p: number): string {
  const clamped = Math.max(0, Math.min(1, p));
  const byte = Math.round(220 - clamped * 160);
  return `rgb(${byte},${byte},240)`;
}

function valveMarkup(id: string, x: number, y: number, open: boolean | undefined): string {
  const cls = open === undefined ? "valve unknown" : open ? "valve open" : "valve closed";
  const fill = open === undefined ? "#eee" : open ? "#2a9d2a" : "#b33";
  return (
    `<circle class="${cls}" data-id="${esc(id)}" cx="${x}" cy="${y}" r="${VALVE_R}" ` +
    `fill="${fill}"><title>${esc(id)}: ${open === undefined ? "?" : open ? "open" : "closed"}</title></circle>`
  );
}

function probeMarkup(id: string, x: number, y: number, p: number | undefined): string {
  const fill = p === undefined ? "#eee" : pressureColor(p);
  const label = p === undefined ? "?" : p.toFixed(3);
  return (
    `<circle class="probe" data-id="${esc(id)}" cx="${x}" cy="${y}" r="${PROBE_R}" ` +
    `fill="${fill}"><title>${esc(id)}: ${label}</title></circle>`
  );
}

function plantMarkup(state: PanelState, width: number): string {
  if (state.plant === null) return "";
  if (state.plant.kind === "mixer") {
    const entries = Object.entries(state.plant.composition).sort();
    const rows = entries
      .map(([k, v], i) => `<tspan x="8" dy="${i === 0 ? 0 : 14}">${esc(k)}: ${(v * 100).toFixed(1)}%</tspan>`)
      .join("");
    return `<text class="plant" x="8" y="16" font-size="12">${rows}</text>`;
  }
  const bars = state.plant.concentrations
    .map((c, i) => {
      const h = Math.max(1, Math.round(c * 60));
      return `<rect class="rung" data-rung="${i}" x="${8 + i * 18}" y="${64 - h}" width="14" height="${h}" fill="#46c"><title>rung ${i}: ${c.toFixed(4)}</title></rect>`;
    })
    .join("");
  return `<g transform="translate(${width - 110},4)">${bars}</g>`;
}

/** Render the whole panel as an SVG document string. */
export function renderPanel(state: PanelState, layout: ChipLayout): string {
  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${layout.width} ${layout.height + 40}" ` +
      `width="${layout.width}" height="${layout.height + 40}">`,
  );
  for (const v of layout.valves) {
    parts.push(valveMarkup(v.id, v.x, v.y, state.valves[v.id]));
  }
  for (const p of layout.probes) {
    parts.push(probeMarkup(p.id, p.x, p.y, state.probes[p.id]));
  }
  if (layout.button !== null) {
    const fill = state.buttonCovered ? "#222" : "#ddd";
    parts.push(
      `<rect class="button${state.buttonCovered ? " covered" : ""}" data-id="button" ` +
        `x="${layout.button.x - 12}" y="${layout.button.y - 8}" width="24" height="16" fill="${fill}">` +
        `<title>button: ${state.buttonCovered ? "covered" : "uncovered"}</title></rect>`,
    );
  }
  parts.push(plantMarkup(state, layout.width));
  const status =
    `t=${state.simTime.toFixed(1)} ` +
    `pump cycles=${state.pumpCycles} ` +
    `${state.running ? "running" : "paused"} — ${describeActivity(state)}`;
  parts.push(
    `<text class="status" x="8" y="${layout.height + 24}" font-size="12">${esc(status)}</text>`,
  );
  if (state.lastError !== null) {
    parts.push(
      `<text class="error" x="8" y="${layout.height + 38}" font-size="11" fill="#b00">` +
        `${esc(state.lastError)}</text>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}
