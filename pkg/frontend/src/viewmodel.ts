/**
 * Session view-model: a pure reducer from server messages to panel state.
 * Rendering reads only this state; no message reaches the DOM directly.
 */

import type { Profile, ServerMessage, SnapshotMessage } from "./protocol.js";

export type ConnectionState = "disconnected" | "connected";

/** What the controller does to the plant in each FSM state (mixer profile). */
export const MIXER_STATE_ACTIONS: Record<string, string> = {
  "10": "injecting reservoir R1 around the ring",
  "11": "injecting reservoir R2 into the left half",
  "01": "injecting reservoir R2 around the ring",
  "00": "sealed: circulating and homogenizing",
};

export interface PanelState {
  connection: ConnectionState;
  profile: Profile | null;
  running: boolean;
  simTime: number;
  fsmState: string | null;
  valves: Record<string, boolean>;
  probes: Record<string, number>;
  buttonCovered: boolean;
  pumpCycles: number;
  plant: SnapshotMessage["plant"] | null;
  lastError: string | null;
  /** Count of snapshots dropped because they were older than the shown one. */
  staleDropped: number;
}

export function initialState(): PanelState {
  return {
    connection: "disconnected",
    profile: null,
    running: false,
    simTime: 0,
    fsmState: null,
    valves: {},
    probes: {},
    buttonCovered: false,
    pumpCycles: 0,
    plant: null,
    lastError: null,
    staleDropped: 0,
  };
}

export type PanelEvent =
  | { kind: "connected" }
  | { kind: "disconnected" }
  | { kind: "message"; message: ServerMessage };

/**
 * Apply one event. Snapshots for the same profile must not move time
 * backwards; a stale one (late delivery, reordered emit) is counted and
 * dropped. A profile change or reset legitimately restarts the clock.
 */
export function reduce(state: PanelState, event: PanelEvent): PanelState {
  switch (event.kind) {
    case "connected":
      return { ...initialState(), connection: "connected" };
    case "disconnected":
      return { ...state, connection: "disconnected", running: false };
    case "message":
      return applyMessage(state, event.message);
  }
}

function applyMessage(state: PanelState, msg: ServerMessage): PanelState {
  switch (msg.type) {
    case "ok":
      if (msg.cmd === "reset") {
        // the follow-up snapshot restarts sim_time from the settle point
        return { ...state, simTime: 0, lastError: null };
      }
      return { ...state, lastError: null };
    case "error":
      return { ...state, lastError: msg.message };
    case "snapshot": {
      const sameRun = state.profile === msg.profile && state.fsmState !== null;
      if (sameRun && msg.sim_time < state.simTime) {
        return { ...state, staleDropped: state.staleDropped + 1 };
      }
      return {
        ...state,
        profile: msg.profile,
        running: msg.running,
        simTime: msg.sim_time,
        fsmState: msg.fsm_state,
        valves: msg.valves,
        probes: msg.probes,
        buttonCovered: msg.button_covered,
        pumpCycles: msg.pump_cycles,
        plant: msg.plant,
      };
    }
  }
}

/** One-line human description of what the controller is doing right now. */
export function describeActivity(state: PanelState): string {
  if (state.connection === "disconnected") return "disconnected";
  if (state.profile === null || state.fsmState === null) return "no chip loaded";
  if (state.profile === "mixer") {
    const action = MIXER_STATE_ACTIONS[state.fsmState] ?? "unknown state";
    return `state ${state.fsmState}: ${action}`;
  }
  return `state ${state.fsmState}: dilution stage counter`;
}
