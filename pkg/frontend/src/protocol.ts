/**
 * Wire protocol for the panel session service: newline-delimited JSON
 * over a byte stream, every message tagged with `v: 1`.
 */

export const PROTOCOL_VERSION = 1;

export type Profile = "mixer" | "dilution";

export type Command =
  | { cmd: "load"; profile: Profile }
  | { cmd: "start" }
  | { cmd: "pause" }
  | { cmd: "press_button" }
  | { cmd: "release_button" }
  | { cmd: "step"; n: number }
  | { cmd: "snapshot" }
  | { cmd: "reset" };

export interface OkMessage {
  type: "ok";
  cmd: string;
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type PlantState =
  | { kind: "mixer"; composition: Record<string, number> }
  | { kind: "dilution"; concentrations: number[] };

export interface SnapshotMessage {
  type: "snapshot";
  sim_time: number;
  fsm_state: string;
  valves: Record<string, boolean>;
  probes: Record<string, number>;
  button_covered: boolean;
  pump_cycles: number;
  plant: PlantState;
  running: boolean;
  profile: Profile;
}

export type ServerMessage = OkMessage | ErrorMessage | SnapshotMessage;

/** Serialize a command as one wire line (including the trailing newline). */
export function encodeCommand(command: Command): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, ...command }) + "\n";
}

export class ProtocolError extends Error {}

function isRecord(x: unknown): x is Record<string, unknown> {
  return typeof x === "object" && x !== null && !Array.isArray(x);
}

function numberMap(x: unknown, what: string): Record<string, number> {
  if (!isRecord(x)) throw new ProtocolError(`${what} must be an object`);
  for (const v of Object.values(x)) {
    if (typeof v !== "number") throw new ProtocolError(`${what} values must be numbers`);
  }
  return x as Record<string, number>;
}

function booleanMap(x: unknown, what: string): Record<string, boolean> {
  if (!isRecord(x)) throw new ProtocolError(`${what} must be an object`);
  for (const v of Object.values(x)) {
    if (typeof v !== "boolean") throw new ProtocolError(`${what} values must be booleans`);
  }
  return x as Record<string, boolean>;
}

function parsePlant(x: unknown): PlantState {
  if (!isRecord(x)) throw new ProtocolError("plant must be an object");
  if (x.kind === "mixer") {
    return { kind: "mixer", composition: numberMap(x.composition, "composition") };
  }
  if (x.kind === "dilution") {
    const c = x.concentrations;
    if (!Array.isArray(c) || c.some((v) => typeof v !== "number")) {
      throw new ProtocolError("concentrations must be a number array");
    }
    return { kind: "dilution", concentrations: c as number[] };
  }
  throw new ProtocolError(`unknown plant kind ${String(x.kind)}`);
}

/**
 * Parse and validate one server line. Throws ProtocolError on malformed
 * JSON, a version mismatch, or a message that does not match the schema.
 */
export function parseServerMessage(line: string): ServerMessage {
  let raw: unknown;
  try {
    raw = JSON.parse(line);
  } catch {
    throw new ProtocolError(`malformed JSON: ${line.slice(0, 80)}`);
  }
  if (!isRecord(raw)) throw new ProtocolError("message must be a JSON object");
  if (raw.v !== PROTOCOL_VERSION) {
    throw new ProtocolError(`unsupported protocol version ${String(raw.v)}`);
  }
  switch (raw.type) {
    case "ok":
      if (typeof raw.cmd !== "string") throw new ProtocolError("ok message missing cmd");
      return { type: "ok", cmd: raw.cmd };
    case "error":
      if (typeof raw.message !== "string") {
        throw new ProtocolError("error message missing text");
      }
      return { type: "error", message: raw.message };
    case "snapshot": {
      if (typeof raw.sim_time !== "number") throw new ProtocolError("snapshot missing sim_time");
      if (typeof raw.fsm_state !== "string") throw new ProtocolError("snapshot missing fsm_state");
      if (typeof raw.button_covered !== "boolean") {
        throw new ProtocolError("snapshot missing button_covered");
      }
      if (typeof raw.pump_cycles !== "number") throw new ProtocolError("snapshot missing pump_cycles");
      if (typeof raw.running !== "boolean") throw new ProtocolError("snapshot missing running");
      if (raw.profile !== "mixer" && raw.profile !== "dilution") {
        throw new ProtocolError(`snapshot has unknown profile ${String(raw.profile)}`);
      }
      return {
        type: "snapshot",
        sim_time: raw.sim_time,
        fsm_state: raw.fsm_state,
        valves: booleanMap(raw.valves, "valves"),
        probes: numberMap(raw.probes, "probes"),
        button_covered: raw.button_covered,
        pump_cycles: raw.pump_cycles,
        plant: parsePlant(raw.plant),
        running: raw.running,
        profile: raw.profile,
      };
    }
    default:
      throw new ProtocolError(`unknown message type ${String(raw.type)}`);
  }
}

/**
 * Incremental newline framing over arbitrary chunk boundaries. Feed raw
 * text chunks; complete lines come back in order. A trailing partial line
 * is buffered until its newline arrives.
 */
export class LineDecoder {
  private buffer = "";

  push(chunk: string): string[] {
    this.buffer += chunk;
    const parts = this.buffer.split("\n");
    this.buffer = parts.pop() ?? "";
    return parts.filter((p) => p.trim().length > 0);
  }

  /** Discard any buffered partial line (e.g. after a disconnect). */
  reset(): void {
    this.buffer = "";
  }
}
