/**
 * Session client: binds a line-oriented transport to the protocol codec
 * and the view-model reducer. The transport is abstract so the same
 * client runs over a browser WebSocket-to-TCP bridge or a raw Node
 * socket (see connectTcp below, used by the integration tests).
 */

import {
  Command,
  LineDecoder,
  ProtocolError,
  ServerMessage,
  encodeCommand,
  parseServerMessage,
} from "./protocol.js";
import { PanelEvent, PanelState, initialState, reduce } from "./viewmodel.js";

export interface Transport {
  send(data: string): void;
  close(): void;
  onData(handler: (chunk: string) => void): void;
  onClose(handler: () => void): void;
}

export class PanelClient {
  private state: PanelState = initialState();
  private readonly decoder = new LineDecoder();
  private readonly listeners: Array<(s: PanelState) => void> = [];
  private readonly waiters: Array<(m: ServerMessage) => boolean> = [];

  constructor(private readonly transport: Transport) {
    this.apply({ kind: "connected" });
    transport.onData((chunk) => {
      for (const line of this.decoder.push(chunk)) this.handleLine(line);
    });
    transport.onClose(() => {
      this.decoder.reset();
      this.apply({ kind: "disconnected" });
    });
  }

  get current(): PanelState {
    return this.state;
  }

  subscribe(listener: (s: PanelState) => void): void {
    this.listeners.push(listener);
  }

  send(command: Command): void {
    this.transport.send(encodeCommand(command));
  }

  /**
   * Send a command and resolve on the next message matching the filter
   * (default: any ok or error).
   */
  request(
    command: Command,
    match: (m: ServerMessage) => boolean = (m) => m.type === "ok" || m.type === "error",
    timeoutMs = 5000,
  ): Promise<ServerMessage> {
    return new Promise((resolve, reject) => {
      const timer = setTimeout(
        () => reject(new Error(`timed out waiting for reply to ${command.cmd}`)),
        timeoutMs,
      );
      this.waiters.push((m) => {
        if (!match(m)) return false;
        clearTimeout(timer);
        resolve(m);
        return true;
      });
      this.send(command);
    });
  }

  close(): void {
    this.transport.close();
  }

  private handleLine(line: string): void {
    let msg: ServerMessage;
    try {
      msg = parseServerMessage(line);
    } catch (err) {
      if (err instanceof ProtocolError) {
        this.apply({ kind: "message", message: { type: "error", message: err.message } });
        return;
      }
      throw err;
    }
    this.apply({ kind: "message", message: msg });
    for (let i = 0; i < this.waiters.length; i++) {
      const waiter = this.waiters[i];
      if (waiter !== undefined && waiter(msg)) {
        this.waiters.splice(i, 1);
        break;
      }
    }
  }

  private apply(event: PanelEvent): void {
    this.state = reduce(this.state, event);
    for (const l of this.listeners) l(this.state);
  }
}

/** Node TCP transport (integration tests and headless panels). */
export async function connectTcp(host: string, port: number): Promise<Transport> {
  const net = await import("node:net");
  const socket: import("node:net").Socket = net.createConnection({ host, port });
  await new Promise<void>((resolve, reject) => {
    socket.once("connect", () => resolve());
    socket.once("error", reject);
  });
  socket.setEncoding("utf8");
  return {
    send: (data) => void socket.write(data),
    close: () => socket.end(),
    onData: (handler) => void socket.on("data", (c) => handler(String(c))),
    onClose: (handler) => {
      socket.on("close", handler);
      socket.on("error", () => socket.destroy());
    },
  };
}
