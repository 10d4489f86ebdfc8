"""Local session service for the interactive panel.

One TCP connection is one session. Messages are newline-delimited JSON with
a version field ``"v": 1``.

Client to server::

    {"v": 1, "cmd": "load", "profile": "mixer"}
    {"v": 1, "cmd": "start"}
    {"v": 1, "cmd": "pause"}
    {"v": 1, "cmd": "press_button"}
    {"v": 1, "cmd": "release_button"}
    {"v": 1, "cmd": "step", "n": 10}
    {"v": 1, "cmd": "snapshot"}
    {"v": 1, "cmd": "reset"}

Server to client::

    {"v": 1, "type": "ok", "cmd": "start"}
    {"v": 1, "type": "error", "message": "no button on chip"}
    {"v": 1, "type": "snapshot", "sim_time": ..., "fsm_state": "10",
     "valves": {...}, "probes": {...}, "plant": {...},
     "button_covered": false, "pump_cycles": 0, "running": false}

Commands are applied strictly in arrival order. While running, the
simulation advances on a fixed tick grid (0.1 time units per tick) paced at
``pacing`` wall-clock seconds per simulated time unit (default 0.1, i.e.
1 simulated unit per 100 ms); ``step`` advances the same grid explicitly,
so a scripted exchange replays the exact tick schedule of the command-line
demos. A snapshot message is emitted for every FSM state change, after
every step/press/release, and on request.
"""
from __future__ import annotations

import json
import queue
import socketserver
import threading
from typing import Optional

from .config import DEFAULTS, Params
from .fluidics import EmbeddedSession, FluidicsError

PROTOCOL_VERSION = 1
TICK = 0.1


class _SessionHandler(socketserver.StreamRequestHandler):

    def handle(self):
        server: PanelService = self.server  # type: ignore[assignment]
        commands: queue.Queue = queue.Queue()
        closed = threading.Event()
        send_lock = threading.Lock()

        def send(msg: dict):
            msg = {"v": PROTOCOL_VERSION, **msg}
            data = (json.dumps(msg, sort_keys=True) + "\n").encode()
            with send_lock:
                try:
                    self.wfile.write(data)
                    self.wfile.flush()
                except OSError:
                    closed.set()

        def reader():
            try:
                for raw in self.rfile:
                    line = raw.strip()
                    if line:
                        commands.put(line)
            except OSError:
                pass  # abrupt client disconnect ends the session like EOF
            closed.set()

        threading.Thread(target=reader, daemon=True).start()
        _SessionLoop(server, commands, closed, send).run()


class _SessionLoop:

    def __init__(self, server: "PanelService", commands: queue.Queue,
                 closed: threading.Event, send):
        self.server = server
        self.commands = commands
        self.closed = closed
        self.send = send
        self.session: Optional[EmbeddedSession] = None
        self.profile: Optional[str] = None
        self.running = False
        self._last_state: Optional[str] = None

    def run(self):
        import time
        next_tick = time.monotonic()
        while not self.closed.is_set():
            try:
                line = self.commands.get(timeout=0.005)
            except queue.Empty:
                line = None
            if line is not None:
                self._dispatch(line)
                continue
            if self.running and self.session is not None:
                pace = self.server.pacing * TICK
                now = time.monotonic()
                if now >= next_tick:
                    self.session.tick()
                    next_tick = max(next_tick + pace, now)
                    self._emit_on_state_change()
            else:
                next_tick = time.monotonic()

    # -- command handling --

    def _dispatch(self, line: bytes):
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            self.send({"type": "error", "message": "malformed JSON"})
            return
        if not isinstance(msg, dict) or msg.get("v") != PROTOCOL_VERSION:
            self.send({"type": "error",
                       "message": f"unsupported message version, expected v={PROTOCOL_VERSION}"})
            return
        cmd = msg.get("cmd")
        handler = getattr(self, f"_cmd_{cmd}", None) if isinstance(cmd, str) else None
        if handler is None:
            self.send({"type": "error", "message": f"unknown command {cmd!r}"})
            return
        try:
            handler(msg)
        except FluidicsError as exc:
            self.send({"type": "error", "message": str(exc)})

    def _require_session(self) -> EmbeddedSession:
        if self.session is None:
            raise FluidicsError("no chip loaded")
        return self.session

    def _snapshot_msg(self) -> dict:
        snap = self._require_session().snapshot()
        snap.update({"type": "snapshot", "running": self.running,
                     "profile": self.profile})
        return snap

    def _emit_snapshot(self):
        self.send(self._snapshot_msg())
        self._last_state = self.session.fsm_state if self.session else None

    def _emit_on_state_change(self):
        if self.session and self.session.fsm_state != self._last_state:
            self._emit_snapshot()

    def _cmd_load(self, msg: dict):
        profile = msg.get("profile")
        try:
            session = EmbeddedSession(profile, params=self.server.params, tick=TICK)
        except FluidicsError as exc:
            self.session = None
            self.profile = None
            self.running = False
            self.send({"type": "error", "message": str(exc)})
            return
        self.session = session
        self.profile = profile
        self.running = False
        self.send({"type": "ok", "cmd": "load"})
        self._emit_snapshot()

    def _cmd_start(self, msg: dict):
        self._require_session()
        self.running = True
        self.send({"type": "ok", "cmd": "start"})

    def _cmd_pause(self, msg: dict):
        self._require_session()
        self.running = False
        self.send({"type": "ok", "cmd": "pause"})

    def _cmd_press_button(self, msg: dict):
        self._require_session().press_button()
        self.send({"type": "ok", "cmd": "press_button"})
        self._emit_snapshot()

    def _cmd_release_button(self, msg: dict):
        self._require_session().release_button()
        self.send({"type": "ok", "cmd": "release_button"})
        self._emit_snapshot()

    def _cmd_step(self, msg: dict):
        n = msg.get("n", 1)
        if not isinstance(n, int) or n < 1:
            raise FluidicsError("step count must be a positive integer")
        session = self._require_session()
        for _ in range(n):
            session.tick()
            self._emit_on_state_change()
        self.send({"type": "ok", "cmd": "step"})
        self._emit_snapshot()

    def _cmd_snapshot(self, msg: dict):
        self._require_session()
        self._emit_snapshot()

    def _cmd_reset(self, msg: dict):
        if self.profile is None:
            raise FluidicsError("no chip loaded")
        self.session = EmbeddedSession(self.profile, params=self.server.params,
                                       tick=TICK)
        self.running = False
        self.send({"type": "ok", "cmd": "reset"})
        self._emit_snapshot()


class PanelService(socketserver.ThreadingTCPServer):
    """Serves panel sessions; one session per connection."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, host: str = "127.0.0.1", port: int = 0,
                 params: Params = DEFAULTS, pacing: float = 0.1):
        super().__init__((host, port), _SessionHandler)
        self.params = params
        self.pacing = pacing  # wall seconds per simulated time unit

    @property
    def port(self) -> int:
        return self.server_address[1]


def serve(host: str = "127.0.0.1", port: int = 7071,
          params: Params = DEFAULTS, pacing: float = 0.1):
    """Run the panel service until interrupted."""
    with PanelService(host, port, params, pacing) as srv:
        srv.serve_forever()


def start_background(host: str = "127.0.0.1", port: int = 0,
                     params: Params = DEFAULTS,
                     pacing: float = 0.1) -> PanelService:
    """Start a service on a daemon thread; caller owns shutdown()."""
    srv = PanelService(host, port, params, pacing)
    threading.Thread(target=srv.serve_forever, daemon=True).start()
    return srv
