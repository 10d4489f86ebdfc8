import json
import socket

import pytest

from pneumos import service
from pneumos.fluidics import run_mixer_script

TICK = service.TICK


class Client:
    def __init__(self, port):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=30)
        self.f = self.sock.makefile("rw")

    def send_raw(self, line):
        self.f.write(line + "\n")
        self.f.flush()

    def send(self, **kw):
        self.send_raw(json.dumps({"v": 1, **kw}))

    def recv(self):
        return json.loads(self.f.readline())

    def recv_type(self, tp):
        while True:
            msg = self.recv()
            if msg["type"] == tp:
                return msg

    def close(self):
        self.sock.close()


@pytest.fixture(scope="module")
def server():
    srv = service.start_background(pacing=0.0)
    yield srv
    srv.shutdown()


@pytest.fixture
def client(server):
    c = Client(server.port)
    yield c
    c.close()


def step_to(client, now, target):
    if target > now:
        client.send(cmd="step", n=target - now)
        client.recv_type("ok")
    return target


class TestProtocol:
    def test_malformed_json_keeps_session(self, client):
        client.send_raw("{nope")
        assert client.recv()["type"] == "error"
        client.send(cmd="load", profile="dilution")
        assert client.recv_type("ok")["cmd"] == "load"

    def test_wrong_version_rejected(self, client):
        client.send_raw(json.dumps({"v": 99, "cmd": "snapshot"}))
        assert "version" in client.recv()["message"]

    def test_unknown_command(self, client):
        client.send(cmd="explode")
        assert "unknown command" in client.recv()["message"]

    def test_commands_before_load_rejected(self, client):
        client.send(cmd="start")
        assert "no chip loaded" in client.recv()["message"]

    def test_load_failure_leaves_idle(self, client):
        client.send(cmd="load", profile="nonsense")
        assert client.recv()["type"] == "error"
        client.send(cmd="snapshot")
        assert "no chip loaded" in client.recv()["message"]


class TestSession:
    def test_press_on_dilution_chip(self, client):
        client.send(cmd="load", profile="dilution")
        client.recv_type("snapshot")
        client.send(cmd="press_button")
        assert client.recv()["message"] == "no button on chip"

    def test_one_advance_per_press_release_pair(self, client):
        client.send(cmd="load", profile="mixer")
        snap = client.recv_type("snapshot")
        assert snap["fsm_state"] == "10"
        states = []
        now = 0
        for i, t_press in enumerate((40, 120, 200)):
            now = step_to(client, now, round(t_press / TICK))
            client.send(cmd="press_button")
            client.recv_type("ok")
            now = step_to(client, now, round((t_press + 6) / TICK))
            client.send(cmd="release_button")
            client.recv_type("ok")
            now = step_to(client, now, round((t_press + 12) / TICK))
            client.send(cmd="snapshot")
            states.append(client.recv_type("snapshot")["fsm_state"])
        assert states == ["11", "01", "00"]

    def test_snapshot_identical_while_paused(self, client):
        client.send(cmd="load", profile="mixer")
        client.recv_type("snapshot")
        client.send(cmd="snapshot")
        a = client.recv_type("snapshot")
        client.send(cmd="snapshot")
        b = client.recv_type("snapshot")
        assert a == b

    def test_snapshots_monotone_in_sim_time(self, client):
        client.send(cmd="load", profile="mixer")
        t0 = client.recv_type("snapshot")["sim_time"]
        client.send(cmd="step", n=50)
        client.recv_type("ok")
        client.send(cmd="snapshot")
        t1 = client.recv_type("snapshot")["sim_time"]
        assert t1 > t0

    def test_reset_restores_initial_state(self, client):
        client.send(cmd="load", profile="mixer")
        client.recv_type("snapshot")
        client.send(cmd="step", n=100)
        client.recv_type("ok")
        client.send(cmd="reset")
        client.recv_type("ok")
        snap = client.recv_type("snapshot")
        assert snap["fsm_state"] == "10"


class TestReplayEquivalence:
    def test_matches_scripted_demo_exactly(self, client):
        script = [(40, "press"), (46, "release"), (60, "press"), (66, "release")]
        t_end = 90
        client.send(cmd="load", profile="mixer")
        client.recv_type("snapshot")
        now = 0
        for t, action in script:
            now = step_to(client, now, round(t / TICK))
            client.send(cmd="press_button" if action == "press"
                        else "release_button")
            client.recv_type("ok")
        step_to(client, now, round(t_end / TICK))
        client.send(cmd="snapshot")
        snap = client.recv_type("snapshot")

        ref = run_mixer_script(script, t_end=t_end)
        want = {k: round(v, 9)
                for k, v in sorted(ref.session.plant.composition().items())}
        assert snap["plant"]["composition"] == want
        assert snap["fsm_state"] == ref.session.fsm_state
        assert snap["pump_cycles"] == ref.session.pump_cycles
