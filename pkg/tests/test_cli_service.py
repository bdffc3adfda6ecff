import json
import math
import os
import time

import numpy as np
import pytest

from blimpsim.cli import main_sim, main_train_colors
from blimpsim.config import SCHEMA, config_from_dict, default_config_dict, load_config
from blimpsim.perception import ColorFamily
from blimpsim.world import ConfigError


class TestConfig:
    def test_default_document_valid(self):
        sim = config_from_dict(default_config_dict())
        assert sim.world.n_blimps == 2
        assert sim.pickup_grid.n_blimps == [1, 2, 3, 4]

    def test_empty_document_gets_defaults(self):
        sim = config_from_dict({})
        assert sim.world.arena == (20.0, 15.0, 8.0)
        assert sim.world.params.f_b == pytest.approx(
            sim.world.params.m * sim.world.params.g)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="schema"):
            config_from_dict({"warp_drive": True})
        with pytest.raises(ConfigError, match="schema"):
            config_from_dict({"control": {"k": 0.5, "bogus": 1}})

    def test_value_ranges_enforced(self):
        with pytest.raises(ConfigError):
            config_from_dict({"n_blimps": 0})
        with pytest.raises(ConfigError):
            config_from_dict({"perception": {"p_hit": 1.5}})
        with pytest.raises(ConfigError):
            config_from_dict({"radio": {"loss_onset": 500.0,
                                        "loss_limit": 480.0}})

    def test_overrides_propagate(self):
        sim = config_from_dict({
            "seed": 7,
            "blimp": {"m": 0.2, "f_b": None},
            "control": {"k": 0.9},
            "autonomy": {"walk": [2.0, 3.0]},
            "perception": {"goal_mode": "ir"},
            "hoops": [{"shape": "circle", "pos": [0, 0, 6]}],
        })
        w = sim.world
        assert w.seed == 7
        assert w.params.m == 0.2
        assert w.params.f_b == pytest.approx(0.2 * 9.81)
        assert w.control.gains.k == 0.9
        assert w.autonomy.walk_min == 2.0
        assert w.perception.goal_mode == "ir"
        assert len(w.hoops) == 1

    def test_family_embedding(self):
        fam = ColorFamily(mu=(50.0, 30.0), sigma=np.diag([4.0, 2.0]), name="x")
        sim = config_from_dict({"balloon_family": fam.to_json()})
        np.testing.assert_allclose(sim.world.balloon_family.mu, fam.mu)

    def test_load_config_file_errors(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{nope")
        with pytest.raises(ConfigError):
            load_config(bad)

    def test_schema_is_itself_valid(self):
        import jsonschema
        jsonschema.Draft202012Validator.check_schema(SCHEMA)


def make_training_set(tmp_path, n_images=6, color=(204, 42, 48)):
    from PIL import Image

    img_dir = tmp_path / "imgs"
    img_dir.mkdir()
    rng = np.random.default_rng(0)
    entries = []
    for i in range(n_images):
        px = np.full((240, 320, 3), (96, 108, 98), dtype=np.uint8)
        px[64:192, 96:224] = color
        noise = rng.normal(0, 6, px.shape)
        px = np.clip(px.astype(float) + noise, 0, 255).astype(np.uint8)
        name = f"img{i}.png"
        Image.fromarray(px).save(img_dir / name)
        entries.append({"file": name, "rects": [[96, 64, 128, 128]]})
    labels = tmp_path / "labels.json"
    labels.write_text(json.dumps({"files": entries}))
    return img_dir, labels


class TestTrainColorsCli:
    def test_trains_red_family(self, tmp_path, capsys):
        img_dir, labels = make_training_set(tmp_path)
        out = tmp_path / "family.json"
        rc = main_train_colors(["--images", str(img_dir), "--labels",
                                str(labels), "--out", str(out), "--name", "red"])
        assert rc == 0
        doc = json.loads(out.read_text())
        fam = ColorFamily.from_json(doc)
        assert fam.mu[0] > 40.0  # strongly red in the A channel
        printed = capsys.readouterr().out
        assert "cell samples" in printed and "eigenvalues" in printed

    def test_exit_3_on_empty_labels(self, tmp_path):
        img_dir, _ = make_training_set(tmp_path, n_images=1)
        labels = tmp_path / "empty.json"
        labels.write_text(json.dumps({"files": []}))
        rc = main_train_colors(["--images", str(img_dir), "--labels",
                                str(labels), "--out", str(tmp_path / "f.json")])
        assert rc == 3

    def test_exit_2_on_unreadable(self, tmp_path):
        rc = main_train_colors(["--images", str(tmp_path), "--labels",
                                str(tmp_path / "missing.json"),
                                "--out", str(tmp_path / "f.json")])
        assert rc == 2

    def test_output_feeds_simulator_config(self, tmp_path):
        img_dir, labels = make_training_set(tmp_path)
        out = tmp_path / "family.json"
        assert main_train_colors(["--images", str(img_dir), "--labels",
                                  str(labels), "--out", str(out)]) == 0
        from blimpsim.config import config_from_dict
        sim = config_from_dict({"balloon_family": json.loads(out.read_text())})
        assert sim.world.balloon_family is not None


class TestExperimentCli:
    def config_file(self, tmp_path, seconds=20.0):
        doc = {
            "n_balloons": 1,
            "state_dir": str(tmp_path / "state"),
            "experiment": {
                "pickup": {"n_blimps": [1], "n_balloons": [1],
                           "duration": seconds},
                "delivery": {"n_blimps": [1], "n_balloons": [1],
                             "duration": seconds},
            },
        }
        p = tmp_path / "config.json"
        p.write_text(json.dumps(doc))
        return p

    def test_row_count_and_determinism(self, tmp_path):
        cfg = self.config_file(tmp_path)
        out1 = tmp_path / "m1.csv"
        out2 = tmp_path / "m2.csv"
        rc = main_sim(["experiment", "--config", str(cfg), "--seeds", "3",
                       "--out", str(out1), "--jobs", "1"])
        assert rc == 0
        lines = out1.read_text().splitlines()
        assert lines[0] == "seed,n_blimps,n_balloons,attempts,successes,deliveries"
        assert len(lines) == 1 + 3 + 3  # header + pickup rows + delivery rows
        rc = main_sim(["experiment", "--config", str(cfg), "--seeds", "3",
                       "--out", str(out2), "--jobs", "1"])
        assert rc == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_exit_2_on_schema_violation(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"bogus": 1}))
        rc = main_sim(["experiment", "--config", str(p), "--seeds", "1",
                       "--out", str(tmp_path / "m.csv")])
        assert rc == 2


@pytest.fixture()
def service_client(tmp_path):
    from starlette.testclient import TestClient

    from blimpsim.config import config_from_dict
    from blimpsim.service import SimServer, build_app

    sim = config_from_dict({
        "n_blimps": 2, "n_balloons": 1,
        "state_dir": str(tmp_path / "state"),
    })
    server = SimServer(sim.world, speed=40.0)
    app = build_app(server)
    with TestClient(app) as client:
        yield client, server


def recv_until(ws, predicate, tries=400):
    for _ in range(tries):
        msg = ws.receive_json()
        if predicate(msg):
            return msg
    raise AssertionError("expected message never arrived")


class TestService:
    def test_snapshot_stream_and_mode_echo(self, service_client):
        client, server = service_client
        with client.websocket_connect("/ws") as ws:
            hello = ws.receive_json()
            assert "hello" in hello
            assert set(hello["hello"]["params"]["0"]) >= {"ctl.k", "auto.np"}
            snap = recv_until(ws, lambda m: "t" in m)
            assert {"t", "blimps", "balloons", "hoops"} <= set(snap)
            ws.send_text(json.dumps({"set_mode": {"id": 1, "mode": "Manual"}}))
            manual = recv_until(
                ws, lambda m: "t" in m
                and m["blimps"][1]["mode"] == "Manual")
            assert manual["blimps"][1]["mode"] == "Manual"

    def test_snapshot_time_monotone_no_period_skips(self, service_client):
        client, _ = service_client
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            times = []
            while len(times) < 8:
                msg = ws.receive_json()
                if "t" in msg:
                    times.append(msg["t"])
            assert all(b > a for a, b in zip(times, times[1:]))
            # one snapshot per 0.1 s of simulated time, never skipping
            gaps = [round(b - a, 6) for a, b in zip(times, times[1:])]
            assert all(g <= 0.1 + 0.005 + 1e-6 for g in gaps)

    def test_record_writes_jsonl(self, tmp_path):
        from blimpsim.config import config_from_dict
        from blimpsim.service import SimServer

        sim = config_from_dict({"n_blimps": 1, "n_balloons": 1,
                                "state_dir": str(tmp_path / "state")})
        record = tmp_path / "log.jsonl"
        server = SimServer(sim.world, speed=50.0, record=str(record))
        server.start()
        time.sleep(1.0)
        server.stop()
        lines = record.read_text().splitlines()
        assert len(lines) >= 10
        docs = [json.loads(l) for l in lines]
        assert all("t" in d and "blimps" in d for d in docs)
        ts = [d["t"] for d in docs]
        assert ts == sorted(ts)

    def test_param_set_acked_and_persisted(self, service_client, tmp_path):
        client, server = service_client
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_text(json.dumps(
                {"param_set": {"id": 0, "key": "ctl.k", "value": 1.25}}))
            ack = recv_until(ws, lambda m: "ack" in m)
            assert ack["ack"]["key"] == "ctl.k"
            assert ack["ack"]["value"] == pytest.approx(1.25)
        store_file = server.world.blimps[0].store.path
        assert json.loads(open(store_file).read())["ctl.k"] == pytest.approx(1.25)
        assert server.world.blimps[0].ctrl_cfg.gains.k == pytest.approx(1.25)

    def test_telemetry_request(self, service_client):
        client, _ = service_client
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_text(json.dumps({"telemetry_req": {"id": 0}}))
            tel = recv_until(ws, lambda m: "telemetry" in m)
            assert tel["telemetry"]["id"] == 0
            assert "h" in tel["telemetry"]

    def test_malformed_json_keeps_session(self, service_client):
        client, _ = service_client
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_text("{not json")
            err = recv_until(ws, lambda m: "error" in m)
            assert "JSON" in err["error"] or "not" in err["error"]
            ws.send_text(json.dumps({"telemetry_req": {"id": 0}}))
            assert recv_until(ws, lambda m: "telemetry" in m)

    def test_unknown_command_rejected(self, service_client):
        client, _ = service_client
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_text(json.dumps({"self_destruct": {}}))
            err = recv_until(ws, lambda m: "error" in m)
            assert "unknown command" in err["error"]

    def test_second_session_refused(self, service_client):
        client, _ = service_client
        with client.websocket_connect("/ws") as ws1:
            ws1.receive_json()
            with client.websocket_connect("/ws") as ws2:
                refusal = ws2.receive_json()
                assert "error" in refusal

    def test_manual_drive_moves_blimp(self, service_client):
        client, server = service_client
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_text(json.dumps({"set_mode": {"id": 0, "mode": "Manual"}}))
            recv_until(ws, lambda m: "t" in m
                       and m["blimps"][0]["mode"] == "Manual")
            start = np.array(server.world.blimps[0].state.r[:2])
            yaw = server.world.blimps[0].state.euler[2]
            ws.send_text(json.dumps(
                {"manual": {"id": 0, "forward": 1.0, "yaw_rate": 0.0,
                            "climb": 0.0}}))
            deadline = time.monotonic() + 15.0
            moved = 0.0
            heading = np.array([math.cos(yaw), math.sin(yaw)])
            while time.monotonic() < deadline and moved < 2.0:
                msg = ws.receive_json()
                if "t" in msg:
                    pos = np.array(msg["blimps"][0]["r"][:2])
                    moved = float((pos - start) @ heading)
            assert moved >= 2.0

    def test_commands_travel_the_radio_codec(self, service_client):
        # frame-capture comparison: the bytes the service puts on the air
        # are exactly what a directly driven ground station would send
        client, server = service_client
        frames = []
        server.world.link_down.monitor = lambda fr, dist: frames.append(fr)
        with client.websocket_connect("/ws") as ws:
            ws.receive_json()
            ws.send_text(json.dumps(
                {"param_set": {"id": 0, "key": "ctl.k", "value": 2.0}}))
            recv_until(ws, lambda m: "ack" in m)
        from blimpsim.comms import (GroundStation, Message, MsgKind, ParamSet,
                                    decode, encode)
        sets = [f for f in frames if decode(f).kind is MsgKind.PARAM_SET]
        assert sets
        captured = decode(sets[0])
        reference = encode(Message(0, captured.seq, MsgKind.PARAM_SET,
                                   ParamSet("ctl.k", 2.0)))
        assert sets[0] == reference
