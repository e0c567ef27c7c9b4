import json
import threading

import pytest

from skipnas.fitness import EvalRequest, TrainerClient
from skipnas.genome import ArchGenome, BlockGene, full_conn
from trainer_bridge.server import Bridge, BridgeServer

from conftest import one_block_graph, request_line


def parse(response: bytes) -> dict:
    return json.loads(response.decode())


class TestProtocol:
    def test_contract_shape(self, tiny_bridge):
        graph = one_block_graph(2, spatial=8)
        resp = parse(tiny_bridge.handle_line(request_line(graph, "shape-1")))
        assert resp["protocol_version"] == 1
        assert resp["request_id"] == "shape-1"
        assert 0.0 <= resp["fitness"] <= 1.0
        assert resp["chosen_lr"] == 0.01
        assert resp["wall_time"] >= 0.0

    def test_probe_runs_when_no_lr_chosen(self, tiny_bridge):
        graph = one_block_graph(2, spatial=8)
        resp = parse(tiny_bridge.handle_line(
            request_line(graph, "probe-1", chosen_lr=None)))
        assert resp["chosen_lr"] in (0.9, 0.1, 0.01)
        assert tiny_bridge.training_runs == 3  # one run per candidate

    def test_idempotent_request_id(self, tiny_bridge):
        graph = one_block_graph(2, spatial=8)
        line = request_line(graph, "dup-1")
        first = tiny_bridge.handle_line(line)
        runs = tiny_bridge.training_runs
        second = tiny_bridge.handle_line(line)
        assert second == first  # byte-identical
        assert tiny_bridge.training_runs == runs  # no second training run

    def test_rejects_wrong_protocol_version(self, tiny_bridge):
        graph = one_block_graph(2, spatial=8)
        resp = parse(tiny_bridge.handle_line(
            request_line(graph, "v-1", protocol_version=2)))
        assert "error" in resp and "protocol_version" in resp["error"]
        assert resp["request_id"] == "v-1"

    def test_rejects_missing_request_id(self, tiny_bridge):
        resp = parse(tiny_bridge.handle_line(b'{"protocol_version": 1}\n'))
        assert "error" in resp

    def test_rejects_garbage_line(self, tiny_bridge):
        resp = parse(tiny_bridge.handle_line(b"{broken\n"))
        assert "error" in resp and "unparseable" in resp["error"]

    def test_unbuildable_graph_names_node(self, tiny_bridge):
        graph = one_block_graph(2, spatial=8)
        graph["nodes"][3]["kind"] = "residual"
        resp = parse(tiny_bridge.handle_line(request_line(graph, "bad-1")))
        assert "error" in resp and "node 3" in resp["error"]

    def test_error_responses_are_cached_too(self, tiny_bridge):
        graph = one_block_graph(2, spatial=8)
        graph["nodes"][3]["kind"] = "residual"
        line = request_line(graph, "bad-2")
        assert tiny_bridge.handle_line(line) == tiny_bridge.handle_line(line)

    def test_service_survives_a_failing_request(self, tiny_bridge):
        bad = one_block_graph(2, spatial=4)  # spatial mismatch vs dataset
        resp = parse(tiny_bridge.handle_line(request_line(bad, "fail-1")))
        assert "error" in resp
        good = one_block_graph(2, spatial=8)
        resp = parse(tiny_bridge.handle_line(request_line(good, "ok-after")))
        assert "fitness" in resp


class TestTcpService:
    @pytest.fixture
    def endpoint(self, tiny_bridge):
        server = BridgeServer(("127.0.0.1", 0), tiny_bridge)
        thread = threading.Thread(target=server.serve_forever, daemon=True)
        thread.start()
        host, port = server.server_address
        yield f"{host}:{port}"
        server.shutdown()
        server.server_close()

    def test_search_client_round_trip(self, endpoint):
        client = TrainerClient(
            endpoint, {"name": "tiny", "path": "", "num_classes": 2},
            input_shape=(3, 8, 8), timeout=120.0)
        arch = ArchGenome((BlockGene(4, 8),))
        record = client.evaluate(
            arch, full_conn(arch),
            EvalRequest(request_id="tcp-1", epochs=1, chosen_lr=0.01))
        assert 0.0 <= record.fitness <= 1.0
        assert record.chosen_lr == 0.01
        assert record.evaluator == "trainer"

    def test_client_retry_hits_cache(self, endpoint, tiny_bridge):
        client = TrainerClient(
            endpoint, {"name": "tiny", "path": "", "num_classes": 2},
            input_shape=(3, 8, 8), timeout=120.0)
        arch = ArchGenome((BlockGene(4, 8),))
        req = EvalRequest(request_id="tcp-2", epochs=1, chosen_lr=0.01)
        first = client.evaluate(arch, full_conn(arch), req)
        runs = tiny_bridge.training_runs
        second = client.evaluate(arch, full_conn(arch), req)
        assert second.fitness == first.fitness
        assert tiny_bridge.training_runs == runs
