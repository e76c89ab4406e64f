import json

import pytest
from click.testing import CliRunner

from adw.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    result = runner.invoke(main, ["init", "--data", str(root / "st"),
                                  "--farms", "10", "--events", "4000",
                                  "--seed", "3"])
    assert result.exit_code == 0, result.output
    return runner, root


class TestCliBasics:
    def test_unknown_subcommand_exit_2(self, workspace):
        runner, _ = workspace
        result = runner.invoke(main, ["frobnicate"])
        assert result.exit_code == 2

    def test_enroll_and_token(self, workspace):
        runner, root = workspace
        result = runner.invoke(main, ["identity", "enroll", "--data",
                                      str(root / "st"), "--org", "coop1",
                                      "--user", "agent7", "--roles",
                                      "agent,supervisor"])
        assert result.exit_code == 0, result.output
        assert "agent7" in result.output
        token = runner.invoke(main, ["--json", "identity", "token", "--data",
                                     str(root / "st"), "--user", "agent7"])
        assert token.exit_code == 0
        payload = json.loads(token.output)
        assert payload["roles"] == ["agent", "supervisor"]

    def test_boundary_unknown_farm_exit_1(self, workspace):
        runner, root = workspace
        result = runner.invoke(main, ["analytics", "boundary", "--data",
                                      str(root / "st"), "--farm", "missing"])
        assert result.exit_code == 1
        assert "UNKNOWN_FARM" in result.output

    def test_boundary_geojson_and_plot(self, workspace):
        runner, root = workspace
        out = root / "ft001.geojson"
        result = runner.invoke(main, ["analytics", "boundary", "--data",
                                      str(root / "st"), "--farm", "FT001",
                                      "--out", str(out), "--plot"])
        assert result.exit_code == 0, result.output
        feature = json.loads(out.read_text())
        assert feature["geometry"]["type"] == "Polygon"
        assert out.with_suffix(".png").exists()

    def test_plan(self, workspace):
        runner, root = workspace
        result = runner.invoke(main, ["--json", "analytics", "plan", "--data",
                                      str(root / "st"), "--date", "2020-06-01"])
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert payload["assignment"]["assignments"]

    def test_bench_csv_and_figures(self, workspace, tmp_path):
        runner, _ = workspace
        out = tmp_path / "bench.csv"
        result = runner.invoke(main, [
            "bench", "--rates", "20,60,120", "--block-sizes", "10",
            "--txs-per-rate", "150", "--out", str(out),
            "--summary-json", str(tmp_path / "bench.json")])
        assert result.exit_code == 0, result.output
        lines = out.read_text().splitlines()
        assert len(lines) == 4
        assert (tmp_path / "bench_throughput.png").exists()
        assert (tmp_path / "bench_latency.png").exists()
        summary = json.loads((tmp_path / "bench.json").read_text())
        assert summary["curves"]["10"]["capacity_tps"] > 0

    def test_bench_bad_rates_exit_2(self, workspace, tmp_path):
        runner, _ = workspace
        result = runner.invoke(main, ["bench", "--rates", "garbage",
                                      "--out", str(tmp_path / "x.csv")])
        assert result.exit_code == 2

    def test_fip_gen_writes_jsonl(self, workspace, tmp_path):
        runner, _ = workspace
        out = tmp_path / "events.jsonl"
        result = runner.invoke(main, ["fip", "gen", "--farms", "5", "--events",
                                      "500", "--seed", "9", "--out", str(out)])
        assert result.exit_code == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 500
        event = json.loads(lines[0])
        assert {"tractor_id", "ts", "lat", "lon", "seq"} <= set(event)

    def test_fip_ingest(self, workspace, tmp_path):
        runner, root = workspace
        out = tmp_path / "more.jsonl"
        runner.invoke(main, ["fip", "gen", "--farms", "3", "--events", "300",
                             "--seed", "77", "--out", str(out)])
        result = runner.invoke(main, ["--json", "fip", "ingest", "--data",
                                      str(root / "st"), "--file", str(out)])
        assert result.exit_code == 0, result.output
        payload = json.loads(result.output)
        assert payload["accepted"] + payload["rejected"] == 300

    def test_workflow_book_and_action(self, workspace):
        runner, root = workspace
        payload = json.dumps({
            "boundary_walk": [[9.4, 8.4], [9.4005, 8.4], [9.4005, 8.4005],
                              [9.4, 8.4005]],
            "primary_crop": "maize", "secondary_crop": "none",
            "service_type": "ploughing"})
        book = runner.invoke(main, ["--json", "workflow", "book", "--data",
                                    str(root / "st"), "--farm", "FCLI1",
                                    "--payload", payload])
        assert book.exit_code == 0, book.output
        instance_id = json.loads(book.output)["instance_id"]
        action = runner.invoke(main, [
            "--json", "workflow", "action", "--data", str(root / "st"),
            "--user", "mgr1", "--instance", instance_id, "--action", "schedule",
            "--payload", json.dumps({"scheduled_date": "2020-06-05",
                                     "tractor_id": "T001",
                                     "operator_id": "op001"})])
        assert action.exit_code == 0, action.output
        assert json.loads(action.output)["current_step_index"] == 2

    def test_workflow_register_from_file(self, workspace, tmp_path):
        runner, root = workspace
        definition = {
            "workflow_id": "soil-check", "version": 1,
            "steps": [
                {"action_name": "request_check", "required_role": "agent",
                 "required_inputs": ["farm_id"], "document_slots": [],
                 "emits_topic": None},
                {"action_name": "report_result", "required_role": "supervisor",
                 "required_inputs": ["result"], "document_slots": ["lab_report"],
                 "emits_topic": None},
            ],
        }
        path = tmp_path / "soil.json"
        path.write_text(json.dumps(definition))
        result = runner.invoke(main, ["--json", "workflow", "register", "--data",
                                      str(root / "st"), "--file", str(path)])
        assert result.exit_code == 0, result.output
        assert json.loads(result.output) == {"workflow_id": "soil-check",
                                             "version": 1}

    def test_workflow_wrong_role_exit_1(self, workspace):
        runner, root = workspace
        payload = json.dumps({
            "boundary_walk": [[9.4, 8.4]], "primary_crop": "m",
            "secondary_crop": "n", "service_type": "ploughing"})
        book = runner.invoke(main, ["--json", "workflow", "book", "--data",
                                    str(root / "st"), "--farm", "FCLI2",
                                    "--payload", payload])
        instance_id = json.loads(book.output)["instance_id"]
        result = runner.invoke(main, [
            "workflow", "action", "--data", str(root / "st"),
            "--user", "farmer1", "--instance", instance_id,
            "--action", "schedule", "--payload", "{}"])
        assert result.exit_code == 1
        assert "UNAUTHORIZED" in result.output or "MISSING_INPUT" in result.output
