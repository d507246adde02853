import json
import xml.etree.ElementTree as ET

import pytest

from dflsim import config, results
from dflsim.service.app import execute_plan

from conftest import make_experiment

SWEEP_TEXT = """
experiment:
  clients: 4
  rounds: 2
  train: {learning_rate: 0.05, batch_size: 16, local_epochs: 1}
  dataset: {kind: blobs, classes: 3, train_per_class: 20, test_per_class: 10, feature_dim: 4, spread: 0.4}
sweep:
  attack: [none, dmpa]
  malicious_fraction: [0.0, 0.25]
"""


@pytest.fixture(scope="module")
def bundle():
    cfg = config.parse_config_text(SWEEP_TEXT)
    bundle = results.new_bundle(cfg.model_dump())
    for plan in config.plan_runs(cfg):
        results.add_run(bundle, execute_plan(plan).model_dump())
    return bundle


class TestCsv:
    def test_row_count_per_run(self, bundle):
        text = results.to_csv(bundle)
        rows = [line for line in text.splitlines() if line and not line.startswith("#")]
        header, data_rows = rows[0], rows[1:]
        assert header == ",".join(results.CSV_COLUMNS)
        # Each run contributes rounds * clients detail rows plus one summary.
        assert len(data_rows) == len(bundle["runs"]) * (2 * 4 + 1)

    def test_six_significant_digits(self, bundle):
        text = results.to_csv(bundle)
        row = next(
            line for line in text.splitlines() if line and not line.startswith(("#", "topology"))
        )
        loss_field = row.split(",")[7]
        assert len(loss_field.replace(".", "").replace("-", "").lstrip("0")) <= 6

    def test_provenance_embedded(self, bundle):
        text = results.to_csv(bundle)
        assert "# dflsim-version:" in text
        assert "# config:" in text
        embedded = json.loads(text.split("# config: ")[1].splitlines()[0])
        assert embedded == json.loads(json.dumps(bundle["config"]))

    def test_numeric_content_matches_json(self, bundle):
        csv_rows = [
            line
            for line in results.to_csv(bundle).splitlines()
            if line and not line.startswith(("#", "topology"))
        ]
        json_bundle = json.loads(results.to_json(bundle))
        index = 0
        for run in json_bundle["runs"]:
            for record in run["records"]:
                for client in record["clients"]:
                    fields = csv_rows[index].split(",")
                    assert fields[0] == run["topology"]
                    assert int(fields[4]) == record["round"]
                    assert int(fields[5]) == client["id"]
                    assert float(fields[9]) == pytest.approx(client["macro_f1"], rel=1e-5)
                    assert float(fields[10]) == pytest.approx(
                        record["mean_benign_f1"], rel=1e-5
                    )
                    index += 1
            summary_fields = csv_rows[index].split(",")
            assert summary_fields[6] == "summary"
            assert float(summary_fields[10]) == pytest.approx(
                run["summary"]["mean_benign_f1"], rel=1e-5
            )
            index += 1


class TestJson:
    def test_roundtrip_numeric_equality(self, bundle, tmp_path):
        path = results.write_outputs(bundle, tmp_path, fmt="json")
        reloaded = results.read_json(path)
        assert reloaded == json.loads(json.dumps(bundle))

    def test_full_precision(self, bundle):
        value = bundle["runs"][0]["records"][0]["mean_benign_f1"]
        assert json.loads(results.to_json(bundle))["runs"][0]["records"][0][
            "mean_benign_f1"
        ] == value

    def test_provenance_fields(self, bundle):
        doc = json.loads(results.to_json(bundle))
        assert doc["tool"]["name"] == "dflsim"
        assert doc["schema_version"] == results.SCHEMA_VERSION
        assert doc["config"]["experiment"]["clients"] == 4

    def test_timestamp_confined_to_meta(self, bundle):
        doc = json.loads(results.to_json(bundle))
        assert set(doc["meta"]) == {"created_at"}
        no_stamp = results.new_bundle({}, timestamp=False)
        assert no_stamp["meta"]["created_at"] is None


class TestCharts:
    def test_well_formed_svg_with_one_series_per_attack(self, bundle, tmp_path):
        paths = results.write_charts(bundle, tmp_path)
        assert len(paths) == 1  # one (topology, aggregation) pair in the sweep
        tree = ET.parse(paths[0])
        ns = "{http://www.w3.org/2000/svg}"
        series = [
            el.get("data-attack")
            for el in tree.iter(f"{ns}polyline")
            if el.get("class") == "series"
        ]
        assert sorted(series) == ["dmpa", "none"]
        metadata = next(tree.iter(f"{ns}metadata"))
        assert "dflsim" in metadata.text

    def test_failed_runs_are_excluded_from_charts(self, tmp_path):
        cfg = make_experiment()
        bundle = results.new_bundle(cfg.model_dump())
        results.add_run(
            bundle,
            {
                "run_index": 0,
                "seed": 0,
                "topology": "fully",
                "aggregation": "krum",
                "attack": "none",
                "malicious_fraction": 0.0,
                "status": "error",
                "error": "boom",
                "records": [],
                "summary": None,
            },
        )
        assert results.write_charts(bundle, tmp_path) == []
        # The CSV still carries a failure row for the run.
        rows = [r for r in results.to_csv(bundle).splitlines() if ",failed," in r]
        assert len(rows) == 1


class TestWriteOutputs:
    def test_unknown_format_rejected(self, bundle, tmp_path):
        with pytest.raises(ValueError):
            results.write_outputs(bundle, tmp_path, fmt="xml")
