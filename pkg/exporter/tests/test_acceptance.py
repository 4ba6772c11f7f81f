"""Secondary acceptance: a small export must pass the primary CLI's
`validate` verb and flow through `subspace` + `diag` without error."""

import json
import shutil
import subprocess

import pytest

from concept_lens_exporter.cli import main

PRIMARY = shutil.which("concept-lens")


def run_primary(*args):
    return subprocess.run([PRIMARY, *args], capture_output=True, text=True)


@pytest.mark.skipif(PRIMARY is None, reason="primary concept-lens CLI not installed")
def test_export_feeds_primary_pipeline(checkpoint, grid_file, tmp_path):
    # 1 content x 2 styles x 1 seed at T=2: the smallest meaningful export
    grid = grid_file()
    data = tmp_path / "export"
    assert main(["export", "--model", str(checkpoint), "--grid", str(grid),
                 "--steps", "2", "--seeds", "1", "--out", str(data), "--quiet"]) == 0

    validate = run_primary("validate", "--dataset", str(data))
    assert validate.returncode == 0, validate.stderr
    assert "ok:" in validate.stdout

    subspace = run_primary("subspace", "--dataset", str(data), "--baseline", "chicken",
                           "--k", "1", "--out", str(tmp_path / "sub.json"))
    assert subspace.returncode == 0, subspace.stderr

    diag = run_primary("diag", "--dataset", str(data), "--subspace", str(tmp_path / "sub.json"),
                       "--out", str(tmp_path / "diag"), "--no-plots")
    assert diag.returncode == 0, diag.stderr
    report = json.loads((tmp_path / "diag" / "separability.json").read_text())
    assert report["verdict"] in ("SEPARABLE", "ENTANGLED", "INEXPRESSIVE")
    for name in ("coords.csv", "js_matrix.csv", "js_matrix.json", "nearest_styles.json"):
        assert (tmp_path / "diag" / name).is_file(), name
    print("ACCEPTANCE PASS: exporter contract (validate + diag ran end-to-end)")
