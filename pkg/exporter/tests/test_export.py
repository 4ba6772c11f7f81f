import json

import pytest

from concept_lens_exporter import ExportJob, GridError, PromptGrid, export
from concept_lens_exporter.cli import main
from concept_lens_exporter.unet import CondUNet


def run_export(checkpoint, grid_path, out_dir, steps=2, seeds=1, **kwargs):
    job = ExportJob(model=checkpoint, grid=PromptGrid.from_json(grid_path),
                    steps=steps, seeds=seeds, out_dir=out_dir, **kwargs)
    return export(job)


class TestExport:
    def test_single_prompt_blob_size(self, checkpoint, grid_file, tmp_path):
        grid = grid_file(styles=("Chinese cuisine",))
        run_export(checkpoint, grid, tmp_path / "out", steps=1, seeds=1)
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert len(manifest["samples"]) == 1
        blob = tmp_path / "out" / manifest["samples"][0]["file"]
        assert blob.stat().st_size == manifest["dim"] * 4

    def test_manifest_matches_ingestion_schema(self, checkpoint, grid_file, tmp_path):
        grid = grid_file(replicates=2)
        run_export(checkpoint, grid, tmp_path / "out", steps=2, seeds=2)
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["schema_version"] == 1
        assert manifest["timesteps"] == 2
        assert manifest["labels"] == {"content": ["chicken"],
                                      "style": ["Chinese cuisine", "Italian cuisine"]}
        assert len(manifest["samples"]) == 1 * 2 * 2
        for entry in manifest["samples"]:
            blob = tmp_path / "out" / entry["file"]
            assert blob.stat().st_size == manifest["dim"] * 4 * manifest["timesteps"]
        provenance = json.loads(manifest["provenance"])
        assert provenance["flatten_order"] == "channel-major then spatial row-major"
        assert provenance["steps"] == 2

    def test_reruns_share_structure(self, checkpoint, grid_file, tmp_path):
        grid = grid_file()
        run_export(checkpoint, grid, tmp_path / "a")
        run_export(checkpoint, grid, tmp_path / "b")
        a = json.loads((tmp_path / "a" / "manifest.json").read_text())
        b = json.loads((tmp_path / "b" / "manifest.json").read_text())
        assert a["labels"] == b["labels"]
        assert a["dim"] == b["dim"]
        assert [s["file"] for s in a["samples"]] == [s["file"] for s in b["samples"]]

    def test_nan_samples_are_skipped_and_listed(self, checkpoint, grid_file, tmp_path,
                                                monkeypatch):
        grid = grid_file()
        poisoned = {"calls": 0}
        original = CondUNet.forward

        def sometimes_nan(self, latents, timesteps, text_states):
            out = original(self, latents, timesteps, text_states)
            poisoned["calls"] += 1
            if poisoned["calls"] == 1:
                out = out.clone()
                out[-1, 0, 0, 0] = float("nan")
            return out

        monkeypatch.setattr(CondUNet, "forward", sometimes_nan)
        run_export(checkpoint, grid, tmp_path / "out", steps=2, seeds=1, batch_size=1)
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert len(manifest["skipped"]) == 1
        assert manifest["skipped"][0]["reason"].startswith("nan")
        assert len(manifest["samples"]) == 2 - 1
        skipped_file = "s_{content}_{style}_{replicate}.f32".format(**manifest["skipped"][0])
        assert not (tmp_path / "out" / skipped_file).exists()

    def test_sample_count_invariant(self, checkpoint, grid_file, tmp_path):
        grid = grid_file(contents=("chicken", "beef"), replicates=2)
        run_export(checkpoint, grid, tmp_path / "out", steps=1, seeds=2)
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert len(manifest["samples"]) + len(manifest["skipped"]) == 2 * 2 * 2

    def test_batched_export_matches_sequential(self, checkpoint, grid_file, tmp_path):
        grid = grid_file(contents=("chicken", "beef"))
        run_export(checkpoint, grid, tmp_path / "seq", batch_size=1)
        run_export(checkpoint, grid, tmp_path / "bat", batch_size=4)
        seq = json.loads((tmp_path / "seq" / "manifest.json").read_text())
        for entry in seq["samples"]:
            a = (tmp_path / "seq" / entry["file"]).read_bytes()
            b = (tmp_path / "bat" / entry["file"]).read_bytes()
            import numpy as np
            va = np.frombuffer(a, dtype="<f4")
            vb = np.frombuffer(b, dtype="<f4")
            assert np.max(np.abs(va - vb)) < 1e-4


class TestGridValidation:
    def test_bad_template(self, grid_file):
        path = grid_file(template="no placeholders here")
        with pytest.raises(GridError, match="placeholder|contain"):
            PromptGrid.from_json(path)

    def test_missing_field(self, tmp_path):
        path = tmp_path / "grid.json"
        path.write_text(json.dumps({"template": "{content} {style}"}))
        with pytest.raises(GridError):
            PromptGrid.from_json(path)

    def test_baseline_must_be_listed(self, grid_file):
        path = grid_file(baseline="granite")
        with pytest.raises(GridError, match="granite"):
            PromptGrid.from_json(path)


class TestCli:
    def test_make_checkpoint_then_export(self, grid_file, tmp_path, capsys):
        assert main(["make-checkpoint", "--out", str(tmp_path / "ckpt"), "--quiet"]) == 0
        grid = grid_file()
        code = main(["export", "--model", str(tmp_path / "ckpt"), "--grid", str(grid),
                     "--steps", "2", "--seeds", "1", "--out", str(tmp_path / "data")])
        assert code == 0
        out = capsys.readouterr().out
        assert "exported 2 prompt runs" in out
        assert (tmp_path / "data" / "manifest.json").is_file()

    def test_missing_model_exits_2(self, grid_file, tmp_path, capsys):
        code = main(["export", "--model", str(tmp_path / "nope"), "--grid", str(grid_file()),
                     "--steps", "1", "--seeds", "1", "--out", str(tmp_path / "data")])
        assert code == 2
        assert capsys.readouterr().err.startswith("error:")

    def test_bad_grid_exits_2(self, checkpoint, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"template": "x"}))
        code = main(["export", "--model", str(checkpoint), "--grid", str(bad),
                     "--steps", "1", "--seeds", "1", "--out", str(tmp_path / "data")])
        assert code == 2
        assert capsys.readouterr().err.startswith("error:")
