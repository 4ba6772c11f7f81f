import hashlib
import json

import numpy as np
import pytest

import concept_lens as cl
from concept_lens.errors import (CorruptionError, FormatError,
                                 InsufficientVariationError, ValidationError)


def make_dataset(dim=4, contents=("chicken", "beef"), styles=("Chinese", "Italian"),
                 replicates=2, timesteps=1, seed=0):
    rng = np.random.default_rng(seed)
    samples = []
    for content in contents:
        for style in styles:
            for r in range(replicates):
                for t in range(timesteps):
                    samples.append(cl.ScoreSample(
                        content=cl.content_label(content), style=cl.style_label(style),
                        replicate=r, timestep=t,
                        vector=rng.standard_normal(dim).astype(np.float32)))
    return cl.ScoreDataset(dim=dim, content_labels=list(contents), style_labels=list(styles),
                           samples=samples, provenance="test", timesteps=timesteps)


class TestRoundTrip:
    def test_write_read_bit_exact(self, tmp_path):
        ds = make_dataset(dim=6, timesteps=3, seed=1)
        cl.write_dataset(ds, tmp_path)
        back = cl.read_dataset(tmp_path)
        assert back.dim == ds.dim
        assert back.timesteps == 3
        assert back.content_labels == ds.content_labels
        assert back.style_labels == ds.style_labels
        original = {(s.key, s.timestep): s.vector for s in ds.samples}
        for s in back.samples:
            assert np.array_equal(s.vector, original[(s.key, s.timestep)])

    def test_single_sample_blob_size(self, tmp_path):
        ds = make_dataset(dim=4, contents=("c",), styles=("s",), replicates=1)
        cl.write_dataset(ds, tmp_path)
        blob = tmp_path / "s_0_0_0.f32"
        assert blob.stat().st_size == 16

    def test_empty_dataset_digest_stable(self, tmp_path):
        ds = cl.ScoreDataset(dim=8, content_labels=["c"], style_labels=["s"],
                             samples=[], provenance="empty")
        d1 = cl.write_dataset(ds, tmp_path / "a")
        d2 = cl.write_dataset(ds, tmp_path / "b")
        assert d1 == d2
        manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
        assert manifest["samples"] == []

    def test_digest_is_sha256_of_manifest_bytes(self, tmp_path):
        ds = make_dataset()
        digest = cl.write_dataset(ds, tmp_path)
        raw = (tmp_path / "manifest.json").read_bytes()
        assert digest == hashlib.sha256(raw).hexdigest()


class TestReadErrors:
    def test_truncated_blob(self, tmp_path):
        ds = make_dataset(dim=8, contents=("c",), styles=("s",), replicates=1)
        cl.write_dataset(ds, tmp_path)
        blob = tmp_path / "s_0_0_0.f32"
        blob.write_bytes(blob.read_bytes()[:28])
        with pytest.raises(CorruptionError) as excinfo:
            cl.read_dataset(tmp_path)
        assert "32" in str(excinfo.value) and "28" in str(excinfo.value)

    def test_sha_mismatch(self, tmp_path):
        ds = make_dataset(dim=4, contents=("c",), styles=("s",), replicates=1)
        cl.write_dataset(ds, tmp_path)
        blob = tmp_path / "s_0_0_0.f32"
        data = bytearray(blob.read_bytes())
        data[0] ^= 0xFF
        blob.write_bytes(bytes(data))
        with pytest.raises(CorruptionError, match="SHA-256"):
            cl.read_dataset(tmp_path)

    def test_missing_blob(self, tmp_path):
        ds = make_dataset(dim=4, contents=("c",), styles=("s",), replicates=1)
        cl.write_dataset(ds, tmp_path)
        (tmp_path / "s_0_0_0.f32").unlink()
        with pytest.raises(CorruptionError, match="missing"):
            cl.read_dataset(tmp_path)

    def test_unknown_schema_version(self, tmp_path):
        ds = make_dataset()
        cl.write_dataset(ds, tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        manifest["schema_version"] = 99
        (tmp_path / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(FormatError, match="schema_version"):
            cl.read_dataset(tmp_path)

    def test_missing_key_reports_pointer(self, tmp_path):
        ds = make_dataset()
        cl.write_dataset(ds, tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        del manifest["dim"]
        (tmp_path / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(FormatError, match="/dim"):
            cl.read_dataset(tmp_path)

    def test_bad_sample_entry_reports_pointer(self, tmp_path):
        ds = make_dataset(contents=("c",), styles=("s",), replicates=1)
        cl.write_dataset(ds, tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        manifest["samples"][0]["style"] = 7
        (tmp_path / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(FormatError, match="/samples/0/style"):
            cl.read_dataset(tmp_path)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(FormatError, match="manifest.json"):
            cl.read_dataset(tmp_path)

    def test_manifest_not_json(self, tmp_path):
        (tmp_path / "manifest.json").write_text("{nope")
        with pytest.raises(FormatError, match="JSON"):
            cl.read_dataset(tmp_path)

    def test_extra_top_level_keys_tolerated(self, tmp_path):
        ds = make_dataset(contents=("c",), styles=("s",), replicates=1)
        cl.write_dataset(ds, tmp_path)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        manifest["skipped"] = []
        (tmp_path / "manifest.json").write_text(json.dumps(manifest))
        assert cl.read_dataset(tmp_path).dim == 4


class TestPromptGrid:
    def test_single_cell(self):
        grid = cl.PromptGrid("{content} in {style}", ["chicken"], ["Chinese cuisine"], 1, "chicken")
        rows = cl.render_prompts(grid)
        assert len(rows) == 1
        assert rows[0].prompt == "chicken in Chinese cuisine"

    def test_product_count(self):
        grid = cl.PromptGrid("{content} x {style}", [f"c{i}" for i in range(7)],
                             [f"s{j}" for j in range(5)], 4, "c0")
        assert len(cl.render_prompts(grid)) == 140

    def test_region_ingredient_wording(self):
        grid = cl.PromptGrid("food in {style} cuisine made with {content}",
                             ["chicken"], ["Chinese"], 1, "chicken")
        assert cl.render_prompts(grid)[0].prompt == "food in Chinese cuisine made with chicken"

    def test_ordering_and_determinism(self):
        grid = cl.PromptGrid("{content}/{style}", ["a", "b"], ["x", "y"], 2, "a")
        rows = cl.render_prompts(grid)
        keys = [(r.content, r.style, r.replicate) for r in rows]
        assert keys == [("a", "x", 0), ("a", "x", 1), ("a", "y", 0), ("a", "y", 1),
                        ("b", "x", 0), ("b", "x", 1), ("b", "y", 0), ("b", "y", 1)]
        assert cl.render_prompts(grid) == rows

    @pytest.mark.parametrize("template", [
        "no placeholders", "{content} only", "{style} only",
        "{content} {content} {style}", "{content} {style} {style}",
    ])
    def test_bad_templates(self, template):
        with pytest.raises(ValidationError):
            cl.PromptGrid(template, ["a"], ["x"], 1, "a")

    def test_baseline_must_be_listed(self):
        with pytest.raises(ValidationError):
            cl.PromptGrid("{content}/{style}", ["a"], ["x"], 1, "b")

    def test_zero_replicates_rejected(self):
        with pytest.raises(ValidationError):
            cl.PromptGrid("{content}/{style}", ["a"], ["x"], 0, "a")

    def test_grid_json_round_trip(self, tmp_path):
        grid = cl.PromptGrid("{content}/{style}", ["a", "b"], ["x"], 3, "b")
        cl.dataset.grid_to_json(grid, tmp_path / "grid.json")
        back = cl.dataset.grid_from_json(tmp_path / "grid.json")
        assert back == grid


class TestSlice:
    def test_filters_to_baseline(self):
        ds = make_dataset()
        sliced = cl.subspace_estimation_slice(ds, "chicken")
        assert all(s.content.name == "chicken" for s in sliced.samples)
        assert sliced.content_labels == ["chicken"]
        assert sliced.style_labels == ["Chinese", "Italian"]

    def test_absent_baseline(self):
        with pytest.raises(InsufficientVariationError):
            cl.subspace_estimation_slice(make_dataset(), "tofu")

    def test_single_style_rejected(self):
        ds = make_dataset(styles=("Chinese",))
        with pytest.raises(InsufficientVariationError):
            cl.subspace_estimation_slice(ds, "chicken")

    def test_never_returns_other_contents(self):
        rng = np.random.default_rng(2)
        for seed in range(5):
            contents = [f"c{i}" for i in range(int(rng.integers(2, 5)))]
            ds = make_dataset(contents=tuple(contents), seed=seed)
            baseline = contents[int(rng.integers(len(contents)))]
            sliced = cl.subspace_estimation_slice(ds, baseline)
            assert {s.content.name for s in sliced.samples} == {baseline}


class TestAggregation:
    def test_mean_over_timesteps(self):
        vecs = {0: [1.0, 2.0], 1: [3.0, 4.0], 2: [5.0, 6.0]}
        samples = [cl.ScoreSample(cl.content_label("c"), cl.style_label("s"), 0, t,
                                  np.array(v, dtype=np.float32))
                   for t, v in vecs.items()]
        ds = cl.ScoreDataset(2, ["c"], ["s"], samples)
        x, contents, styles, reps = cl.aggregate_vectors(ds)
        assert np.allclose(x, [[3.0, 4.0]])
        assert (contents, styles, reps) == (["c"], ["s"], [0])

    def test_select_timestep(self):
        samples = [cl.ScoreSample(cl.content_label("c"), cl.style_label("s"), 0, t,
                                  np.full(2, float(t), dtype=np.float32))
                   for t in range(3)]
        ds = cl.ScoreDataset(2, ["c"], ["s"], samples)
        x, _, _, _ = cl.aggregate_vectors(ds, cl.Aggregation("select", 2))
        assert np.allclose(x, [[2.0, 2.0]])

    def test_select_out_of_range(self):
        ds = make_dataset(timesteps=2)
        with pytest.raises(cl.ArgumentError):
            cl.aggregate_vectors(ds, cl.Aggregation("select", 5))

    def test_parse(self):
        assert cl.Aggregation.parse("mean").mode == "mean"
        agg = cl.Aggregation.parse("select:3")
        assert (agg.mode, agg.timestep) == ("select", 3)
        with pytest.raises(cl.ArgumentError):
            cl.Aggregation.parse("bogus")


class TestValidation:
    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValidationError, match="duplicate"):
            cl.ScoreDataset(2, ["a", "a"], ["x"], [])

    def test_untrimmed_label_rejected(self):
        with pytest.raises(ValidationError):
            cl.content_label(" chicken")

    def test_case_sensitive_labels_are_distinct(self):
        ds = cl.ScoreDataset(2, ["Chinese", "chinese"], ["x"], [])
        assert len(ds.content_labels) == 2

    def test_wrong_dim_sample(self):
        sample = cl.ScoreSample(cl.content_label("c"), cl.style_label("s"), 0, 0,
                                np.zeros(3, dtype=np.float32))
        with pytest.raises(ValidationError, match="length"):
            cl.ScoreDataset(2, ["c"], ["s"], [sample])

    def test_missing_timestep_rejected(self):
        samples = [cl.ScoreSample(cl.content_label("c"), cl.style_label("s"), 0, t,
                                  np.zeros(2, dtype=np.float32)) for t in (0, 2)]
        with pytest.raises(ValidationError, match="timesteps"):
            cl.ScoreDataset(2, ["c"], ["s"], samples)

    def test_non_finite_vector_rejected(self):
        with pytest.raises(ValidationError):
            cl.ScoreSample(cl.content_label("c"), cl.style_label("s"), 0, 0,
                           np.array([np.inf, 0.0], dtype=np.float32))

    def test_kind_mismatch_rejected(self):
        with pytest.raises(ValidationError):
            cl.ScoreSample(cl.style_label("s"), cl.style_label("s"), 0, 0,
                           np.zeros(2, dtype=np.float32))
