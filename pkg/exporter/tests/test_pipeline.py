import torch

from concept_lens_exporter import (DdimScheduler, LatentDiffusionPipeline,
                                   create_checkpoint, tokenize)


class TestTokenizer:
    def test_deterministic_and_padded(self):
        a = tokenize("food in Chinese cuisine", 256, 16)
        b = tokenize("food in Chinese cuisine", 256, 16)
        assert a == b
        assert len(a) == 16
        assert all(0 <= t < 256 for t in a)

    def test_case_insensitive(self):
        assert tokenize("Chicken", 256, 16) == tokenize("chicken", 256, 16)

    def test_distinct_prompts_differ(self):
        assert tokenize("chicken", 256, 16) != tokenize("beef", 256, 16)

    def test_long_prompt_truncates(self):
        prompt = " ".join(f"word{i}" for i in range(40))
        assert len(tokenize(prompt, 256, 16)) == 16


class TestScheduler:
    def test_timesteps_descend(self):
        sched = DdimScheduler()
        ts = sched.timesteps(4)
        assert len(ts) == 4
        assert all(a > b for a, b in zip(ts, ts[1:]))

    def test_step_preserves_shape(self):
        sched = DdimScheduler()
        sample = torch.randn(2, 4, 8, 8)
        noise = torch.randn_like(sample)
        out = sched.step(noise, int(sched.timesteps(2)[0]), sample, steps=2)
        assert out.shape == sample.shape
        assert torch.isfinite(out).all()


class TestPipeline:
    def test_checkpoint_round_trip_is_deterministic(self, tmp_path):
        a_dir, b_dir = tmp_path / "a", tmp_path / "b"
        create_checkpoint(a_dir, seed=7)
        create_checkpoint(b_dir, seed=7)
        pa = LatentDiffusionPipeline.from_pretrained(a_dir)
        pb = LatentDiffusionPipeline.from_pretrained(b_dir)
        out_a = pa.run(["sushi"], steps=2, guidance_scale=7.5, seed=0)
        out_b = pb.run(["sushi"], steps=2, guidance_scale=7.5, seed=0)
        assert torch.equal(out_a, out_b)

    def test_capture_shape_and_finiteness(self, checkpoint):
        pipe = LatentDiffusionPipeline.from_pretrained(checkpoint)
        out = pipe.run(["a", "b", "c"], steps=3, guidance_scale=7.5, seed=1)
        assert out.shape == (3, 3, pipe.config.flat_dim)
        assert torch.isfinite(out).all()

    def test_batch_matches_individual_runs(self, checkpoint):
        pipe = LatentDiffusionPipeline.from_pretrained(checkpoint)
        prompts = ["chicken in Chinese cuisine", "chicken in Italian cuisine"]
        batched = pipe.run(prompts, steps=2, guidance_scale=7.5, seed=3)
        for i, prompt in enumerate(prompts):
            solo = pipe.run([prompt], steps=2, guidance_scale=7.5, seed=3)
            assert torch.allclose(batched[i], solo[0], atol=1e-5)

    def test_unguided_capture(self, checkpoint):
        pipe = LatentDiffusionPipeline.from_pretrained(checkpoint)
        out = pipe.run(["plain"], steps=2, guidance_scale=1.0, seed=0)
        assert out.shape == (1, 2, pipe.config.flat_dim)

    def test_seed_controls_initial_latent(self, checkpoint):
        pipe = LatentDiffusionPipeline.from_pretrained(checkpoint)
        a = pipe.run(["same prompt"], steps=1, guidance_scale=7.5, seed=0)
        b = pipe.run(["same prompt"], steps=1, guidance_scale=7.5, seed=1)
        assert not torch.allclose(a, b)

    def test_missing_checkpoint(self, tmp_path):
        try:
            LatentDiffusionPipeline.from_pretrained(tmp_path / "nowhere")
        except FileNotFoundError as exc:
            assert "checkpoint" in str(exc)
        else:
            raise AssertionError("expected FileNotFoundError")
