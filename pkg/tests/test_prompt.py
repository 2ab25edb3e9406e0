"""Text encoding, latent projection, similarity fusion, and the personalization
pipeline contracts that do not need a trained model."""

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from prosona.backbone import BackboneConfig, ProbUNet
from prosona.errors import ConfigurationError, ValidationError
from prosona.prompt import (
    PersonaModel,
    ProjectionMlp,
    encode_text,
    fuse,
    project,
    similarity_profile,
)
from prosona.text import HashedBowEncoder, load_text_encoder


@pytest.fixture(scope="module")
def encoder():
    return HashedBowEncoder(dim=64)


@pytest.fixture()
def persona():
    torch.manual_seed(0)
    backbone = ProbUNet(BackboneConfig(depth=2, base_width=4, latent_dim=4))
    mlp = ProjectionMlp(embed_dim=64, latent_dim=4, hidden=16)
    return PersonaModel(backbone, mlp, HashedBowEncoder(dim=64))


class TestEncodeText:
    def test_deterministic(self, encoder):
        a = encode_text("inclusive segmentation", encoder)
        b = encode_text("inclusive segmentation", encoder)
        assert np.array_equal(a.e, b.e)
        assert a.encoder_id == encoder.encoder_id

    def test_unit_norm(self, encoder):
        for text in ("conservative mask", "a", "include all subtle regions!!", "x y z w"):
            e = encode_text(text, encoder).e
            assert np.linalg.norm(e) == pytest.approx(1.0, abs=1e-12)

    def test_distinct_prompts_distinct_embeddings(self, encoder):
        a = encode_text("conservative mask", encoder).e
        b = encode_text("inclusive mask", encoder).e
        cos = float(a @ b)
        assert cos < 1.0 - 1e-6

    def test_case_and_punctuation_insensitive(self, encoder):
        a = encode_text("Inclusive Mask!", encoder).e
        b = encode_text("inclusive mask", encoder).e
        assert np.array_equal(a, b)

    def test_empty_text_rejected(self, encoder):
        for bad in ("", "   ", "!!!"):
            with pytest.raises(ValidationError):
                encode_text(bad, encoder)

    def test_encoder_loader(self):
        enc = load_text_encoder("fallback", dim=32)
        assert enc.dim == 32
        with pytest.raises(ConfigurationError):
            load_text_encoder("external:/does/not/exist.py")
        with pytest.raises(ConfigurationError):
            load_text_encoder("unknown-encoder")


class TestProject:
    def test_zero_final_layer_maps_everything_to_origin(self, encoder):
        mlp = ProjectionMlp(embed_dim=64, latent_dim=6)
        torch.nn.init.zeros_(mlp.fc2.weight)
        torch.nn.init.zeros_(mlp.fc2.bias)
        for text in ("conservative mask", "inclusive mask"):
            z = project(encode_text(text, encoder), mlp)
            assert torch.equal(z.z, torch.zeros(6))
            assert z.origin == "projected"

    def test_deterministic(self, encoder):
        torch.manual_seed(1)
        mlp = ProjectionMlp(embed_dim=64, latent_dim=6)
        e = encode_text("inclusive mask", encoder)
        assert torch.equal(project(e, mlp).z, project(e, mlp).z)

    def test_dim_mismatch(self):
        mlp = ProjectionMlp(embed_dim=32, latent_dim=6)
        with pytest.raises(ValidationError):
            project(torch.zeros(64), mlp)


class TestSimilarityProfile:
    def test_zero_projection_gives_uniform_weights(self):
        samples = torch.randn(5, 4, dtype=torch.float64)
        prof = similarity_profile(torch.zeros(4, dtype=torch.float64), samples)
        assert torch.allclose(prof.weights, torch.full((5,), 0.2, dtype=torch.float64))
        assert torch.equal(prof.scores, torch.zeros(5, dtype=torch.float64))

    def test_direct_formula_d4(self):
        z = torch.tensor([1.0, 1.0, 1.0, 1.0], dtype=torch.float64)
        samples = torch.stack([
            z,
            torch.tensor([1.0, -1.0, 1.0, -1.0], dtype=torch.float64),
            torch.tensor([-1.0, 1.0, -1.0, 1.0], dtype=torch.float64),
        ])
        prof = similarity_profile(z, samples)
        assert prof.scores.tolist() == pytest.approx([2.0, 0.0, 0.0], abs=1e-15)

    def test_matches_bruteforce(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            k, d = int(rng.integers(1, 8)), int(rng.integers(1, 7))
            z = rng.normal(size=d)
            samples = rng.normal(size=(k, d))
            prof = similarity_profile(
                torch.as_tensor(z), torch.as_tensor(samples)
            )
            want_scores = oracles.similarity_scores_ref(z.tolist(), samples.tolist())
            want_weights = oracles.softmax_ref(want_scores)
            assert prof.scores.tolist() == pytest.approx(want_scores, abs=1e-12)
            assert prof.weights.tolist() == pytest.approx(want_weights, abs=1e-12)

    def test_empty_samples_rejected(self):
        with pytest.raises(ValidationError):
            similarity_profile(torch.zeros(4), torch.zeros(0, 4))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_weights_simplex_and_shift_invariance(self, seed):
        rng = np.random.default_rng(seed)
        k, d = int(rng.integers(1, 9)), int(rng.integers(1, 7))
        z = torch.as_tensor(rng.normal(size=d))
        samples = torch.as_tensor(rng.normal(size=(k, d)))
        prof = similarity_profile(z, samples)
        assert bool((prof.weights >= 0).all())
        assert float(prof.weights.sum()) == pytest.approx(1.0, abs=1e-9)
        shift = float(rng.normal()) * 3
        shifted = torch.softmax(prof.scores + shift, dim=-1)
        assert torch.allclose(shifted, prof.weights, atol=1e-9)

    def test_scaling_projection_preserves_argmax(self):
        rng = np.random.default_rng(3)
        z = torch.as_tensor(rng.normal(size=5))
        samples = torch.as_tensor(rng.normal(size=(6, 5)))
        base = similarity_profile(z, samples)
        for c in (0.5, 2.0, 10.0):
            scaled = similarity_profile(z * c, samples)
            assert torch.allclose(scaled.scores, base.scores * c, atol=1e-12)
            assert int(scaled.weights.argmax()) == int(base.weights.argmax())


class TestFuse:
    def test_single_sample_returns_it(self):
        samples = torch.randn(1, 6, dtype=torch.float64)
        prof = similarity_profile(torch.randn(6, dtype=torch.float64) * 9, samples)
        fused = fuse(prof, samples)
        assert torch.allclose(fused.z, samples[0])
        assert fused.origin == "fused"

    def test_uniform_weights_give_mean(self):
        samples = torch.randn(7, 3, dtype=torch.float64)
        prof = similarity_profile(torch.zeros(3, dtype=torch.float64), samples)
        assert torch.allclose(fuse(prof, samples).z, samples.mean(dim=0), atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_convex_hull_property(self, seed):
        rng = np.random.default_rng(seed)
        k, d = int(rng.integers(1, 9)), int(rng.integers(1, 7))
        z = torch.as_tensor(rng.normal(size=d) * rng.uniform(0, 5))
        samples = torch.as_tensor(rng.normal(size=(k, d)))
        fused = fuse(similarity_profile(z, samples), samples)
        lo = samples.min(dim=0).values - 1e-9
        hi = samples.max(dim=0).values + 1e-9
        assert bool(((fused.z >= lo) & (fused.z <= hi)).all())

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        z = torch.as_tensor(rng.normal(size=4))
        samples = torch.as_tensor(rng.normal(size=(6, 4)))
        base = fuse(similarity_profile(z, samples), samples)
        perm = torch.as_tensor(rng.permutation(6))
        shuffled = fuse(similarity_profile(z, samples[perm]), samples[perm])
        assert torch.allclose(base.z, shuffled.z, atol=1e-12)

    def test_mismatched_sample_count_rejected(self):
        samples = torch.randn(4, 3)
        prof = similarity_profile(torch.zeros(3), samples)
        with pytest.raises(ValidationError):
            fuse(prof, samples[:2])


class TestPersonaModel:
    def test_fixed_seed_bit_identical(self, persona):
        img = np.random.default_rng(0).random((16, 16))
        p1, prof1 = persona.personalize(img, "inclusive mask", k=5, rng=7)
        p2, prof2 = persona.personalize(img, "inclusive mask", k=5, rng=7)
        assert np.array_equal(p1, p2)
        assert torch.equal(prof1.weights, prof2.weights)

    def test_weights_sum_to_one(self, persona):
        img = np.random.default_rng(1).random((16, 16))
        _, prof = persona.personalize(img, "conservative mask", k=10, rng=0)
        assert float(prof.weights.sum()) == pytest.approx(1.0, abs=1e-9)

    def test_interpolation_endpoints_exact(self, persona):
        img = np.random.default_rng(2).random((16, 16))
        pa, _ = persona.personalize(img, "conservative mask", k=6, rng=3)
        pb, _ = persona.personalize(img, "inclusive mask", k=6, rng=3)
        i0, _ = persona.interpolate(img, "conservative mask", "inclusive mask", 0.0, k=6, rng=3)
        i1, _ = persona.interpolate(img, "conservative mask", "inclusive mask", 1.0, k=6, rng=3)
        assert np.array_equal(i0, pa)
        assert np.array_equal(i1, pb)

    def test_t_out_of_range(self, persona):
        img = np.zeros((16, 16))
        for t in (-0.1, 1.5):
            with pytest.raises(ValidationError):
                persona.interpolate(img, "a b", "c d", t, k=2, rng=0)

    def test_predict_samples_shape_and_determinism(self, persona):
        img = np.random.default_rng(3).random((16, 16))
        s1 = persona.predict_samples(img, k=4, rng=11)
        s2 = persona.predict_samples(img, k=4, rng=11)
        assert s1.shape == (4, 16, 16)
        assert np.array_equal(s1, s2)
        assert s1.min() >= 0.0 and s1.max() <= 1.0

    def test_k_must_be_positive(self, persona):
        with pytest.raises(ValidationError):
            persona.personalize(np.zeros((16, 16)), "prompt text", k=0, rng=0)

    def test_mlp_backbone_dim_mismatch_rejected(self):
        torch.manual_seed(0)
        backbone = ProbUNet(BackboneConfig(depth=2, base_width=4, latent_dim=4))
        mlp = ProjectionMlp(embed_dim=64, latent_dim=6)
        with pytest.raises(ValidationError):
            PersonaModel(backbone, mlp, HashedBowEncoder())
