import pytest
import torch

from src.jiif.config import DegradationSpec
from src.jiif.coordgrid import make_coord_grid, sample_latent
from src.jiif.data import degrade, generate_synthetic, normalize_with
from src.jiif.data.pairs import depth_stats
from src.jiif.exceptions import InvalidArgumentError
from src.jiif.interpolation import bicubic_resample
from src.jiif.model import infer_scale


def _normalized_inputs(pair, scale):
    degraded = degrade(pair, DegradationSpec(scale=scale), seed=0)
    stats = depth_stats(degraded.hr_pair.depth)
    return normalize_with(degraded.lr_depth, stats), degraded.hr_pair.guide


class TestResidualIdentity:
    def test_zero_decoder_reproduces_bicubic_exactly(self, make_model):
        model = make_model(seed=3).zero_decoder_()
        for pair in generate_synthetic(20, seed=5, size=32):
            lr, guide = _normalized_inputs(pair, 4)
            out = model.full_inference(lr, guide)
            assert torch.equal(out, bicubic_resample(lr, 32, 32))

    def test_zero_decoder_forward_matches_bicubic_base(self, make_model):
        model = make_model(seed=1).zero_decoder_()
        lr, guide = _normalized_inputs(generate_synthetic(1, seed=2, size=16)[0], 2)
        queries = torch.rand(1, 50, 2, generator=torch.Generator().manual_seed(0)) * 2 - 1
        with torch.no_grad():
            out = model(lr, guide, queries)
        assert torch.equal(out, sample_latent(lr[None], queries, "bicubic")[..., 0])

    def test_precomputed_base_is_used(self, make_model):
        model = make_model(seed=1).zero_decoder_()
        lr, guide = _normalized_inputs(generate_synthetic(1, seed=2, size=16)[0], 2)
        queries = torch.zeros(1, 3, 2)
        base = torch.tensor([[1.0, 2.0, 3.0]])
        with torch.no_grad():
            assert torch.equal(model(lr, guide, queries, base=base), base)


class TestForward:
    def test_duplicate_queries_give_duplicate_outputs(self, make_model):
        model = make_model(seed=2)
        lr, guide = _normalized_inputs(generate_synthetic(1, seed=3, size=16)[0], 4)
        query = torch.tensor([[0.1, -0.3]])
        with torch.no_grad():
            out = model(lr, guide, query.expand(5, 2))
        assert torch.equal(out, out[:, :1].expand(1, 5))

    def test_one_hot_weights_trace(self, make_model):
        model = make_model(seed=4, mode="value_only", weight_strategy="bilinear")
        gen = torch.Generator().manual_seed(1)
        lr = torch.rand(1, 2, 2, generator=gen)
        guide = torch.rand(3, 4, 4, generator=gen)
        center = make_coord_grid(2, 2).coords[1, 0]
        with torch.no_grad():
            out = model(lr, guide, center.reshape(1, 1, 2))
            z_map, g_map, _ = model.encode_pair(lr, guide)
            z_i = z_map.codes[0, :, 1, 0]
            g_i = sample_latent(g_map.codes, center.reshape(1, 1, 2), "bicubic")[0, 0]
            value = model.decoder.decode_value(z_i, g_i, torch.zeros(2))
        assert out.item() == pytest.approx(lr[0, 1, 0].item() + value.item(), abs=1e-6)

    def test_inconsistent_sizes_rejected(self, make_model):
        model = make_model()
        with pytest.raises(InvalidArgumentError):
            model(torch.rand(1, 3, 3), torch.rand(3, 8, 8), torch.zeros(1, 1, 2))
        with pytest.raises(InvalidArgumentError):
            model(torch.rand(1, 2, 4), torch.rand(3, 8, 12), torch.zeros(1, 1, 2))

    def test_infer_scale(self):
        assert infer_scale(torch.zeros(1, 4, 6), torch.zeros(3, 32, 48)) == 8
        with pytest.raises(InvalidArgumentError):
            infer_scale(torch.zeros(1, 4, 6), torch.zeros(3, 32, 36))

    def test_seeded_build_is_reproducible(self, make_model):
        first, second = make_model(seed=9).state_dict(), make_model(seed=9).state_dict()
        assert all(torch.equal(first[k], second[k]) for k in first)


class TestFullInference:
    @pytest.mark.parametrize("seed", range(3))
    def test_chunk_size_does_not_change_output(self, make_model, seed):
        model = make_model(seed=seed, feature_dim=32)
        lr, guide = _normalized_inputs(generate_synthetic(1, seed=seed, size=32)[0], 4)
        reference = model.full_inference(lr, guide, chunk_size=1)
        for chunk in (7, 5000, 65536):
            assert torch.equal(model.full_inference(lr, guide, chunk_size=chunk), reference)

    def test_chunk_size_spanning_several_tiles(self, make_model):
        model = make_model(seed=4, mode="value_only", weight_strategy="direct_regression")
        lr, guide = _normalized_inputs(generate_synthetic(1, seed=4, size=96)[0], 4)
        lr, guide = lr.expand(2, -1, -1, -1), guide.expand(2, -1, -1, -1)
        small = model.full_inference(lr, guide, chunk_size=1)
        assert small.shape == (2, 1, 96, 96)
        assert torch.equal(small, model.full_inference(lr, guide, chunk_size=65536))

    def test_matches_pixelwise_forward(self, make_model):
        model = make_model(seed=7)
        lr, guide = _normalized_inputs(generate_synthetic(1, seed=7, size=8)[0], 2)
        full = model.full_inference(lr, guide)
        coords = make_coord_grid(8, 8).coords
        with torch.no_grad():
            pixelwise = torch.stack(
                [model(lr, guide, coords[i, j].reshape(1, 1, 2))[0, 0] for i in range(8) for j in range(8)]
            ).reshape(1, 8, 8)
        assert full.shape == (1, 8, 8)
        assert torch.allclose(full, pixelwise, atol=1e-6)

    def test_one_model_serves_every_scale(self, make_model):
        model = make_model(seed=8)
        pair = generate_synthetic(1, seed=8, size=32)[0]
        for scale in (2, 4, 8, 16):
            lr, guide = _normalized_inputs(pair, scale)
            assert model.full_inference(lr, guide).shape == (1, 32, 32)

    def test_batched_output_shape(self, make_model):
        model = make_model(seed=1)
        lr, guide = _normalized_inputs(generate_synthetic(1, seed=1, size=16)[0], 4)
        out = model.full_inference(lr.expand(2, -1, -1, -1), guide.expand(2, -1, -1, -1))
        assert out.shape == (2, 1, 16, 16)

    @pytest.mark.parametrize("chunk_size", [0, -3])
    def test_bad_chunk_size(self, make_model, chunk_size):
        lr, guide = _normalized_inputs(generate_synthetic(1, seed=1, size=16)[0], 4)
        with pytest.raises(InvalidArgumentError):
            make_model().full_inference(lr, guide, chunk_size=chunk_size)


class TestInspectWeights:
    def test_reports_four_normalized_corners(self, make_model):
        model = make_model(seed=2)
        lr, guide = _normalized_inputs(generate_synthetic(1, seed=2, size=16)[0], 4)
        inspection = model.inspect_weights(lr, guide, (5, 9))
        assert inspection.pixel == (5, 9)
        assert len(inspection.corner_indices) == 4
        assert sum(inspection.weights) == pytest.approx(1.0, abs=1e-6)
        assert len(inspection.to_dict()["corners"]) == 4

    def test_pixel_outside_guide(self, make_model):
        lr, guide = _normalized_inputs(generate_synthetic(1, seed=2, size=16)[0], 4)
        with pytest.raises(InvalidArgumentError):
            make_model().inspect_weights(lr, guide, (16, 0))
