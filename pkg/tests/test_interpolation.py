import numpy as np
import pytest
import torch

from src.jiif.coordgrid import corner_neighbors, gather_codes, make_coord_grid
from src.jiif.exceptions import InvalidArgumentError
from src.jiif.interpolation import (
    bicubic_downsample,
    bicubic_resample,
    bilinear_bundle,
    bilinear_weights,
    weighted_interpolate,
)


def _bundle(y, x, height=2, width=2):
    return corner_neighbors(torch.tensor([[[y, x]]], dtype=torch.float64), height, width)


def _bilinear_oracle(image: np.ndarray, coord) -> float:
    """Textbook bilinear lookup with edge clamping, pixel by pixel."""
    height, width = image.shape
    py = (coord[0] + 1.0) * height / 2.0 - 0.5
    px = (coord[1] + 1.0) * width / 2.0 - 0.5
    i0, j0 = int(np.floor(py)), int(np.floor(px))
    ty, tx = py - i0, px - j0

    def at(i, j):
        return image[min(max(i, 0), height - 1), min(max(j, 0), width - 1)]

    top = (1 - tx) * at(i0, j0) + tx * at(i0, j0 + 1)
    bottom = (1 - tx) * at(i0 + 1, j0) + tx * at(i0 + 1, j0 + 1)
    return (1 - ty) * top + ty * bottom


class TestBilinearWeights:
    def test_cell_center_is_uniform(self):
        weights = bilinear_weights(_bundle(0.0, 0.0))
        assert weights[0, 0].tolist() == pytest.approx([0.25] * 4, abs=1e-12)

    @pytest.mark.parametrize("corner", range(4))
    def test_query_on_corner_is_one_hot(self, corner):
        row, col = divmod(corner, 2)
        center = make_coord_grid(4, 4, torch.float64).coords[1 + row, 1 + col]
        bundle = corner_neighbors(center.reshape(1, 1, 2), 4, 4)
        weights = bilinear_weights(bundle)[0, 0]
        index = bundle.corner_indices[0, 0].tolist().index([1 + row, 1 + col])
        expected = [0.0] * 4
        expected[index] = 1.0
        assert weights.tolist() == pytest.approx(expected, abs=1e-12)

    def test_quarter_offset_weights(self):
        weights = bilinear_weights(_bundle(-0.25, -0.25))
        assert weights[0, 0].tolist() == pytest.approx([0.5625, 0.1875, 0.1875, 0.0625], abs=1e-12)

    def test_weights_are_normalized(self):
        coords = torch.rand(1, 2000, 2, generator=torch.Generator().manual_seed(5), dtype=torch.float64) * 2 - 1
        weights = bilinear_weights(corner_neighbors(coords, 7, 3))
        assert torch.allclose(weights.sum(-1), torch.ones(1, 2000, dtype=torch.float64), atol=1e-12)
        assert (weights >= 0).all()

    def test_matches_textbook_bilinear_on_random_images(self):
        rng = np.random.default_rng(2024)
        for _ in range(100):
            height, width = (int(v) for v in rng.integers(1, 9, size=2))
            image = rng.normal(size=(height, width))
            coords = rng.uniform(-1.0, 1.0, size=(25, 2))
            bundle = corner_neighbors(torch.from_numpy(coords)[None], height, width)
            values = gather_codes(
                torch.from_numpy(image)[None, None],
                bundle.corner_indices[..., 0],
                bundle.corner_indices[..., 1],
            )[..., 0]
            out = bilinear_bundle(bundle, values).interpolate()[0].numpy()
            expected = [_bilinear_oracle(image, coord) for coord in coords]
            np.testing.assert_allclose(out, expected, atol=1e-10)


class TestWeightedInterpolate:
    def test_uniform_weights_give_mean(self):
        out = weighted_interpolate(torch.full((4,), 0.25), torch.tensor([1.0, 2.0, 3.0, 4.0]))
        assert out.item() == pytest.approx(2.5)

    @pytest.mark.parametrize("k", range(4))
    def test_one_hot_selects(self, k):
        weights = torch.zeros(4)
        weights[k] = 1.0
        values = torch.tensor([1.0, 2.0, 3.0, 4.0])
        assert weighted_interpolate(weights, values).item() == values[k].item()

    def test_bilinear_dot_product(self):
        weights = torch.tensor([0.5625, 0.1875, 0.1875, 0.0625], dtype=torch.float64)
        values = torch.tensor([1.0, 2.0, 3.0, 4.0], dtype=torch.float64)
        assert weighted_interpolate(weights, values).item() == pytest.approx(1.75, abs=1e-12)

    def test_constant_field_reproduced(self):
        weights = torch.softmax(torch.randn(500, 4, generator=torch.Generator().manual_seed(8)), dim=-1)
        out = weighted_interpolate(weights, torch.full((500, 4), 7.0))
        assert torch.allclose(out, torch.full((500,), 7.0), atol=1e-5)

    def test_unnormalized_weights_flagged_in_debug_mode(self):
        weights = torch.tensor([0.5, 0.5, 0.5, 0.5])
        values = torch.ones(4)
        with pytest.raises(InvalidArgumentError):
            weighted_interpolate(weights, values, debug=True)
        assert weighted_interpolate(weights, values, debug=False).item() == 2.0

    def test_shape_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            weighted_interpolate(torch.ones(4), torch.ones(3))


class TestBicubicResample:
    @pytest.mark.parametrize("size", [(1, 1), (5, 3), (16, 24)])
    def test_constant_image(self, size):
        image = torch.full((1, 6, 6), 4.5, dtype=torch.float64)
        out = bicubic_resample(image, *size)
        assert out.shape == (1, *size)
        assert torch.allclose(out, torch.full_like(out, 4.5), atol=1e-9)

    def test_same_size_is_identity(self):
        image = torch.randn(2, 3, 7, 5)
        assert torch.allclose(bicubic_resample(image, 7, 5), image, atol=1e-6)

    def test_small_ramp_round_trip_interior(self):
        yy, xx = torch.meshgrid(torch.arange(8.0), torch.arange(8.0), indexing="ij")
        ramp = ((yy + xx) / 14.0)[None].to(torch.float64)
        restored = bicubic_resample(bicubic_downsample(ramp, 2), 8, 8)
        assert torch.allclose(restored[:, 3:5, 3:5], ramp[:, 3:5, 3:5], atol=1e-3)

    def test_affine_image_reproduced_away_from_border(self):
        yy, xx = torch.meshgrid(
            torch.arange(32, dtype=torch.float64), torch.arange(32, dtype=torch.float64), indexing="ij"
        )
        image = (2.0 * (0.7 * yy - 0.3 * xx) + 5.0)[None]
        restored = bicubic_resample(bicubic_downsample(image, 2), 32, 32)
        assert torch.allclose(restored[:, 5:27, 5:27], image[:, 5:27, 5:27], atol=1e-9)

    def test_batched_and_unbatched_agree(self):
        image = torch.randn(1, 8, 8, generator=torch.Generator().manual_seed(4))
        assert torch.equal(bicubic_resample(image, 16, 16), bicubic_resample(image[None], 16, 16)[0])

    def test_zero_output_size_rejected(self):
        with pytest.raises(InvalidArgumentError):
            bicubic_resample(torch.ones(1, 4, 4), 0, 4)

    def test_downsample_needs_divisible_size(self):
        with pytest.raises(InvalidArgumentError):
            bicubic_downsample(torch.ones(1, 10, 10), 4)
