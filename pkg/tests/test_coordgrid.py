import pytest
import torch

from src.jiif.coordgrid import (
    corner_neighbors,
    cubic_kernel,
    gather_codes,
    make_coord_grid,
    nearest_index,
    nearest_indices,
    reflect_index,
    sample_latent,
)
from src.jiif.exceptions import InvalidArgumentError


def _query(*coord, dtype=torch.float64):
    return torch.tensor([[list(coord)]], dtype=dtype)


class TestMakeCoordGrid:
    def test_single_pixel_is_center(self):
        grid = make_coord_grid(1, 1)
        assert grid.coords.shape == (1, 1, 2)
        assert grid.coords[0, 0].tolist() == [0.0, 0.0]

    def test_two_by_two(self):
        coords = make_coord_grid(2, 2, torch.float64).flatten().tolist()
        assert coords == [[-0.5, -0.5], [-0.5, 0.5], [0.5, -0.5], [0.5, 0.5]]

    def test_non_square_first_pixel(self):
        grid = make_coord_grid(4, 6, torch.float64)
        assert grid.coords[0, 0, 0].item() == pytest.approx(-0.75, abs=1e-12)
        assert grid.coords[0, 0, 1].item() == pytest.approx(-5.0 / 6.0, abs=1e-12)

    def test_matches_closed_form(self):
        grid = make_coord_grid(5, 7, torch.float64)
        for i in range(5):
            for j in range(7):
                assert grid.coords[i, j, 0].item() == pytest.approx(-1 + (2 * i + 1) / 5, abs=1e-12)
                assert grid.coords[i, j, 1].item() == pytest.approx(-1 + (2 * j + 1) / 7, abs=1e-12)

    @pytest.mark.parametrize("height,width", [(0, 3), (3, 0), (-1, 2)])
    def test_non_positive_size_rejected(self, height, width):
        with pytest.raises(InvalidArgumentError):
            make_coord_grid(height, width)

    @pytest.mark.parametrize("size", [1, 2, 3, 7, 8, 13])
    def test_flip_symmetry_is_exact(self, size):
        rows = make_coord_grid(size, 1).coords[:, 0, 0]
        assert torch.equal(rows, -rows.flip(0))


class TestNearestIndex:
    def test_center_of_two_by_two_ties_to_lower_index(self):
        assert nearest_index((0.0, 0.0), 2, 2)[:2] == (0, 0)

    def test_pixel_center_round_trip(self):
        coord = make_coord_grid(4, 6, torch.float64).coords[3, 5]
        index = nearest_index(coord, 4, 6)
        assert (index.row, index.col, index.clamped) == (3, 5, False)

    def test_off_center_coordinate(self):
        index = nearest_index((0.49, -0.49), 2, 2)
        assert (index.row, index.col) == (1, 0)

    def test_matches_brute_force_distance(self):
        gen = torch.Generator().manual_seed(3)
        coords = torch.rand(500, 2, generator=gen, dtype=torch.float64) * 1.98 - 0.99
        grid = make_coord_grid(5, 9, torch.float64).flatten()
        rows, cols, clamped = nearest_indices(coords, 5, 9)
        assert not clamped.any()
        for coord, row, col in zip(coords, rows, cols):
            distances = ((grid - coord) ** 2).sum(dim=-1)
            best = int(distances.argmin())
            assert (best // 9, best % 9) == (int(row), int(col))

    def test_out_of_range_is_clamped_and_flagged(self):
        index = nearest_index((1.2, -1.2), 4, 4)
        assert (index.row, index.col, index.clamped) == (3, 0, True)

    def test_negated_centers_map_to_mirrored_pixels(self):
        coords = make_coord_grid(6, 4, torch.float64).coords
        rows, cols, _ = nearest_indices(-coords, 6, 4)
        expected_rows = (5 - torch.arange(6)).unsqueeze(1).expand(6, 4)
        expected_cols = (3 - torch.arange(4)).unsqueeze(0).expand(6, 4)
        assert torch.equal(rows, expected_rows)
        assert torch.equal(cols, expected_cols)


class TestCornerNeighbors:
    def test_query_on_lr_center_has_zero_offset(self):
        center = make_coord_grid(4, 4, torch.float64).coords[1, 2]
        bundle = corner_neighbors(center.reshape(1, 1, 2), 4, 4)
        assert bundle.corner_indices[0, 0, 0].tolist() == [1, 2]
        assert bundle.rel_coords[0, 0, 0].tolist() == [0.0, 0.0]

    def test_cell_center_sees_all_four_pixels(self):
        bundle = corner_neighbors(_query(0.0, 0.0), 2, 2)
        assert bundle.corner_indices[0, 0].tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]
        assert torch.allclose(bundle.rel_coords[0, 0].abs(), torch.full((4, 2), 0.5, dtype=torch.float64))

    def test_border_corners_clamped_with_duplicates(self):
        bundle = corner_neighbors(_query(-0.99, -0.99), 2, 2)
        assert bundle.corner_indices[0, 0].tolist() == [[0, 0]] * 4
        assert torch.allclose(bundle.corner_coords[0, 0], torch.full((4, 2), -0.5, dtype=torch.float64))
        # offsets are taken from the virtual pre-clamp positions
        rel = bundle.rel_coords[0, 0]
        assert rel[0].tolist() == pytest.approx([0.51, 0.51])
        assert rel[3].tolist() == pytest.approx([-0.49, -0.49])

    def test_always_four_corners_in_range(self):
        gen = torch.Generator().manual_seed(0)
        coords = torch.rand(1, 1000, 2, generator=gen) * 2 - 1
        bundle = corner_neighbors(coords, 3, 5)
        assert bundle.corner_indices.shape == (1, 1000, 4, 2)
        assert bundle.corner_indices[..., 0].min() >= 0 and bundle.corner_indices[..., 0].max() <= 2
        assert bundle.corner_indices[..., 1].min() >= 0 and bundle.corner_indices[..., 1].max() <= 4


class TestSampleLatent:
    @pytest.mark.parametrize("mode", ["nearest", "bilinear", "bicubic"])
    def test_grid_centers_reproduce_codes(self, mode):
        codes = torch.randn(2, 3, 5, 4, generator=torch.Generator().manual_seed(1), dtype=torch.float64)
        coords = make_coord_grid(5, 4, torch.float64).flatten().unsqueeze(0).expand(2, -1, -1)
        sampled = sample_latent(codes, coords, mode)
        expected = codes.reshape(2, 3, -1).transpose(1, 2)
        assert torch.allclose(sampled, expected, atol=1e-12)

    @pytest.mark.parametrize("mode", ["nearest", "bilinear", "bicubic"])
    def test_constant_map_is_reproduced(self, mode):
        codes = torch.full((1, 2, 4, 6), 3.25, dtype=torch.float64)
        coords = torch.rand(1, 300, 2, generator=torch.Generator().manual_seed(2), dtype=torch.float64) * 2 - 1
        expected = torch.full((1, 300, 2), 3.25, dtype=torch.float64)
        assert torch.allclose(sample_latent(codes, coords, mode), expected, atol=1e-6)

    def test_bilinear_ramp_midpoint(self):
        codes = torch.tensor([[[[0.0, 1.0, 2.0, 3.0]]]], dtype=torch.float64)
        sampled = sample_latent(codes, _query(0.0, 0.0), "bilinear")
        assert sampled.item() == pytest.approx(1.5, abs=1e-12)

    def test_empty_map_rejected(self):
        with pytest.raises(InvalidArgumentError):
            sample_latent(torch.zeros(1, 1, 0, 4), _query(0.0, 0.0), "nearest")

    def test_unknown_mode_rejected(self):
        with pytest.raises(InvalidArgumentError):
            sample_latent(torch.zeros(1, 1, 2, 2), _query(0.0, 0.0), "lanczos")

    def test_gather_codes_shape(self):
        codes = torch.arange(24.0).reshape(1, 2, 3, 4)
        rows = torch.tensor([[[0, 2]]])
        cols = torch.tensor([[[1, 3]]])
        picked = gather_codes(codes, rows, cols)
        assert picked.shape == (1, 1, 2, 2)
        assert picked[0, 0].tolist() == [[1.0, 13.0], [11.0, 23.0]]


class TestCubicKernel:
    def test_catmull_rom_values(self):
        t = torch.tensor([0.0, 0.5, 1.0, 1.5, 2.0, 2.5], dtype=torch.float64)
        expected = [1.0, 0.5625, 0.0, -0.0625, 0.0, 0.0]
        assert cubic_kernel(t).tolist() == pytest.approx(expected, abs=1e-12)

    def test_kernel_is_even(self):
        t = torch.linspace(0, 2.5, 51, dtype=torch.float64)
        assert torch.equal(cubic_kernel(t), cubic_kernel(-t))

    def test_reflect_index(self):
        index = torch.tensor([-2, -1, 0, 3, 4, 5])
        assert reflect_index(index, 4).tolist() == [1, 0, 0, 3, 3, 2]
