import numpy as np
import pytest
import torch

from promptseg.geometry import AnnotationFrame, Box
from promptseg.tokens import (
    DegenerateRegionError,
    ImagePatchConfig,
    LpmConfig,
    PatchPartition,
    TokenGrid,
    crop_resize,
    crop_resize_batch,
    part_patch_config,
    positional_encoding,
)


class TestCropResize:
    def test_full_image_identity(self):
        img = torch.rand(3, 16, 16)
        out = crop_resize(img, Box(0, 0, 16, 16), 16)
        assert torch.allclose(out, img, atol=1e-6)

    def test_constant_image(self):
        img = torch.full((1, 10, 10), 0.37)
        out = crop_resize(img, Box(2.3, 1.1, 7.9, 8.4), 5)
        assert torch.allclose(out, torch.full((1, 5, 5), 0.37), atol=1e-6)

    def test_checkerboard_bilinear(self):
        img = torch.tensor([[[0.0, 1.0], [1.0, 0.0]]])
        out = crop_resize(img, Box(0, 0, 2, 2), 4).squeeze(0)
        # corners reproduce the source pixels
        assert out[0, 0] == pytest.approx(0.0, abs=1e-6)
        assert out[0, 3] == pytest.approx(1.0, abs=1e-6)
        assert out[3, 0] == pytest.approx(1.0, abs=1e-6)
        assert out[3, 3] == pytest.approx(0.0, abs=1e-6)
        # interior follows the bilinear surface x + y - 2xy; the four
        # central samples average to the surface's center value 0.5
        center = out[1:3, 1:3].mean()
        assert center == pytest.approx(0.5, abs=1e-6)
        ts = torch.linspace(0, 1, 4)
        yy, xx = torch.meshgrid(ts, ts, indexing="ij")
        assert torch.allclose(out, xx + yy - 2 * xx * yy, atol=1e-6)

    def test_integer_subcrop_identity(self):
        img = torch.rand(2, 12, 12)
        out = crop_resize(img, Box(3, 2, 9, 8), 6)
        assert torch.allclose(out, img[:, 2:8, 3:9], atol=1e-6)

    def test_degenerate_region(self):
        img = torch.rand(3, 8, 8)
        with pytest.raises(DegenerateRegionError):
            crop_resize(img, Box(-5, -5, 0, 0), 4)

    def test_region_clamped(self):
        img = torch.rand(3, 8, 8)
        out = crop_resize(img, Box(-10, -10, 20, 20), 8)
        ref = crop_resize(img, Box(0, 0, 8, 8), 8)
        assert torch.allclose(out, ref, atol=1e-6)

    def test_batch_matches_single(self):
        img = torch.rand(3, 20, 20)
        regions = [Box(1, 2, 9, 11), Box(0, 0, 20, 20), Box(5.5, 3.2, 14.1, 18.7)]
        batch = crop_resize_batch(img, regions, 7)
        for i, r in enumerate(regions):
            assert torch.allclose(batch[i], crop_resize(img, r, 7), atol=1e-6)


class TestPatchPartition:
    def test_token_count_nonoverlapping(self):
        cfg = ImagePatchConfig(patch_size=7, stride=7, embed_dim=8)
        part = PatchPartition(cfg, in_channels=3)
        out = part(torch.rand(1, 3, 28, 28))
        assert out.shape == (1, 16, 8)

    def test_token_count_overlapping(self):
        cfg = ImagePatchConfig(patch_size=8, stride=4, embed_dim=8)
        part = PatchPartition(cfg, in_channels=3)
        out = part(torch.rand(2, 3, 28, 28))
        assert out.shape == (2, 36, 8)

    def test_patch_larger_than_input(self):
        cfg = ImagePatchConfig(patch_size=32, stride=32, embed_dim=8)
        part = PatchPartition(cfg, in_channels=1)
        with pytest.raises(ValueError):
            part(torch.rand(1, 1, 28, 28))

    def test_count_formula_property(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            patch = int(rng.integers(1, 12))
            stride = int(rng.integers(1, patch + 1))
            size = int(rng.integers(patch, 40))
            cfg = ImagePatchConfig(patch, stride, 4)
            part = PatchPartition(cfg, in_channels=1)
            out = part(torch.rand(1, 1, size, size))
            expected = ((size - patch) // stride + 1) ** 2
            assert out.shape[1] == expected

    def test_invalid_stride(self):
        with pytest.raises(ValueError):
            ImagePatchConfig(patch_size=4, stride=5, embed_dim=8)
        with pytest.raises(ValueError):
            ImagePatchConfig(patch_size=4, stride=0, embed_dim=8)

    def test_as_grid(self):
        cfg = ImagePatchConfig(4, 4, 8)
        part = PatchPartition(cfg, in_channels=3)
        grid = part.as_grid(torch.rand(3, 16, 16), AnnotationFrame(16, 16))
        assert grid.grid_shape == (4, 4)
        assert len(grid) == 16


class TestPartPatchConfig:
    @pytest.mark.parametrize("roi", [7, 14, 21, 28, 35])
    def test_sweep_keeps_36_tokens(self, roi):
        cfg = part_patch_config(roi, 16)
        assert cfg.grid_side(roi) == 6

    def test_default_lpm_config(self):
        cfg = LpmConfig()
        assert cfg.roi_size == 28
        assert cfg.patch.patch_size == 8
        assert cfg.patch.stride == 4

    def test_roi_smaller_than_patch_rejected(self):
        with pytest.raises(ValueError):
            LpmConfig(roi_size=4, patch=ImagePatchConfig(8, 4, 16))


class TestPositionalEncoding:
    def test_origin_sin_zero_cos_one(self):
        enc = positional_encoding((3, 3), 8)
        first = enc[0]
        # first half encodes row 0, second half col 0: sin entries 0, cos 1
        assert torch.allclose(first[0::2], torch.zeros(4), atol=1e-7)
        assert torch.allclose(first[1::2], torch.ones(4), atol=1e-7)

    def test_distinct_cells_distinct_vectors(self):
        enc = positional_encoding((5, 7), 16)
        uniq = {tuple(np.round(v.numpy(), 9)) for v in enc}
        assert len(uniq) == 35

    def test_deterministic(self):
        a = positional_encoding((4, 4), 12)
        b = positional_encoding((4, 4), 12)
        assert torch.equal(a, b)

    def test_unit_bounded(self):
        enc = positional_encoding((9, 9), 32)
        assert enc.abs().max() <= 1.0 + 1e-7

    def test_odd_dim_rejected(self):
        with pytest.raises(ValueError):
            positional_encoding((2, 2), 6)


class TestTokenGrid:
    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            TokenGrid(torch.zeros(5, 4), (2, 3), AnnotationFrame(8, 8))
