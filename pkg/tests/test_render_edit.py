import numpy as np
import pytest
import torch

from visualsplit.descriptors import (
    ColourSegmentationMap,
    apply_edits,
    recolour_region,
    render_segmentation,
)


def _random_soft_map(h=4, w=4, k=3, seed=0):
    g = torch.Generator().manual_seed(seed)
    raw = torch.rand(h, w, k, generator=g, dtype=torch.float64)
    assignments = raw / raw.sum(-1, keepdim=True)
    centroids = torch.rand(k, 2, generator=g, dtype=torch.float64) * 100 - 50
    return ColourSegmentationMap(assignments=assignments, centroids=centroids, temperature=25.0)


def test_one_hot_assignment_renders_centroid():
    assignments = torch.zeros(2, 2, 3, dtype=torch.float64)
    assignments[..., 1] = 1.0
    centroids = torch.tensor([[0.0, 0.0], [10.0, -20.0], [5.0, 5.0]], dtype=torch.float64)
    seg = ColourSegmentationMap(assignments, centroids, 25.0)
    render = render_segmentation(seg)
    assert torch.allclose(render.ab_render, centroids[1].expand(2, 2, 2))


def test_uniform_assignment_renders_centroid_mean():
    k = 4
    assignments = torch.full((3, 3, k), 1.0 / k, dtype=torch.float64)
    centroids = torch.arange(k * 2, dtype=torch.float64).reshape(k, 2)
    seg = ColourSegmentationMap(assignments, centroids, 25.0)
    render = render_segmentation(seg)
    assert torch.allclose(render.ab_render, centroids.mean(0).expand(3, 3, 2), atol=1e-12)


def test_render_matches_scalar_loop_oracle():
    seg = _random_soft_map()
    render = render_segmentation(seg)
    a = seg.assignments.numpy()
    c = seg.centroids.numpy()
    ref = np.zeros((4, 4, 2))
    for i in range(4):
        for j in range(4):
            for k in range(3):
                ref[i, j] += a[i, j, k] * c[k]
    assert np.allclose(render.ab_render.numpy(), ref, atol=1e-6)
    assert render.display_rgb.shape == (4, 4, 3)
    assert render.display_rgb.min() >= 0 and render.display_rgb.max() <= 1


def test_recolour_round_trip_is_identity():
    seg = _random_soft_map()
    original = seg.centroids[1].clone()
    there = recolour_region(seg, 1, (0.0, 60.0))
    back = recolour_region(there, 1, tuple(original.tolist()))
    assert torch.equal(back.centroids, seg.centroids)
    assert torch.equal(back.assignments, seg.assignments)


def test_recolour_same_value_is_noop():
    seg = _random_soft_map()
    same = recolour_region(seg, 2, tuple(seg.centroids[2].tolist()))
    assert torch.equal(same.centroids, seg.centroids)


def test_recolour_out_of_range_rejected():
    seg = _random_soft_map()
    with pytest.raises(IndexError):
        recolour_region(seg, 3, (0.0, 0.0))
    with pytest.raises(IndexError):
        recolour_region(seg, -1, (0.0, 0.0))


def test_recolour_changes_only_assigned_pixels():
    # crisp two-cluster map: left pixels cluster 0, right pixels cluster 1
    assignments = torch.zeros(4, 4, 2, dtype=torch.float64)
    assignments[:, :2, 0] = 1.0
    assignments[:, 2:, 1] = 1.0
    centroids = torch.tensor([[-40.0, 0.0], [40.0, 0.0]], dtype=torch.float64)
    seg = ColourSegmentationMap(assignments, centroids, 25.0)
    before = render_segmentation(seg).ab_render
    after = render_segmentation(recolour_region(seg, 0, (0.0, 60.0))).ab_render
    diff = (after - before).abs().sum(-1)
    assert (diff[:, :2] > 1.0).all()       # recoloured region moved
    assert diff[:, 2:].max() < 1e-6        # off-cluster pixels untouched


def test_soft_recolour_leak_bounded_by_off_assignment_mass():
    seg = _random_soft_map(seed=5)
    before = render_segmentation(seg).ab_render
    after = render_segmentation(recolour_region(seg, 0, (0.0, 60.0))).ab_render
    delta = (seg.centroids[0] - torch.tensor([0.0, 60.0], dtype=torch.float64)).abs().max()
    leak = (after - before).abs().max(-1).values
    bound = seg.assignments[..., 0] * delta + 1e-9
    assert (leak <= bound).all()


def test_apply_edits_order_and_unknown_op():
    seg = _random_soft_map()
    import dataclasses

    from visualsplit.descriptors import (
        DescriptorBundle,
        DescriptorConfig,
        EdgeMap,
        GreyLevelHistogram,
    )

    weights = torch.full((20,), 0.05, dtype=torch.float64)
    hist = GreyLevelHistogram(weights, torch.arange(20, dtype=torch.float64) * 5 + 2.5, 2.0)
    bundle = DescriptorBundle(
        edges=EdgeMap(torch.zeros(4, 4, dtype=torch.float64)),
        segmentation=seg,
        histogram=hist,
        config=DescriptorConfig(num_clusters=3, num_bins=20),
        height=4,
        width=4,
    )
    edited = apply_edits(
        bundle,
        [
            {"op": "recolour", "cluster": 0, "ab": [1.0, 2.0]},
            {"op": "shift_hist", "delta": 10.0},
        ],
    )
    assert torch.allclose(edited.segmentation.centroids[0], torch.tensor([1.0, 2.0], dtype=torch.float64))
    assert not torch.allclose(edited.histogram.weights, bundle.histogram.weights)
    with pytest.raises(ValueError):
        apply_edits(bundle, [{"op": "sharpen"}])
