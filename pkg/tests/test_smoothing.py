"""Substreams, noise samplers, and the eligible-pair domain."""

import numpy as np
import pytest
from scipy import stats

from elegant.data import Graph
from elegant.smoothing import (
    DOMAIN_ATTRIBUTE,
    DOMAIN_STRUCTURE,
    SmoothingConfig,
    StructureMask,
    apply_attribute_noise,
    apply_structure_mask,
    domain_size,
    eligible_pairs,
    sample_attribute_noise,
    sample_structure_mask,
    substream,
)


def test_substream_reproducible_and_order_free():
    a = substream(42, DOMAIN_STRUCTURE, 7).random(5)
    b = substream(42, DOMAIN_STRUCTURE, 7).random(5)
    np.testing.assert_array_equal(a, b)
    # drawing stream 9 first must not change stream 7
    substream(42, DOMAIN_STRUCTURE, 9).random(100)
    np.testing.assert_array_equal(substream(42, DOMAIN_STRUCTURE, 7).random(5), a)


def test_substream_keys_are_disjoint():
    base = substream(0, DOMAIN_STRUCTURE, 0).random(4)
    assert not np.array_equal(base, substream(0, DOMAIN_STRUCTURE, 1).random(4))
    assert not np.array_equal(base, substream(0, DOMAIN_ATTRIBUTE, 0).random(4))
    assert not np.array_equal(base, substream(1, DOMAIN_STRUCTURE, 0).random(4))


def test_substream_stream_id_bounds():
    substream(0, DOMAIN_STRUCTURE, (1 << 56) - 1)
    with pytest.raises(ValueError):
        substream(0, DOMAIN_STRUCTURE, 1 << 56)
    with pytest.raises(ValueError):
        substream(0, DOMAIN_STRUCTURE, -1)


def test_substream_first_draws_look_uniform():
    # smoke check: first uniform from many consecutive streams
    u = np.array([substream(5, DOMAIN_ATTRIBUTE, j).random() for j in range(512)])
    counts, _ = np.histogram(u, bins=8, range=(0, 1))
    assert stats.chisquare(counts).pvalue > 1e-3


@pytest.mark.parametrize(
    "kwargs",
    [
        {"sigma": 0.0},
        {"sigma": -1.0},
        {"beta": 0.5},
        {"beta": 1.0},
        {"n_outer": 0},
        {"n_inner": 0},
        {"alpha": 0.0},
        {"alpha": 1.0},
        {"eta": -0.1},
        {"metric": "parity"},
        {"k_max": -1},
        {"d_convention": "???"},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SmoothingConfig(**kwargs)


def test_eligible_pairs_small_case():
    pairs = eligible_pairs(5, [1, 3])
    expected = {(0, 1), (1, 2), (1, 3), (1, 4), (0, 3), (2, 3), (3, 4)}
    assert set(map(tuple, pairs.tolist())) == expected
    assert pairs.shape[0] == domain_size(5, 2)
    # sorted lexicographically
    assert pairs.tolist() == sorted(pairs.tolist())


def test_eligible_pairs_validation():
    with pytest.raises(ValueError):
        eligible_pairs(5, [])
    with pytest.raises(ValueError):
        eligible_pairs(5, [5])


def test_domain_size_conventions():
    assert domain_size(100, 5, "deduplicated") == 5 * 95 + 10
    assert domain_size(100, 5, "literal") == 500
    with pytest.raises(ValueError):
        domain_size(100, 5, "other")


def test_structure_mask_flip_rate():
    g = Graph(n=400, edges=frozenset())
    vul = tuple(range(10))
    cfg = SmoothingConfig(beta=0.9, master_seed=0)
    d = domain_size(400, 10)
    flips = [len(sample_structure_mask(cfg, g, vul, stream_id=j).pairs) for j in range(40)]
    total = sum(flips)
    expect = 40 * d * 0.1
    sd = np.sqrt(40 * d * 0.1 * 0.9)
    assert abs(total - expect) < 5 * sd


def test_structure_mask_pairs_are_eligible_and_deterministic():
    g = Graph(n=30, edges=frozenset({(0, 1)}))
    vul = (2, 5)
    cfg = SmoothingConfig(beta=0.6, master_seed=3)
    mask = sample_structure_mask(cfg, g, vul, stream_id=4)
    allowed = set(map(tuple, eligible_pairs(30, vul).tolist()))
    assert set(mask.pairs) <= allowed
    assert mask.domain_size == len(allowed)
    again = sample_structure_mask(cfg, g, vul, stream_id=4)
    assert mask.pairs == again.pairs
    other = sample_structure_mask(cfg, g, vul, stream_id=5)
    assert mask.pairs != other.pairs


def test_structure_mask_text_round_trip():
    mask = StructureMask(pairs=frozenset({(0, 3), (1, 2)}), domain_size=9)
    back = StructureMask.from_text(mask.to_text())
    assert back == mask
    # reversed pairs normalize on read
    assert StructureMask.from_text("4\n3 1\n").pairs == frozenset({(1, 3)})


def test_attribute_noise_scale_and_shape():
    cfg = SmoothingConfig(sigma=0.7, master_seed=1)
    noise = sample_attribute_noise(cfg, (4, 9, 2), d=50, stream_id=0)
    assert noise.block.shape == (3, 50)
    assert noise.vulnerable == (2, 4, 9)
    draws = np.concatenate(
        [sample_attribute_noise(cfg, (0, 1), d=200, stream_id=j).block.ravel() for j in range(30)]
    )
    assert abs(draws.std() - 0.7) < 0.02
    assert abs(draws.mean()) < 0.02


def test_attribute_noise_deterministic():
    cfg = SmoothingConfig(master_seed=8)
    a = sample_attribute_noise(cfg, (1,), d=4, stream_id=11)
    b = sample_attribute_noise(cfg, (1,), d=4, stream_id=11)
    np.testing.assert_array_equal(a.block, b.block)
    with pytest.raises(ValueError):
        sample_attribute_noise(cfg, (), d=4, stream_id=0)


def test_apply_structure_mask_flips_both_ways():
    g = Graph(n=4, edges=frozenset({(0, 1), (2, 3)}))
    mask = StructureMask(pairs=frozenset({(0, 1), (1, 2)}), domain_size=5)
    out = apply_structure_mask(g, mask)
    assert out.edges == frozenset({(2, 3), (1, 2)})
    # applying the same mask twice restores the original graph
    assert apply_structure_mask(out, mask).edges == g.edges


def test_apply_attribute_noise_touches_only_vulnerable_rows():
    X = np.zeros((5, 3))
    from elegant.smoothing import AttributeNoise

    noise = AttributeNoise(block=np.ones((2, 3)), vulnerable=(1, 4))
    out = apply_attribute_noise(X, noise)
    np.testing.assert_array_equal(out[[1, 4]], 1.0)
    np.testing.assert_array_equal(out[[0, 2, 3]], 0.0)
    np.testing.assert_array_equal(X, 0.0)  # input untouched


def test_apply_attribute_noise_validates():
    from elegant.smoothing import AttributeNoise

    X = np.zeros((5, 3))
    with pytest.raises(ValueError):
        apply_attribute_noise(X, AttributeNoise(block=np.ones((2, 2)), vulnerable=(1, 4)))
    with pytest.raises(ValueError):
        apply_attribute_noise(X, AttributeNoise(block=np.ones((1, 3)), vulnerable=(7,)))
