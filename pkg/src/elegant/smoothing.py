"""Noise samplers for the dual smoothing construction.

Every draw comes from a counter-based Philox generator keyed purely by
(master_seed, domain, stream_id), so any sample can be regenerated in
isolation and parallel schedules cannot change results.  Structure noise
flips each eligible pair (a pair with at least one vulnerable endpoint)
independently with probability 1 - beta; attribute noise adds isotropic
Gaussian rows of scale sigma to the vulnerable rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

# substream domains; disjoint keys keep every consumer independent
DOMAIN_STRUCTURE = 1
DOMAIN_ATTRIBUTE = 2
DOMAIN_SPLIT = 3
DOMAIN_TESTSET = 4
DOMAIN_TRAIN = 5
DOMAIN_ATTACK = 6
DOMAIN_PROBE = 7

_STREAM_BITS = 56


def substream(master_seed: int, domain: int, stream_id: int) -> np.random.Generator:
    """Generator keyed by (master_seed, domain, stream_id); order independent."""
    if stream_id < 0 or stream_id >= 1 << _STREAM_BITS:
        raise ValueError(f"stream_id out of range: {stream_id}")
    key = (np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF), np.uint64((domain << _STREAM_BITS) | stream_id))
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SmoothingConfig:
    """Parameters of the dual smoothing scheme.

    sigma: Gaussian scale on vulnerable attribute rows.
    beta: probability an eligible pair keeps its state (must exceed 1/2).
    n_outer: Bernoulli structure masks drawn per certification.
    n_inner: Gaussian attribute draws per structure mask.
    alpha: total miscoverage of the Monte-Carlo confidence bounds.
    eta: bias threshold the indicator compares against.
    metric: "sp" or "eo".
    master_seed: root of every substream.
    k_max: cap of the structure budget search.
    strict: abstain the whole run when an inner vote stays undecided; when
        False an undecided outer sample is counted as a vote against.
    d_convention: "deduplicated" counts unordered eligible pairs once;
        "literal" reports n * |V_vul| (mirrored pairs double counted) for
        comparison with conventions that enumerate ordered pairs.
    """

    sigma: float = 0.25
    beta: float = 0.9
    n_outer: int = 200
    n_inner: int = 150
    alpha: float = 0.3
    eta: float = 0.1
    metric: str = "sp"
    master_seed: int = 0
    k_max: int = 64
    strict: bool = True
    d_convention: str = "deduplicated"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0.5 < self.beta < 1:
            raise ValueError(f"beta must lie strictly in (1/2, 1), got {self.beta}")
        if self.n_outer < 1 or self.n_inner < 1:
            raise ValueError("sample counts must be positive")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie strictly in (0, 1), got {self.alpha}")
        if self.eta < 0:
            raise ValueError(f"eta must be nonnegative, got {self.eta}")
        if self.metric not in ("sp", "eo"):
            raise ValueError(f"metric must be 'sp' or 'eo', got {self.metric!r}")
        if self.k_max < 0:
            raise ValueError(f"k_max must be nonnegative, got {self.k_max}")
        if self.d_convention not in ("deduplicated", "literal"):
            raise ValueError(f"unknown d_convention {self.d_convention!r}")


@dataclass(frozen=True)
class AttributeNoise:
    """Gaussian rows for the vulnerable nodes; block has shape (len(vulnerable), d)."""

    block: np.ndarray
    vulnerable: tuple


@dataclass(frozen=True)
class StructureMask:
    """Set of pairs to flip, plus the size of the pair domain it was drawn from."""

    pairs: frozenset
    domain_size: int

    def to_text(self) -> str:
        lines = [f"{u} {v}" for u, v in sorted(self.pairs)]
        return "\n".join([str(self.domain_size)] + lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "StructureMask":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        d = int(lines[0])
        pairs = set()
        for ln in lines[1:]:
            u, v = (int(p) for p in ln.split())
            pairs.add((u, v) if u < v else (v, u))
        return cls(pairs=frozenset(pairs), domain_size=d)


def eligible_pairs(n: int, vulnerable) -> np.ndarray:
    """All unordered pairs with at least one vulnerable endpoint, sorted.

    Shape (D, 2) with D = |V|(n - |V|) + C(|V|, 2); the diagonal is excluded.
    """
    vul = sorted(set(int(i) for i in vulnerable))
    if not vul:
        raise ValueError("vulnerable set must be nonempty")
    if vul[0] < 0 or vul[-1] >= n:
        raise ValueError("vulnerable ids out of range")
    vset = set(vul)
    pairs = []
    for v in vul:
        for u in range(n):
            if u == v:
                continue
            if u in vset and u > v:
                continue  # vulnerable-vulnerable pair counted once
            pairs.append((min(u, v), max(u, v)))
    arr = np.array(sorted(set(pairs)), dtype=np.int64)
    return arr


def domain_size(n: int, n_vul: int, convention: str = "deduplicated") -> int:
    """Size of the structure noise domain under either counting convention."""
    if convention == "deduplicated":
        return n_vul * (n - n_vul) + comb(n_vul, 2)
    if convention == "literal":
        return n * n_vul
    raise ValueError(f"unknown convention {convention!r}")


def sample_structure_mask(cfg: SmoothingConfig, g, vulnerable, stream_id: int) -> StructureMask:
    """Bernoulli mask over the eligible pairs: each flips with probability 1 - beta."""
    pairs = eligible_pairs(g.n, vulnerable)
    rng = substream(cfg.master_seed, DOMAIN_STRUCTURE, stream_id)
    flip = rng.random(pairs.shape[0]) < (1.0 - cfg.beta)
    chosen = frozenset((int(u), int(v)) for u, v in pairs[flip])
    return StructureMask(pairs=chosen, domain_size=pairs.shape[0])


def sample_attribute_noise(cfg: SmoothingConfig, vulnerable, d: int, stream_id: int) -> AttributeNoise:
    """Isotropic Gaussian rows of scale sigma for the vulnerable nodes."""
    vul = tuple(sorted(set(int(i) for i in vulnerable)))
    if not vul:
        raise ValueError("vulnerable set must be nonempty")
    rng = substream(cfg.master_seed, DOMAIN_ATTRIBUTE, stream_id)
    block = cfg.sigma * rng.standard_normal((len(vul), d))
    return AttributeNoise(block=block, vulnerable=vul)


def apply_structure_mask(g, mask: StructureMask):
    """Flip the masked pairs: present edges drop, absent ones appear."""
    from .data import Graph  # local import to avoid a cycle at module load

    return Graph(n=g.n, edges=g.edges.symmetric_difference(mask.pairs))


def apply_attribute_noise(X: np.ndarray, noise: AttributeNoise) -> np.ndarray:
    """Add the Gaussian block to the vulnerable rows; returns a new matrix."""
    out = np.array(X, dtype=np.float64, copy=True)
    idx = np.array(noise.vulnerable, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= X.shape[0]):
        raise ValueError("vulnerable ids out of range for attribute matrix")
    if noise.block.shape != (idx.size, X.shape[1]):
        raise ValueError(f"noise block shape {noise.block.shape} does not match ({idx.size}, {X.shape[1]})")
    out[idx] += noise.block
    return out
