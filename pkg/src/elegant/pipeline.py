"""End-to-end certification of sampled test sets.

For each of n_outer structure masks, the wrapped classifier is evaluated
under n_inner Gaussian attribute draws and each draw's bias indicator
(bias strictly below eta) is recorded.  A Clopper-Pearson bound turns each
mask's indicator counts into a certified inner vote: fair, biased, or
undecided.  The same bound over the outer votes yields p_lower, a lower
confidence bound on the probability that a random mask produces a
certifiably fair vote; p_lower > 1/2 makes the run CERTIFIED with a
structure budget from the region-table search and an attribute budget
equal to the smallest certified inner radius.  The returned prediction is
the sampled output with the smallest observed bias among inner-certified
samples, ties resolved by stream id.

All certification effort happens on a prediction cache of shape
(n_outer, n_inner, n): hard classes of the model under every noise pair.
The cache depends only on (model, graph, X, vulnerable, config), so one
cache serves every test set drawn from the same pool, and its entries are
pure functions of the substream key, which makes results independent of
worker scheduling.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .certify import CertifiedBudgets, attribute_radius, structure_budget
from .data import Graph, sample_test_sets
from .estimate import binomial_lower_bound, binomial_lower_bound_vec
from .fairness import BiasThreshold
from .smoothing import (
    SmoothingConfig,
    apply_structure_mask,
    domain_size,
    eligible_pairs,
    sample_attribute_noise,
    sample_structure_mask,
)

logger = logging.getLogger(__name__)

CERTIFIED = "CERTIFIED"
ABSTAIN = "ABSTAIN"


@dataclass(frozen=True)
class OuterSampleRecord:
    """Certification evidence for one structure mask.

    inner_lower_bound is the Clopper-Pearson bound on the probability that
    a Gaussian draw under this mask is indicator-fair; inner_certified means
    that bound cleared 1/2 (so attribute_radius is present exactly then).
    decided is False when neither the fair nor the biased side certified.
    """

    stream_id: int
    n1: int
    n0: int
    inner_lower_bound: float
    inner_certified: bool
    decided: bool
    attribute_radius: float | None
    candidate_classes: np.ndarray | None
    candidate_bias: float | None
    candidate_stream: int | None


@dataclass(frozen=True)
class CertificationReport:
    outcome: str
    budgets: CertifiedBudgets | None
    selected_prediction: np.ndarray | None
    selected_bias: float | None
    accuracy: float | None
    eta: BiasThreshold
    metric: str
    n_outer_positive: int
    outer_lower_bound: float
    prop1_bound: float
    records: tuple
    config: SmoothingConfig
    conventions: dict
    test_set: tuple
    abstain_reason: str | None = None

    def to_json_dict(self) -> dict:
        cfg = self.config
        return {
            "outcome": self.outcome,
            "eps_A": None if self.budgets is None else int(self.budgets.eps_A),
            "eps_X": None if self.budgets is None else float(self.budgets.eps_X),
            "eta": float(self.eta.eta),
            "metric": self.metric,
            "bias": None if self.selected_bias is None else float(self.selected_bias),
            "accuracy": None if self.accuracy is None else float(self.accuracy),
            "n_outer_positive": int(self.n_outer_positive),
            "prop1_bound": float(self.prop1_bound),
            "abstain_reason": self.abstain_reason,
            "config": {
                "sigma": cfg.sigma,
                "beta": cfg.beta,
                "n_outer": cfg.n_outer,
                "n_inner": cfg.n_inner,
                "alpha": cfg.alpha,
                "metric": cfg.metric,
                "master_seed": cfg.master_seed,
                "k_max": cfg.k_max,
                "strict": cfg.strict,
                "eta": {
                    "value": float(self.eta.eta),
                    "provenance": self.eta.provenance,
                    "multiplier": self.eta.multiplier,
                    "vanilla_bias": self.eta.vanilla_bias,
                },
            },
            "conventions": dict(self.conventions),
        }


def prop1_bound(n: int) -> float:
    """Chance that n independent fair-coin votes all land positive: 2^-n.

    Reported alongside the certificate as the residual probability that the
    observed unanimity of n certified-positive outer votes carries no
    signal at all.
    """
    if n < 0:
        raise ValueError(f"vote count must be nonnegative, got {n}")
    return 0.5**n


class PredictionCache:
    """Hard classes of the model under every (structure mask, Gaussian draw) pair."""

    def __init__(self, classes: np.ndarray, vulnerable: tuple, noise_domain: int):
        self.classes = classes  # (n_outer, n_inner, n) uint8
        self.vulnerable = vulnerable
        self.noise_domain = noise_domain

    @classmethod
    def build(cls, model, g: Graph, X, vulnerable, cfg: SmoothingConfig, jobs: int = 1):
        vul = tuple(sorted(set(int(i) for i in vulnerable)))
        if not vul:
            raise ValueError("vulnerable set must be nonempty")
        n = g.n
        d = X.shape[1]
        vul_idx = np.array(vul, dtype=np.int64)
        classes = np.empty((cfg.n_outer, cfg.n_inner, n), dtype=np.uint8)
        pair_count = eligible_pairs(n, vul).shape[0]

        def run_outer(o: int) -> None:
            mask = sample_structure_mask(cfg, g, vul, stream_id=o)
            ops = model.build_ops(apply_structure_mask(g, mask))
            deltas = np.stack(
                [sample_attribute_noise(cfg, vul, d, o * cfg.n_inner + i).block for i in range(cfg.n_inner)]
            )
            logits = model.forward_many(ops, X, vul_idx, deltas)
            classes[o] = logits.argmax(axis=2).astype(np.uint8)

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                list(pool.map(run_outer, range(cfg.n_outer)))
        else:
            for o in range(cfg.n_outer):
                run_outer(o)
        return cls(classes=classes, vulnerable=vul, noise_domain=pair_count)


def _bias_matrix(classes: np.ndarray, labels, test_idx: np.ndarray, metric: str):
    """Bias of every cached prediction on the test set; None when undefined."""
    s = labels.s[test_idx]
    if metric == "eo":
        keep = labels.y[test_idx] == 1
        test_idx = test_idx[keep]
        s = s[keep]
    g0 = test_idx[s == 0]
    g1 = test_idx[s == 1]
    if g0.size == 0 or g1.size == 0:
        return None
    r0 = (classes[:, :, g0] == 1).mean(axis=2)
    r1 = (classes[:, :, g1] == 1).mean(axis=2)
    return np.abs(r0 - r1)


def select_fair_output(records) -> tuple:
    """Smallest-bias candidate among inner-certified samples.

    Returns (one_hot_prediction, bias); ties resolve to the smallest
    stream id.  Raises when no record is inner certified.
    """
    best = None
    for r in records:
        if not r.inner_certified or r.candidate_classes is None:
            continue
        key = (r.candidate_bias, r.candidate_stream)
        if best is None or key < (best.candidate_bias, best.candidate_stream):
            best = r
    if best is None:
        raise ValueError("no inner-certified sample to select from")
    cls = best.candidate_classes
    out = np.zeros((cls.shape[0], max(2, int(cls.max()) + 1)), dtype=np.int64)
    out[np.arange(cls.shape[0]), cls] = 1
    return out, float(best.candidate_bias)


def certify_and_predict(model, g: Graph, X, labels, split, test_set, cfg: SmoothingConfig, jobs: int = 1, cache: PredictionCache | None = None, eta: BiasThreshold | None = None) -> CertificationReport:
    """Certify the smoothed bias indicator on one test set and pick an output.

    model must already be the backbone the smoothing wraps (for defended
    runs, the noise-augmented one).  eta defaults to an absolute threshold
    of cfg.eta; cache may be shared across calls with identical
    (model, g, X, vulnerable, cfg).
    """
    if eta is None:
        eta = BiasThreshold.absolute(cfg.eta)
    test_idx = np.asarray(sorted(int(i) for i in test_set), dtype=np.int64)
    pool = set(split.test_pool)
    if not set(test_idx.tolist()) <= pool:
        raise ValueError("test set must lie in the test pool")
    vul = tuple(sorted(set(int(i) for i in split.vulnerable)))
    if not vul:
        raise ValueError("vulnerable set must be nonempty")
    if not set(vul) <= set(test_idx.tolist()):
        raise ValueError("vulnerable nodes must belong to the test set")
    if cache is None:
        cache = PredictionCache.build(model, g, X, vul, cfg, jobs=jobs)

    bias = _bias_matrix(cache.classes, labels, test_idx, cfg.metric)
    if bias is None:
        logger.warning("bias metric undefined on this test set; all indicators forced to 0")
        indicator = np.zeros((cfg.n_outer, cfg.n_inner), dtype=bool)
        bias = np.full((cfg.n_outer, cfg.n_inner), np.nan)
    else:
        indicator = bias < eta.eta

    n1 = indicator.sum(axis=1).astype(np.int64)
    n0 = cfg.n_inner - n1
    low_pos = binomial_lower_bound_vec(n1, n0, cfg.alpha)
    low_neg = binomial_lower_bound_vec(n0, n1, cfg.alpha)
    cert_pos = (n1 > n0) & (low_pos > 0.5)
    cert_neg = (n0 > n1) & (low_neg > 0.5)
    undecided = ~(cert_pos | cert_neg)

    records = []
    for o in range(cfg.n_outer):
        radius = None
        cand_cls = cand_bias = cand_stream = None
        if cert_pos[o]:
            radius = attribute_radius(float(low_pos[o]), cfg.sigma)
            fair_draws = np.flatnonzero(indicator[o])
            i_star = fair_draws[np.argmin(bias[o, fair_draws])]  # first min: lowest inner id
            cand_cls = cache.classes[o, i_star].copy()
            cand_bias = float(bias[o, i_star])
            cand_stream = o * cfg.n_inner + int(i_star)
        records.append(
            OuterSampleRecord(
                stream_id=o,
                n1=int(n1[o]),
                n0=int(n0[o]),
                inner_lower_bound=float(low_pos[o]),
                inner_certified=bool(cert_pos[o]),
                decided=bool(~undecided[o]),
                attribute_radius=radius,
                candidate_classes=cand_cls,
                candidate_bias=cand_bias,
                candidate_stream=cand_stream,
            )
        )
    records = tuple(records)

    n_pos = int(cert_pos.sum())
    outer = binomial_lower_bound(n_pos, cfg.n_outer - n_pos, cfg.alpha)
    conventions = {
        "estimation": "one-sided Clopper-Pearson: alpha quantile of Beta(successes, failures + 1)",
        "indicator": "strict inequality, bias < eta",
        "undefined_metric": "indicator forced to 0, logged",
        "budget_unit": "unordered node pairs (flips of eps_A distinct pairs)",
        "d_convention": cfg.d_convention,
        "noise_domain_size": int(
            cache.noise_domain if cfg.d_convention == "deduplicated" else domain_size(g.n, len(vul), "literal")
        ),
        "tie_break": "smallest bias, then smallest stream id",
    }

    def abstain(reason: str) -> CertificationReport:
        logger.info("certification abstains: %s", reason)
        return CertificationReport(
            outcome=ABSTAIN,
            budgets=None,
            selected_prediction=None,
            selected_bias=None,
            accuracy=None,
            eta=eta,
            metric=cfg.metric,
            n_outer_positive=n_pos,
            outer_lower_bound=float(outer.lower),
            prop1_bound=prop1_bound(n_pos),
            records=records,
            config=cfg,
            conventions=conventions,
            test_set=tuple(int(i) for i in test_idx),
            abstain_reason=reason,
        )

    if cfg.strict and undecided.any():
        first = int(np.flatnonzero(undecided)[0])
        return abstain(f"undecided inner vote at outer sample {first} (n1={int(n1[first])}, n0={int(n0[first])})")
    if outer.lower <= 0.5:
        return abstain(f"outer fair-vote bound {outer.lower:.6f} <= 1/2 ({n_pos}/{cfg.n_outer} positive)")

    eps_a = structure_budget(float(outer.lower), cfg.beta, cfg.k_max)
    radii = [r.attribute_radius for r in records if r.inner_certified]
    eps_x = float(min(radii))
    prediction, sel_bias = select_fair_output(records)
    acc = float((prediction.argmax(axis=1)[test_idx] == labels.y[test_idx]).mean())
    return CertificationReport(
        outcome=CERTIFIED,
        budgets=CertifiedBudgets(eps_A=eps_a, eps_X=eps_x),
        selected_prediction=prediction,
        selected_bias=sel_bias,
        accuracy=acc,
        eta=eta,
        metric=cfg.metric,
        n_outer_positive=n_pos,
        outer_lower_bound=float(outer.lower),
        prop1_bound=prop1_bound(n_pos),
        records=records,
        config=cfg,
        conventions=conventions,
        test_set=tuple(int(i) for i in test_idx),
    )


@dataclass(frozen=True)
class FcrResult:
    """Certification reports over sampled test sets plus the certified fraction."""

    fcr: float
    count: int
    reports: tuple

    def summary(self) -> dict:
        certified = [r for r in self.reports if r.outcome == CERTIFIED]
        out = {
            "fcr": self.fcr,
            "count": self.count,
            "n_certified": len(certified),
        }
        for name, values in (
            ("eps_A", [r.budgets.eps_A for r in certified]),
            ("eps_X", [r.budgets.eps_X for r in certified]),
            ("bias", [r.selected_bias for r in certified]),
            ("accuracy", [r.accuracy for r in certified]),
        ):
            arr = np.array(values, dtype=np.float64)
            out[f"mean_{name}"] = float(arr.mean()) if arr.size else None
            out[f"std_{name}"] = float(arr.std()) if arr.size else None
        return out


def fcr_run(model, g: Graph, X, labels, split, cfg: SmoothingConfig, ratio: float = 0.9, count: int = 100, jobs: int = 1, eta: BiasThreshold | None = None, cache: PredictionCache | None = None) -> FcrResult:
    """Certify `count` sampled test sets and report the certified fraction.

    Test sets are drawn from the pool with the vulnerable nodes forced in
    (certification requires them present); one prediction cache serves all
    sets.
    """
    sets = sample_test_sets(split, ratio, count, seed=cfg.master_seed, include=split.vulnerable)
    if cache is None:
        cache = PredictionCache.build(model, g, X, split.vulnerable, cfg, jobs=jobs)
    reports = tuple(
        certify_and_predict(model, g, X, labels, split, ts, cfg, jobs=jobs, cache=cache, eta=eta) for ts in sets
    )
    fcr = sum(1 for r in reports if r.outcome == CERTIFIED) / len(reports)
    logger.info("fraction of certified test sets: %.4f (%d/%d)", fcr, int(fcr * count), count)
    return FcrResult(fcr=fcr, count=count, reports=reports)
