"""Bias attacks on the vulnerable nodes and the evaluation harness.

The attackers here are deliberately simple stand-ins (labelled
"substitute" in every output) for stronger published fairness attacks:
an analytic gradient ascent on a soft bias surrogate for the attribute
side, and random or greedy pair flips for the structure side.  They
operate under exactly the certified threat model: attribute changes touch
only vulnerable rows with a hard L2 cap, structure changes flip only
vulnerable-incident pairs with a hard edge-count cap.
"""

from __future__ import annotations

import logging

import numpy as np

from .data import Graph
from .fairness import UndefinedMetricError, accuracy, bias_value, delta_eo, delta_sp
from .gnn import predict_classes
from .pipeline import ABSTAIN, CERTIFIED, certify_and_predict
from .smoothing import DOMAIN_ATTACK, eligible_pairs, substream

logger = logging.getLogger(__name__)

ATTACK_LABEL = "substitute"
DEFAULT_GRID = ((1, 0.1), (2, 1.0), (4, 10.0), (8, 100.0))


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def attribute_attack(model, g: Graph, X, labels, vulnerable, budget_l2: float, metric: str = "sp", nodes=None):
    """Gradient ascent on a soft bias surrogate, one projected step.

    The surrogate is the signed difference of group-mean class-1 softmax
    probabilities (groups restricted to label-1 nodes for the equal
    opportunity metric).  Its input gradient is taken on the vulnerable
    rows only; the top percent-scale entries by magnitude are kept and
    rescaled to exactly budget_l2.  A zero gradient leaves X unchanged.
    """
    if budget_l2 < 0:
        raise ValueError(f"budget_l2 must be nonnegative, got {budget_l2}")
    vul = np.asarray(sorted(set(int(i) for i in vulnerable)), dtype=np.int64)
    if vul.size == 0:
        raise ValueError("vulnerable set must be nonempty")
    if budget_l2 == 0:
        return np.array(X, copy=True)
    idx = np.arange(g.n) if nodes is None else np.asarray(sorted(nodes), dtype=np.int64)
    sv = labels.s[idx]
    if metric == "eo":
        keep = labels.y[idx] == 1
        idx, sv = idx[keep], sv[keep]
    g0 = idx[sv == 0]
    g1 = idx[sv == 1]
    if g0.size == 0 or g1.size == 0:
        raise UndefinedMetricError("one sensitive group is empty; surrogate undefined")

    ops = model.build_ops(g)
    logits = model.forward(ops, X)
    p = _softmax(logits)
    sign = 1.0 if p[g0, 1].mean() - p[g1, 1].mean() >= 0 else -1.0
    # d surrogate / d logits: softmax jacobian row by row, two-class case
    dlogit = np.zeros_like(logits)
    coef = p[:, 0] * p[:, 1]  # d p1 / d z1 = p1 (1 - p1)
    dlogit[g0, 1] = sign * coef[g0] / g0.size
    dlogit[g0, 0] = -sign * coef[g0] / g0.size
    dlogit[g1, 1] = -sign * coef[g1] / g1.size
    dlogit[g1, 0] = sign * coef[g1] / g1.size
    grad = model.input_grad(ops, X, dlogit)[vul]  # (|vul|, d)

    q = max(1, round(0.01 * vul.size * X.shape[1]))
    flat = np.abs(grad).ravel()
    if not np.any(flat > 0):
        logger.warning("attribute attack found a zero surrogate gradient; returning X unchanged")
        return np.array(X, copy=True)
    top = np.argsort(flat)[::-1][:q]
    delta = np.zeros_like(flat)
    delta[top] = grad.ravel()[top]
    delta = delta.reshape(grad.shape)
    delta *= budget_l2 / np.linalg.norm(delta)
    out = np.array(X, copy=True)
    out[vul] += delta
    return out


def structure_attack_random(g: Graph, vulnerable, budget_edges: int, seed: int) -> Graph:
    """Flip exactly budget_edges uniformly chosen eligible pairs."""
    if budget_edges < 0:
        raise ValueError(f"budget_edges must be nonnegative, got {budget_edges}")
    pairs = eligible_pairs(g.n, vulnerable)
    if budget_edges > pairs.shape[0]:
        raise ValueError(f"budget {budget_edges} exceeds the {pairs.shape[0]} eligible pairs")
    if budget_edges == 0:
        return g
    rng = substream(seed, DOMAIN_ATTACK, 0)
    pick = rng.choice(pairs.shape[0], size=budget_edges, replace=False)
    flips = frozenset((int(u), int(v)) for u, v in pairs[pick])
    return Graph(n=g.n, edges=g.edges.symmetric_difference(flips))


def structure_attack_greedy(model, g: Graph, X, labels, vulnerable, budget_edges: int, metric: str = "sp", nodes=None, pool_size: int = 256, seed: int = 0) -> Graph:
    """Greedy pair flips: per step, commit the candidate that maximizes bias.

    Each step scores a random pool of candidate pairs by the hard bias of
    the model after flipping that single pair, then commits the best one.
    Committed flips persist across steps; exactly budget_edges pairs end up
    flipped.
    """
    if budget_edges < 0:
        raise ValueError(f"budget_edges must be nonnegative, got {budget_edges}")
    pairs = eligible_pairs(g.n, vulnerable)
    if budget_edges > pairs.shape[0]:
        raise ValueError(f"budget {budget_edges} exceeds the {pairs.shape[0]} eligible pairs")
    eval_nodes = np.arange(g.n) if nodes is None else np.asarray(sorted(nodes), dtype=np.int64)
    current = g
    flipped = set()
    rng = substream(seed, DOMAIN_ATTACK, 1)
    for step in range(budget_edges):
        open_pos = [i for i in range(pairs.shape[0]) if (int(pairs[i, 0]), int(pairs[i, 1])) not in flipped]
        if not open_pos:
            break
        if len(open_pos) > pool_size:
            chosen = rng.choice(len(open_pos), size=pool_size, replace=False)
            candidates = [open_pos[int(c)] for c in chosen]
        else:
            candidates = open_pos
        best_pair = None
        best_bias = -1.0
        for ci in candidates:
            pair = (int(pairs[ci, 0]), int(pairs[ci, 1]))
            trial = Graph(n=g.n, edges=current.edges.symmetric_difference({pair}))
            try:
                b = bias_value(predict_classes(model, trial, X), labels, eval_nodes, metric)
            except UndefinedMetricError:
                continue
            if b > best_bias:
                best_bias = b
                best_pair = pair
        if best_pair is None:
            break
        flipped.add(best_pair)
        current = Graph(n=g.n, edges=current.edges.symmetric_difference({best_pair}))
        logger.debug("greedy flip %d: %s, bias %.4f", step, best_pair, best_bias)
    return current


def evaluate_under_attack(model, smoothed_model, g: Graph, X, labels, split, grid, cfg, eta=None, jobs: int = 1):
    """Attack both the undefended and the smoothed model over a budget grid.

    Perturbations are crafted against the undefended backbone (a transfer
    setting: the attacker holds a substitute, not the smoothed machinery)
    and applied to both victims.  Structure flips happen first, then the
    attribute step on the flipped graph.  Returns (rows, meta) where rows
    are CSV-ready dicts and meta records the clean certificate used for the
    within_certified column.
    """
    pool = np.asarray(split.test_pool, dtype=np.int64)
    vul = split.vulnerable
    clean = certify_and_predict(smoothed_model, g, X, labels, split, split.test_pool, cfg, jobs=jobs, eta=eta)
    clean_eps_a = clean.budgets.eps_A if clean.outcome == CERTIFIED else None
    clean_eps_x = clean.budgets.eps_X if clean.outcome == CERTIFIED else None
    rows = []
    for budget_edges, budget_l2 in grid:
        g_adv = structure_attack_greedy(model, g, X, labels, vul, int(budget_edges), cfg.metric, nodes=pool, seed=cfg.master_seed)
        X_adv = attribute_attack(model, g_adv, X, labels, vul, float(budget_l2), cfg.metric, nodes=pool)
        logger.info("%s attack at budgets (%d flips, %.3g L2)", ATTACK_LABEL, int(budget_edges), float(budget_l2))

        cls = predict_classes(model, g_adv, X_adv)
        rows.append(
            {
                "budget_edges": int(budget_edges),
                "budget_l2": float(budget_l2),
                "model": model.backbone,
                "accuracy": accuracy(cls, labels.y, pool),
                "delta_sp": delta_sp(cls, labels.s, pool),
                "delta_eo": delta_eo(cls, labels.y, labels.s, pool),
                "outcome": "-",
                "within_certified": "-",
            }
        )

        report = certify_and_predict(smoothed_model, g_adv, X_adv, labels, split, split.test_pool, cfg, jobs=jobs, eta=eta)
        within = (
            "-"
            if clean_eps_a is None
            else str(bool(budget_edges <= clean_eps_a and budget_l2 <= clean_eps_x)).lower()
        )
        if report.outcome == CERTIFIED:
            sel = report.selected_prediction.argmax(axis=1)
            rows.append(
                {
                    "budget_edges": int(budget_edges),
                    "budget_l2": float(budget_l2),
                    "model": f"smoothed-{smoothed_model.backbone}",
                    "accuracy": accuracy(sel, labels.y, pool),
                    "delta_sp": delta_sp(sel, labels.s, pool),
                    "delta_eo": delta_eo(sel, labels.y, labels.s, pool),
                    "outcome": report.outcome,
                    "within_certified": within,
                }
            )
        else:
            rows.append(
                {
                    "budget_edges": int(budget_edges),
                    "budget_l2": float(budget_l2),
                    "model": f"smoothed-{smoothed_model.backbone}",
                    "accuracy": "NA",
                    "delta_sp": "NA",
                    "delta_eo": "NA",
                    "outcome": ABSTAIN,
                    "within_certified": within,
                }
            )
    meta = {
        "attacker": ATTACK_LABEL,
        "attacker_detail": {
            "structure": "greedy bias-maximizing pair flips over sampled candidate pools",
            "attribute": "one projected gradient step on a soft group-rate surrogate",
        },
        "clean_outcome": clean.outcome,
        "clean_eps_A": clean_eps_a,
        "clean_eps_X": clean_eps_x,
        "eta": float(clean.eta.eta),
        "metric": cfg.metric,
    }
    return rows, meta
