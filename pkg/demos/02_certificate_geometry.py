"""
How the two budgets respond to the noise parameters
===================================================

No models here, just the certificate arithmetic.  A smoothed vote that is
positive with probability at least p_lower survives a bounded amount of
tampering; this script tabulates how much, as the noise levels move.
"""

from elegant.certify import attribute_radius, positive_prob_lower_bound, region_table, structure_budget

# The structure certificate reasons over likelihood-ratio regions.  For k
# flipped pairs there are only k + 1 distinct ratios, whatever the graph
# looks like.  The table for k = 2 at beta = 0.8:
t = region_table(2, 0.8)
print("regions for k = 2, beta = 0.8")
print("  ratio index   clean prob   perturbed prob")
for m, pc, pp in zip(t.ratio_index, t.prob_clean, t.prob_perturbed):
    print(f"  {m:>11}   {pc:>10.4f}   {pp:>14.4f}")

# The adversary answers with the worst arrangement of the classifier's
# positive mass.  The bound falls as k grows, and the budget is the last k
# where it still clears 1/2.
print("\nworst-case positive probability after k flips (p_lower = 0.99)")
for beta in (0.6, 0.7, 0.8, 0.9):
    bounds = [positive_prob_lower_bound(0.99, k, beta) for k in range(1, 7)]
    cells = "  ".join(f"{b:.3f}" for b in bounds)
    print(f"  beta {beta:.1f}:  {cells}   ->  budget {structure_budget(0.99, beta)}")

# More confidence buys more budget.  Unanimous Monte-Carlo votes never
# yield p_lower = 1 exactly; the confidence bound caps it below 1.
print("\nstructure budget as the vote lower bound grows (beta = 0.8)")
for p in (0.55, 0.7, 0.9, 0.99, 0.999):
    print(f"  p_lower {p:<6}  budget {structure_budget(p, 0.8)}")

# The attribute certificate is the classical Gaussian one: radius
# sigma * Phi^{-1}(p_lower).  Linear in sigma, so larger noise certifies
# a larger ball around the attributes, at the price of noisier votes.
print("\ncertified L2 radius")
print("  p_lower   sigma 0.1   sigma 0.25   sigma 1.0")
for p in (0.6, 0.8, 0.95, 0.99):
    r = [attribute_radius(p, s) for s in (0.1, 0.25, 1.0)]
    print(f"  {p:<7}   {r[0]:>9.4f}   {r[1]:>10.4f}   {r[2]:>9.4f}")

# The tension in one line each: beta up means less structure noise, a
# weaker certificate per flip, but cleaner votes and so a higher p_lower
# in practice.  The sweep command maps this trade empirically.
