"""Exact distributions of randomly signed sums and checks of their lower bounds."""

from .bounds import (C_STAR, bd_tail_bound, bound_table, eval_F, eval_G, eval_h,
                     eval_half_mix, eval_U)
from .dist import (Caps, ExactProbability, SignedSumDistribution, WeightVector,
                   enumerate_naive, prob_in_interval, shifted_prob, tail_prob)
from .numerics import std_normal_cdf, std_normal_pdf, std_normal_upper_tail
from .stopping import canonical_reorder, theorem_certificate

__version__ = "0.1.0"
