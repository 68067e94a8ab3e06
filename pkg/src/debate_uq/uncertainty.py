"""Entropy-based uncertainty accounting over answer distributions.

All quantities are in nats. The central identity splits the entropy of the
agent-mixture answer distribution into a disagreement part (the generalized
Jensen-Shannon divergence between the per-agent distributions) and an
average per-agent entropy part:

    total = epistemic + aleatoric
    entropy(mixture) = JSD(p_1 .. p_N) + mean_i entropy(p_i)

``decompose`` computes the split as entropy-of-mixture minus mean entropy;
``generalized_jsd`` evaluates the divergence directly from its KL form so
the two routes can be checked against each other.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import DegenerateOddsError, ValidationError

log = logging.getLogger(__name__)

LN2 = math.log(2.0)

_SUM_TOL = 1e-12


def _shifted_mean(values: Sequence[float]) -> float:
    """Mean via a shifted compensated sum.

    Exactly returns the common value when all inputs coincide, which keeps
    the epistemic term at literal 0.0 for identical distributions.
    """
    base = values[0]
    return base + math.fsum(v - base for v in values) / len(values)


def nats_to_bits(x: float) -> float:
    return x / LN2


@dataclass(frozen=True)
class AnswerDistribution:
    """Probabilities over a shared, ordered support of canonical answer keys."""

    support: tuple[str, ...]
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.support:
            raise ValidationError("support must be non-empty")
        if len(self.support) != len(self.probs):
            raise ValidationError("support and probs length mismatch")
        if len(set(self.support)) != len(self.support):
            raise ValidationError("support keys must be unique")
        for p in self.probs:
            if not (0.0 <= p <= 1.0):
                raise ValidationError(f"probability {p!r} outside [0, 1]")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > _SUM_TOL:
            raise ValidationError(f"probabilities sum to {total!r}, not 1")

    def prob_of(self, key: str) -> float:
        try:
            return self.probs[self.support.index(key)]
        except ValueError:
            return 0.0


@dataclass(frozen=True)
class UncertaintyReport:
    """Per-turn decomposition of answer-distribution entropy."""

    turn: int
    total: float
    epistemic: float
    aleatoric: float
    per_agent_entropy: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.turn < 0:
            raise ValidationError("turn must be non-negative")
        if abs(self.total - (self.epistemic + self.aleatoric)) > _SUM_TOL:
            raise ValidationError("total must equal epistemic + aleatoric")
        n = len(self.per_agent_entropy)
        if n == 0:
            raise ValidationError("per_agent_entropy must be non-empty")
        if not (-1e-9 <= self.epistemic <= math.log(n) + 1e-9):
            raise ValidationError(
                f"epistemic term {self.epistemic!r} outside [0, ln {n}]"
            )


@dataclass(frozen=True)
class FlipStats:
    """Answer-flip accounting between two consecutive populations."""

    c2c: int
    c2w: int
    w2c: int
    w2w: int
    flip_ratio: float

    @property
    def total(self) -> int:
        return self.c2c + self.c2w + self.w2c + self.w2w


def union_support(answer_lists: Sequence[Sequence[str]]) -> tuple[str, ...]:
    """Deduplicated union of per-agent answer keys, sorted lexicographically.

    The reserved unparseable key participates like any other key. Raises
    when every list is empty since no support can be built.
    """
    keys = {k for answers in answer_lists for k in answers}
    if not keys:
        raise ValidationError("cannot build support: no answers supplied")
    return tuple(sorted(keys))


def estimate_distribution(answers: Sequence[str], support: Sequence[str]) -> AnswerDistribution:
    """Empirical distribution count/K of *answers* over *support*."""
    if not answers:
        raise ValidationError("cannot estimate a distribution from zero samples")
    index = {key: i for i, key in enumerate(support)}
    counts = [0] * len(support)
    for a in answers:
        if a not in index:
            raise ValidationError(f"answer {a!r} not in support")
        counts[index[a]] += 1
    k = len(answers)
    return AnswerDistribution(support=tuple(support), probs=tuple(c / k for c in counts))


def entropy(dist: "AnswerDistribution | Sequence[float]") -> float:
    """Shannon entropy in nats with the 0 ln 0 = 0 convention."""
    probs = dist.probs if isinstance(dist, AnswerDistribution) else tuple(dist)
    for p in probs:
        if p < 0.0:
            raise ValidationError(f"negative probability {p!r}")
    return -math.fsum(p * math.log(p) for p in probs if p > 0.0)


def mixture(dists: Sequence[AnswerDistribution]) -> AnswerDistribution:
    """Uniform mixture of distributions sharing one ordered support."""
    if not dists:
        raise ValidationError("mixture of zero distributions")
    support = dists[0].support
    for d in dists[1:]:
        if d.support != support:
            raise ValidationError("support mismatch across distributions")
    cols = list(zip(*(d.probs for d in dists)))
    probs = tuple(_shifted_mean(col) for col in cols)
    return AnswerDistribution(support=support, probs=probs)


def decompose(dists: Sequence[AnswerDistribution], turn: int = 0) -> UncertaintyReport:
    """Split mixture entropy into disagreement and mean per-agent entropy.

    total is the entropy of the uniform mixture, aleatoric the mean of the
    per-agent entropies, epistemic their difference.
    """
    if len(dists) < 2:
        raise ValidationError("decomposition needs at least two distributions")
    per_agent = tuple(entropy(d) for d in dists)
    total = entropy(mixture(dists))
    aleatoric = _shifted_mean(per_agent)
    return UncertaintyReport(
        turn=turn,
        total=total,
        epistemic=total - aleatoric,
        aleatoric=aleatoric,
        per_agent_entropy=per_agent,
    )


def generalized_jsd(dists: Sequence[AnswerDistribution]) -> float:
    """Generalized Jensen-Shannon divergence, computed from its KL form.

    (1/N) sum_i KL(p_i || mean). Kept formula-independent from
    ``decompose`` so the two can serve as cross-checks.
    """
    if len(dists) < 2:
        raise ValidationError("divergence needs at least two distributions")
    mix = mixture(dists).probs
    terms = []
    for d in dists:
        kl = math.fsum(
            p * math.log(p / m) for p, m in zip(d.probs, mix) if p > 0.0
        )
        terms.append(kl)
    return math.fsum(terms) / len(dists)


def flip_transitions(before: Sequence[int], after: Sequence[int]) -> FlipStats:
    """Partition an aligned population of correctness bits into flip classes."""
    if len(before) != len(after):
        raise ValidationError("before/after length mismatch")
    if not before:
        raise ValidationError("flip accounting needs at least one pair")
    c2c = c2w = w2c = w2w = 0
    for b, a in zip(before, after):
        if b not in (0, 1) or a not in (0, 1):
            raise ValidationError("correctness bits must be 0 or 1")
        if b == 1 and a == 1:
            c2c += 1
        elif b == 1 and a == 0:
            c2w += 1
        elif b == 0 and a == 1:
            w2c += 1
        else:
            w2w += 1
    ratio = (c2w + w2c) / len(before)
    return FlipStats(c2c=c2c, c2w=c2w, w2c=w2c, w2w=w2w, flip_ratio=ratio)


def log_bayes_factor(p_before: float, p_after: float) -> float:
    """Log-odds shift implied by moving correctness from p_before to p_after.

    Raises:
        DegenerateOddsError: when either probability is exactly 0 or 1.
    """
    for p in (p_before, p_after):
        if not (0.0 < p < 1.0):
            raise DegenerateOddsError(f"degenerate odds: probability {p!r}")
    return _logit(p_after) - _logit(p_before)


def log_bayes_factor_clamped(
    p_before: float, p_after: float, eps: float = 1e-9
) -> float:
    """Log-odds shift with explicit clamping for empirical frequencies.

    Probabilities are clamped into [eps, 1-eps]; every clamp is logged so
    degenerate inputs (0/K or K/K counts) leave a trace instead of crashing.
    """
    if not (0.0 < eps < 0.5):
        raise ValidationError("eps must be in (0, 0.5)")
    clamped = []
    for p in (p_before, p_after):
        q = min(max(p, eps), 1.0 - eps)
        if q != p:
            log.debug("clamped probability %r to %r for log Bayes factor", p, q)
        clamped.append(q)
    return _logit(clamped[1]) - _logit(clamped[0])


def _logit(p: float) -> float:
    return math.log(p) - math.log1p(-p)
