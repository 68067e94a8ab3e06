"""Finite belief worlds with exact Bayesian bookkeeping.

A BeliefWorld is a small categorical model: hypotheses carry a prior, each
hypothesis emits answers from a fixed row of probabilities, and named
message channels describe how peer messages depend on the hypothesis.
Because everything is finite we can verify the probabilistic claims the
debate machinery relies on by direct enumeration: the additive log-odds
update under one observed message, and the ordering of epistemic
information gains between a fresh heterogeneous channel and a duplicated
homogeneous one.

All information quantities are exact sums in nats over the joint state
space, guarded by an enumeration budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import (
    BudgetExceededError,
    DegenerateOddsError,
    InconsistentEvidenceError,
    ValidationError,
)

ENUMERATION_BUDGET = 1_000_000

PEER_CHANNEL = "peer"

_ROW_TOL = 1e-9


def _check_simplex(row: Sequence[float], what: str) -> None:
    if any(p < 0.0 for p in row):
        raise ValidationError(f"{what} has a negative entry")
    if abs(math.fsum(row) - 1.0) > _ROW_TOL:
        raise ValidationError(f"{what} does not sum to 1")


@dataclass(frozen=True)
class Channel:
    """Conditional distribution of one message symbol given the hypothesis."""

    symbols: tuple[str, ...]
    likelihood: tuple[tuple[float, ...], ...]  # [hypothesis][symbol]

    def __post_init__(self) -> None:
        if not self.symbols:
            raise ValidationError("channel symbols must be non-empty")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValidationError("channel symbols must be unique")
        for row in self.likelihood:
            if len(row) != len(self.symbols):
                raise ValidationError("likelihood row width does not match symbols")
            _check_simplex(row, "channel likelihood row")

    def matrix(self) -> np.ndarray:
        return np.asarray(self.likelihood, dtype=float)

    def column(self, symbol: str) -> np.ndarray:
        try:
            j = self.symbols.index(symbol)
        except ValueError:
            raise ValidationError(f"symbol {symbol!r} not in channel alphabet") from None
        return self.matrix()[:, j]


@dataclass(frozen=True)
class BeliefWorld:
    """Joint model over hypotheses, emitted answers, and message channels."""

    answers: tuple[str, ...]
    correct_answer: str
    prior: tuple[float, ...]
    emission: tuple[tuple[float, ...], ...]  # [hypothesis][answer]
    channels: Mapping[str, Channel]

    def __post_init__(self) -> None:
        if not self.answers:
            raise ValidationError("answer alphabet must be non-empty")
        if len(set(self.answers)) != len(self.answers):
            raise ValidationError("answer alphabet must be unique")
        if self.correct_answer not in self.answers:
            raise ValidationError("correct_answer must be in the answer alphabet")
        if not self.prior:
            raise ValidationError("prior must be non-empty")
        _check_simplex(self.prior, "prior")
        if len(self.emission) != len(self.prior):
            raise ValidationError("emission rows must match hypothesis count")
        for row in self.emission:
            if len(row) != len(self.answers):
                raise ValidationError("emission row width does not match answers")
            _check_simplex(row, "emission row")
        for name, channel in self.channels.items():
            if len(channel.likelihood) != len(self.prior):
                raise ValidationError(
                    f"channel {name!r} rows must match hypothesis count"
                )
        object.__setattr__(self, "channels", MappingProxyType(dict(self.channels)))

    @property
    def n_hypotheses(self) -> int:
        return len(self.prior)

    @property
    def correct_index(self) -> int:
        return self.answers.index(self.correct_answer)

    def channel(self, name: str) -> Channel:
        try:
            return self.channels[name]
        except KeyError:
            raise ValidationError(f"world has no channel named {name!r}") from None

    def emission_matrix(self) -> np.ndarray:
        return np.asarray(self.emission, dtype=float)

    def predictive(
        self, posterior: Optional[Sequence[float]] = None, emission_noise: float = 0.0
    ) -> np.ndarray:
        """Answer distribution implied by a posterior, with optional noise.

        With probability ``emission_noise`` the emitted answer is replaced
        by a uniform draw over the wrong answers; this is the knob used to
        emulate degrading generators.
        """
        if not (0.0 <= emission_noise <= 1.0):
            raise ValidationError("emission_noise must be in [0, 1]")
        q = np.asarray(posterior if posterior is not None else self.prior, dtype=float)
        base = q @ self.emission_matrix()
        if emission_noise == 0.0:
            return base
        wrong = np.full(len(self.answers), 1.0 / max(len(self.answers) - 1, 1))
        wrong[self.correct_index] = 0.0
        if len(self.answers) == 1:
            wrong[:] = 1.0  # degenerate single-answer world: nowhere else to go
        return (1.0 - emission_noise) * base + emission_noise * wrong

    def correctness_probability(
        self, posterior: Optional[Sequence[float]] = None, emission_noise: float = 0.0
    ) -> float:
        return float(self.predictive(posterior, emission_noise)[self.correct_index])


def posterior_update(
    posterior: Sequence[float], likelihood_columns: Sequence[Sequence[float]]
) -> tuple[float, ...]:
    """Multiply a belief by per-message likelihood columns and renormalize.

    Sequential calls compose to one joint update, so message order does
    not matter for conditionally independent evidence.
    """
    post = np.asarray(posterior, dtype=float)
    if post.ndim != 1 or post.size == 0:
        raise ValidationError("posterior must be a non-empty vector")
    for col in likelihood_columns:
        col_arr = np.asarray(col, dtype=float)
        if col_arr.shape != post.shape:
            raise ValidationError("likelihood column length mismatch")
        post = post * col_arr
    total = float(post.sum())
    if total <= 0.0:
        raise InconsistentEvidenceError(
            "inconsistent evidence: zero likelihood under every hypothesis"
        )
    return tuple((post / total).tolist())


# ---------------------------------------------------------------------------
# Exact information quantities


def _mutual_information_2d(joint: np.ndarray) -> float:
    """I(X;Y) from a joint table, exact sum over positive entries."""
    px = joint.sum(axis=1)
    py = joint.sum(axis=0)
    terms = []
    rows, cols = joint.shape
    for i in range(rows):
        for j in range(cols):
            p = joint[i, j]
            if p > 0.0:
                terms.append(p * math.log(p / (px[i] * py[j])))
    return math.fsum(terms)


def _budget_check(n_states: int) -> None:
    if n_states > ENUMERATION_BUDGET:
        raise BudgetExceededError(
            f"enumeration budget exceeded: {n_states} joint states"
        )


def epistemic_gain(
    world: BeliefWorld,
    channel: str = PEER_CHANNEL,
    posterior: Optional[Sequence[float]] = None,
) -> float:
    """Exact I(hypothesis; message) for one channel under a belief state."""
    q = np.asarray(posterior if posterior is not None else world.prior, dtype=float)
    like = world.channel(channel).matrix()
    _budget_check(q.size * like.shape[1])
    joint = q[:, None] * like
    return _mutual_information_2d(joint)


def pair_gain(
    world: BeliefWorld,
    first: str,
    second: str,
    posterior: Optional[Sequence[float]] = None,
) -> float:
    """Exact I(hypothesis; (m_first, m_second)).

    The two messages are conditionally independent given the hypothesis;
    passing the same channel name twice models an independent second draw
    from that channel.
    """
    q = np.asarray(posterior if posterior is not None else world.prior, dtype=float)
    la = world.channel(first).matrix()
    lb = world.channel(second).matrix()
    _budget_check(q.size * la.shape[1] * lb.shape[1])
    joint3 = q[:, None, None] * la[:, :, None] * lb[:, None, :]
    return _mutual_information_2d(joint3.reshape(q.size, -1))


def conditional_gain(
    world: BeliefWorld,
    target: str,
    given: str,
    posterior: Optional[Sequence[float]] = None,
) -> float:
    """Exact I(hypothesis; m_target | m_given), computed directly.

    Evaluated from the triple joint as
    sum p(h,a,b) ln[ p(h,a,b) p(a) / (p(h,a) p(a,b)) ] with a the given
    message and b the target, so it does not reuse the chain rule the
    verification sweeps are checking.
    """
    q = np.asarray(posterior if posterior is not None else world.prior, dtype=float)
    lg = world.channel(given).matrix()
    lt = world.channel(target).matrix()
    _budget_check(q.size * lg.shape[1] * lt.shape[1])
    joint3 = q[:, None, None] * lg[:, :, None] * lt[:, None, :]  # [h, a, b]
    p_a = joint3.sum(axis=(0, 2))
    p_ha = joint3.sum(axis=2)
    p_ab = joint3.sum(axis=0)
    terms = []
    n_h, n_a, n_b = joint3.shape
    for h in range(n_h):
        for a in range(n_a):
            for b in range(n_b):
                p = joint3[h, a, b]
                if p > 0.0:
                    terms.append(p * math.log(p * p_a[a] / (p_ha[h, a] * p_ab[a, b])))
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# Identity checks


@dataclass(frozen=True)
class LogOddsCheck:
    """Both routes to the posterior correctness log-odds after one message."""

    prior_log_odds: float
    log_likelihood_ratio: float
    posterior_log_odds: float
    residual: float


def check_log_odds_update(
    world: BeliefWorld,
    message: str,
    channel: str = PEER_CHANNEL,
    posterior: Optional[Sequence[float]] = None,
) -> LogOddsCheck:
    """Verify the additive log-odds update for answer correctness.

    Route one computes the posterior log-odds of emitting the correct
    answer directly from the joint over (correctness, message). Route two
    adds the log-likelihood ratio of the message to the prior log-odds.
    The residual is their absolute difference and should sit at float
    noise for any well-posed world.
    """
    q = np.asarray(posterior if posterior is not None else world.prior, dtype=float)
    e_correct = world.emission_matrix()[:, world.correct_index]
    p1 = math.fsum(q * e_correct)
    p0 = math.fsum(q * (1.0 - e_correct))
    if p1 <= 0.0 or p0 <= 0.0:
        raise DegenerateOddsError(
            "degenerate odds: prior correctness probability is 0 or 1"
        )
    like = world.channel(channel).column(message)
    m1 = math.fsum(q * like * e_correct)
    m0 = math.fsum(q * like * (1.0 - e_correct))
    if m1 + m0 <= 0.0:
        raise InconsistentEvidenceError(
            f"message {message!r} has zero probability under this world"
        )
    if m1 <= 0.0 or m0 <= 0.0:
        raise DegenerateOddsError(
            "degenerate odds: posterior correctness probability is 0 or 1"
        )
    posterior_lo = math.log(m1) - math.log(m0)
    prior_lo = math.log(p1) - math.log(p0)
    llr = math.log(m1 / p1) - math.log(m0 / p0)
    return LogOddsCheck(
        prior_log_odds=prior_lo,
        log_likelihood_ratio=llr,
        posterior_log_odds=posterior_lo,
        residual=abs(posterior_lo - (prior_lo + llr)),
    )


@dataclass(frozen=True)
class HeterogeneousGainCheck:
    """Information-gain comparison between channel mixes.

    ``gain_hetero``/``gain_homo`` are the total gains of the two-message
    bundles (baseline message plus either a fresh heterogeneous message or
    an independent second draw from the same homogeneous channel), which is
    what the novelty condition orders. The solo fields report each
    channel's single-message gain for diagnostics.
    """

    gain_hetero: float
    gain_homo: float
    solo_gain_hetero: float
    solo_gain_homo: float
    novelty_lhs: float
    novelty_rhs: float
    chain_residual: float
    verdict: str


VERDICT_HOLDS = "holds"
VERDICT_INAPPLICABLE = "inapplicable"
VERDICT_VIOLATED = "violated"


def check_heterogeneous_gain(
    world: BeliefWorld,
    homo: str = "homo",
    hetero: str = "hetero",
    posterior: Optional[Sequence[float]] = None,
    tol: float = 1e-12,
) -> HeterogeneousGainCheck:
    """Check that conditional novelty orders the bundled information gains.

    novelty_lhs = I(h; m_hetero | m_homo), novelty_rhs = I(h; m'_homo |
    m_homo) with m'_homo an independent second draw. When the novelty
    condition holds the bundle with the heterogeneous message must carry
    at least as much information about the hypothesis. chain_residual
    reports how far the two-message gains drift from the sum of their
    single-message and conditional parts.
    """
    solo_homo = epistemic_gain(world, homo, posterior)
    solo_hetero = epistemic_gain(world, hetero, posterior)
    novelty_lhs = conditional_gain(world, target=hetero, given=homo, posterior=posterior)
    novelty_rhs = conditional_gain(world, target=homo, given=homo, posterior=posterior)
    gain_hetero = pair_gain(world, homo, hetero, posterior)
    gain_homo = pair_gain(world, homo, homo, posterior)
    chain_residual = max(
        abs(gain_hetero - (solo_homo + novelty_lhs)),
        abs(gain_homo - (solo_homo + novelty_rhs)),
    )
    if novelty_lhs < novelty_rhs - tol:
        verdict = VERDICT_INAPPLICABLE
    elif gain_hetero >= gain_homo - tol:
        verdict = VERDICT_HOLDS
    else:
        verdict = VERDICT_VIOLATED
    return HeterogeneousGainCheck(
        gain_hetero=gain_hetero,
        gain_homo=gain_homo,
        solo_gain_hetero=solo_hetero,
        solo_gain_homo=solo_homo,
        novelty_lhs=novelty_lhs,
        novelty_rhs=novelty_rhs,
        chain_residual=chain_residual,
        verdict=verdict,
    )


# ---------------------------------------------------------------------------
# World builders


def binary_correctness_world(
    p_correct: float, p_message_given_correct: float, p_message_given_wrong: float
) -> BeliefWorld:
    """Two-hypothesis world parameterized directly by correctness odds.

    Hypothesis 0 always emits the right answer, hypothesis 1 always the
    wrong one, so the prior correctness probability equals ``p_correct``
    and the message channel is exactly the given conditional table.
    """
    for name, p in (
        ("p_correct", p_correct),
        ("p_message_given_correct", p_message_given_correct),
        ("p_message_given_wrong", p_message_given_wrong),
    ):
        if not (0.0 < p < 1.0):
            raise ValidationError(f"{name} must be strictly inside (0, 1)")
    channel = Channel(
        symbols=("m", "not-m"),
        likelihood=(
            (p_message_given_correct, 1.0 - p_message_given_correct),
            (p_message_given_wrong, 1.0 - p_message_given_wrong),
        ),
    )
    return BeliefWorld(
        answers=("right", "wrong"),
        correct_answer="right",
        prior=(p_correct, 1.0 - p_correct),
        emission=((1.0, 0.0), (0.0, 1.0)),
        channels={PEER_CHANNEL: channel},
    )


def consensus_world(
    answers: Sequence[str],
    correct_answer: str,
    sharpness: float = 0.85,
    peer_flatten: float = 0.5,
) -> BeliefWorld:
    """One hypothesis per answer; hypothesis i emits answer i with
    probability ``sharpness`` and spreads the rest uniformly.

    The peer channel is the emission table flattened toward uniform by
    ``peer_flatten``, so peers are informative but noisier than the
    agent's own generator. That leaves room for conformity weighting to
    sharpen peer evidence.
    """
    answers = tuple(answers)
    n = len(answers)
    if n < 2:
        raise ValidationError("consensus world needs at least two answers")
    if not (0.0 < sharpness <= 1.0):
        raise ValidationError("sharpness must be in (0, 1]")
    if not (0.0 <= peer_flatten < 1.0):
        raise ValidationError("peer_flatten must be in [0, 1)")
    off = (1.0 - sharpness) / (n - 1)
    emission = tuple(
        tuple(sharpness if j == i else off for j in range(n)) for i in range(n)
    )
    uniform = 1.0 / n
    peer_rows = tuple(
        tuple((1.0 - peer_flatten) * p + peer_flatten * uniform for p in row)
        for row in emission
    )
    return BeliefWorld(
        answers=answers,
        correct_answer=correct_answer,
        prior=tuple(uniform for _ in range(n)),
        emission=emission,
        channels={PEER_CHANNEL: Channel(symbols=answers, likelihood=peer_rows)},
    )


def tilted_prior(n: int, favored: int, tilt: float) -> tuple[float, ...]:
    """Prior putting ``tilt`` mass on one hypothesis, uniform elsewhere."""
    if not (0 <= favored < n):
        raise ValidationError("favored index out of range")
    if not (0.0 < tilt < 1.0):
        raise ValidationError("tilt must be in (0, 1)")
    rest = (1.0 - tilt) / (n - 1) if n > 1 else 0.0
    return tuple(tilt if i == favored else rest for i in range(n))


def random_belief_world(
    rng: np.random.Generator,
    n_hypotheses: int = 3,
    n_answers: int = 3,
    channel_specs: Mapping[str, int] | None = None,
    min_correct_mass: float = 0.01,
    concentration: float = 1.0,
) -> BeliefWorld:
    """Draw a dense random world for verification sweeps.

    Rows are Dirichlet draws. The prior correctness probability is kept
    away from 0 and 1 by rejection so log-odds are always well defined.
    """
    if channel_specs is None:
        channel_specs = {PEER_CHANNEL: n_answers}
    answers = tuple(f"a{i}" for i in range(n_answers))
    alpha_h = np.full(n_hypotheses, concentration)
    for _ in range(200):
        prior = rng.dirichlet(alpha_h)
        emission = rng.dirichlet(np.full(n_answers, concentration), size=n_hypotheses)
        p_correct = float(prior @ emission[:, 0])
        if min_correct_mass < p_correct < 1.0 - min_correct_mass:
            break
    else:  # pragma: no cover - dense Dirichlet draws essentially never get here
        raise ValidationError("could not draw a non-degenerate world")
    channels = {}
    for name, n_symbols in channel_specs.items():
        like = rng.dirichlet(np.full(n_symbols, concentration), size=n_hypotheses)
        channels[name] = Channel(
            symbols=tuple(f"{name}{j}" for j in range(n_symbols)),
            likelihood=tuple(tuple(row) for row in like),
        )
    return BeliefWorld(
        answers=answers,
        correct_answer=answers[0],
        prior=tuple(prior.tolist()),
        emission=tuple(tuple(row) for row in emission),
        channels=channels,
    )
