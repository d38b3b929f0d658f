"""The sampling protocol: parameters, verifier state machine, honest prover.

One run proceeds in fixed message order. The prover sends a histogram; the
verifier draws a shift and an interval index proportionally to histogram
mass, derives a hash output width, and sends the challenge; the prover
sends hash-filtered sets, one per live band of the chosen interval; the
verifier checks the sets, draws a band and an element, asks for that
element's probability, and outputs the pair (after substituting the band's
upper endpoint when the claimed probability lies outside the band).

Every random draw the verifier makes goes through a coin source that
records elementary integer coins, so a transcript can be replayed
deterministically. All real-valued verifier comparisons are widened by the
global tolerance so an honest prover is never rejected by rounding.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

from coinpress.dist import (
    TAU,
    ExplicitDistribution,
    Histogram,
    IntervalLayout,
    bucket_of,
    buckets,
    build_histogram,
    element_to_hex,
    fraction_to_str,
    interval_layout,
    interval_weights,
)
from coinpress.hashing import HashFunction, sample_hash

MODE_CALIBRATED = "calibrated"
MODE_RAW = "raw"
MODE_TRIVIAL = "trivial-fallback"

DEFAULT_SET_CAP = 1 << 22

ProbabilityValue = Union[Fraction, float]


class DegenerateChoiceError(ValueError):
    """All weights passed to a weighted choice were zero."""


# ---------------------------------------------------------------------------
# Parameters


@dataclass(frozen=True)
class ProtocolParams:
    """All derived protocol constants plus the operating mode.

    ``eps`` is the histogram band width, ``t`` the largest band index,
    ``gap_size``/``interval_size`` the integer tiling constants (their raw
    real-valued precursors are kept for diagnostics), and ``sampling_gap``
    centers the hash output width so that surviving sets have roughly
    2**sampling_gap elements.
    """

    n: int
    eps: float
    delta: float
    t: int
    gap_size: int
    interval_size: int
    sampling_gap: float
    mode: str
    gap_size_raw: float
    interval_size_raw: float
    eps_prime: Optional[float] = None
    delta_prime: Optional[float] = None
    set_cap: int = DEFAULT_SET_CAP

    def __post_init__(self):
        if not 1 <= self.n <= 64:
            raise ValueError(f"n={self.n} outside 1..64")
        if self.mode not in (MODE_CALIBRATED, MODE_RAW, MODE_TRIVIAL):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode != MODE_TRIVIAL:
            g, iv = self.gap_size, self.interval_size
            if not (0 < self.eps <= 1):
                raise ValueError(f"eps={self.eps} outside (0, 1]")
            if g < 1 or iv < g or iv % g != 0:
                raise ValueError(
                    f"structural invariants violated: gap_size={g}, interval_size={iv}"
                )
            if self.t < 1:
                raise ValueError("t must be at least 1")

    @classmethod
    def raw(
        cls,
        n: int,
        eps: float,
        delta: float,
        t: Optional[int] = None,
        gap_size: Optional[int] = None,
        interval_size: Optional[int] = None,
        sampling_gap: Optional[float] = None,
        set_cap: int = DEFAULT_SET_CAP,
    ) -> "ProtocolParams":
        """Desk-scale constructor: eps and delta are used as given.

        Unspecified constants are filled in by the standard formulas; only
        structural invariants are validated, none of the calibrated-regime
        assumptions.
        """
        if not 0 < eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if not 0 < delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        g_raw = (2.0 / eps) * math.log2(1.0 / eps) if eps < 1 else 1.0
        i_raw = g_raw / delta
        if t is None:
            t = math.ceil(2 * n / eps)
        if gap_size is None:
            gap_size = max(1, math.ceil(g_raw))
        if interval_size is None:
            interval_size = math.ceil(i_raw / gap_size) * gap_size
        interval_size = max(interval_size, gap_size)
        if sampling_gap is None:
            sampling_gap = _sampling_gap(t, i_raw, eps)
        return cls(
            n=n, eps=eps, delta=delta, t=t, gap_size=gap_size,
            interval_size=interval_size, sampling_gap=sampling_gap,
            mode=MODE_RAW, gap_size_raw=g_raw, interval_size_raw=i_raw,
            set_cap=set_cap,
        )

    @property
    def layout(self) -> IntervalLayout:
        return _layout_cached(self.t, self.gap_size, self.interval_size)

    @property
    def live_threshold(self) -> Fraction:
        """Minimum band mass the verifier is willing to sample from."""
        return Fraction(self.eps) / (2 * self.t)

    def digest(self) -> str:
        blob = json.dumps(
            {
                "n": self.n, "eps": repr(self.eps), "delta": repr(self.delta),
                "t": self.t, "gap_size": self.gap_size,
                "interval_size": self.interval_size,
                "sampling_gap": repr(self.sampling_gap), "mode": self.mode,
                "set_cap": self.set_cap,
            },
            sort_keys=True,
        )
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def describe(self) -> dict:
        return {
            "mode": self.mode,
            "n": self.n,
            "eps": self.eps,
            "delta": self.delta,
            "eps_prime": self.eps_prime,
            "delta_prime": self.delta_prime,
            "t": self.t,
            "gap_size_raw": self.gap_size_raw,
            "interval_size_raw": self.interval_size_raw,
            "gap_size": self.gap_size,
            "interval_size": self.interval_size,
            "sampling_gap": self.sampling_gap,
            "num_shifts": self.interval_size // self.gap_size + 1,
        }


_LAYOUT_CACHE: dict[tuple[int, int, int], IntervalLayout] = {}


def _layout_cached(t: int, g: int, iv: int) -> IntervalLayout:
    key = (t, g, iv)
    if key not in _LAYOUT_CACHE:
        _LAYOUT_CACHE[key] = interval_layout(t, g, iv)
    return _LAYOUT_CACHE[key]


def _sampling_gap(t: int, interval_size_raw: float, eps: float) -> float:
    # log2(t * I' * 2**(2*I'*eps) / eps**4), evaluated in log space because
    # the middle factor overflows floats at calibrated parameters.
    return (
        math.log2(t)
        + math.log2(interval_size_raw)
        + 2.0 * interval_size_raw * eps
        + 4.0 * math.log2(1.0 / eps)
    )


def derive_params(n: int, eps_prime: float, delta_prime: float) -> ProtocolParams:
    """Derive the calibrated constants for user-facing accuracy targets.

    The effective band width is eps_prime / 9000 and the effective gap
    fraction delta_prime / 16. When (9000/eps_prime)**(16/delta_prime)
    exceeds 2**(n/50), the calibrated protocol is not applicable and the
    fallback mode is selected, in which the prover simply sends the whole
    distribution. The inequality is evaluated in log space. All derived
    constants are still computed for inspection.
    """
    if not 0 < eps_prime < 1 or not 0 < delta_prime < 1:
        raise ValueError("accuracy targets must lie in (0, 1)")
    if not 1 <= n <= 64:
        raise ValueError("n outside 1..64")
    eps = eps_prime / 9000.0
    delta = delta_prime / 16.0
    t = math.ceil(2 * n / eps)
    g_raw = (2.0 / eps) * math.log2(1.0 / eps)
    i_raw = g_raw / delta
    g = math.ceil(g_raw)
    iv = math.ceil(i_raw / g) * g
    gap = _sampling_gap(t, i_raw, eps)
    fallback = (1.0 / delta) * math.log2(1.0 / eps) > n / 50.0
    return ProtocolParams(
        n=n, eps=eps, delta=delta, t=t, gap_size=g, interval_size=iv,
        sampling_gap=gap, mode=MODE_TRIVIAL if fallback else MODE_CALIBRATED,
        gap_size_raw=g_raw, interval_size_raw=i_raw,
        eps_prime=eps_prime, delta_prime=delta_prime,
    )


# ---------------------------------------------------------------------------
# Coin sources


def scale_weights(weights: Sequence[Fraction]) -> tuple[list[int], int]:
    """Rescale rational weights to integers with the same ratios."""
    fracs = [Fraction(w) for w in weights]
    if any(w < 0 for w in fracs):
        raise ValueError("negative weight")
    denom = math.lcm(*(w.denominator for w in fracs)) if fracs else 1
    scaled = [int(w * denom) for w in fracs]
    return scaled, sum(scaled)


def pick_by_offset(scaled: Sequence[int], u: int) -> int:
    """Index selected by the integer coin u in [0, sum(scaled))."""
    acc = 0
    for idx, w in enumerate(scaled):
        acc += w
        if u < acc:
            return idx
    raise ValueError("offset out of range")


class CoinSource:
    """Elementary integer coins for one protocol run, recorded for replay."""

    def __init__(self, rng=None, replay: Optional[Sequence[int]] = None):
        if (rng is None) == (replay is None):
            raise ValueError("provide exactly one of rng, replay")
        self._rng = rng
        self._replay = list(replay) if replay is not None else None
        self._pos = 0
        self.record: list[int] = []

    def _emit(self, value: int) -> int:
        self.record.append(value)
        return value

    def randrange(self, size: int) -> int:
        if self._replay is not None:
            value = self._replay[self._pos]
            self._pos += 1
            if not 0 <= value < size:
                raise ValueError("replayed coin out of range")
            return self._emit(value)
        return self._emit(self._rng.randrange(size))

    def weighted_index(self, weights: Sequence[Fraction]) -> int:
        """Index i chosen with probability weights[i] / sum(weights)."""
        scaled, total = scale_weights(weights)
        if total == 0:
            raise DegenerateChoiceError("all weights are zero")
        return pick_by_offset(scaled, self.randrange(total))


def weighted_choice(items: Sequence[tuple], rng) -> object:
    """Value drawn with probability proportional to its weight.

    ``items`` is a sequence of (weight, value) pairs with nonnegative
    rational weights. Raises DegenerateChoiceError when every weight is
    zero, which protocol callers translate into a verifier rejection.
    """
    coins = CoinSource(rng=rng)
    idx = coins.weighted_index([w for w, _ in items])
    return items[idx][1]


# ---------------------------------------------------------------------------
# Messages, transcripts, prover interface

REJECT_MALFORMED_HISTOGRAM = "malformed-histogram"
REJECT_HISTOGRAM_SUM = "histogram-sum"
REJECT_DEGENERATE = "degenerate-choice"
REJECT_HASH_WIDTH = "hash-width"
REJECT_MALFORMED_SETS = "malformed-sets"
REJECT_OVERSIZE = "oversize"
REJECT_CHECK_A = "check-a"
REJECT_CHECK_B = "check-b"
REJECT_CHECK_C = "check-c"
REJECT_BAND_NOT_LIVE = "band-not-live"
REJECT_EMPTY_SET = "empty-set"
REJECT_MALFORMED_TABLE = "malformed-table"


@dataclass(frozen=True)
class Outcome:
    kind: str  # "output" | "reject"
    x: Optional[int] = None
    p: Optional[ProbabilityValue] = None
    band: Optional[int] = None
    reason: Optional[str] = None

    @classmethod
    def output(cls, x: int, p: ProbabilityValue, band: Optional[int]) -> "Outcome":
        return cls(kind="output", x=x, p=p, band=band)

    @classmethod
    def reject(cls, reason: str) -> "Outcome":
        return cls(kind="reject", reason=reason)


@dataclass
class Transcript:
    """Ordered record of one protocol run, replayable from its coins."""

    params_digest: str
    messages: list
    coins: list[int]
    outcome: Outcome
    trial: Optional[int] = None

    def to_json_obj(self) -> dict:
        return {
            "trial": self.trial,
            "params_digest": self.params_digest,
            "coins": list(self.coins),
            "messages": [_message_json(m) for m in self.messages],
            "outcome": _outcome_json(self.outcome),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True, separators=(",", ":"))


def probability_json(p: ProbabilityValue):
    if isinstance(p, Fraction):
        return fraction_to_str(p)
    return {"real": format(float(p), ".12g")}


def _message_json(msg: tuple):
    kind = msg[0]
    if kind == "histogram":
        if msg[1] is None:
            return {"kind": kind, "weights": None}
        return {"kind": kind, "weights": [fraction_to_str(Fraction(w)) for w in msg[1]]}
    if kind == "challenge":
        s, k, f = msg[1], msg[2], msg[3]
        return {"kind": kind, "s": s, "k": k, "f": f.to_json_obj() if f else None}
    if kind == "sets":
        n = msg[2]
        return {
            "kind": kind,
            "sets": {
                str(i): [element_to_hex(x, n) for x in xs]
                for i, xs in sorted(msg[1].items())
            },
        }
    if kind == "element":
        return {"kind": kind, "band": msg[1], "x": element_to_hex(msg[2], msg[3])}
    if kind == "probability":
        return {"kind": kind, "p": probability_json(msg[1])}
    if kind == "table":
        n = msg[2]
        return {
            "kind": kind,
            "entries": [[element_to_hex(x, n), probability_json(p)] for x, p in msg[1]],
        }
    raise ValueError(f"unknown message kind {kind}")


def _outcome_json(outcome: Outcome):
    if outcome.kind == "output":
        return {
            "kind": "output",
            "x": outcome.x,
            "p": probability_json(outcome.p),
            "band": outcome.band,
        }
    return {"kind": "reject", "reason": outcome.reason}


class ProverStrategy:
    """Behavioral interface every prover implements.

    A strategy must be deterministic given its seed and the message
    history; strategies that flip their own coins draw them in
    ``begin_run`` so the exact oracle can enumerate the draw.
    """

    def begin_run(self) -> None:
        """Called once at the start of each protocol run."""

    def produce_histogram(self) -> Sequence[Fraction]:
        raise NotImplementedError

    def produce_sets(self, s: int, k: int, f: HashFunction, g: float, m: int) -> Mapping[int, Sequence[int]]:
        raise NotImplementedError

    def produce_probability(self, j: int, x: int) -> Fraction:
        raise NotImplementedError

    def produce_table(self) -> Sequence[tuple[int, Fraction]]:
        """Full (element, probability) listing for the fallback protocol."""
        raise NotImplementedError

    def randomness_support(self) -> Sequence[tuple[Fraction, "ProverStrategy"]]:
        """Decomposition into deterministic strategies with probabilities.

        Deterministic strategies return themselves with probability one;
        randomized ones enumerate their up-front draw so exact enumeration
        can condition on it.
        """
        return [(Fraction(1), self)]


def compute_live_bands(weights: Sequence[Fraction], params: ProtocolParams) -> set[int]:
    """Band indices whose mass clears the verifier's sampling threshold."""
    thresh = params.live_threshold
    return {j for j, w in enumerate(weights) if w >= thresh}


class HonestProver(ProverStrategy):
    """Prover that holds the distribution and follows the protocol exactly."""

    def __init__(self, dist: ExplicitDistribution, params: ProtocolParams):
        if dist.n != params.n:
            raise ValueError("distribution width does not match parameters")
        self.dist = dist
        self.params = params
        self.histogram: Histogram = build_histogram(dist, params.eps, params.t)
        self._buckets = buckets(dist, params.eps, params.t)
        self._bucket_sorted = {i: sorted(xs) for i, xs in self._buckets.items()}

    def produce_histogram(self) -> Sequence[Fraction]:
        return self.histogram.weights

    def produce_sets(self, s, k, f, g, m):
        live = compute_live_bands(self.histogram.weights, self.params)
        interval = self.params.layout.interval(s, k)
        out = {}
        for i in interval:
            if i not in live:
                continue
            members = self._bucket_sorted.get(i, [])
            out[i] = [x for x in members if f.eval(x) == 0]
        return out

    def produce_probability(self, j: int, x: int) -> Fraction:
        return self.dist.prob(x)

    def produce_table(self):
        return [(x, self.dist.prob(x)) for x in self.dist.support()]


def honest_prover(dist: ExplicitDistribution, params: ProtocolParams) -> HonestProver:
    return HonestProver(dist, params)


# ---------------------------------------------------------------------------
# Verifier rounds


def validate_histogram_message(weights, params: ProtocolParams) -> Optional[str]:
    """None when the histogram message is well-formed, else a reject reason."""
    if weights is None or len(weights) != params.t + 1:
        return REJECT_MALFORMED_HISTOGRAM
    total = Fraction(0)
    for w in weights:
        if not isinstance(w, (int, Fraction)):
            return REJECT_MALFORMED_HISTOGRAM
        w = Fraction(w)
        if w < 0:
            return REJECT_MALFORMED_HISTOGRAM
        total += w
    if not (1 - Fraction(1, 2**params.n)) <= total <= 1:
        return REJECT_HISTOGRAM_SUM
    return None


def verifier_round1(weights, params: ProtocolParams):
    """Check the received histogram; return (live band set, reject reason)."""
    reason = validate_histogram_message(weights, params)
    if reason is not None:
        return None, reason
    return compute_live_bands(weights, params), None


@dataclass(frozen=True)
class ChallengeContext:
    """The verifier's state after drawing its challenge."""

    s: int
    k: int
    live: frozenset[int]
    interval: tuple[int, ...]
    active: tuple[int, ...]  # live bands of the chosen interval, sorted
    g: float
    m: int
    f: HashFunction
    band_mass_sum: float  # sum of 2**(i*eps) * h_i over the interval


def band_mass_sum(weights, interval: Sequence[int], eps: float) -> float:
    return sum((2.0 ** (i * eps)) * float(weights[i]) for i in interval)


def _challenge_tables(weights_key: tuple, params: ProtocolParams):
    """Pure function of (histogram, params): liveness, per-shift interval
    weights, and per-interval band-mass sums. Memoized on the params object
    because verifier draws re-derive it for every run."""
    cache = getattr(params, "_challenge_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(params, "_challenge_cache", cache)
    entry = cache.get(weights_key)
    if entry is None:
        layout = params.layout
        live = compute_live_bands(weights_key, params)
        hist = Histogram(eps=params.eps, t=params.t, weights=weights_key)
        per_shift = {}
        for s in layout.shifts:
            per_interval, total = interval_weights(hist, layout, s)
            per_shift[s] = (per_interval, total)
        zsums = {
            (s, k): band_mass_sum(weights_key, layout.interval(s, k), params.eps)
            for s in layout.shifts
            for k in layout.index_range
        }
        entry = (live, per_shift, zsums)
        if len(cache) > 64:
            cache.clear()
        cache[weights_key] = entry
    return entry


def choose_challenge(weights, params: ProtocolParams, coins: CoinSource):
    """Draw shift, interval, and hash; returns (context, reject reason)."""
    layout = params.layout
    weights_key = tuple(Fraction(w) for w in weights)
    live, per_shift, zsums = _challenge_tables(weights_key, params)
    shift_weights = [per_shift[s][1] for s in layout.shifts]
    try:
        s = layout.shifts[coins.weighted_index(shift_weights)]
    except DegenerateChoiceError:
        return None, REJECT_DEGENERATE
    per_interval, _ = per_shift[s]
    interval_indexes = list(layout.index_range)
    try:
        k = interval_indexes[coins.weighted_index([per_interval[i] for i in interval_indexes])]
    except DegenerateChoiceError:
        return None, REJECT_DEGENERATE
    interval = layout.interval(s, k)
    z = zsums[(s, k)]
    level = math.log2(z)
    m = max(0, math.floor(level - params.sampling_gap))
    frac_part = (level - params.sampling_gap) - math.floor(level - params.sampling_gap)
    g = params.sampling_gap + frac_part
    if m > params.n:
        return None, REJECT_HASH_WIDTH
    f = sample_hash(params.n, m, _HashCoins(coins))
    active = tuple(sorted(i for i in interval if i in live))
    ctx = ChallengeContext(
        s=s, k=k, live=frozenset(live), interval=interval, active=active,
        g=g, m=m, f=f, band_mass_sum=z,
    )
    return ctx, None


class _HashCoins:
    """Adapter so hash sampling draws through the recorded coin source."""

    def __init__(self, coins: CoinSource):
        self._coins = coins

    def randrange(self, size: int) -> int:
        return self._coins.randrange(size)


def check_sets(sets, weights, ctx: ChallengeContext, params: ProtocolParams):
    """Validate the prover's sets; returns (normalized sets, reject reason).

    The verifier checks, in order: message shape, the total-size guard,
    (a) every listed element hashes to the all-zero target, (b) every
    set's cardinality lies in the band-mass window, and (c) the sets are
    pairwise disjoint. Real-valued bounds in (b) are widened by TAU.
    """
    if sets is None or set(sets.keys()) != set(ctx.active):
        return None, REJECT_MALFORMED_SETS
    normalized = {}
    total = 0
    for i in ctx.active:
        xs = list(sets[i])
        if any((not isinstance(x, int)) or x < 0 or (x >> params.n) for x in xs):
            return None, REJECT_MALFORMED_SETS
        if len(set(xs)) != len(xs):
            return None, REJECT_MALFORMED_SETS
        normalized[i] = tuple(sorted(xs))
        total += len(xs)
    if total > params.set_cap:
        return None, REJECT_OVERSIZE
    for i in ctx.active:
        for x in normalized[i]:
            if ctx.f.eval(x) != 0:
                return None, REJECT_CHECK_A
    eps = params.eps
    for i in ctx.active:
        w_f = float(weights[i])
        size = len(normalized[i])
        if ctx.m == 0:
            lo = (2.0 ** (i * eps)) * w_f
            hi = (2.0 ** ((i + 1) * eps)) * w_f
        else:
            base = (2.0 ** ctx.g) / ctx.band_mass_sum
            lo = (2.0 ** (-eps)) * base * (2.0 ** (i * eps)) * w_f
            hi = (2.0 ** eps) * base * (2.0 ** ((i + 1) * eps)) * w_f
        if not (lo * (1.0 - TAU) <= size <= hi * (1.0 + TAU)):
            return None, REJECT_CHECK_B
    seen: set[int] = set()
    for i in ctx.active:
        for x in normalized[i]:
            if x in seen:
                return None, REJECT_CHECK_C
            seen.add(x)
    return normalized, None


def choose_element(weights, ctx: ChallengeContext, sets, coins: CoinSource):
    """Draw the band and element; returns ((band, element), reject reason)."""
    try:
        pos = coins.weighted_index([Fraction(weights[i]) for i in ctx.interval])
    except DegenerateChoiceError:
        return None, REJECT_DEGENERATE
    j = ctx.interval[pos]
    if j not in ctx.active:
        return None, REJECT_BAND_NOT_LIVE
    members = sets[j]
    if not members:
        return None, REJECT_EMPTY_SET
    x = members[coins.randrange(len(members))]
    return (j, x), None


def finalize(j: int, x: int, p_msg, params: ProtocolParams) -> Outcome:
    """Accept the claimed probability if it lies in band j, else substitute.

    The substitute is the band's upper endpoint 2**(-j*eps): an exact
    rational when j*eps is an integer and a tagged real otherwise.
    """
    if isinstance(p_msg, int):
        p_msg = Fraction(p_msg)
    if isinstance(p_msg, Fraction) and bucket_of(p_msg, params.eps, params.t) == j:
        return Outcome.output(x, p_msg, j)
    exponent = j * params.eps
    if exponent == int(exponent):
        substitute: ProbabilityValue = Fraction(1, 2 ** int(exponent))
    else:
        substitute = 2.0 ** (-exponent)
    return Outcome.output(x, substitute, j)


# ---------------------------------------------------------------------------
# Full runs


def run_protocol(
    params: ProtocolParams,
    prover: ProverStrategy,
    rng=None,
    replay_coins: Optional[Sequence[int]] = None,
    trial: Optional[int] = None,
) -> Transcript:
    """Execute one full run and return its transcript.

    In fallback mode the run delegates to the trivial protocol. Exactly one
    of ``rng`` and ``replay_coins`` must be provided.
    """
    if params.mode == MODE_TRIVIAL:
        return trivial_protocol(params, prover, rng=rng, replay_coins=replay_coins, trial=trial)
    coins = CoinSource(rng=rng, replay=replay_coins)
    messages: list = []
    prover.begin_run()

    raw_weights = prover.produce_histogram()
    messages.append(("histogram", tuple(raw_weights) if raw_weights is not None else None))
    reason = validate_histogram_message(raw_weights, params)
    if reason is not None:
        return _finish(params, messages, coins, Outcome.reject(reason), trial)
    weights = [Fraction(w) for w in raw_weights]

    ctx, reason = choose_challenge(weights, params, coins)
    if reason is not None:
        return _finish(params, messages, coins, Outcome.reject(reason), trial)
    messages.append(("challenge", ctx.s, ctx.k, ctx.f))

    raw_sets = prover.produce_sets(ctx.s, ctx.k, ctx.f, ctx.g, ctx.m)
    messages.append(("sets", {i: tuple(xs) for i, xs in raw_sets.items()} if raw_sets is not None else None, params.n))
    sets, reason = check_sets(raw_sets, weights, ctx, params)
    if reason is not None:
        return _finish(params, messages, coins, Outcome.reject(reason), trial)

    picked, reason = choose_element(weights, ctx, sets, coins)
    if reason is not None:
        return _finish(params, messages, coins, Outcome.reject(reason), trial)
    j, x = picked
    messages.append(("element", j, x, params.n))

    p_msg = prover.produce_probability(j, x)
    messages.append(("probability", p_msg))
    outcome = finalize(j, x, p_msg, params)
    return _finish(params, messages, coins, outcome, trial)


def _finish(params, messages, coins, outcome, trial) -> Transcript:
    return Transcript(
        params_digest=params.digest(),
        messages=messages,
        coins=list(coins.record),
        outcome=outcome,
        trial=trial,
    )


def validate_table(entries, params: ProtocolParams) -> Optional[str]:
    if entries is None:
        return REJECT_MALFORMED_TABLE
    seen = set()
    total = Fraction(0)
    for item in entries:
        try:
            x, p = item
        except (TypeError, ValueError):
            return REJECT_MALFORMED_TABLE
        if not isinstance(x, int) or x < 0 or (x >> params.n):
            return REJECT_MALFORMED_TABLE
        if x in seen:
            return REJECT_MALFORMED_TABLE
        if not isinstance(p, (int, Fraction)) or not 0 < Fraction(p) <= 1:
            return REJECT_MALFORMED_TABLE
        seen.add(x)
        total += Fraction(p)
    if total != 1:
        return REJECT_MALFORMED_TABLE
    return None


def trivial_protocol(
    params: ProtocolParams,
    prover: ProverStrategy,
    rng=None,
    replay_coins: Optional[Sequence[int]] = None,
    trial: Optional[int] = None,
) -> Transcript:
    """Exponential-size fallback: the prover sends the whole distribution.

    The verifier validates that the listed probabilities are positive and
    sum to exactly 1, then outputs an entry (x, p) with probability p.
    """
    coins = CoinSource(rng=rng, replay=replay_coins)
    messages: list = []
    prover.begin_run()
    entries = prover.produce_table()
    table = [(x, Fraction(p)) for x, p in entries] if entries is not None else None
    messages.append(("table", table, params.n))
    reason = validate_table(table, params)
    if reason is not None:
        return _finish(params, messages, coins, Outcome.reject(reason), trial)
    table = sorted(table)
    idx = coins.weighted_index([p for _, p in table])
    x, p = table[idx]
    return _finish(params, messages, coins, Outcome.output(x, p, None), trial)


def replay(params: ProtocolParams, prover: ProverStrategy, transcript: Transcript) -> Transcript:
    """Re-run a transcript from its recorded coins."""
    return run_protocol(params, prover, replay_coins=transcript.coins, trial=transcript.trial)
