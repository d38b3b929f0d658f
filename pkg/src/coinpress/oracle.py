"""Exact verifier-output distributions for tiny instances, by enumeration.

Every random choice the verifier makes has finite support: the shift, the
interval index, the hash function (the whole coefficient family for the
instance width), the band index, and the uniform element pick. For n <= 4
the full family of 2**(3n) hash functions is enumerable, so all output and
rejection masses come out as exact rationals, along with the conditional
placement probabilities that the structural sandwich and band-sum checks
are stated over.

Randomized provers are decomposed through ``randomness_support`` and every
structural statement is checked per deterministic component, mirroring the
fact that those statements are per-deterministic-prover guarantees; the
public output distribution is the support-weighted mixture.

Two enumerators are kept deliberately separate: a structured one that
reuses the protocol engine's own check and finalize code, and a flat one
that re-derives every step inline. Tests fail the build if they disagree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from coinpress.dist import TAU, Histogram, buckets, build_histogram, interval_weights
from coinpress.hashing import HashFunction
from coinpress.protocol import (
    MODE_TRIVIAL,
    ChallengeContext,
    ProtocolParams,
    ProverStrategy,
    band_mass_sum,
    check_sets,
    compute_live_bands,
    finalize,
    validate_histogram_message,
    validate_table,
    REJECT_BAND_NOT_LIVE,
    REJECT_DEGENERATE,
    REJECT_EMPTY_SET,
    REJECT_HASH_WIDTH,
    REJECT_MALFORMED_TABLE,
)

DEFAULT_BUDGET = 10**9

# Relative slack enclosing the error of double-precision powers of two.
# Doubles carry ~1.1e-16 relative error per operation; 1e-14 leaves a wide
# margin, so enclosure endpoints rigorously bracket the true factors.
POW2_SLACK = Fraction(1, 10**14)


class EnumerationBudgetError(RuntimeError):
    """The instance is too large to enumerate exactly."""


def pow2_bounds(exponent: float) -> tuple[Fraction, Fraction]:
    """Rational lower/upper bounds enclosing 2**exponent (exact when integral)."""
    if exponent == int(exponent):
        exact = Fraction(2) ** int(exponent)
        return exact, exact
    approx = Fraction(2.0 ** exponent)
    return approx * (1 - POW2_SLACK), approx * (1 + POW2_SLACK)


@dataclass(frozen=True)
class ExactConfig:
    """A tiny instance: raw parameters plus a strategy with enumerable coins."""

    params: ProtocolParams
    prover: ProverStrategy
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        if self.params.mode == MODE_TRIVIAL:
            return
        layout = self.params.layout
        branches = len(layout.shifts) * len(layout.index_range) * (8 ** self.params.n)
        if branches > self.budget:
            raise EnumerationBudgetError(
                f"{branches} branches exceed the budget of {self.budget}"
            )


OutputKey = tuple  # (x, band, p)


@dataclass
class ShiftTables:
    weight: Fraction  # total histogram mass inside this shift's intervals
    interval_weights: dict[int, Fraction]
    # per interval index: (m, g, active bands, band-mass sum, rows); rows is
    # None for a hash-width rejection, else [(f, passed, reason, sets)] over
    # the whole hash family.
    challenges: dict[int, tuple]


@dataclass
class ComponentRun:
    """Enumeration results for one deterministic strategy of the support."""

    q: Fraction
    strategy: ProverStrategy
    params: ProtocolParams
    weights: Optional[list[Fraction]]
    reject_reason: Optional[str]
    live: set[int] = field(default_factory=set)
    shift_total: Fraction = Fraction(0)
    shifts: dict[int, ShiftTables] = field(default_factory=dict)
    outputs: dict[OutputKey, Fraction] = field(default_factory=dict)
    rejects: dict[str, Fraction] = field(default_factory=dict)
    # per shift: {"prob": Pr[S=s], "outputs": conditionals, "rejects": conditionals}
    per_shift: dict[int, dict] = field(default_factory=dict)

    def shift_prob(self, s: int) -> Fraction:
        if self.shift_total == 0:
            return Fraction(0)
        return self.shifts[s].weight / self.shift_total

    def shift_weight(self, s: int) -> Fraction:
        if self.reject_reason is not None or s not in self.shifts:
            return Fraction(0)
        return self.shifts[s].weight

    def shift_conditional(self, s: int) -> dict[OutputKey, Fraction]:
        blob = self.per_shift.get(s)
        return blob["outputs"] if blob else {}

    def placement_probability(self, s: int, x: int, j: int) -> Fraction:
        """Probability over the hash draw that all set checks pass and this
        component placed x in the set of band j, conditioned on the shift,
        the interval holding j, and x hashing to the zero target. Zero when
        j is in a gap or not live."""
        if self.reject_reason is not None:
            return Fraction(0)
        layout = self.params.layout
        k = layout.interval_index_of(s, j)
        if k is None:
            return Fraction(0)
        st = self.shifts[s]
        if k not in st.challenges:
            return Fraction(0)
        _m, _g, active, _z, rows = st.challenges[k]
        if rows is None or j not in active:
            return Fraction(0)
        hits = 0
        conditioned = 0
        for f, passed, _why, sets in rows:
            if f.eval(x) != 0:
                continue
            conditioned += 1
            if passed and x in sets[j]:
                hits += 1
        if conditioned == 0:
            return Fraction(0)
        return Fraction(hits, conditioned)


def _accumulate(bins: dict, key, mass: Fraction):
    if mass == 0:
        return
    bins[key] = bins.get(key, Fraction(0)) + mass


def _enumerate_family(n: int, m: int):
    size = 1 << n
    for a in range(size):
        for b in range(size):
            for c in range(size):
                yield HashFunction(n=n, m=m, a=a, b=b, c=c)


def _build_component(params: ProtocolParams, q: Fraction, strat: ProverStrategy) -> ComponentRun:
    raw = strat.produce_histogram()
    reason = validate_histogram_message(raw, params)
    if reason is not None:
        comp = ComponentRun(
            q=q, strategy=strat, params=params, weights=None, reject_reason=reason,
        )
        comp.rejects = {reason: Fraction(1)}
        return comp
    weights = [Fraction(w) for w in raw]
    live = compute_live_bands(weights, params)
    layout = params.layout
    hist = Histogram(eps=params.eps, t=params.t, weights=tuple(weights))
    comp = ComponentRun(
        q=q, strategy=strat, params=params, weights=weights,
        reject_reason=None, live=live,
    )
    for s in layout.shifts:
        per_interval, total = interval_weights(hist, layout, s)
        challenges: dict[int, tuple] = {}
        for k in layout.index_range:
            if per_interval[k] == 0:
                continue
            interval = layout.interval(s, k)
            z = band_mass_sum(weights, interval, params.eps)
            level = math.log2(z)
            m = max(0, math.floor(level - params.sampling_gap))
            frac_part = (level - params.sampling_gap) - math.floor(level - params.sampling_gap)
            g = params.sampling_gap + frac_part
            if m > params.n:
                challenges[k] = (m, g, (), z, None)
                continue
            active = tuple(sorted(i for i in interval if i in live))
            rows = []
            for f in _enumerate_family(params.n, m):
                ctx = ChallengeContext(
                    s=s, k=k, live=frozenset(live), interval=interval,
                    active=active, g=g, m=m, f=f, band_mass_sum=z,
                )
                sets = strat.produce_sets(s, k, f, g, m)
                normalized, why = check_sets(sets, weights, ctx, params)
                rows.append((f, why is None, why, normalized))
            challenges[k] = (m, g, active, z, rows)
        comp.shifts[s] = ShiftTables(
            weight=total, interval_weights=per_interval, challenges=challenges,
        )
    comp.shift_total = sum((st.weight for st in comp.shifts.values()), Fraction(0))
    _fill_component_distribution(comp)
    return comp


def _fill_component_distribution(comp: ComponentRun):
    params = comp.params
    if comp.shift_total == 0:
        comp.rejects = {REJECT_DEGENERATE: Fraction(1)}
        return
    weights = comp.weights
    family_size = Fraction(1, 8 ** params.n)
    for s, st in comp.shifts.items():
        if st.weight == 0:
            continue
        s_prob = comp.shift_prob(s)
        s_outputs: dict[OutputKey, Fraction] = {}
        s_rejects: dict[str, Fraction] = {}
        for k, (m, g, active, z, rows) in st.challenges.items():
            k_prob = st.interval_weights[k] / st.weight
            if rows is None:
                _accumulate(s_rejects, REJECT_HASH_WIDTH, k_prob)
                continue
            interval = params.layout.interval(s, k)
            interval_mass = st.interval_weights[k]
            for f, passed, why, sets in rows:
                f_prob = k_prob * family_size
                if not passed:
                    _accumulate(s_rejects, why, f_prob)
                    continue
                for j in interval:
                    if weights[j] == 0:
                        continue
                    j_prob = f_prob * weights[j] / interval_mass
                    if j not in active:
                        _accumulate(s_rejects, REJECT_BAND_NOT_LIVE, j_prob)
                        continue
                    members = sets[j]
                    if not members:
                        _accumulate(s_rejects, REJECT_EMPTY_SET, j_prob)
                        continue
                    x_prob = j_prob / len(members)
                    for x in members:
                        p_msg = comp.strategy.produce_probability(j, x)
                        outcome = finalize(j, x, p_msg, params)
                        _accumulate(s_outputs, (x, j, outcome.p), x_prob)
        comp.per_shift[s] = {"prob": s_prob, "outputs": s_outputs, "rejects": s_rejects}
        for key, mass in s_outputs.items():
            _accumulate(comp.outputs, key, s_prob * mass)
        for why, mass in s_rejects.items():
            _accumulate(comp.rejects, why, s_prob * mass)


def _build_trivial_component(params: ProtocolParams, q: Fraction, strat: ProverStrategy) -> ComponentRun:
    comp = ComponentRun(q=q, strategy=strat, params=params, weights=None, reject_reason=None)
    entries = strat.produce_table()
    table = [(x, Fraction(p)) for x, p in entries] if entries is not None else None
    reason = validate_table(table, params)
    if reason is not None:
        comp.reject_reason = reason
        comp.rejects = {REJECT_MALFORMED_TABLE: Fraction(1)}
        return comp
    for x, p in table:
        _accumulate(comp.outputs, (x, None, p), p)
    return comp


@dataclass
class ExactDistribution:
    """Exact masses of one run: outputs keyed by (x, band, p), plus rejects."""

    params_digest: str
    outputs: dict[OutputKey, Fraction]
    reject_by_reason: dict[str, Fraction]

    @property
    def reject_mass(self) -> Fraction:
        return sum(self.reject_by_reason.values(), Fraction(0))

    def total_mass(self) -> Fraction:
        return sum(self.outputs.values(), Fraction(0)) + self.reject_mass

    def element_marginal(self) -> dict[int, Fraction]:
        out: dict[int, Fraction] = {}
        for (x, _band, _p), massv in self.outputs.items():
            out[x] = out.get(x, Fraction(0)) + massv
        return out

    def by_element_probability(self) -> dict[tuple, Fraction]:
        out: dict[tuple, Fraction] = {}
        for (x, _band, p), massv in self.outputs.items():
            out[(x, p)] = out.get((x, p), Fraction(0)) + massv
        return out

    def soundness_sums(self) -> dict[int, Fraction]:
        """Per-element sum of mass / p over all output cells, exact (tagged
        reals are divided at their double value)."""
        sums: dict[int, Fraction] = {}
        for (x, _band, p), massv in self.outputs.items():
            sums[x] = sums.get(x, Fraction(0)) + massv / Fraction(p)
        return sums


class OracleRun:
    """One enumeration pass over a config; all exact checks read from it."""

    def __init__(self, cfg: ExactConfig):
        self.cfg = cfg
        self.params = cfg.params
        self.components: list[ComponentRun] = []
        for q, strat in cfg.prover.randomness_support():
            if q == 0:
                continue
            if cfg.params.mode == MODE_TRIVIAL:
                self.components.append(_build_trivial_component(cfg.params, Fraction(q), strat))
            else:
                self.components.append(_build_component(cfg.params, Fraction(q), strat))
        total_q = sum((c.q for c in self.components), Fraction(0))
        if total_q != 1:
            raise ValueError(f"prover support probabilities sum to {total_q}, expected 1")

    @property
    def distribution(self) -> ExactDistribution:
        outputs: dict[OutputKey, Fraction] = {}
        rejects: dict[str, Fraction] = {}
        for comp in self.components:
            for key, mass in comp.outputs.items():
                _accumulate(outputs, key, comp.q * mass)
            for why, mass in comp.rejects.items():
                _accumulate(rejects, why, comp.q * mass)
        return ExactDistribution(
            params_digest=self.params.digest(), outputs=outputs, reject_by_reason=rejects,
        )

    def challenge_distribution(self) -> dict[tuple[int, int], Fraction]:
        """Exact joint law of (shift, interval index)."""
        out: dict[tuple[int, int], Fraction] = {}
        for comp in self.components:
            if comp.reject_reason is not None or comp.shift_total == 0:
                continue
            for s, st in comp.shifts.items():
                if st.weight == 0:
                    continue
                for k, wk in st.interval_weights.items():
                    if wk == 0:
                        continue
                    _accumulate(out, (s, k), comp.q * comp.shift_prob(s) * wk / st.weight)
        return out


def exact_output_distribution(cfg: ExactConfig) -> ExactDistribution:
    """The verifier's exact output distribution for the configured prover."""
    return OracleRun(cfg).distribution


# ---------------------------------------------------------------------------
# Independent flat enumerator (cross-validation)


def exact_output_distribution_flat(params: ProtocolParams, prover: ProverStrategy):
    """Independent re-derivation of the output distribution, written flat.

    Shares nothing with the engine beyond the layout and the hash
    primitive: histogram validation, liveness, challenge arithmetic, the
    set checks, and probability substitution are re-implemented inline.
    Returns (outputs keyed by (x, band, p), total reject mass).
    """
    outputs: dict[OutputKey, Fraction] = {}
    reject = Fraction(0)
    for q, strat in prover.randomness_support():
        if q == 0:
            continue
        q = Fraction(q)
        if params.mode == MODE_TRIVIAL:
            entries = strat.produce_table()
            ok = entries is not None
            if ok:
                table = [(x, Fraction(p)) for x, p in entries]
                ok = (
                    all(
                        isinstance(x, int) and 0 <= x < (1 << params.n) and 0 < p <= 1
                        for x, p in table
                    )
                    and len({x for x, _ in table}) == len(table)
                    and sum((p for _, p in table), Fraction(0)) == 1
                )
            if not ok:
                reject += q
            else:
                for x, p in table:
                    _accumulate(outputs, (x, None, p), q * p)
            continue
        raw = strat.produce_histogram()
        bad = raw is None or len(raw) != params.t + 1
        if not bad:
            bad = any(not isinstance(w, (int, Fraction)) for w in raw)
        if not bad:
            h = [Fraction(w) for w in raw]
            total = sum(h, Fraction(0))
            bad = any(w < 0 for w in h) or not (1 - Fraction(1, 2**params.n)) <= total <= 1
        if bad:
            reject += q
            continue
        thresh = Fraction(params.eps) / (2 * params.t)
        live = {j for j, w in enumerate(h) if w >= thresh}
        layout = params.layout
        shift_w = {
            s: sum((h[j] for ivs in layout.intervals[s] for j in ivs), Fraction(0))
            for s in layout.shifts
        }
        big_w = sum(shift_w.values(), Fraction(0))
        if big_w == 0:
            reject += q
            continue
        size = 1 << params.n
        for s in layout.shifts:
            if shift_w[s] == 0:
                continue
            pr_s = q * shift_w[s] / big_w
            for k in layout.index_range:
                members = layout.interval(s, k)
                wk = sum((h[j] for j in members), Fraction(0))
                if wk == 0:
                    continue
                pr_k = pr_s * wk / shift_w[s]
                z = sum((2.0 ** (i * params.eps)) * float(h[i]) for i in members)
                level = math.log2(z)
                m = max(0, math.floor(level - params.sampling_gap))
                g = params.sampling_gap + (level - params.sampling_gap) - math.floor(
                    level - params.sampling_gap
                )
                if m > params.n:
                    reject += pr_k
                    continue
                act = sorted(i for i in members if i in live)
                for a in range(size):
                    for b in range(size):
                        for c in range(size):
                            f = HashFunction(n=params.n, m=m, a=a, b=b, c=c)
                            pr_f = pr_k / size**3
                            sets = strat.produce_sets(s, k, f, g, m)
                            ok, norm = _flat_check(sets, h, act, f, m, g, z, params)
                            if not ok:
                                reject += pr_f
                                continue
                            for j in members:
                                if h[j] == 0:
                                    continue
                                pr_j = pr_f * h[j] / wk
                                if j not in act or not norm[j]:
                                    reject += pr_j
                                    continue
                                for x in norm[j]:
                                    p_msg = strat.produce_probability(j, x)
                                    pv = _flat_final(j, p_msg, params)
                                    _accumulate(outputs, (x, j, pv), pr_j / len(norm[j]))
    return outputs, reject


def _flat_check(sets, h, active, f, m, g, z, params):
    if sets is None or set(sets.keys()) != set(active):
        return False, None
    norm = {}
    total = 0
    for i in active:
        xs = list(sets[i])
        if any((not isinstance(x, int)) or x < 0 or x >= (1 << params.n) for x in xs):
            return False, None
        if len(set(xs)) != len(xs):
            return False, None
        norm[i] = sorted(xs)
        total += len(xs)
    if total > params.set_cap:
        return False, None
    for i in active:
        for x in norm[i]:
            if f.eval(x) != 0:
                return False, None
    for i in active:
        count = len(norm[i])
        if m == 0:
            lo = 2.0 ** (i * params.eps) * float(h[i])
            hi = 2.0 ** ((i + 1) * params.eps) * float(h[i])
        else:
            lo = 2.0 ** (-params.eps) * (2.0 ** g) * (2.0 ** (i * params.eps)) * float(h[i]) / z
            hi = 2.0 ** params.eps * (2.0 ** g) * (2.0 ** ((i + 1) * params.eps)) * float(h[i]) / z
        if not lo * (1 - TAU) <= count <= hi * (1 + TAU):
            return False, None
    all_x = [x for i in active for x in norm[i]]
    if len(set(all_x)) != len(all_x):
        return False, None
    return True, norm


def _flat_final(j, p_msg, params):
    # Inline band classification: scan every band for the one holding p,
    # then accept the claim only if that band is j.
    in_band = False
    if isinstance(p_msg, (int, Fraction)):
        p = Fraction(p_msg)
        if 0 < p <= 1:
            lg = math.log2(p.numerator) - math.log2(p.denominator)
            for i in range(params.t + 1):
                if -(i + 1) * params.eps + TAU < lg <= -i * params.eps + TAU:
                    in_band = i == j
                    break
    if in_band:
        return Fraction(p_msg)
    expo = j * params.eps
    if expo == int(expo):
        return Fraction(1, 2 ** int(expo))
    return 2.0 ** (-expo)


# ---------------------------------------------------------------------------
# Structural checks (per deterministic component)


@dataclass
class StructuralReport:
    checked: int
    violations: list
    indeterminate: list

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_band_sandwich(run: OracleRun) -> StructuralReport:
    """For every component, shift, element, and band: the conditional output
    mass of the band lies within [2**(-2 eps), 2**eps] times
    placement / (shift weight * 2**(band * eps)).

    Irrational factors enter through outward-rounded rational enclosures,
    so every reported violation is rigorous; comparisons falling inside an
    enclosure are reported as indeterminate rather than passed.
    """
    params = run.params
    eps = params.eps
    lo_factor = pow2_bounds(-2 * eps)
    hi_factor = pow2_bounds(eps)
    violations = []
    indeterminate = []
    checked = 0
    for ci, comp in enumerate(run.components):
        if comp.reject_reason is not None:
            continue
        for s in params.layout.shifts:
            w_s = comp.shift_weight(s)
            if w_s == 0:
                continue
            cond = comp.shift_conditional(s)
            mass_by_band: dict[tuple[int, int], Fraction] = {}
            for (x, j, _p), massv in cond.items():
                mass_by_band[(x, j)] = mass_by_band.get((x, j), Fraction(0)) + massv
            for x in range(1 << params.n):
                for j in range(params.t + 1):
                    checked += 1
                    mass = mass_by_band.get((x, j), Fraction(0))
                    r = comp.placement_probability(s, x, j)
                    band_lo, band_hi = pow2_bounds(j * eps)
                    lower_lo = lo_factor[0] * r / (w_s * band_hi)
                    lower_hi = lo_factor[1] * r / (w_s * band_lo)
                    upper_lo = hi_factor[0] * r / (w_s * band_hi)
                    upper_hi = hi_factor[1] * r / (w_s * band_lo)
                    if mass < lower_lo or mass > upper_hi:
                        violations.append((ci, s, x, j, mass, lower_lo, upper_hi))
                    elif mass < lower_hi or mass > upper_lo:
                        indeterminate.append((ci, s, x, j, mass, lower_hi, upper_lo))
    return StructuralReport(checked=checked, violations=violations, indeterminate=indeterminate)


def verify_band_sums(run: OracleRun) -> StructuralReport:
    """Placement probabilities over each interval sum to at most 1, exactly."""
    params = run.params
    layout = params.layout
    violations = []
    checked = 0
    for ci, comp in enumerate(run.components):
        if comp.reject_reason is not None:
            continue
        for s in layout.shifts:
            for k in layout.index_range:
                interval = layout.interval(s, k)
                for x in range(1 << params.n):
                    checked += 1
                    total = sum(
                        (comp.placement_probability(s, x, j) for j in interval),
                        Fraction(0),
                    )
                    if total > 1:
                        violations.append((ci, s, k, x, total))
    return StructuralReport(checked=checked, violations=violations, indeterminate=[])


# ---------------------------------------------------------------------------
# Soundness and completeness diagnostics (per deterministic component)


@dataclass
class ShiftSoundness:
    shift: int
    weight: Fraction
    cutoff: dict[int, Fraction]  # per element: top of the undervalued band
    large_edge: dict[int, Fraction]  # per element: bottom of the large band
    bad_probability: Fraction
    sums_above_cutoff: dict[int, Fraction]
    sums_medium: dict[int, Fraction]
    sums_large: dict[int, Fraction]
    bad_bound_ok: bool
    sum_bound_ok: bool


@dataclass
class SoundnessDiagnostics:
    per_shift: dict[int, ShiftSoundness]
    bad_probability: Fraction
    conditional_sums: dict[int, Fraction]

    def max_conditional_sum(self) -> Fraction:
        return max(self.conditional_sums.values(), default=Fraction(0))


def soundness_diagnostics(run: OracleRun, component: int = 0) -> SoundnessDiagnostics:
    """Exact cutoffs, band memberships, bad-event mass, and mass/p sums.

    The cutoff for element x under shift s is its conditional output mass
    divided by 2**((gap_size/2 - 1) * eps); outputs at or below the cutoff
    form the bad event, outputs at or above the conditional mass times the
    same factor form the large band, and the rest the medium band. The
    per-shift flags compare against 16*eps/w(s) and (1+6*eps)/w(s); those
    are guarantees only in calibrated regimes, so outside them the flags
    are informational.
    """
    comp = run.components[component]
    params = run.params
    expo = (params.gap_size / 2 - 1) * params.eps
    div_lo, _div_hi = pow2_bounds(expo)
    divisor = div_lo  # deterministic choice; documented as the enclosure floor
    per_shift = {}
    bad_total = Fraction(0)
    above_weighted: dict[int, Fraction] = {}
    eps_f = Fraction(params.eps)
    for s in params.layout.shifts:
        w_s = comp.shift_weight(s)
        if w_s == 0:
            continue
        s_prob = comp.shift_prob(s)
        cond = comp.shift_conditional(s)
        marginal: dict[int, Fraction] = {}
        for (x, _j, _p), massv in cond.items():
            marginal[x] = marginal.get(x, Fraction(0)) + massv
        cutoff = {x: m / divisor for x, m in marginal.items()}
        large_edge = {x: m * divisor for x, m in marginal.items()}
        bad = Fraction(0)
        above: dict[int, Fraction] = {}
        medium: dict[int, Fraction] = {}
        large: dict[int, Fraction] = {}
        for (x, _j, p), massv in cond.items():
            pv = Fraction(p)
            if pv <= cutoff.get(x, Fraction(0)):
                bad += massv
                continue
            share = massv / pv
            above[x] = above.get(x, Fraction(0)) + share
            if pv >= large_edge.get(x, Fraction(0)):
                large[x] = large.get(x, Fraction(0)) + share
            else:
                medium[x] = medium.get(x, Fraction(0)) + share
        per_shift[s] = ShiftSoundness(
            shift=s, weight=w_s, cutoff=cutoff, large_edge=large_edge,
            bad_probability=bad, sums_above_cutoff=above,
            sums_medium=medium, sums_large=large,
            bad_bound_ok=bad <= 16 * eps_f / w_s,
            sum_bound_ok=all(v <= (1 + 6 * eps_f) / w_s for v in above.values()),
        )
        bad_total += s_prob * bad
        for x, v in above.items():
            above_weighted[x] = above_weighted.get(x, Fraction(0)) + s_prob * v
    not_bad = 1 - bad_total
    conditional = {
        x: (v / not_bad if not_bad > 0 else Fraction(0))
        for x, v in above_weighted.items()
    }
    return SoundnessDiagnostics(
        per_shift=per_shift, bad_probability=bad_total, conditional_sums=conditional,
    )


@dataclass
class CompletenessDiagnostics:
    covered: set[int]
    covered_mass: Fraction
    partition_ok: bool
    deviation_factors: dict[tuple[int, int], Fraction]
    in_band: bool
    wrong_probability_mass: Fraction


def completeness_diagnostics(run: OracleRun, dist) -> CompletenessDiagnostics:
    """Honest-prover masses versus the held distribution, per shift.

    The covered set unions the live buckets; per shift, the excluded set
    unions the buckets falling in gaps. Checks that the per-shift excluded
    regions partition the covered set and reports the factor between each
    covered element's conditional mass at its true probability and
    prob / shift weight (flagged against the 1 +- 132*eps window).
    """
    comp = run.components[0]
    if comp.reject_reason is not None:
        raise ValueError("completeness diagnostics need a non-rejecting prover")
    params = run.params
    bucket_map = buckets(dist, params.eps, params.t)
    weights = build_histogram(dist, params.eps, params.t).weights
    live = compute_live_bands(weights, params)
    covered = {x for i in live for x in bucket_map.get(i, ())}
    covered_mass = sum((dist.prob(x) for x in covered), Fraction(0))
    layout = params.layout
    shift_members = {}
    for s in layout.shifts:
        bands = {j for ivs in layout.intervals[s] for j in ivs}
        shift_members[s] = {x for i in bands for x in bucket_map.get(i, ())}
    partition_ok = all(
        sum(1 for s in layout.shifts if x not in shift_members[s]) == 1 for x in covered
    )
    factors = {}
    wrong_mass = Fraction(0)
    eps_f = Fraction(params.eps)
    in_band = True
    for s in layout.shifts:
        w_s = comp.shift_weight(s)
        if w_s == 0:
            continue
        cond = comp.shift_conditional(s)
        by_xp: dict[tuple[int, Fraction], Fraction] = {}
        for (x, _j, p), massv in cond.items():
            if isinstance(p, Fraction) and p == dist.prob(x):
                by_xp[(x, p)] = by_xp.get((x, p), Fraction(0)) + massv
            else:
                wrong_mass += comp.shift_prob(s) * massv
        for x in covered & shift_members[s]:
            massv = by_xp.get((x, dist.prob(x)), Fraction(0))
            factor = massv * w_s / dist.prob(x)
            factors[(s, x)] = factor
            if not (1 - 132 * eps_f) <= factor <= (1 + 132 * eps_f):
                in_band = False
    return CompletenessDiagnostics(
        covered=covered, covered_mass=covered_mass, partition_ok=partition_ok,
        deviation_factors=factors, in_band=in_band, wrong_probability_mass=wrong_mass,
    )


# ---------------------------------------------------------------------------
# JSON report helpers


def distribution_report(exact: ExactDistribution) -> dict:
    from coinpress.dist import fraction_to_str
    from coinpress.protocol import probability_json

    def key_str(key: OutputKey) -> str:
        x, band, p = key
        pj = probability_json(p)
        ps = pj if isinstance(pj, str) else f"~{pj['real']}"
        return f"{x:x}|{band if band is not None else '-'}|{ps}"

    return {
        "params_digest": exact.params_digest,
        "outputs": {
            key_str(k): fraction_to_str(v)
            for k, v in sorted(exact.outputs.items(), key=lambda kv: key_str(kv[0]))
        },
        "reject": {k: fraction_to_str(v) for k, v in sorted(exact.reject_by_reason.items())},
        "total": fraction_to_str(exact.total_mass()),
    }
