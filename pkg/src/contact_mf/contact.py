"""Event-driven simulation of the contact process.

Infected sites recover at rate 1 and push infection onto each of their 2d
neighbors at rate lam/(2d).  The attempt-based event loop samples, while k
sites are infected, an Exp(k*(1+lam)) waiting time, then with probability
1/(1+lam) recovers a uniformly random infected site and otherwise lets a
uniformly random infected site attempt to infect a uniformly random
neighbor (a no-op when the neighbor is already infected).  No-op attempts
are deliberately kept in the event stream: they make the total event rate
depend only on the infected count, which is what the monotone couplings
and the linear-system pairing both lean on.

Trials run until extinction, until the infected count reaches a threshold
(a proxy for survival: from a large set at lam > 1 dying out is
exponentially unlikely in the threshold), or until a time horizon censors
them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .analytics import threshold_error_bound
from .errors import InvariantViolation, UsageError
from .lattice import Torus, Vertex, origin
from .rng import substream

__all__ = [
    "EXTINCT",
    "REACHED_THRESHOLD",
    "CENSORED",
    "ContactParams",
    "SampleSet",
    "TrialOutcome",
    "SurvivalEstimate",
    "step",
    "run_trial",
    "run_to_time",
    "estimate_survival",
    "DualityResult",
    "duality_check",
    "coupled_thinning_trial",
]

EXTINCT = "extinct"
REACHED_THRESHOLD = "reached_threshold"
CENSORED = "censored"


@dataclass(frozen=True)
class ContactParams:
    """Infection rate, dimension, and optional finite geometry.

    geometry None means the infinite lattice (vertices are integer
    tuples); a Torus wraps coordinates to its side length.
    """

    lam: float
    d: int
    geometry: Torus | None = None

    def __post_init__(self):
        # lam == 0 is the pure-death process (recovery only) and is a
        # legitimate boundary case for the simulator; only negative rates
        # are rejected.  Analytic bounds have their own stricter domains.
        if self.lam < 0:
            raise UsageError(f"infection rate must be nonnegative, got {self.lam}")
        if not isinstance(self.d, int) or self.d < 1:
            raise UsageError(f"dimension must be a positive integer, got {self.d!r}")
        if self.geometry is not None and self.geometry.dimension != self.d:
            raise UsageError(
                f"geometry dimension {self.geometry.dimension} != d={self.d}"
            )


class SampleSet:
    """Set of vertices with O(1) add/discard/membership and uniform choice.

    The classic list-plus-index-map structure: deletion swaps the victim
    with the last list element so the list stays dense and `choose` is a
    single randrange.
    """

    __slots__ = ("items", "_pos")

    def __init__(self, iterable=()):
        self.items: list[Vertex] = []
        self._pos: dict[Vertex, int] = {}
        for v in iterable:
            self.add(v)

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, v) -> bool:
        return v in self._pos

    def __iter__(self):
        return iter(self.items)

    def add(self, v: Vertex) -> None:
        if v not in self._pos:
            self._pos[v] = len(self.items)
            self.items.append(v)

    def discard(self, v: Vertex) -> None:
        i = self._pos.pop(v, None)
        if i is None:
            return
        last = self.items.pop()
        if last != v:
            self.items[i] = last
            self._pos[last] = i

    def choose(self, rng) -> Vertex:
        return self.items[rng.randrange(len(self.items))]

    def as_set(self) -> set[Vertex]:
        return set(self.items)


def _attempt_infection(state: SampleSet, params: ContactParams, rng) -> None:
    """One infection attempt: uniform infected source, uniform neighbor."""
    x = state.choose(rng)
    k = rng.randrange(2 * params.d)
    axis = k >> 1
    delta = 1 - 2 * (k & 1)
    geo = params.geometry
    if geo is None:
        y = x[:axis] + (x[axis] + delta,) + x[axis + 1:]
    else:
        y = x[:axis] + ((x[axis] + delta) % geo.side,) + x[axis + 1:]
    state.add(y)


def step(state: SampleSet, params: ContactParams, rng) -> float:
    """Advance the configuration by one event, in place.

    Returns the exponential waiting time that elapsed.  Raising on an
    empty configuration (rate zero, no event can ever fire) beats
    silently returning infinity.
    """
    n = len(state)
    if n == 0:
        raise UsageError("step called on an empty configuration")
    elapsed = rng.expovariate(n * (1.0 + params.lam))
    if rng.random() * (1.0 + params.lam) < 1.0:
        state.discard(state.choose(rng))
    else:
        _attempt_infection(state, params, rng)
    return elapsed


@dataclass(frozen=True)
class TrialOutcome:
    verdict: str                    # EXTINCT | REACHED_THRESHOLD | CENSORED
    extinction_time: float | None   # set only when extinct
    max_size: int
    event_count: int


def run_trial(
    initial,
    params: ContactParams,
    horizon: float,
    threshold: int,
    rng,
) -> TrialOutcome:
    """Run one trial from the given initial set of infected vertices.

    Checks, in order before each event: extinction, threshold reached,
    horizon crossed (the pending event would fire after the horizon, so
    the configuration at the horizon is the pre-event one).
    """
    if horizon <= 0 or threshold < 1:
        raise UsageError("horizon must be positive and threshold >= 1")
    state = initial if isinstance(initial, SampleSet) else SampleSet(initial)
    lam = params.lam
    rate_per_site = 1.0 + lam
    d2 = 2 * params.d
    geo = params.geometry
    side = geo.side if geo is not None else 0
    t = 0.0
    events = 0
    max_size = len(state)
    expo = rng.expovariate
    uniform = rng.random
    randrange = rng.randrange
    items = state.items
    while True:
        n = len(items)
        if n == 0:
            return TrialOutcome(EXTINCT, t, max_size, events)
        if n >= threshold:
            return TrialOutcome(REACHED_THRESHOLD, None, max_size, events)
        dt = expo(n * rate_per_site)
        if t + dt > horizon:
            return TrialOutcome(CENSORED, None, max_size, events)
        t += dt
        events += 1
        if uniform() * rate_per_site < 1.0:
            state.discard(items[randrange(n)])
        else:
            x = items[randrange(n)]
            k = randrange(d2)
            axis = k >> 1
            delta = 1 - 2 * (k & 1)
            if geo is None:
                y = x[:axis] + (x[axis] + delta,) + x[axis + 1:]
            else:
                y = x[:axis] + ((x[axis] + delta) % side,) + x[axis + 1:]
            state.add(y)
            if len(items) > max_size:
                max_size = len(items)


def run_to_time(state: SampleSet, params: ContactParams, duration: float, rng) -> None:
    """Advance the configuration by exactly `duration` time units, in place.

    Events whose waiting time would cross the end point are not applied
    (memorylessness makes the early cutoff exact).
    """
    if duration < 0:
        raise UsageError(f"duration must be >= 0, got {duration}")
    lam = params.lam
    rate_per_site = 1.0 + lam
    t = 0.0
    while len(state):
        dt = rng.expovariate(len(state) * rate_per_site)
        if t + dt > duration:
            return
        t += dt
        if rng.random() * rate_per_site < 1.0:
            state.discard(state.choose(rng))
        else:
            _attempt_infection(state, params, rng)


@dataclass(frozen=True)
class SurvivalEstimate:
    p_hat: float
    std_err: float
    n_trials: int
    n_reached: int
    n_censored: int
    threshold: int
    horizon: float
    threshold_escape_bound: float   # upper bound on extinction-after-threshold


def estimate_survival(
    params: ContactParams,
    n_trials: int,
    horizon: float,
    threshold: int,
    seed: int,
) -> SurvivalEstimate:
    """Estimate the survival probability from a single infected origin.

    p_hat is the fraction of trials that reach the threshold before the
    horizon; censored trials (neither extinct nor at threshold by the
    horizon) count against survival, which biases p_hat downward — the
    count is reported so the caller can judge.  Trials use disjoint
    substreams indexed by trial number, so results do not depend on
    execution order.
    """
    if n_trials < 1:
        raise UsageError(f"n_trials must be >= 1, got {n_trials}")
    start = (origin(params.d),)
    n_reached = 0
    n_censored = 0
    for trial in range(n_trials):
        rng = substream(seed, "trial", trial)
        out = run_trial(start, params, horizon, threshold, rng)
        if out.verdict == REACHED_THRESHOLD:
            n_reached += 1
        elif out.verdict == CENSORED:
            n_censored += 1
    p_hat = n_reached / n_trials
    std_err = math.sqrt(p_hat * (1.0 - p_hat) / n_trials)
    return SurvivalEstimate(
        p_hat=p_hat,
        std_err=std_err,
        n_trials=n_trials,
        n_reached=n_reached,
        n_censored=n_censored,
        threshold=threshold,
        horizon=horizon,
        threshold_escape_bound=threshold_error_bound(params.lam, threshold),
    )


@dataclass(frozen=True)
class DualityResult:
    p_single_survives: float
    p_full_covers_origin: float
    z_score: float
    n_trials: int


def duality_check(
    params: ContactParams,
    t: float,
    n_trials: int,
    seed: int,
) -> DualityResult:
    """Compare P(eta_t^{O} nonempty) with P(eta_t^{full}(O) = 1) on a torus.

    The two are equal in law, so the pooled two-proportion z-score should
    look standard normal.  Requires finite geometry: on the infinite
    lattice the all-infected start is not simulable.
    """
    if params.geometry is None:
        raise UsageError("duality_check needs a Torus geometry")
    if t < 0:
        raise UsageError(f"time must be >= 0, got {t}")
    if n_trials < 1:
        raise UsageError(f"n_trials must be >= 1, got {n_trials}")
    torus = params.geometry
    o = origin(params.d)
    full = [torus.vertex(i) for i in range(torus.volume)]
    survived = 0
    for trial in range(n_trials):
        state = SampleSet((o,))
        run_to_time(state, params, t, substream(seed, "single", trial))
        if len(state):
            survived += 1
    covered = 0
    for trial in range(n_trials):
        state = SampleSet(full)
        run_to_time(state, params, t, substream(seed, "full", trial))
        if o in state:
            covered += 1
    p1 = survived / n_trials
    p2 = covered / n_trials
    pooled = (survived + covered) / (2 * n_trials)
    if pooled in (0.0, 1.0):
        z = 0.0   # both proportions degenerate and equal
    else:
        z = (p1 - p2) / math.sqrt(pooled * (1.0 - pooled) * 2.0 / n_trials)
    return DualityResult(p1, p2, z, n_trials)


def coupled_thinning_trial(
    lam_lo: float,
    lam_hi: float,
    d: int,
    horizon: float,
    rng,
    geometry: Torus | None = None,
) -> bool:
    """Run processes at two infection rates on one event stream.

    The master stream drives the lam_hi process; the lam_lo process
    accepts an infection attempt only when its own source is infected and
    an extra coin with success lam_lo/lam_hi comes up — which thins the
    attempt rate to exactly lam_lo/(2d) per (source, target) pair while
    recoveries are shared.  Started from the same set, the lam_lo
    configuration then stays inside the lam_hi one; returns True when
    that containment held at every event.  Used by tests as a
    monotonicity certificate.
    """
    if not 0 < lam_lo <= lam_hi:
        raise UsageError("need 0 < lam_lo <= lam_hi")
    params_hi = ContactParams(lam_hi, d, geometry)
    o = origin(d)
    lo = SampleSet((o,))
    hi = SampleSet((o,))
    rate_per_site = 1.0 + lam_hi
    accept = lam_lo / lam_hi
    t = 0.0
    geo = params_hi.geometry
    while len(hi):
        dt = rng.expovariate(len(hi) * rate_per_site)
        if t + dt > horizon:
            break
        t += dt
        if rng.random() * rate_per_site < 1.0:
            x = hi.choose(rng)
            hi.discard(x)
            lo.discard(x)
        else:
            x = hi.choose(rng)
            k = rng.randrange(2 * d)
            axis = k >> 1
            delta = 1 - 2 * (k & 1)
            if geo is None:
                y = x[:axis] + (x[axis] + delta,) + x[axis + 1:]
            else:
                y = x[:axis] + ((x[axis] + delta) % geo.side,) + x[axis + 1:]
            hi.add(y)
            if x in lo and rng.random() < accept:
                lo.add(y)
        for v in lo.items:
            if v not in hi:
                return False
    return len(lo) == 0 or all(v in hi for v in lo.items)
