"""Population-level stochastic model of reconfiguration dynamics.

Three species count agents: W working, D deficient with an active wave, H
halted (wave found no solution). Reactions::

    fail     W -> D   lambda_fail * W
    resolve  D -> W   mu_resolve * D * (1 - p_infeasible)
    halt     D -> H   mu_resolve * D * p_infeasible

Trajectories are simulated exactly with Gillespie's direct method.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidRate

SPECIES = ("W", "D", "H")


@dataclass(frozen=True)
class Reaction:
    name: str
    rate: float
    reactant: int          # index into SPECIES; propensity is rate * count * factor
    stoichiometry: tuple
    factor: float = 1.0

    def propensity(self, state) -> float:
        return self.rate * self.factor * state[self.reactant]


@dataclass(frozen=True)
class CtmcSpec:
    n: int
    reactions: tuple
    initial: tuple

    def propensities(self, state) -> np.ndarray:
        return np.array([r.propensity(state) for r in self.reactions], dtype=float)


def build_ctmc(n: int, lambda_fail: float, mu_resolve: float, p_infeasible: float,
               initial: Optional[tuple] = None) -> CtmcSpec:
    if n < 1:
        raise ValueError("n must be at least 1")
    if lambda_fail < 0 or mu_resolve < 0:
        raise InvalidRate(f"rates must be non-negative (lambda={lambda_fail}, mu={mu_resolve})")
    if not 0.0 <= p_infeasible <= 1.0:
        raise InvalidRate(f"p_infeasible must lie in [0, 1], got {p_infeasible}")
    initial = (n, 0, 0) if initial is None else tuple(initial)
    if sum(initial) != n or min(initial) < 0:
        raise ValueError(f"initial counts {initial} do not sum to {n}")
    reactions = (
        Reaction("fail", lambda_fail, 0, (-1, 1, 0)),
        Reaction("resolve", mu_resolve, 1, (1, -1, 0), 1.0 - p_infeasible),
        Reaction("halt", mu_resolve, 1, (0, -1, 1), p_infeasible),
    )
    return CtmcSpec(n, reactions, initial)


@dataclass
class Trajectory:
    times: np.ndarray      # jump times, first entry is the start time
    counts: np.ndarray     # shape (len(times), 3)
    t_end: float           # time the simulation stopped observing

    def __len__(self):
        return len(self.times)

    @property
    def final(self) -> tuple:
        return tuple(int(c) for c in self.counts[-1])


_BATCH = 4096


def ssa_run(spec: CtmcSpec, seed: int, t_max: float, initial: Optional[tuple] = None,
            max_jumps: Optional[int] = None, stop=None) -> Trajectory:
    """Direct-method SSA from ``initial`` (default ``spec.initial``).

    Stops at ``t_max``, at an absorbing state, after ``max_jumps`` jumps, or
    when ``stop(state)`` returns true after a jump.
    """
    rng = np.random.default_rng(seed)
    state = list(spec.initial if initial is None else initial)
    rates = [r.rate * r.factor for r in spec.reactions]
    reactants = [r.reactant for r in spec.reactions]
    changes = [r.stoichiometry for r in spec.reactions]
    n_reactions = len(rates)
    t = 0.0
    times, counts = [t], [tuple(state)]
    # numpy draws in batches, consumed as plain floats (much faster per jump)
    exps = rng.standard_exponential(_BATCH).tolist()
    unis = rng.random(_BATCH).tolist()
    cursor = 0
    jumps = 0
    # Observation ends at t_max unless the run is cut short by a jump limit
    # or the stop predicate; an absorbed state is observed until t_max.
    t_end = t_max if math.isfinite(t_max) else None
    while True:
        if max_jumps is not None and jumps >= max_jumps:
            t_end = t
            break
        props = [rates[j] * state[reactants[j]] for j in range(n_reactions)]
        total = sum(props)
        if total <= 0.0:
            break
        if cursor == _BATCH:
            exps = rng.standard_exponential(_BATCH).tolist()
            unis = rng.random(_BATCH).tolist()
            cursor = 0
        tau = exps[cursor] / total
        pick = unis[cursor] * total
        cursor += 1
        if t + tau > t_max:
            break
        t += tau
        acc = 0.0
        chosen = n_reactions - 1
        for j in range(n_reactions):
            acc += props[j]
            if pick < acc:
                chosen = j
                break
        while props[chosen] == 0.0:  # guard against rounding at the upper edge
            chosen -= 1
        dw, dd, dh = changes[chosen]
        state = [state[0] + dw, state[1] + dd, state[2] + dh]
        times.append(t)
        counts.append(tuple(state))
        jumps += 1
        if stop is not None and stop(state):
            t_end = t
            break
    return Trajectory(np.array(times), np.array(counts, dtype=int), t if t_end is None else t_end)


def occupancy(traj: Trajectory) -> dict:
    """Fraction of observed time spent in each state."""
    dwell = np.diff(np.append(traj.times, traj.t_end))
    total = dwell.sum()
    if total <= 0:
        return {traj.final: 1.0}
    base = int(traj.counts.max()) + 1
    codes = traj.counts @ np.array([base * base, base, 1])
    uniq, inverse = np.unique(codes, return_inverse=True)
    per_state = np.bincount(inverse, weights=dwell)
    out = {}
    for code, w in zip(uniq.tolist(), per_state.tolist()):
        if w > 0:
            out[(code // (base * base), code // base % base, code % base)] = w / total
    return out


def states(n: int) -> list:
    return [(w, d, n - w - d) for w in range(n, -1, -1) for d in range(n - w, -1, -1)]


def reachable_states(spec: CtmcSpec) -> list:
    """States reachable from ``spec.initial``, in the order of ``states(n)``."""
    seen = {tuple(spec.initial)}
    frontier = [tuple(spec.initial)]
    while frontier:
        s = frontier.pop()
        for r in spec.reactions:
            if r.propensity(s) > 0:
                target = tuple(x + dx for x, dx in zip(s, r.stoichiometry))
                if target not in seen:
                    seen.add(target)
                    frontier.append(target)
    return [s for s in states(spec.n) if s in seen]


def generator_matrix(spec: CtmcSpec):
    """Explicit generator over the states reachable from the initial counts.

    Unreachable states are left out; kept in, they would be isolated and make
    the stationary vector non-unique.
    """
    space = reachable_states(spec)
    index = {s: i for i, s in enumerate(space)}
    q = np.zeros((len(space), len(space)))
    for s in space:
        for r in spec.reactions:
            a = r.propensity(s)
            if a > 0:
                target = tuple(x + dx for x, dx in zip(s, r.stoichiometry))
                q[index[s], index[target]] += a
                q[index[s], index[s]] -= a
    return space, q


def stationary_distribution(spec: CtmcSpec) -> dict:
    """Solve pi Q = 0, sum(pi) = 1 by least squares on the stacked system.

    With absorbing states the solution is the absorbing mass; callers should
    only use this when the stationary vector is unique.
    """
    space, q = generator_matrix(spec)
    a = np.vstack([q.T, np.ones(len(space))])
    b = np.zeros(len(space) + 1)
    b[-1] = 1.0
    pi, *_ = np.linalg.lstsq(a, b, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    return {s: float(p) for s, p in zip(space, pi)}


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)


def mean_deficient_fraction(dist: dict, n: int) -> float:
    return sum(prob * s[1] for s, prob in dist.items()) / n


@dataclass(frozen=True)
class EnsembleStats:
    n_runs: int
    n_resolved: int
    mean: Optional[float]
    variance: Optional[float]

    @property
    def n_unresolved(self) -> int:
        return self.n_runs - self.n_resolved

    @property
    def stderr(self) -> Optional[float]:
        if self.variance is None or self.n_resolved < 2:
            return None
        return math.sqrt(self.variance / self.n_resolved)


def first_passage(spec: CtmcSpec, seed: int, t_max: float) -> Optional[float]:
    """Time from one deficient agent until all agents work again.

    None when that never happens before ``t_max`` (including absorption in H).
    """
    start = (spec.n - 1, 1, 0)
    traj = ssa_run(spec, seed, t_max, initial=start,
                   stop=lambda s: (s[1] == 0 and s[2] == 0) or s[2] > 0)
    w, d, h = traj.final
    if d == 0 and h == 0 and len(traj) > 1:
        return float(traj.times[-1])
    return None


def ensemble_stats(spec: CtmcSpec, n_runs: int, seed0: int, t_max: float) -> EnsembleStats:
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    samples = [first_passage(spec, seed, t_max) for seed in range(seed0, seed0 + n_runs)]
    done = np.array([s for s in samples if s is not None])
    if len(done) == 0:
        return EnsembleStats(n_runs, 0, None, None)
    var = float(done.var(ddof=1)) if len(done) > 1 else 0.0
    return EnsembleStats(n_runs, len(done), float(done.mean()), var)


def calibrate_resolve_rate(wave_durations) -> float:
    """Resolve rate matching a set of measured wave durations (1 / mean)."""
    durations = [float(d) for d in wave_durations]
    if not durations or sum(durations) <= 0:
        raise InvalidRate("need positive wave durations to calibrate")
    return len(durations) / sum(durations)
