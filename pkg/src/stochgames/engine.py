"""Game solving: probabilistic and expected-reward reachability queries.

Values are computed by value iteration preceded by qualitative precomputation:

* unbounded probability: states from which the reach-seeking side cannot
  reach the target with positive probability are frozen at 0, states where it
  can force reaching almost surely are frozen at 1, and Gauss-Seidel sweeps
  (organized over strongly connected components in reverse topological order)
  handle the rest;
* expected reward with infinite penalty for non-reaching paths: states outside
  the almost-sure-reach region of the side that needs to reach are frozen at
  +inf; minimizing queries then iterate downward from the value of a proper
  witness strategy (plain iteration from below is unsound in the presence of
  zero-reward cycles the minimizer controls);
* cumulated reward: states from which the reward-maximizing side can force,
  with positive probability, an end-component style trap that avoids the
  target while earning reward infinitely often are flagged +inf, the rest
  iterates from below;
* zero-on-non-reaching reward: solved over piecewise-linear value functions
  parameterized by the reward already at stake, which captures the tradeoff
  between collecting reward and securing the target.

Synthesized strategies are deterministic and memoryless (step-indexed for
bounded horizons); ties are broken by action declaration order, with
progress-ranked tie-breaking wherever an arbitrary optimal action could
stall forever and miss the claimed value.
"""

from __future__ import annotations

import math
import weakref
from dataclasses import dataclass, field

from .errors import BadTarget, NonConvergence, StrategyError, UnknownLabel, UnknownReward
from .formulas import Formula
from .game import Smg, Strategy, induced_game, step_product_state

EPSILON = 1e-8
MAX_ITERS = 10 ** 6
_TIE_TOL = 1e-9

INF = math.inf


@dataclass(eq=False)
class ValueVector:
    """Per-state query result; probabilities are finite, rewards may be +inf."""

    values: list
    kind: str  # "probability" | "expected-reward"

    def __getitem__(self, state):
        return self.values[state]

    def __len__(self):
        return len(self.values)


@dataclass(eq=False)
class CheckResult:
    values: ValueVector
    value: float
    holds: bool | None = None
    satisfying: frozenset | None = None
    strategy: Strategy | None = None
    adversary_strategy: Strategy | None = None


# --------------------------------------------------------------------------
# compiled representation


class _Compiled:
    __slots__ = ("n", "owner", "act_start", "nact", "act_label", "act_state",
                 "succ", "prob", "pred", "sccs", "has_self_loop")

    def __init__(self, g: Smg):
        self.n = g.n_states
        self.owner = list(g.owner)
        self.act_start = []
        self.nact = []
        self.act_label = []
        self.act_state = []
        self.succ = []
        self.prob = []
        slot = 0
        for s in range(self.n):
            self.act_start.append(slot)
            self.nact.append(len(g.actions[s]))
            for label, dist in zip(g.actions[s], g.dists[s]):
                self.act_label.append(label)
                self.act_state.append(s)
                self.succ.append([t for t, _ in dist.support])
                self.prob.append([p for _, p in dist.support])
                slot += 1
        self.pred = [[] for _ in range(self.n)]
        for a in range(slot):
            for t in set(self.succ[a]):
                self.pred[t].append(a)
        self.has_self_loop = [False] * self.n
        for a in range(slot):
            if self.act_state[a] in self.succ[a]:
                self.has_self_loop[self.act_state[a]] = True
        self.sccs = self._tarjan()

    def slots(self, s):
        start = self.act_start[s]
        return range(start, start + self.nact[s])

    def _tarjan(self):
        """Components emitted successors-first (reverse topological)."""
        n = self.n
        index = [-1] * n
        low = [0] * n
        on_stack = [False] * n
        stack = []
        comps = []
        counter = 0
        for root in range(n):
            if index[root] != -1:
                continue
            work = [(root, 0)]
            while work:
                s, pi = work[-1]
                if pi == 0:
                    index[s] = low[s] = counter
                    counter += 1
                    stack.append(s)
                    on_stack[s] = True
                advanced = False
                succs = []
                for a in self.slots(s):
                    succs.extend(self.succ[a])
                while pi < len(succs):
                    t = succs[pi]
                    pi += 1
                    if index[t] == -1:
                        work[-1] = (s, pi)
                        work.append((t, 0))
                        advanced = True
                        break
                    if on_stack[t]:
                        low[s] = min(low[s], index[t])
                if advanced:
                    continue
                work.pop()
                if work:
                    parent = work[-1][0]
                    low[parent] = min(low[parent], low[s])
                if low[s] == index[s]:
                    comp = []
                    while True:
                        t = stack.pop()
                        on_stack[t] = False
                        comp.append(t)
                        if t == s:
                            break
                    comp.sort()
                    comps.append(comp)
        return comps


_COMPILE_CACHE = weakref.WeakKeyDictionary()


def _compile(g: Smg) -> _Compiled:
    comp = _COMPILE_CACHE.get(g)
    if comp is None:
        comp = _Compiled(g)
        _COMPILE_CACHE[g] = comp
    return comp


def _expand_rewards(comp: _Compiled, g: Smg, name: str):
    if name not in g.rewards:
        raise UnknownReward(f"unknown reward {name!r}")
    rs = g.rewards[name]
    return [rs.get(comp.act_state[a], comp.act_label[a]) for a in range(len(comp.act_label))]


def _check_target(comp: _Compiled, target) -> frozenset:
    target = frozenset(int(s) for s in target)
    if not target:
        raise BadTarget("empty target set")
    for s in target:
        if not 0 <= s < comp.n:
            raise BadTarget(f"target state {s} not in game")
    return target


# --------------------------------------------------------------------------
# qualitative fixpoints


def _mu(comp, forcing, members, seed, stay=None, reward=None, enabled=None):
    """Least fixpoint of a forced-predecessor style operator.

    Computes X = lfp( seed  u  { s in members : Q a . valid(a) and prog(a) } )
    where Q is "exists" on states with forcing[s] and "for all" otherwise,
    valid(a) requires every successor inside `stay` (when given) and the slot
    to be enabled (when an `enabled` mask is given; non-forcing states ignore
    the mask), and prog(a) means reward[a] > 0 (when rewards are given) or
    supp(a) intersects X.

    Returns (membership bool list, trigger slot per joined forcing state).
    """
    n = comp.n
    in_x = [False] * n
    trigger = {}
    for s in sorted(seed):
        in_x[s] = True

    def slot_ok(a, s):
        if enabled is not None and forcing[s] and not enabled[a]:
            return False
        if stay is not None:
            for t in comp.succ[a]:
                if not stay[t]:
                    return False
        return True

    def prog(a):
        if reward is not None and reward[a] > 0.0:
            return True
        for t in comp.succ[a]:
            if in_x[t]:
                return True
        return False

    def satisfied(s):
        if forcing[s]:
            for a in comp.slots(s):
                if slot_ok(a, s) and prog(a):
                    return a
            return None
        for a in comp.slots(s):
            if not (slot_ok(a, s) and prog(a)):
                return None
        return -1

    candidates = sorted(s for s in range(n) if members[s] and not in_x[s])
    while True:
        added = []
        for s in candidates:
            if in_x[s]:
                continue
            hit = satisfied(s)
            if hit is not None:
                added.append(s)
                if hit >= 0:
                    trigger[s] = hit
        if not added:
            break
        nxt = set()
        for s in added:
            in_x[s] = True
        for s in added:
            for a in comp.pred[s]:
                ps = comp.act_state[a]
                if members[ps] and not in_x[ps]:
                    nxt.add(ps)
        candidates = sorted(nxt)
    return in_x, trigger


def _as_reach(comp, forcing, target, enabled=None):
    """Almost-sure reach region for the forcing side (nested nu/mu fixpoint).

    Returns (membership bool list, trigger slots from the final inner round).
    """
    stay = [True] * comp.n
    while True:
        members = stay
        in_x, trigger = _mu(comp, forcing, members, target, stay=stay, enabled=enabled)
        if all(in_x[s] == stay[s] for s in range(comp.n)):
            return in_x, trigger
        stay = in_x


def _as_buchi_avoid(comp, forcing, avoid, reward, enabled=None):
    """States where the forcing side ensures, with probability 1, never
    entering `avoid` while taking positive-reward actions infinitely often."""
    stay = [s not in avoid for s in range(comp.n)]
    while True:
        in_x, trigger = _mu(comp, forcing, stay, (), stay=stay, reward=reward,
                            enabled=enabled)
        if all(in_x[s] == stay[s] for s in range(comp.n)):
            return in_x, trigger
        stay = in_x


def almost_sure_reach(g: Smg, coalition, target) -> frozenset:
    """States from which the coalition can force reaching the target with
    probability 1 against every adversary behaviour."""
    comp = _compile(g)
    target = _check_target(comp, target)
    players = g.coalition_players(coalition)
    forcing = [comp.owner[s] in players for s in range(comp.n)]
    in_y, _ = _as_reach(comp, forcing, target)
    return frozenset(s for s in range(comp.n) if in_y[s])


# --------------------------------------------------------------------------
# value iteration core


def _best_value(comp, s, v, rew, want_max):
    best = None
    for a in comp.slots(s):
        q = rew[a] if rew is not None else 0.0
        for t, p in zip(comp.succ[a], comp.prob[a]):
            q += p * v[t]
        if best is None or (q > best if want_max else q < best):
            best = q
    return best


def _iterate(comp, maximize, rew, v, frozen, epsilon, max_iters):
    """Gauss-Seidel sweeps, component by component in dependency order."""
    sweeps = 0
    for block in comp.sccs:
        states = [s for s in block if not frozen[s]]
        if not states:
            continue
        cyclic = len(block) > 1 or comp.has_self_loop[block[0]]
        if not cyclic:
            s = states[0]
            v[s] = _best_value(comp, s, v, rew, maximize[s])
            continue
        while True:
            delta = 0.0
            for s in states:
                nv = _best_value(comp, s, v, rew, maximize[s])
                old = v[s]
                if nv != old:
                    d = INF if (math.isinf(nv) != math.isinf(old)) else abs(nv - old)
                    if d > delta:
                        delta = d
                v[s] = nv
            sweeps += 1
            if delta < epsilon:
                break
            if sweeps >= max_iters:
                raise NonConvergence(
                    f"value iteration exceeded {max_iters} sweeps (last delta {delta})")
    return v


def _q_optimal_slots(comp, s, v, rew, want_max):
    """Slots of s whose one-step value matches the optimum within tolerance."""
    qs = []
    best = None
    for a in comp.slots(s):
        q = rew[a] if rew is not None else 0.0
        for t, p in zip(comp.succ[a], comp.prob[a]):
            q += p * v[t]
        qs.append((a, q))
        if best is None or (q > best if want_max else q < best):
            best = q
    tol = _TIE_TOL * max(1.0, abs(best)) if not math.isinf(best) else 0.0
    if math.isinf(best):
        return [a for a, q in qs if math.isinf(q)]
    return [a for a, q in qs if abs(q - best) <= tol]


# --------------------------------------------------------------------------
# strategy extraction


def _extract_strategy(g, comp, side_players, v, rew, side_max, mode, target,
                      reward_arr=None, inf_states=None, inf_trigger=None):
    """Deterministic memoryless choice for every state owned by `side_players`.

    mode "plain": first declaration-order optimal action (sound when the
    objective's fixpoint is reached from below on the chosen side).
    mode "mu": progress-ranked toward target / positive reward inside the
    optimal subgame (reach-maximizing and reward-collecting sides).
    mode "as": progress-ranked with almost-sure staying (minimizing sides of
    infinite-penalty queries, where a stalling tie would forfeit properness).
    """
    n = comp.n
    side_state = [comp.owner[s] in side_players for s in range(n)]
    choices = {}
    if not any(side_state):
        return choices

    enabled = [False] * len(comp.act_label)
    for s in range(n):
        if not side_state[s]:
            for a in comp.slots(s):
                enabled[a] = True
        else:
            for a in _q_optimal_slots(comp, s, v, rew, side_max[s]):
                enabled[a] = True

    trigger = {}
    if mode == "mu":
        _, trigger = _mu(comp, side_state, [True] * n, target,
                         reward=reward_arr, enabled=enabled)
    elif mode == "as":
        _, trigger = _as_reach(comp, side_state, target, enabled=enabled)

    for s in range(n):
        if not side_state[s]:
            continue
        if inf_states is not None and inf_states[s] and inf_trigger and s in inf_trigger:
            choices[s] = comp.act_label[inf_trigger[s]]
            continue
        if s in trigger:
            choices[s] = comp.act_label[trigger[s]]
            continue
        opts = _q_optimal_slots(comp, s, v, rew, side_max[s])
        choices[s] = comp.act_label[opts[0] if opts else comp.act_start[s]]
    return choices


def _witness_pair(g, comp, coalition_names, adv_names, v, rew, maximize, coal_mode,
                  adv_mode, target, reward_arr=None, inf_states=None, inf_trigger=None,
                  adv_inf_trigger=None):
    coal_players = g.coalition_players(coalition_names)
    adv_players = frozenset(range(len(g.players))) - coal_players
    coal = Strategy(
        kind="memoryless", coalition=frozenset(coalition_names),
        choices=_extract_strategy(g, comp, coal_players, v, rew, maximize, coal_mode,
                                  target, reward_arr, inf_states, inf_trigger))
    inv_max = [not m for m in maximize]
    adv = Strategy(
        kind="memoryless", coalition=frozenset(adv_names),
        choices=_extract_strategy(g, comp, adv_players, v, rew, inv_max, adv_mode,
                                  target, reward_arr, inf_states, adv_inf_trigger))
    return coal, adv


# --------------------------------------------------------------------------
# probability queries


def solve_prob(g: Smg, coalition, target, horizon=None, objective="max",
               epsilon=EPSILON, max_iters=MAX_ITERS):
    """Optimal (worst-case adversary) probability of reaching the target.

    Unbounded queries run qualitative precomputation then Gauss-Seidel value
    iteration from below; bounded queries run `horizon` backward-induction
    sweeps and return a step-indexed strategy.
    """
    comp = _compile(g)
    target = _check_target(comp, target)
    players = g.coalition_players(coalition)
    want_max = objective == "max"
    # the side whose optimization direction is "max" at each state; it is
    # also the side that wants the target reached
    maximize = [(comp.owner[s] in players) == want_max for s in range(comp.n)]
    adv_names = frozenset(g.players) - frozenset(coalition)

    if horizon is not None:
        return _solve_prob_bounded(g, comp, coalition, target, maximize, int(horizon))

    pos, _ = _mu(comp, maximize, [True] * comp.n, target)
    sure1, _ = _as_reach(comp, maximize, target)

    v = [0.0] * comp.n
    frozen = [False] * comp.n
    for s in range(comp.n):
        if s in target or sure1[s]:
            v[s] = 1.0
            frozen[s] = True
        elif not pos[s]:
            frozen[s] = True
    _iterate(comp, maximize, None, v, frozen, epsilon, max_iters)
    v = [min(1.0, max(0.0, x)) for x in v]

    coal_mode = "mu" if want_max else "plain"
    adv_mode = "plain" if want_max else "mu"
    coal, adv = _witness_pair(g, comp, coalition, adv_names, v, None, maximize,
                              coal_mode, adv_mode, target)
    result = ValueVector(v, "probability")
    result.adversary_strategy = adv
    return result, coal


def _solve_prob_bounded(g, comp, coalition, target, maximize, horizon):
    if horizon < 0:
        raise BadTarget(f"negative step bound {horizon}")
    players = g.coalition_players(coalition)
    coal_states = [s for s in range(comp.n) if comp.owner[s] in players]
    record = horizon * max(1, len(coal_states)) <= 10 ** 7

    v = [1.0 if s in target else 0.0 for s in range(comp.n)]
    choices = {}
    adv_choices = {}
    for remaining in range(1, horizon + 1):
        nv = [0.0] * comp.n
        for s in range(comp.n):
            if s in target:
                nv[s] = 1.0
                continue
            best = None
            best_slot = None
            for a in comp.slots(s):
                q = 0.0
                for t, p in zip(comp.succ[a], comp.prob[a]):
                    q += p * v[t]
                if best is None or (q > best if maximize[s] else q < best):
                    best = q
                    best_slot = a
            nv[s] = best
            if record:
                if comp.owner[s] in players:
                    choices[(s, remaining)] = comp.act_label[best_slot]
                else:
                    adv_choices[(s, remaining)] = comp.act_label[best_slot]
        v = nv

    coal = None
    adv = None
    if record:
        coal = Strategy(kind="step-indexed", coalition=frozenset(coalition),
                        choices=choices, horizon=horizon)
        adv_names = frozenset(g.players) - frozenset(coalition)
        adv = Strategy(kind="step-indexed", coalition=adv_names,
                       choices=adv_choices, horizon=horizon)
    result = ValueVector(v, "probability")
    result.adversary_strategy = adv
    return result, coal


# --------------------------------------------------------------------------
# reward queries


def solve_reward(g: Smg, coalition, reward, target, star, objective="max",
                 epsilon=EPSILON, max_iters=MAX_ITERS):
    """Expected reward cumulated until the first target visit.

    `star` selects the value of paths that never reach the target: "0" earns
    nothing, "c" keeps whatever accumulates, "inf" is infinite.
    """
    comp = _compile(g)
    target = _check_target(comp, target)
    rew = _expand_rewards(comp, g, reward)
    players = g.coalition_players(coalition)
    want_max = objective == "max"
    maximize = [(comp.owner[s] in players) == want_max for s in range(comp.n)]
    adv_names = frozenset(g.players) - frozenset(coalition)

    if star == "0":
        return _solve_reward_zero(g, comp, coalition, adv_names, target, rew,
                                  maximize, epsilon)

    v = [0.0] * comp.n
    frozen = [False] * comp.n
    for s in target:
        frozen[s] = True
    inf_states = None
    inf_trigger = None
    adv_inf_trigger = None

    if star == "inf":
        # finite exactly where the side that dreads infinity forces the
        # target almost surely
        reach_side = [not m for m in maximize]
        as_region, as_trigger = _as_reach(comp, reach_side, target)
        for s in range(comp.n):
            if not as_region[s] and s not in target:
                v[s] = INF
                frozen[s] = True
        if not want_max:
            _seed_from_proper_witness(comp, maximize, rew, v, frozen, target,
                                      as_trigger, epsilon, max_iters)
        _iterate(comp, maximize, rew, v, frozen, epsilon, max_iters)
        coal_mode = "plain" if want_max else "as"
        adv_mode = "as" if want_max else "plain"
    else:  # star == "c"
        buchi, buchi_trigger = _as_buchi_avoid(comp, maximize, target, rew)
        members = [s not in target for s in range(comp.n)]
        attr, attr_trigger = _mu(comp, maximize, members,
                                 [s for s in range(comp.n) if buchi[s]])
        inf_states = attr
        inf_trigger = dict(buchi_trigger)
        inf_trigger.update({s: a for s, a in attr_trigger.items() if s not in inf_trigger})
        for s in range(comp.n):
            if attr[s] and s not in target:
                v[s] = INF
                frozen[s] = True
        _iterate(comp, maximize, rew, v, frozen, epsilon, max_iters)
        coal_mode = "mu" if want_max else "plain"
        adv_mode = "plain" if want_max else "mu"
        if not want_max:
            adv_inf_trigger = inf_trigger
            inf_trigger = None

    coal, adv = _witness_pair(
        g, comp, coalition, adv_names, v, rew, maximize, coal_mode, adv_mode,
        target, reward_arr=rew if star == "c" else None,
        inf_states=inf_states, inf_trigger=inf_trigger,
        adv_inf_trigger=adv_inf_trigger)
    result = ValueVector(v, "expected-reward")
    result.adversary_strategy = adv
    return result, coal


def _seed_from_proper_witness(comp, maximize, rew, v, frozen, target, as_trigger,
                              epsilon, max_iters):
    """Overwrite unfrozen entries of v with the value of a proper strategy for
    the minimizing side, giving a supersolution to iterate downward from."""
    n = comp.n
    enabled = [True] * len(comp.act_label)
    restricted = False
    for s in range(n):
        if frozen[s] or maximize[s]:
            continue
        if s in as_trigger:
            for a in comp.slots(s):
                enabled[a] = a == as_trigger[s]
            restricted = True
    if not restricted:
        return

    v0 = [v[s] if frozen[s] else 0.0 for s in range(n)]
    sweeps = 0
    while True:
        delta = 0.0
        for s in range(n):
            if frozen[s]:
                continue
            best = None
            for a in comp.slots(s):
                if not maximize[s] and not enabled[a]:
                    continue
                q = rew[a]
                for t, p in zip(comp.succ[a], comp.prob[a]):
                    q += p * v0[t]
                if best is None or (q > best if maximize[s] else q < best):
                    best = q
            d = abs(best - v0[s]) if not math.isinf(best) else (0.0 if best == v0[s] else INF)
            if d > delta:
                delta = d
            v0[s] = best
        sweeps += 1
        if delta < epsilon:
            break
        if sweeps >= max_iters:
            raise NonConvergence("proper-witness evaluation did not converge")
    for s in range(n):
        if not frozen[s]:
            v[s] = v0[s]


# --------------------------------------------------------------------------
# star = 0: piecewise-linear value functions over the reward at stake


def _pwl_shift(f, r):
    if r == 0.0:
        return f
    out = []
    for i, (ws, sl, ic) in enumerate(f):
        ns = ws - r
        nic = ic + sl * r
        if ns <= 0.0:
            nxt = f[i + 1][0] - r if i + 1 < len(f) else INF
            if nxt <= 0.0:
                continue
            out.append((0.0, sl, nic))
        else:
            out.append((ns, sl, nic))
    return out or [f[-1][:1] and (0.0, f[-1][1], f[-1][2] + f[-1][1] * r)]


def _pwl_sum(fs, weights):
    starts = sorted({ws for f in fs for ws, _, _ in f})
    idx = [0] * len(fs)
    out = []
    for w in starts:
        sl = ic = 0.0
        for j, f in enumerate(fs):
            while idx[j] + 1 < len(f) and f[idx[j] + 1][0] <= w + 1e-15:
                idx[j] += 1
            _, s_j, i_j = f[idx[j]]
            sl += weights[j] * s_j
            ic += weights[j] * i_j
        if out and abs(out[-1][1] - sl) < 1e-14 and abs(out[-1][2] - ic) < 1e-14:
            continue
        out.append((w, sl, ic))
    return out


def _pwl_envelope(fs, want_max):
    starts = sorted({ws for f in fs for ws, _, _ in f})
    idx = [0] * len(fs)
    out = []

    def emit(w, sl, ic):
        if out and abs(out[-1][1] - sl) < 1e-14 and abs(out[-1][2] - ic) < 1e-14:
            return
        if out and out[-1][0] >= w - 1e-15:
            out[-1] = (out[-1][0], sl, ic)
            return
        out.append((w, sl, ic))

    for k, w in enumerate(starts):
        hi = starts[k + 1] if k + 1 < len(starts) else w + 1.0 + 2.0 * abs(w)
        lines = []
        for j, f in enumerate(fs):
            while idx[j] + 1 < len(f) and f[idx[j] + 1][0] <= w + 1e-15:
                idx[j] += 1
            lines.append(f[idx[j]][1:])
        # subdivide [w, hi) at pairwise crossings of the active lines
        cuts = {w}
        for i in range(len(lines)):
            for j in range(i + 1, len(lines)):
                s1, c1 = lines[i]
                s2, c2 = lines[j]
                if s1 != s2:
                    x = (c2 - c1) / (s1 - s2)
                    if w + 1e-12 < x < hi - 1e-12:
                        cuts.add(x)
        for a in sorted(cuts):
            b = min((c for c in cuts if c > a), default=hi)
            mid = a + (b - a) / 2 if b < INF else a + 1.0
            best = None
            for sl, ic in lines:
                val = sl * mid + ic
                if best is None or (val > best[0] if want_max else val < best[0]):
                    best = (val, sl, ic)
            emit(a, best[1], best[2])
    return out


def _pwl_delta(f, g_):
    ws = sorted({w for w, _, _ in f} | {w for w, _, _ in g_})
    probe = []
    for i, w in enumerate(ws):
        probe.append(w)
        probe.append(w + 1.0)  # inside the last piece as well
    def ev(h, x):
        lo = 0
        for k in range(len(h)):
            if h[k][0] <= x + 1e-15:
                lo = k
        return h[lo][1] * x + h[lo][2]
    return max(abs(ev(f, x) - ev(g_, x)) for x in probe)


def _solve_reward_zero(g, comp, coalition, adv_names, target, rew, maximize,
                       epsilon, sweep_cap=400):
    """Reward earned only on paths that reach the target.

    phi_s(w) is the optimal value from s when `w` reward is already at stake
    (kept only if the target is eventually reached); the answer is phi_s(0).
    """
    n = comp.n
    phi = [[(0.0, 1.0, 0.0)] if s in target else [(0.0, 0.0, 0.0)] for s in range(n)]
    order = [s for block in comp.sccs for s in block if s not in target]

    stable = 0
    for sweep in range(sweep_cap):
        delta = 0.0
        for s in order:
            cands = []
            for a in comp.slots(s):
                summed = _pwl_sum([phi[t] for t in comp.succ[a]], comp.prob[a])
                cands.append(_pwl_shift(summed, rew[a]))
            new = cands[0] if len(cands) == 1 else _pwl_envelope(cands, maximize[s])
            if len(new) > 4000:
                raise NonConvergence(
                    "piecewise-linear value function grew beyond 4000 pieces")
            d = _pwl_delta(phi[s], new)
            if d > delta:
                delta = d
            phi[s] = new
        if delta < max(epsilon, 1e-11):
            stable += 1
            if stable >= 2:
                break
        else:
            stable = 0
    else:
        raise NonConvergence(
            f"zero-star value functions did not stabilize in {sweep_cap} sweeps")

    v = [phi[s][0][2] for s in range(n)]
    v = [max(0.0, x) for x in v]

    coal_players = g.coalition_players(coalition)
    choices = {}
    adv_choices = {}
    for s in range(n):
        target_map = choices if comp.owner[s] in coal_players else adv_choices
        if s in target:
            target_map[s] = comp.act_label[comp.act_start[s]]
            continue
        best = None
        best_slot = comp.act_start[s]
        for a in comp.slots(s):
            summed = _pwl_sum([phi[t] for t in comp.succ[a]], comp.prob[a])
            val = _pwl_shift(summed, rew[a])[0][2]
            if best is None or (val > best + 1e-12 if maximize[s] else val < best - 1e-12):
                best = val
                best_slot = a
        target_map[s] = comp.act_label[best_slot]

    coal = Strategy(kind="memoryless", coalition=frozenset(coalition),
                    choices={s: a for s, a in choices.items()})
    adv = Strategy(kind="memoryless", coalition=frozenset(adv_names), choices=adv_choices)
    result = ValueVector(v, "expected-reward")
    result.adversary_strategy = adv
    return result, coal


# --------------------------------------------------------------------------
# formula dispatch


_REL_TESTS = {
    "<=": lambda v, q: v <= q,
    "<": lambda v, q: v < q,
    ">=": lambda v, q: v >= q,
    ">": lambda v, q: v > q,
}


def check(g: Smg, initial: int, f: Formula, epsilon=EPSILON, max_iters=MAX_ITERS) -> CheckResult:
    """Evaluate a formula at `initial`, returning the full value vector, the
    satisfying set for bound queries, and a witness strategy for the
    coalition side."""
    if f.target not in g.labels:
        raise UnknownLabel(f"unknown label {f.target!r}")
    for name in f.coalition:
        g.player_id(name)
    target = g.labels[f.target]
    objective = f.solving_objective()

    if f.operator == "P":
        values, sigma = solve_prob(g, f.coalition, target, horizon=f.step_bound,
                                   objective=objective, epsilon=epsilon,
                                   max_iters=max_iters)
    else:
        values, sigma = solve_reward(g, f.coalition, f.reward, target, f.star,
                                     objective=objective, epsilon=epsilon,
                                     max_iters=max_iters)

    value = values[initial]
    result = CheckResult(values=values, value=value, strategy=sigma,
                         adversary_strategy=getattr(values, "adversary_strategy", None))
    if not f.is_numeric:
        test = _REL_TESTS[f.rel]
        result.holds = bool(test(value, f.bound))
        result.satisfying = frozenset(
            s for s in range(len(values)) if test(values[s], f.bound))
    return result


def evaluate_under(g: Smg, sigma: Strategy, initial: int, f: Formula,
                   epsilon=EPSILON, max_iters=MAX_ITERS) -> CheckResult:
    """Fix `sigma` inside the game and check `f` on the induced model."""
    if set(f.coalition) & set(sigma.coalition):
        raise StrategyError(
            f"formula coalition {sorted(f.coalition)} overlaps strategy coalition "
            f"{sorted(sigma.coalition)}")
    induced = induced_game(g, sigma)
    start = step_product_state(g, sigma, initial)
    return check(induced, start, f, epsilon=epsilon, max_iters=max_iters)
