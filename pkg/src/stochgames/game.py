"""Explicit-state turn-based stochastic multi-player games.

States are dense integers.  Every state is owned by exactly one player, who
picks among the state's actions; an action leads to a probability
distribution over successor states.  Rewards are attached to (state, action)
pairs.  Games are immutable after construction and safe to share read-only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import (
    BadDistribution,
    DanglingReference,
    DisabledAction,
    DuplicateName,
    UndefinedChoice,
)

PROB_SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Distribution:
    """Sparse probability distribution over state ids."""

    support: tuple[tuple[int, float], ...]

    def __post_init__(self):
        seen = set()
        total = 0.0
        for target, prob in self.support:
            if target in seen:
                raise BadDistribution(f"duplicate successor {target}")
            seen.add(target)
            if not (0.0 < prob <= 1.0):
                raise BadDistribution(f"probability {prob} for successor {target} not in (0,1]")
            total += prob
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise BadDistribution(f"probabilities sum to {total}, not 1")

    def successors(self):
        return [t for t, _ in self.support]


@dataclass(frozen=True, eq=False)
class RewardStructure:
    """Nonnegative rewards on (state, action label) pairs; absent pairs earn 0."""

    action_rewards: dict

    def __post_init__(self):
        for (s, a), value in self.action_rewards.items():
            v = float(value)
            if not (v >= 0.0) or v != v or v == float("inf"):
                raise BadDistribution(f"reward for ({s}, {a}) must be finite and >= 0, got {value}")

    def get(self, state: int, action: str) -> float:
        return float(self.action_rewards.get((state, action), 0.0))


@dataclass(eq=False)
class Strategy:
    """Deterministic strategy for a coalition.

    Memoryless strategies map state -> action label.  Step-indexed strategies
    (used for bounded objectives) map (state, remaining steps) -> action label
    for remaining steps in 1..horizon.
    """

    kind: str  # "memoryless" | "step-indexed"
    coalition: frozenset
    choices: dict
    horizon: int | None = None

    def action_at(self, state: int, remaining: int | None = None) -> str:
        if self.kind == "memoryless":
            return self.choices[state]
        return self.choices[(state, remaining)]


@dataclass(frozen=True, eq=False)
class Smg:
    """Validated explicit-state stochastic multi-player game."""

    players: tuple[str, ...]
    owner: tuple[int, ...]                      # state -> player index
    actions: tuple[tuple[str, ...], ...]        # state -> ordered action labels
    dists: tuple[tuple[Distribution, ...], ...]  # parallel to actions
    labels: dict = field(default_factory=dict)   # name -> frozenset of states
    rewards: dict = field(default_factory=dict)  # name -> RewardStructure

    @property
    def n_states(self) -> int:
        return len(self.owner)

    def player_id(self, name: str) -> int:
        try:
            return self.players.index(name)
        except ValueError:
            raise DanglingReference(f"unknown player {name!r}") from None

    def action_index(self, state: int, label: str) -> int:
        try:
            return self.actions[state].index(label)
        except ValueError:
            raise DisabledAction(f"action {label!r} not enabled in state {state}") from None

    def coalition_players(self, coalition) -> frozenset:
        return frozenset(self.player_id(p) if isinstance(p, str) else int(p) for p in coalition)

    def coalition_states(self, coalition) -> frozenset:
        ids = self.coalition_players(coalition)
        return frozenset(s for s in range(self.n_states) if self.owner[s] in ids)


def build_game(players, owners, actions, transitions, labels=None, rewards=None) -> Smg:
    """Assemble and validate an Smg from raw parts.

    players: sequence of player names.
    owners: per-state owning player (index or name); its length fixes the
        number of states.
    actions: iterable of (state, action label) declarations, order preserved.
    transitions: mapping (state, action label) -> iterable of (target, prob).
    labels: mapping label name -> iterable of states.
    rewards: mapping reward name -> mapping (state, action label) -> value.

    States with no declared action are closed with a zero-reward "loop"
    self-loop so the game is deadlock-free.
    """
    players = tuple(players)
    if len(set(players)) != len(players):
        raise DuplicateName("player names must be unique")
    n = len(owners)

    owner_ids = []
    for s, o in enumerate(owners):
        if isinstance(o, str):
            if o not in players:
                raise DanglingReference(f"state {s} owned by undeclared player {o!r}")
            owner_ids.append(players.index(o))
        else:
            o = int(o)
            if not 0 <= o < len(players):
                raise DanglingReference(f"state {s} owned by undeclared player {o}")
            owner_ids.append(o)

    per_state: list[list[str]] = [[] for _ in range(n)]
    for state, label in actions:
        if not 0 <= state < n:
            raise DanglingReference(f"action {label!r} declared for undeclared state {state}")
        if label in per_state[state]:
            raise DuplicateName(f"action {label!r} declared twice for state {state}")
        per_state[state].append(label)

    transitions = dict(transitions)
    dists: list[list[Distribution]] = [[] for _ in range(n)]
    for s in range(n):
        for label in per_state[s]:
            if (s, label) not in transitions:
                raise DanglingReference(f"action {label!r} of state {s} has no transition")
            pairs = []
            for target, prob in transitions[(s, label)]:
                if not 0 <= target < n:
                    raise DanglingReference(
                        f"transition ({s}, {label!r}) targets undeclared state {target}")
                pairs.append((int(target), float(prob)))
            dists[s].append(Distribution(tuple(pairs)))
    for (s, label) in transitions:
        if not 0 <= s < n or label not in per_state[s]:
            raise DanglingReference(f"transition for undeclared action ({s}, {label!r})")

    # deadlock closure
    for s in range(n):
        if not per_state[s]:
            per_state[s] = ["loop"]
            dists[s] = [Distribution(((s, 1.0),))]

    label_map = {}
    for name, states in (labels or {}).items():
        if name in label_map:
            raise DuplicateName(f"label {name!r} declared twice")
        states = frozenset(int(x) for x in states)
        for x in states:
            if not 0 <= x < n:
                raise DanglingReference(f"label {name!r} refers to undeclared state {x}")
        label_map[name] = states

    reward_map = {}
    for name, table in (rewards or {}).items():
        if name in reward_map:
            raise DuplicateName(f"reward {name!r} declared twice")
        clean = {}
        for (s, label), value in table.items():
            if not 0 <= s < n:
                raise DanglingReference(f"reward {name!r} refers to undeclared state {s}")
            if label not in per_state[s]:
                raise DanglingReference(
                    f"reward {name!r} refers to missing action ({s}, {label!r})")
            clean[(s, label)] = float(value)
        reward_map[name] = RewardStructure(clean)

    return Smg(
        players=players,
        owner=tuple(owner_ids),
        actions=tuple(tuple(a) for a in per_state),
        dists=tuple(tuple(d) for d in dists),
        labels=label_map,
        rewards=reward_map,
    )


def validate_strategy(g: Smg, sigma: Strategy) -> None:
    """Check sigma is total over coalition-owned states and picks enabled actions."""
    coalition_states = g.coalition_states(sigma.coalition)
    if sigma.kind == "memoryless":
        for s in coalition_states:
            if s not in sigma.choices:
                raise UndefinedChoice(f"no choice for coalition state {s}")
            if sigma.choices[s] not in g.actions[s]:
                raise DisabledAction(
                    f"strategy picks {sigma.choices[s]!r} not enabled in state {s}")
    elif sigma.kind == "step-indexed":
        horizon = sigma.horizon
        if horizon is None:
            raise UndefinedChoice("step-indexed strategy without horizon")
        for s in coalition_states:
            for r in range(1, horizon + 1):
                if (s, r) not in sigma.choices:
                    raise UndefinedChoice(f"no choice for state {s} at {r} remaining steps")
                if sigma.choices[(s, r)] not in g.actions[s]:
                    raise DisabledAction(
                        f"strategy picks {sigma.choices[(s, r)]!r} not enabled in state {s}")
    else:
        raise UndefinedChoice(f"unknown strategy kind {sigma.kind!r}")


def induced_game(g: Smg, sigma: Strategy) -> Smg:
    """Fix a coalition strategy inside the game.

    Every coalition-owned state retains only the chosen action; labels and
    rewards are restricted accordingly.  A step-indexed strategy first builds
    the product of the game with a remaining-steps counter over the strategy's
    horizon (counter 0 leaves choices unrestricted: the bounded objective the
    strategy was synthesized for can no longer be affected).
    """
    validate_strategy(g, sigma)
    if sigma.kind == "step-indexed":
        return _induced_step_indexed(g, sigma)

    coalition_states = g.coalition_states(sigma.coalition)
    actions = []
    dists = []
    for s in range(g.n_states):
        if s in coalition_states:
            idx = g.actions[s].index(sigma.choices[s])
            actions.append((g.actions[s][idx],))
            dists.append((g.dists[s][idx],))
        else:
            actions.append(g.actions[s])
            dists.append(g.dists[s])

    rewards = {}
    for name, rs in g.rewards.items():
        kept = {(s, a): v for (s, a), v in rs.action_rewards.items() if a in actions[s]}
        rewards[name] = RewardStructure(kept)

    return Smg(
        players=g.players,
        owner=g.owner,
        actions=tuple(actions),
        dists=tuple(dists),
        labels=dict(g.labels),
        rewards=rewards,
    )


def _induced_step_indexed(g: Smg, sigma: Strategy) -> Smg:
    horizon = sigma.horizon
    coalition_states = g.coalition_states(sigma.coalition)
    n = g.n_states

    def pid(s, r):
        return r * n + s  # r in 0..horizon

    owners = []
    actions = []
    transitions = {}
    for r in range(horizon + 1):
        for s in range(n):
            owners.append(g.owner[s])
            if r >= 1 and s in coalition_states:
                chosen = (sigma.choices[(s, r)],)
            else:
                chosen = g.actions[s]
            for label in chosen:
                idx = g.actions[s].index(label)
                succ_r = r - 1 if r >= 1 else 0
                transitions[(pid(s, r), label)] = [
                    (pid(t, succ_r), p) for t, p in g.dists[s][idx].support]
                actions.append((pid(s, r), label))

    labels = {name: {pid(s, r) for s in states for r in range(horizon + 1)}
              for name, states in g.labels.items()}
    rewards = {}
    for name, rs in g.rewards.items():
        table = {}
        for (s, a), v in rs.action_rewards.items():
            for r in range(horizon + 1):
                if (pid(s, r), a) in transitions:
                    table[(pid(s, r), a)] = v
        rewards[name] = table

    game = build_game(g.players, owners, actions, transitions, labels, rewards)
    # state ids: the copy of original state s at full horizon is pid(s, horizon)
    return game


def step_product_state(g: Smg, sigma: Strategy, state: int) -> int:
    """Id of `state` at the full horizon inside induced_game's step product."""
    if sigma.kind != "step-indexed":
        return state
    return sigma.horizon * g.n_states + state


def reachable_fragment(g: Smg, initial: int):
    """Restrict g to the states reachable from `initial`.

    Returns (fragment, old_ids) where old_ids[new_id] = original id.
    """
    if not 0 <= initial < g.n_states:
        raise DanglingReference(f"initial state {initial} not in game")
    seen = {initial}
    frontier = [initial]
    while frontier:
        s = frontier.pop()
        for dist in g.dists[s]:
            for t, _ in dist.support:
                if t not in seen:
                    seen.add(t)
                    frontier.append(t)
    old_ids = sorted(seen)
    remap = {old: new for new, old in enumerate(old_ids)}

    owners = [g.owner[s] for s in old_ids]
    actions = []
    transitions = {}
    for new, old in enumerate(old_ids):
        for label, dist in zip(g.actions[old], g.dists[old]):
            actions.append((new, label))
            transitions[(new, label)] = [(remap[t], p) for t, p in dist.support]
    labels = {name: {remap[s] for s in states if s in remap}
              for name, states in g.labels.items()}
    rewards = {name: {(remap[s], a): v for (s, a), v in rs.action_rewards.items() if s in remap}
               for name, rs in g.rewards.items()}

    fragment = build_game(g.players, owners, actions, transitions, labels, rewards)
    return fragment, tuple(old_ids)
