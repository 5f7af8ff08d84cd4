"""Text serialization: explicit-state model format, strategy and value CSVs.

Model format, one declaration per line, '#' starts a comment:

    player <id> <name>
    state <id> <owner-player-id>
    action <state> <label>
    trans <state> <label> <target>:<prob> [<target>:<prob> ...]
    label "<name>" <state> [<state> ...]
    reward "<name>" <state> <label> <value>
    init <state>

Strategies serialize as CSV ``state,step,action`` with ``-`` in the step
column for memoryless strategies.  Value vectors serialize as CSV
``state,value`` with the literal ``inf`` for infinite entries.
"""

from __future__ import annotations

import math
import re

from .errors import DanglingReference, ModelError
from .game import Smg, Strategy, build_game

_QSTRING = re.compile(r'"([^"]*)"')


def parse_model(text: str):
    """Parse the explicit-state format.  Returns (game, initial_state)."""
    players = {}
    owners = {}
    actions = []
    transitions = {}
    labels = {}
    rewards = {}
    initial = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind = parts[0]
        try:
            if kind == "player":
                players[int(parts[1])] = parts[2]
            elif kind == "state":
                owners[int(parts[1])] = int(parts[2])
            elif kind == "action":
                actions.append((int(parts[1]), parts[2]))
            elif kind == "trans":
                state, label = int(parts[1]), parts[2]
                pairs = []
                for chunk in parts[3:]:
                    target, prob = chunk.rsplit(":", 1)
                    pairs.append((int(target), float(prob)))
                transitions[(state, label)] = pairs
            elif kind == "label":
                m = _QSTRING.match(line.split(None, 1)[1])
                if not m:
                    raise ModelError(f"line {lineno}: label name must be quoted")
                rest = line.split(None, 1)[1][m.end():].split()
                labels[m.group(1)] = {int(x) for x in rest}
            elif kind == "reward":
                m = _QSTRING.match(line.split(None, 1)[1])
                if not m:
                    raise ModelError(f"line {lineno}: reward name must be quoted")
                rest = line.split(None, 1)[1][m.end():].split()
                state, label, value = int(rest[0]), rest[1], float(rest[2])
                rewards.setdefault(m.group(1), {})[(state, label)] = value
            elif kind == "init":
                initial = int(parts[1])
            else:
                raise ModelError(f"line {lineno}: unknown declaration {kind!r}")
        except (IndexError, ValueError) as exc:
            raise ModelError(f"line {lineno}: malformed {kind!r} declaration: {raw!r}") from exc

    if not owners:
        raise ModelError("model declares no states")
    n = max(owners) + 1
    if set(owners) != set(range(n)):
        raise DanglingReference("state ids must be dense starting at 0")
    if players:
        n_players = max(players) + 1
        if set(players) != set(range(n_players)):
            raise DanglingReference("player ids must be dense starting at 0")
        names = [players[i] for i in range(n_players)]
    else:
        raise ModelError("model declares no players")

    game = build_game(names, [owners[s] for s in range(n)], actions, transitions,
                      labels, rewards)
    if initial is None:
        initial = 0
    if not 0 <= initial < n:
        raise DanglingReference(f"init state {initial} not declared")
    return game, initial


def write_model(g: Smg, initial: int = 0) -> str:
    lines = []
    for i, name in enumerate(g.players):
        lines.append(f"player {i} {name}")
    for s in range(g.n_states):
        lines.append(f"state {s} {g.owner[s]}")
    for s in range(g.n_states):
        for label in g.actions[s]:
            lines.append(f"action {s} {label}")
    for s in range(g.n_states):
        for label, dist in zip(g.actions[s], g.dists[s]):
            chunks = " ".join(f"{t}:{p!r}" for t, p in dist.support)
            lines.append(f"trans {s} {label} {chunks}")
    for name in sorted(g.labels):
        states = " ".join(str(s) for s in sorted(g.labels[name]))
        lines.append(f'label "{name}" {states}')
    for name in sorted(g.rewards):
        for (s, label), v in sorted(g.rewards[name].action_rewards.items()):
            lines.append(f'reward "{name}" {s} {label} {v!r}')
    lines.append(f"init {initial}")
    return "\n".join(lines) + "\n"


def write_strategy(sigma: Strategy) -> str:
    lines = ["state,step,action"]
    if sigma.kind == "memoryless":
        for s in sorted(sigma.choices):
            lines.append(f"{s},-,{sigma.choices[s]}")
    else:
        for s, r in sorted(sigma.choices):
            lines.append(f"{s},{r},{sigma.choices[(s, r)]}")
    return "\n".join(lines) + "\n"


def parse_strategy(g: Smg, text: str) -> Strategy:
    """Load a strategy CSV; the coalition is inferred from the listed states."""
    choices = {}
    kinds = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("state,"):
            continue
        try:
            state_s, step_s, action = line.split(",", 2)
            state = int(state_s)
        except ValueError as exc:
            raise ModelError(f"strategy line {lineno}: malformed row {line!r}") from exc
        if step_s == "-":
            kinds.add("memoryless")
            choices[state] = action
        else:
            kinds.add("step-indexed")
            choices[(state, int(step_s))] = action
    if len(kinds) != 1:
        raise ModelError("strategy file mixes memoryless and step-indexed rows or is empty")
    kind = kinds.pop()
    if kind == "memoryless":
        states = set(choices)
        horizon = None
    else:
        states = {s for s, _ in choices}
        horizon = max(r for _, r in choices)
    coalition = frozenset(g.players[g.owner[s]] for s in states)
    return Strategy(kind=kind, coalition=coalition, choices=choices, horizon=horizon)


def write_values(values, kind: str = "") -> str:
    lines = ["state,value"]
    for s, v in enumerate(values):
        lines.append(f"{s},inf" if math.isinf(v) else f"{s},{v!r}")
    return "\n".join(lines) + "\n"
