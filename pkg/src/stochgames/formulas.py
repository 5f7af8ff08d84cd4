"""Parser and AST for coalition probability/reward queries.

Grammar (whitespace between tokens is free):

    formula := "<<" names ">>" ( probOp | rewOp ) ;
    probOp  := "P" query "[" "F" [ "<=" INT ] label "]" ;
    rewOp   := "R{" QSTRING "}" query "[" star label "]" ;
    query   := "max=?" | "min=?" | REL NUMBER ;   REL := "<="|"<"|">="|">" ;
    star    := "F0" | "Fc" | "Finf" ;
    names   := NAME { "," NAME } | "" ;           label := QSTRING.

Probability operators support an optional step bound (``F<=n``); reward
operators carry exactly one star parameter selecting the value of paths that
never reach the target: zero ("F0"), cumulated indefinitely ("Fc"), or
infinite ("Finf").
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import (
    BadBound,
    FormulaSyntaxError,
    UnknownLabel,
    UnknownPlayer,
    UnknownReward,
)

RELS = ("<=", "<", ">=", ">")
STARS = {"F0": "0", "Fc": "c", "Finf": "inf"}
_STAR_TOKEN = {v: k for k, v in STARS.items()}


@dataclass(frozen=True)
class Formula:
    coalition: frozenset
    operator: str               # "P" | "R"
    reward: str | None          # reward structure name, R only
    objective: str | None       # "max" | "min" for numeric queries, else None
    rel: str | None             # one of RELS for bound queries, else None
    bound: float | None         # bound value for bound queries, else None
    target: str                 # label name
    step_bound: int | None      # P only
    star: str | None            # "0" | "c" | "inf", R only

    @property
    def is_numeric(self) -> bool:
        return self.objective is not None

    def solving_objective(self) -> str:
        """Optimization direction needed to decide the query."""
        if self.is_numeric:
            return self.objective
        return "max" if self.rel in (">=", ">") else "min"


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<op><<|>>|max=\?|min=\?|<=|>=|<|>|\{|\}|\[|\]|,)"
    r"|(?P<qstring>\"[^\"]*\")"
    r"|(?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*))"
)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                break
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise FormulaSyntaxError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None, value=None, expected=None):
        tok_kind, tok_value, pos = self.tokens[self.i]
        if (kind is not None and tok_kind != kind) or (value is not None and tok_value != value):
            want = expected or [value or kind]
            shown = tok_value or "end of input"
            raise FormulaSyntaxError(f"unexpected {shown!r}", pos, want)
        self.i += 1
        return tok_value, pos


def parse_formula(text: str, players=(), labels=(), rewards=()) -> Formula:
    """Parse a formula and validate its names against the model vocabulary."""
    p = _Parser(text)
    p.take("op", "<<")

    coalition = []
    if p.peek()[0] == "name":
        coalition.append(p.take("name")[0])
        while p.peek()[1] == ",":
            p.take("op", ",")
            coalition.append(p.take("name", expected=["player name"])[0])
    p.take("op", ">>")

    op_name, op_pos = p.take("name", expected=["P", "R"])
    if op_name == "P":
        operator, reward_name = "P", None
    elif op_name == "R":
        operator = "R"
        p.take("op", "{")
        raw, _ = p.take("qstring", expected=["reward name"])
        reward_name = raw[1:-1]
        p.take("op", "}")
    else:
        raise FormulaSyntaxError(f"unexpected {op_name!r}", op_pos, ["P", "R"])

    objective = rel = None
    bound = None
    kind, value, pos = p.peek()
    if value in ("max=?", "min=?"):
        p.take()
        objective = value[:3]
    elif value in RELS:
        p.take()
        rel = value
        num, num_pos = p.take("number", expected=["number"])
        bound = float(num)
        if operator == "P" and not 0.0 <= bound <= 1.0:
            raise BadBound(f"probability bound {bound} outside [0,1]")
        if operator == "R" and bound < 0.0:
            raise BadBound(f"reward bound {bound} is negative")
    else:
        raise FormulaSyntaxError(f"unexpected {value or 'end of input'!r}", pos,
                                 ["max=?", "min=?", *RELS])

    p.take("op", "[")
    step_bound = None
    star = None
    if operator == "P":
        p.take("name", "F", expected=["F"])
        if p.peek()[1] == "<=":
            p.take()
            num, num_pos = p.take("number", expected=["step bound"])
            if "." in num or "e" in num or "E" in num:
                raise FormulaSyntaxError("step bound must be an integer", num_pos)
            step_bound = int(num)
    else:
        tok, tok_pos = p.take("name", expected=list(STARS))
        if tok not in STARS:
            raise FormulaSyntaxError(f"unexpected {tok!r}", tok_pos, list(STARS))
        star = STARS[tok]

    raw, _ = p.take("qstring", expected=["target label"])
    target = raw[1:-1]
    p.take("op", "]")
    p.take("eof")

    if players:
        known = set(players)
        for name in coalition:
            if name not in known:
                raise UnknownPlayer(f"unknown player {name!r}")
    if labels and target not in set(labels):
        raise UnknownLabel(f"unknown label {target!r}")
    if operator == "R" and rewards and reward_name not in set(rewards):
        raise UnknownReward(f"unknown reward {reward_name!r}")

    return Formula(
        coalition=frozenset(coalition),
        operator=operator,
        reward=reward_name,
        objective=objective,
        rel=rel,
        bound=bound,
        target=target,
        step_bound=step_bound,
        star=star,
    )


def format_formula(f: Formula) -> str:
    """Canonical text form; parse_formula(format_formula(f)) == f."""
    names = ",".join(sorted(f.coalition))
    if f.is_numeric:
        query = f"{f.objective}=?"
    else:
        query = f"{f.rel}{f.bound!r}"
    if f.operator == "P":
        path = "F" if f.step_bound is None else f"F<={f.step_bound}"
        return f'<<{names}>> P{query} [ {path} "{f.target}" ]'
    return f'<<{names}>> R{{"{f.reward}"}}{query} [ {_STAR_TOKEN[f.star]} "{f.target}" ]'
