"""Untyped lambda-terms in Krivine application notation, plus reference reducers.

Terms are immutable. Application is written ``(v)u`` and associates to the
left: ``(v)u1 u2`` means ``((v)u1)u2``. Abstraction is ``\\x. t`` (a literal
``λ`` is accepted too).
"""
from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Iterator, Union


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Abs:
    binder: str
    body: "Term"


@dataclass(frozen=True)
class App:
    fun: "Term"
    arg: "Term"


Term = Union[Var, Abs, App]


@dataclass(frozen=True)
class ReductionOutcome:
    status: str  # "normalized" | "fuel_exhausted"
    result: Term
    steps: int

    @property
    def normalized(self) -> bool:
        return self.status == "normalized"


class ParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


_IDENT_CHARS = set(string.ascii_letters + string.digits + "_")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def error(self, message: str) -> ParseError:
        return ParseError(message, self.pos)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str) -> None:
        self.skip_ws()
        if self.peek() != ch:
            raise self.error(f"expected {ch!r}")
        self.pos += 1

    def ident(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] in _IDENT_CHARS:
            self.pos += 1
        if self.pos == start:
            raise self.error("expected identifier")
        return self.text[start:self.pos]

    def term(self) -> Term:
        # A term is a sequence of juxtaposed atoms; juxtaposition after the
        # first atom is Krivine application (left-associated).
        t = self.atom()
        while True:
            self.skip_ws()
            ch = self.peek()
            if ch == "" or ch == ")":
                return t
            t = App(t, self.atom())

    def atom(self) -> Term:
        self.skip_ws()
        ch = self.peek()
        if ch == "":
            raise self.error("unexpected end of input")
        if ch == "\\" or ch == "λ":
            self.pos += 1
            binder = self.ident()
            self.expect(".")
            return Abs(binder, self.term())
        if ch == "(":
            self.pos += 1
            t = self.term()
            self.expect(")")
            return t
        if ch in _IDENT_CHARS:
            return Var(self.ident())
        raise self.error(f"unexpected character {ch!r}")


def parse(text: str) -> Term:
    """Parse a term; raises ParseError with a position on malformed input."""
    p = _Parser(text)
    t = p.term()
    p.skip_ws()
    if p.pos != len(text):
        raise p.error("trailing input")
    return t


def pretty(t: Term) -> str:
    """Render a term so that ``parse(pretty(t))`` is identical to ``t``."""
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Abs):
        return f"\\{t.binder}.{pretty(t.body)}"
    # Collect the application spine (v)u1 u2 ... uk.
    spine = []
    head: Term = t
    while isinstance(head, App):
        spine.append(head.arg)
        head = head.fun
    spine.reverse()
    args = " ".join(_pretty_arg(u) for u in spine)
    return f"({pretty(head)}){args}"


def _pretty_arg(u: Term) -> str:
    if isinstance(u, Var):
        return u.name
    return f"({pretty(u)})"


def free_vars(t: Term) -> frozenset:
    if isinstance(t, Var):
        return frozenset({t.name})
    if isinstance(t, Abs):
        return free_vars(t.body) - {t.binder}
    return free_vars(t.fun) | free_vars(t.arg)


def bound_vars(t: Term) -> frozenset:
    if isinstance(t, Var):
        return frozenset()
    if isinstance(t, Abs):
        return bound_vars(t.body) | {t.binder}
    return bound_vars(t.fun) | bound_vars(t.arg)


def term_size(t: Term) -> int:
    if isinstance(t, Var):
        return 1
    if isinstance(t, Abs):
        return 1 + term_size(t.body)
    return 1 + term_size(t.fun) + term_size(t.arg)


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, Abs):
        yield from subterms(t.body)
    elif isinstance(t, App):
        yield from subterms(t.fun)
        yield from subterms(t.arg)


def fresh_name(base: str, used: set) -> str:
    """Pick a name not in `used` by appending a numeric suffix to `base`."""
    root = base.rstrip(string.digits) or base
    i = 1
    while f"{root}{i}" in used:
        i += 1
    return f"{root}{i}"


def respects_variable_convention(t: Term) -> bool:
    """Every variable bound at most once, and no binder reuses a free name."""
    free = free_vars(t)
    seen: set = set()

    def walk(u: Term) -> bool:
        if isinstance(u, Var):
            return True
        if isinstance(u, Abs):
            if u.binder in seen or u.binder in free:
                return False
            seen.add(u.binder)
            return walk(u.body)
        return walk(u.fun) and walk(u.arg)

    return walk(t)


def ensure_variable_convention(t: Term) -> Term:
    """Alpha-rename so each variable is bound at most once and binders avoid
    free names. Idempotent on already-conforming terms."""
    if respects_variable_convention(t):
        return t
    used = set(free_vars(t))

    def walk(u: Term, renaming: dict) -> Term:
        if isinstance(u, Var):
            return Var(renaming.get(u.name, u.name))
        if isinstance(u, Abs):
            name = u.binder
            if name in used:
                name = fresh_name(u.binder, used)
            used.add(name)
            inner = dict(renaming)
            inner[u.binder] = name
            return Abs(name, walk(u.body, inner))
        return App(walk(u.fun, renaming), walk(u.arg, renaming))

    return walk(t, {})


def substitute(t: Term, subst: dict) -> Term:
    """Simultaneous capture-avoiding substitution of terms for free variables."""
    if not subst:
        return t
    if isinstance(t, Var):
        return subst.get(t.name, t)
    if isinstance(t, App):
        return App(substitute(t.fun, subst), substitute(t.arg, subst))
    inner = {k: v for k, v in subst.items() if k != t.binder}
    if not inner:
        return t
    clash = set()
    for v in inner.values():
        clash |= free_vars(v)
    if t.binder in clash:
        fresh = fresh_name(t.binder, clash | free_vars(t.body) | set(inner))
        body = substitute(t.body, {t.binder: Var(fresh)})
        return Abs(fresh, substitute(body, inner))
    return Abs(t.binder, substitute(t.body, inner))


def alpha_equal(t: Term, u: Term) -> bool:
    """Alpha-equivalence by simultaneous traversal with a binder map."""

    def walk(a: Term, b: Term, env_a: dict, env_b: dict) -> bool:
        if isinstance(a, Var) and isinstance(b, Var):
            return env_a.get(a.name, a.name) == env_b.get(b.name, b.name)
        if isinstance(a, Abs) and isinstance(b, Abs):
            tag = object()
            return walk(a.body, b.body,
                        {**env_a, a.binder: tag}, {**env_b, b.binder: tag})
        if isinstance(a, App) and isinstance(b, App):
            return (walk(a.fun, b.fun, env_a, env_b)
                    and walk(a.arg, b.arg, env_a, env_b))
        return False

    return walk(t, u, {}, {})


def is_head_normal(t: Term) -> bool:
    """lambda x1...xm.(x)t1...tp for some m, p >= 0."""
    while isinstance(t, Abs):
        t = t.body
    while isinstance(t, App):
        t = t.fun
    return isinstance(t, Var)


def is_normal(t: Term) -> bool:
    if isinstance(t, Var):
        return True
    if isinstance(t, Abs):
        return is_normal(t.body)
    # Application: head must not be an abstraction, all parts normal.
    if isinstance(t.fun, Abs):
        return False
    return is_normal(t.fun) and is_normal(t.arg)


def _head_step(t: Term) -> Term | None:
    """One head-reduction step, or None at head normal form."""
    if isinstance(t, Var):
        return None
    if isinstance(t, Abs):
        body = _head_step(t.body)
        return None if body is None else Abs(t.binder, body)
    # Application spine: reduce the head redex if the head is an abstraction.
    spine = []
    head: Term = t
    while isinstance(head, App):
        spine.append(head.arg)
        head = head.fun
    if not isinstance(head, Abs):
        return None
    spine.reverse()
    reduced = substitute(head.body, {head.binder: spine[0]})
    for u in spine[1:]:
        reduced = App(reduced, u)
    return reduced


def _leftmost_step(t: Term) -> Term | None:
    """One leftmost (normal-order) reduction step, or None at normal form."""
    step = _head_step(t)
    if step is not None:
        return step
    if isinstance(t, Var):
        return None
    if isinstance(t, Abs):
        body = _leftmost_step(t.body)
        return None if body is None else Abs(t.binder, body)
    fun = _leftmost_step(t.fun)
    if fun is not None:
        return App(fun, t.arg)
    arg = _leftmost_step(t.arg)
    return None if arg is None else App(t.fun, arg)


def _reduce(t: Term, fuel: int, step) -> ReductionOutcome:
    steps = 0
    while steps < fuel:
        nxt = step(t)
        if nxt is None:
            return ReductionOutcome("normalized", t, steps)
        t = nxt
        steps += 1
    if step(t) is None:
        return ReductionOutcome("normalized", t, steps)
    return ReductionOutcome("fuel_exhausted", t, steps)


def head_reduce(t: Term, fuel: int) -> ReductionOutcome:
    """Head-reduce until head normal form; steps = h(t) when normalized."""
    return _reduce(t, fuel, _head_step)


def leftmost_reduce(t: Term, fuel: int) -> ReductionOutcome:
    """Normal-order reduce to beta-normal form; steps = n(t) when normalized."""
    return _reduce(t, fuel, _leftmost_step)
