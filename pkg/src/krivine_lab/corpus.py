"""Term corpus used by the verification suites and the CLI.

Provides an exhaustive enumerator of closed terms up to a configurable
AST size (each Var, Abs and App node counts as one), plus a handful of
named term families (Church numerals, combinators, a non-uniform example
and some divergent terms).
"""

from __future__ import annotations

import os
from functools import lru_cache
from typing import Iterator

from .lambda_core import Abs, App, Term, Var, is_normal, term_size

DEFAULT_CORPUS_SIZE = 9


def default_corpus_size() -> int:
    return int(os.environ.get("KRIVINE_LAB_CORPUS_SIZE", str(DEFAULT_CORPUS_SIZE)))


def _terms_exact(size: int, depth: int) -> Iterator[Term]:
    """All terms of exactly `size` nodes whose free variables are drawn
    from the binder names v1..v`depth` (binders are named by nesting depth,
    so each closed term appears exactly once up to alpha-conversion)."""
    if size <= 0:
        return
    if size == 1:
        for i in range(depth):
            yield Var(f"v{i + 1}")
        return
    for body in _terms_exact(size - 1, depth + 1):
        yield Abs(f"v{depth + 1}", body)
    for fun_size in range(1, size - 1):
        for fun in _terms_exact(fun_size, depth):
            for arg in _terms_exact(size - 1 - fun_size, depth):
                yield App(fun, arg)


@lru_cache(maxsize=None)
def enumerate_closed_terms(max_size: int) -> tuple[Term, ...]:
    """All closed terms with at most `max_size` AST nodes, one
    representative per alpha-equivalence class, smallest first."""
    out: list[Term] = []
    for size in range(1, max_size + 1):
        out.extend(_terms_exact(size, 0))
    return tuple(out)


def closed_normal_terms(max_size: int) -> tuple[Term, ...]:
    return tuple(t for t in enumerate_closed_terms(max_size) if is_normal(t))


def identity() -> Term:
    return Abs("y", Var("y"))


def k_combinator() -> Term:
    return Abs("x", Abs("y", Var("x")))


def church_zero() -> Term:
    # The boolean "false" / Church numeral 0 body shape: \x.\y.y
    return Abs("x", Abs("y", Var("y")))


def church_one_bool() -> Term:
    # The boolean "true": \x.\y.x (same as K)
    return Abs("x", Abs("y", Var("x")))


def church(n: int) -> Term:
    if n < 0:
        raise ValueError("Church numerals are defined for n >= 0")
    body: Term = Var("x")
    for _ in range(n):
        body = App(Var("f"), body)
    return Abs("f", Abs("x", body))


def omega() -> Term:
    delta = Abs("x", App(Var("x"), Var("x")))
    return App(delta, Abs("z", App(Var("z"), Var("z"))))


def triple_self_apply_omega() -> Term:
    # (\x.((x)x)x) Omega, a divergent term that is not head-normalizing
    fun = Abs("x", App(App(Var("x"), Var("x")), Var("x")))
    return App(fun, omega())


def non_uniform_example() -> Term:
    """\\x.((x)T)((x)T F) with T = \\a.\\b.a and F = \\a.\\b.b.

    Its interpretation contains points that use the bound variable at two
    genuinely different types, which is what makes the relational
    semantics non-uniform.
    """
    true = Abs("a", Abs("b", Var("a")))
    false = Abs("c", Abs("d", Var("d")))
    return Abs(
        "x",
        App(App(Var("x"), true), App(App(Var("x"), true), false)),
    )


def named_families(church_max: int = 4) -> dict[str, Term]:
    families: dict[str, Term] = {
        "I": identity(),
        "K": k_combinator(),
        "false": church_zero(),
        "true": church_one_bool(),
        "omega": omega(),
        "omega3": triple_self_apply_omega(),
        "nonuniform": non_uniform_example(),
    }
    for n in range(church_max + 1):
        families[f"church{n}"] = church(n)
    return families


def corpus(max_size: int | None = None, church_max: int = 4) -> list[Term]:
    """The default corpus: every closed term up to `max_size` AST nodes
    followed by any named family members not already enumerated."""
    if max_size is None:
        max_size = default_corpus_size()
    seen = list(enumerate_closed_terms(max_size))
    have = set(seen)
    for t in named_families(church_max).values():
        if t not in have:
            seen.append(t)
            have.add(t)
    return seen


def corpus_stats(max_size: int | None = None) -> dict[str, int]:
    terms = corpus(max_size)
    return {
        "terms": len(terms),
        "normal": sum(1 for t in terms if is_normal(t)),
        "max_size": max(term_size(t) for t in terms),
    }
