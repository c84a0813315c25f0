"""Non-idempotent intersection types (System R) and their derivations.

Types are atoms or arrows whose left component is a finite multiset of
types; the empty multiset plays the role of the universal type. Multisets
are kept in a canonical sorted order so equality and hashing are cheap.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterator, Optional, Tuple, Union

from .lambda_core import Abs, App, Term, Var, is_normal, pretty


@dataclass(frozen=True)
class Atom:
    id: int


@dataclass(frozen=True)
class Arrow:
    args: "Multiset"
    res: "TypeExpr"


TypeExpr = Union[Atom, Arrow]


def type_key(t: TypeExpr):
    """Total structural order: atoms by id, atoms before arrows, arrows
    lexicographic by (args, res)."""
    if isinstance(t, Atom):
        return (0, t.id)
    return (1, tuple(type_key(e) for e in t.args.elements), type_key(t.res))


@dataclass(frozen=True)
class Multiset:
    elements: Tuple[TypeExpr, ...] = ()

    @staticmethod
    def of(items) -> "Multiset":
        return Multiset(tuple(sorted(items, key=type_key)))

    def __add__(self, other: "Multiset") -> "Multiset":
        return Multiset.of(self.elements + other.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __bool__(self) -> bool:
        return bool(self.elements)


EMPTY_MULTISET = Multiset()


def arrow(args, res: TypeExpr) -> Arrow:
    if not isinstance(args, Multiset):
        args = Multiset.of(args)
    return Arrow(args, res)


def nested_arrow(multisets, res: TypeExpr) -> TypeExpr:
    """b1 ... bq alpha as the nested arrow (b1, (b2, ... (bq, alpha)))."""
    t = res
    for b in reversed(list(multisets)):
        t = Arrow(b if isinstance(b, Multiset) else Multiset.of(b), t)
    return t


def type_depth(t: TypeExpr) -> int:
    if isinstance(t, Atom):
        return 0
    inner = [type_depth(t.res)] + [type_depth(e) for e in t.args]
    return 1 + max(inner)


def atoms_of(t) -> set:
    if isinstance(t, Atom):
        return {t.id}
    if isinstance(t, Arrow):
        out = atoms_of(t.res)
        for e in t.args:
            out |= atoms_of(e)
        return out
    if isinstance(t, Multiset):
        out = set()
        for e in t:
            out |= atoms_of(e)
        return out
    raise TypeError(t)


def format_type(t) -> str:
    if isinstance(t, Atom):
        return f"γ{t.id}"
    if isinstance(t, Arrow):
        return f"({format_multiset(t.args)}, {format_type(t.res)})"
    raise TypeError(t)


def format_multiset(a: Multiset) -> str:
    return "[" + ", ".join(format_type(e) for e in a) + "]"


class TypeParseError(ValueError):
    pass


def parse_type(text: str) -> TypeExpr:
    pos = 0

    def skip():
        nonlocal pos
        while pos < len(text) and text[pos].isspace():
            pos += 1

    def expect(ch):
        nonlocal pos
        skip()
        if pos >= len(text) or text[pos] != ch:
            raise TypeParseError(f"expected {ch!r} at position {pos}")
        pos += 1

    def ty() -> TypeExpr:
        nonlocal pos
        skip()
        if pos < len(text) and text[pos] in "γg":
            pos += 1
            start = pos
            while pos < len(text) and text[pos].isdigit():
                pos += 1
            if pos == start:
                raise TypeParseError(f"expected atom index at position {pos}")
            return Atom(int(text[start:pos]))
        expect("(")
        a = multiset()
        expect(",")
        res = ty()
        expect(")")
        return Arrow(a, res)

    def multiset() -> Multiset:
        nonlocal pos
        expect("[")
        items = []
        skip()
        if pos < len(text) and text[pos] == "]":
            pos += 1
            return EMPTY_MULTISET
        while True:
            items.append(ty())
            skip()
            if pos < len(text) and text[pos] == ",":
                pos += 1
                continue
            expect("]")
            return Multiset.of(items)

    result = ty()
    skip()
    if pos != len(text):
        raise TypeParseError(f"trailing input at position {pos}")
    return result


# --- sizes -----------------------------------------------------------------

def type_size(t) -> int:
    """Positive atom occurrences plus arrow commas."""
    if isinstance(t, Atom):
        return 1
    if isinstance(t, Arrow):
        return sum(type_aux(e) for e in t.args) + type_size(t.res) + 1
    if isinstance(t, Multiset):
        return sum(type_size(e) for e in t)
    raise TypeError(t)


def type_aux(t) -> int:
    if isinstance(t, Atom):
        return 0
    if isinstance(t, Arrow):
        return sum(type_size(e) for e in t.args) + type_aux(t.res) + 1
    if isinstance(t, Multiset):
        return sum(type_aux(e) for e in t)
    raise TypeError(t)


# --- exact types (no positive occurrence of the empty multiset) -------------

def is_exact(t: TypeExpr) -> bool:
    if isinstance(t, Atom):
        return True
    return all(is_coexact(e) for e in t.args) and is_exact(t.res)


def is_coexact(t: TypeExpr) -> bool:
    if isinstance(t, Atom):
        return True
    return bool(t.args) and all(is_exact(e) for e in t.args) and is_coexact(t.res)


# --- contexts ----------------------------------------------------------------

@dataclass(frozen=True)
class Context:
    bindings: Tuple[Tuple[str, Multiset], ...] = ()

    @staticmethod
    def of(mapping) -> "Context":
        items = mapping.items() if isinstance(mapping, dict) else mapping
        kept = tuple(sorted((x, a) for x, a in items if a))
        return Context(kept)

    def get(self, name: str) -> Multiset:
        for x, a in self.bindings:
            if x == name:
                return a
        return EMPTY_MULTISET

    def names(self):
        return [x for x, _ in self.bindings]

    def __add__(self, other: "Context") -> "Context":
        merged = {x: a for x, a in self.bindings}
        for x, a in other.bindings:
            merged[x] = merged.get(x, EMPTY_MULTISET) + a
        return Context.of(merged)

    def without(self, name: str) -> "Context":
        return Context(tuple((x, a) for x, a in self.bindings if x != name))

    def is_empty(self) -> bool:
        return not self.bindings


EMPTY_CONTEXT = Context()


def is_exact_context(ctx: Context) -> bool:
    return all(is_coexact(e) for _, a in ctx.bindings for e in a)


def format_context(ctx: Context) -> str:
    if ctx.is_empty():
        return "∅"
    return ", ".join(f"{x} : {format_multiset(a)}" for x, a in ctx.bindings)


def typing_size(ctx: Context, ty: TypeExpr) -> int:
    """Size of the combined type a1 ... am alpha induced by the typing."""
    return type_size(nested_arrow((a for _, a in ctx.bindings), ty))


# --- substitutions -----------------------------------------------------------

@dataclass(frozen=True)
class Substitution:
    mapping: Tuple[Tuple[int, TypeExpr], ...] = ()

    @staticmethod
    def of(mapping: dict) -> "Substitution":
        return Substitution(tuple(sorted(mapping.items())))

    def as_dict(self) -> dict:
        return dict(self.mapping)

    def apply(self, t):
        if isinstance(t, Atom):
            for k, v in self.mapping:
                if k == t.id:
                    return v
            return t
        if isinstance(t, Arrow):
            return Arrow(self.apply_multiset(t.args), self.apply(t.res))
        raise TypeError(t)

    def apply_multiset(self, a: Multiset) -> Multiset:
        return Multiset.of(self.apply(e) for e in a)

    def apply_context(self, ctx: Context) -> Context:
        return Context.of({x: self.apply_multiset(a) for x, a in ctx.bindings})


IDENTITY_SUBSTITUTION = Substitution()


def canonical_renaming(types) -> Substitution:
    """Rename atoms to 0, 1, ... in first-occurrence order over `types`."""
    order: dict = {}

    def visit(t):
        if isinstance(t, Atom):
            if t.id not in order:
                order[t.id] = len(order)
        elif isinstance(t, Arrow):
            for e in t.args:
                visit(e)
            visit(t.res)
        elif isinstance(t, Multiset):
            for e in t:
                visit(e)
        elif isinstance(t, Context):
            for _, a in t.bindings:
                visit(a)
        else:
            raise TypeError(t)

    for t in types:
        visit(t)
    return Substitution.of({k: Atom(i) for k, i in order.items()})


def canonical_typing(ctx: Context, ty: TypeExpr) -> Tuple[Context, TypeExpr]:
    sigma = canonical_renaming([ctx, ty])
    return sigma.apply_context(ctx), sigma.apply(ty)


def canonical_point(ty: TypeExpr) -> TypeExpr:
    return canonical_renaming([ty]).apply(ty)


class AtomSupply:
    """Unbounded fresh-atom source; confine one instance to each task."""

    def __init__(self, start: int = 0):
        self._next = start

    def fresh(self) -> Atom:
        a = Atom(self._next)
        self._next += 1
        return a

    def reserve_above(self, ids) -> None:
        for i in ids:
            if i >= self._next:
                self._next = i + 1


# --- derivations -------------------------------------------------------------

class DerivationError(ValueError):
    def __init__(self, message: str, path: Tuple[int, ...] = ()):
        super().__init__(f"{message} (node path {list(path)})")
        self.path = path


@dataclass(frozen=True)
class AxNode:
    var: str
    ty: TypeExpr


@dataclass(frozen=True)
class AbsNode:
    binder: str
    premise: "Derivation"


@dataclass(frozen=True)
class AppNode:
    fun_premise: "Derivation"
    arg_premises: Tuple["Derivation", ...]
    arg_term: Term  # needed when there are zero argument premises


Derivation = Union[AxNode, AbsNode, AppNode]


def conclusion(d: Derivation) -> Tuple[Context, Term, TypeExpr]:
    """Root judgement (context, term, type), without validation."""
    if isinstance(d, AxNode):
        return Context.of({d.var: Multiset.of([d.ty])}), Var(d.var), d.ty
    if isinstance(d, AbsNode):
        ctx, term, ty = conclusion(d.premise)
        return ctx.without(d.binder), Abs(d.binder, term), Arrow(ctx.get(d.binder), ty)
    ctx, term, ty = conclusion(d.fun_premise)
    total = ctx
    for p in d.arg_premises:
        pctx, _, _ = conclusion(p)
        total = total + pctx
    if not isinstance(ty, Arrow):
        raise DerivationError("function premise type is not an arrow")
    return total, App(term, d.arg_term), ty.res


def check_derivation(d: Derivation, _path: Tuple[int, ...] = ()) -> Tuple[Context, Term, TypeExpr]:
    """Validate every node against the three typing rules; returns the root
    judgement or raises DerivationError with the offending node path."""
    if isinstance(d, AxNode):
        return conclusion(d)
    if isinstance(d, AbsNode):
        check_derivation(d.premise, _path + (0,))
        return conclusion(d)
    if isinstance(d, AppNode):
        _, fterm, fty = check_derivation(d.fun_premise, _path + (0,))
        if not isinstance(fty, Arrow):
            raise DerivationError("function premise type is not an arrow", _path)
        arg_tys = []
        for i, p in enumerate(d.arg_premises):
            _, aterm, aty = check_derivation(p, _path + (i + 1,))
            if aterm != d.arg_term:
                raise DerivationError(
                    "argument premises do not all derive the argument term", _path)
            arg_tys.append(aty)
        if fty.args != Multiset.of(arg_tys):
            raise DerivationError(
                "arrow multiset does not match the argument premise types", _path)
        return conclusion(d)
    raise DerivationError(f"not a derivation node: {d!r}", _path)


def derivation_size(d) -> int:
    if isinstance(d, AxNode):
        return 1
    if isinstance(d, AbsNode):
        return 1 + derivation_size(d.premise)
    if isinstance(d, AppNode):
        return 1 + derivation_size(d.fun_premise) + sum(
            derivation_size(p) for p in d.arg_premises)
    if isinstance(d, ClosureDerivation):
        return derivation_size(d.root) + sum(
            derivation_size(p) for _, parts in d.env_part for p in parts)
    if isinstance(d, StateDerivation):
        return derivation_size(d.head) + sum(
            derivation_size(p) for parts in d.stack_parts for p in parts)
    raise TypeError(d)


def substitute_derivation(sigma: Substitution, d: Derivation) -> Derivation:
    """Map a type substitution over every node; yields a valid, ~-equivalent
    derivation of the substituted judgement."""
    if isinstance(d, AxNode):
        return AxNode(d.var, sigma.apply(d.ty))
    if isinstance(d, AbsNode):
        return AbsNode(d.binder, substitute_derivation(sigma, d.premise))
    return AppNode(substitute_derivation(sigma, d.fun_premise),
                   tuple(substitute_derivation(sigma, p) for p in d.arg_premises),
                   d.arg_term)


def derivations_equivalent(a: Derivation, b: Derivation) -> bool:
    """Shape equivalence: leaves match leaves, abstractions match on
    equivalent premises, applications match up to a permutation of the
    argument premises."""
    _, ta, _ = conclusion(a)
    _, tb, _ = conclusion(b)
    if ta != tb:
        raise ValueError("derivations are for different terms")
    return _equiv(a, b)


def _equiv(a: Derivation, b: Derivation) -> bool:
    if isinstance(a, AxNode):
        return isinstance(b, AxNode)
    if isinstance(a, AbsNode):
        return isinstance(b, AbsNode) and _equiv(a.premise, b.premise)
    if not isinstance(b, AppNode) or len(a.arg_premises) != len(b.arg_premises):
        return False
    if not _equiv(a.fun_premise, b.fun_premise):
        return False
    return _match_permutation(list(a.arg_premises), list(b.arg_premises))


def _match_permutation(xs, ys) -> bool:
    if not xs:
        return True
    x = xs[0]
    for i, y in enumerate(ys):
        if _equiv(x, y) and _match_permutation(xs[1:], ys[:i] + ys[i + 1:]):
            return True
    return False


# --- derivations for closures and states -------------------------------------

@dataclass(frozen=True)
class ClosureDerivation:
    root: Derivation
    # ((name, (ClosureDerivation, ...)), ...) covering the environment domain
    env_part: Tuple[Tuple[str, Tuple["ClosureDerivation", ...]], ...] = ()

    def judgement(self) -> Tuple[Context, TypeExpr]:
        ctx, _, ty = conclusion(self.root)
        total = ctx
        for name, parts in self.env_part:
            total = total.without(name)
        for name, parts in self.env_part:
            for p in parts:
                pctx, _ = p.judgement()
                total = total + pctx
        return total, ty


@dataclass(frozen=True)
class StateDerivation:
    head: ClosureDerivation
    stack_parts: Tuple[Tuple[ClosureDerivation, ...], ...] = ()

    def judgement(self) -> Tuple[Context, TypeExpr]:
        ctx, ty = self.head.judgement()
        for parts in self.stack_parts:
            if not isinstance(ty, Arrow):
                raise DerivationError("state head type has too few arrows")
            ty = ty.res
            for p in parts:
                pctx, _ = p.judgement()
                ctx = ctx + pctx
        return ctx, ty


def check_closure_derivation(d: ClosureDerivation) -> Tuple[Context, TypeExpr]:
    """Validate the context-sum side conditions of a closure derivation."""
    ctx, _, ty = check_derivation(d.root)
    for name, parts in d.env_part:
        expected = Multiset.of(p.judgement()[1] for p in parts)
        if ctx.get(name) != expected:
            raise DerivationError(
                f"environment part for {name} does not cover its multiset")
        for p in parts:
            check_closure_derivation(p)
    return d.judgement()


def check_state_derivation(d: StateDerivation) -> Tuple[Context, TypeExpr]:
    check_closure_derivation(d.head)
    _, ty = d.head.judgement()
    for parts in d.stack_parts:
        if not isinstance(ty, Arrow):
            raise DerivationError("state head type has too few arrows")
        expected = Multiset.of(p.judgement()[1] for p in parts)
        if ty.args != expected:
            raise DerivationError("stack part does not match the head arrow")
        for p in parts:
            check_closure_derivation(p)
        ty = ty.res
    return d.judgement()


# --- serialization -----------------------------------------------------------

def derivation_tree_str(d: Derivation, indent: int = 0) -> str:
    pad = "  " * indent
    ctx, term, ty = conclusion(d)
    head = f"{format_context(ctx)} ⊢ {pretty(term)} : {format_type(ty)}"
    if isinstance(d, AxNode):
        return f"{pad}[ax] {head}"
    if isinstance(d, AbsNode):
        return f"{pad}[abs] {head}\n{derivation_tree_str(d.premise, indent + 1)}"
    lines = [f"{pad}[app n={len(d.arg_premises)}] {head}",
             derivation_tree_str(d.fun_premise, indent + 1)]
    lines.extend(derivation_tree_str(p, indent + 1) for p in d.arg_premises)
    return "\n".join(lines)


def derivation_to_dict(d: Derivation) -> dict:
    ctx, term, ty = conclusion(d)
    base = {"context": format_context(ctx), "term": pretty(term),
            "type": format_type(ty)}
    if isinstance(d, AxNode):
        return {"rule": "ax", **base}
    if isinstance(d, AbsNode):
        return {"rule": "abs", **base,
                "premise": derivation_to_dict(d.premise)}
    return {"rule": "app", **base,
            "fun": derivation_to_dict(d.fun_premise),
            "args": [derivation_to_dict(p) for p in d.arg_premises]}


def derivation_json(d: Derivation) -> str:
    return json.dumps(derivation_to_dict(d), indent=2)


# --- principal typings and 1-typings of normal terms -------------------------

def _split_normal(t: Term):
    """Normal term as (binders, head var, spine args)."""
    binders = []
    while isinstance(t, Abs):
        binders.append(t.binder)
        t = t.body
    args = []
    while isinstance(t, App):
        args.append(t.arg)
        t = t.fun
    if not isinstance(t, Var):
        raise ValueError("term is not in normal form")
    return binders, t.name, list(reversed(args))


def principal_typing(t: Term, supply: Optional[AtomSupply] = None):
    """The principal typing of a normal term: fresh atom at every variable
    leaf and every application spine, disjoint across siblings."""
    if not is_normal(t):
        raise ValueError(f"principal_typing requires a normal term: {pretty(t)}")
    supply = supply or AtomSupply()

    def build(u: Term) -> Derivation:
        binders, head, args = _split_normal(u)
        arg_derivs = [build(a) for a in args]
        gamma = supply.fresh()
        arg_tys = [conclusion(p)[2] for p in arg_derivs]
        head_ty = nested_arrow([Multiset.of([ty]) for ty in arg_tys], gamma)
        d: Derivation = AxNode(head, head_ty)
        for a, p in zip(args, arg_derivs):
            d = AppNode(d, (p,), a)
        for binder in reversed(binders):
            d = AbsNode(binder, d)
        return d

    deriv = build(t)
    ctx, _, ty = conclusion(deriv)
    return ctx, ty, deriv


def _atom_choice_count(t: Term) -> int:
    """One atom choice per variable occurrence (each heads one spine)."""
    if isinstance(t, Var):
        return 1
    if isinstance(t, Abs):
        return _atom_choice_count(t.body)
    return _atom_choice_count(t.fun) + _atom_choice_count(t.arg)


def _restricted_growth_strings(n: int) -> Iterator[Tuple[int, ...]]:
    """Canonical atom assignments up to renaming (set-partition codes)."""

    def rec(prefix, top):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for v in range(top + 2):
            yield from rec(prefix + [v], max(top, v))

    yield from rec([], -1)


def _build_one_typing(t: Term, atoms: list) -> Derivation:
    """Build the 1-typing derivation consuming `atoms` in traversal order."""

    def build(u: Term) -> Derivation:
        binders, head, args = _split_normal(u)
        arg_derivs = [build(a) for a in args]
        gamma = atoms.pop(0)
        arg_tys = [conclusion(p)[2] for p in arg_derivs]
        head_ty = nested_arrow([Multiset.of([ty]) for ty in arg_tys], gamma)
        d: Derivation = AxNode(head, head_ty)
        for a, p in zip(args, arg_derivs):
            d = AppNode(d, (p,), a)
        for binder in reversed(binders):
            d = AbsNode(binder, d)
        return d

    return build(t)


def one_typings(t: Term, size_bound: int) -> Iterator[Tuple[Context, TypeExpr, Derivation]]:
    """Enumerate 1-typings of a normal term, canonically up to atom renaming,
    with combined type size at most `size_bound`. Atoms may be reused (the
    all-distinct assignment reproduces the principal typing)."""
    if not is_normal(t):
        raise ValueError(f"one_typings requires a normal term: {pretty(t)}")
    # All 1-typings of t share one shape, so one size check suffices.
    ctx0, ty0, _ = principal_typing(t)
    if typing_size(ctx0, ty0) > size_bound:
        return
    n = _atom_choice_count(t)
    for code in _restricted_growth_strings(n):
        deriv = _build_one_typing(t, [Atom(i) for i in code])
        ctx, _, ty = conclusion(deriv)
        yield ctx, ty, deriv
