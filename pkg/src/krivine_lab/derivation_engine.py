"""Minimal typing derivations, two ways.

Route A is an exhaustive search: a derivation's size depends only on its
skeleton (the term tree annotated with an argument multiplicity at every
application node), so iterative deepening over skeletons plus most-general
typing per skeleton computes the least derivation size exactly.

Route B is constructive: replaying a terminating machine run backwards
assembles a derivation whose size equals the step count.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Tuple, Union

from .lambda_core import Abs, App, Term, Var, ensure_variable_convention
from .krivine_machine import (
    Closure, EMPTY_ENV, State, StuckAbsEmptyStack, StuckFreeVar, Next,
    default_fuel, run, step_state,
)
from .system_r import (
    AbsNode, AppNode, Arrow, Atom, AtomSupply, AxNode, ClosureDerivation,
    Context, Derivation, EMPTY_MULTISET, Multiset, StateDerivation,
    Substitution, TypeExpr, atoms_of, canonical_renaming, conclusion,
    derivation_size, is_exact, is_exact_context, nested_arrow,
    substitute_derivation,
)
from .semantics import unify_all


# --- skeletons ---------------------------------------------------------------

@dataclass(frozen=True)
class VarSk:
    pass


@dataclass(frozen=True)
class AbsSk:
    body: "Skeleton"


@dataclass(frozen=True)
class AppSk:
    fun: "Skeleton"
    args: Tuple["Skeleton", ...]  # length = argument multiplicity n >= 0


Skeleton = Union[VarSk, AbsSk, AppSk]


def skeleton_node_count(sk: Skeleton) -> int:
    if isinstance(sk, VarSk):
        return 1
    if isinstance(sk, AbsSk):
        return 1 + skeleton_node_count(sk.body)
    return 1 + skeleton_node_count(sk.fun) + sum(
        skeleton_node_count(a) for a in sk.args)


def min_skeleton_size(t: Term) -> int:
    """Node count of the all-multiplicities-zero skeleton."""
    if isinstance(t, Var):
        return 1
    if isinstance(t, Abs):
        return 1 + min_skeleton_size(t.body)
    return 1 + min_skeleton_size(t.fun)


def _skeletons(t: Term, budget: int) -> Iterator[Skeleton]:
    """All skeletons of t of node count <= budget; argument multiplicities
    are tried 0, 1, 2, ... left to right."""
    if isinstance(t, Var):
        if budget >= 1:
            yield VarSk()
        return
    if isinstance(t, Abs):
        for b in _skeletons(t.body, budget - 1):
            yield AbsSk(b)
        return
    amin = min_skeleton_size(t.arg)
    fmin = min_skeleton_size(t.fun)
    n = 0
    while 1 + fmin + n * amin <= budget:
        for fsk in _skeletons(t.fun, budget - 1 - n * amin):
            rest = budget - 1 - skeleton_node_count(fsk)
            yield from (AppSk(fsk, args)
                        for args in _arg_tuples(t.arg, n, rest))
        n += 1


def _arg_tuples(arg: Term, n: int, budget: int) -> Iterator[Tuple[Skeleton, ...]]:
    if n == 0:
        yield ()
        return
    amin = min_skeleton_size(arg)
    for first in _skeletons(arg, budget - (n - 1) * amin):
        used = skeleton_node_count(first)
        for rest in _arg_tuples(arg, n - 1, budget - used):
            yield (first,) + rest


def enumerate_skeletons(t: Term, size_bound: int) -> Iterator[Skeleton]:
    """Skeletons of t with node count <= size_bound in nondecreasing size;
    ties in first-generated order (multiplicities 0, 1, 2, ...)."""
    all_sks = list(_skeletons(t, size_bound))
    all_sks.sort(key=skeleton_node_count)  # stable
    yield from all_sks


# --- most-general typing per skeleton ----------------------------------------

def _infer_all(t: Term, sk: Skeleton, supply: AtomSupply,
               memo: dict) -> Iterator[Tuple[Context, TypeExpr, Derivation]]:
    key = (t, sk)
    if key in memo:
        results, natoms = memo[key]
    else:
        natoms = 0
        results = []
        local = AtomSupply(0)
        for ctx, ty, d in _infer_raw(t, sk, local, memo):
            sigma = canonical_renaming([ctx, ty] + _derivation_types(d))
            results.append((sigma.apply_context(ctx), sigma.apply(ty),
                            substitute_derivation(sigma, d)))
            natoms = max(natoms, len(sigma.mapping))
        # prune branches that became identical after canonical renaming
        seen = set()
        unique = []
        for r in results:
            k = (r[0], r[1], r[2])
            if k not in seen:
                seen.add(k)
                unique.append(r)
        results = unique
        memo[key] = (results, natoms)
    for ctx, ty, d in results:
        shift = Substitution.of(
            {i: supply.fresh() for i in sorted(
                atoms_of_context(ctx) | atoms_of(ty) | _deriv_atoms(d))})
        yield (shift.apply_context(ctx), shift.apply(ty),
               substitute_derivation(shift, d))


def atoms_of_context(ctx: Context) -> set:
    out: set = set()
    for _, a in ctx.bindings:
        out |= atoms_of(a)
    return out


def _derivation_types(d: Derivation) -> list:
    if isinstance(d, AxNode):
        return [d.ty]
    if isinstance(d, AbsNode):
        return _derivation_types(d.premise)
    out = _derivation_types(d.fun_premise)
    for p in d.arg_premises:
        out.extend(_derivation_types(p))
    return out


def _deriv_atoms(d: Derivation) -> set:
    out: set = set()
    for ty in _derivation_types(d):
        out |= atoms_of(ty)
    return out


def _infer_raw(t: Term, sk: Skeleton, supply: AtomSupply,
               memo: dict) -> Iterator[Tuple[Context, TypeExpr, Derivation]]:
    if isinstance(t, Var):
        if not isinstance(sk, VarSk):
            raise ValueError("skeleton does not match the term")
        gamma = supply.fresh()
        yield Context.of({t.name: Multiset.of([gamma])}), gamma, AxNode(t.name, gamma)
        return
    if isinstance(t, Abs):
        if not isinstance(sk, AbsSk):
            raise ValueError("skeleton does not match the term")
        for ctx, ty, d in _infer_all(t.body, sk.body, supply, memo):
            yield (ctx.without(t.binder), Arrow(ctx.get(t.binder), ty),
                   AbsNode(t.binder, d))
        return
    if not isinstance(sk, AppSk):
        raise ValueError("skeleton does not match the term")
    for fctx, fty, fd in _infer_all(t.fun, sk.fun, supply, memo):
        yield from _app_branches(t, sk, fctx, fty, fd, [], supply, memo)


def _app_branches(t: Term, sk: AppSk, fctx, fty, fd, acc,
                  supply: AtomSupply, memo: dict):
    if len(acc) < len(sk.args):
        for trip in _infer_all(t.arg, sk.args[len(acc)], supply, memo):
            yield from _app_branches(t, sk, fctx, fty, fd, acc + [trip],
                                     supply, memo)
        return
    beta = supply.fresh()
    wanted = Arrow(Multiset.of(ty for _, ty, _ in acc), beta)
    for sigma in unify_all(fty, wanted):
        ctx = fctx
        for actx, _, _ in acc:
            ctx = ctx + actx
        yield (sigma.apply_context(ctx), sigma.apply(beta),
               AppNode(substitute_derivation(sigma, fd),
                       tuple(substitute_derivation(sigma, d) for _, _, d in acc),
                       t.arg))


def infer_skeleton_typing(
        t: Term, sk: Skeleton) -> Optional[Tuple[Context, TypeExpr, Derivation]]:
    """First most-general typing of the derivation shaped by sk, or None if
    the arrow/multiset constraints are unsolvable."""
    return next(_infer_all(t, sk, AtomSupply(), {}), None)


def infer_skeleton_typings_all(
        t: Term, sk: Skeleton) -> Iterator[Tuple[Context, TypeExpr, Derivation]]:
    """Every most-general unifier branch for the skeleton (distinct branches
    can differ in exactness, so exact-only searches must see them all)."""
    yield from _infer_all(t, sk, AtomSupply(), {})


# --- iterative-deepening search ----------------------------------------------

@dataclass(frozen=True)
class SearchResult:
    status: str                     # "found" | "exhausted_bound"
    min_size: Optional[int] = None
    witness: Optional[Derivation] = None
    typing: Optional[Tuple[Context, TypeExpr]] = None
    explored: int = 0


def min_derivation_size(t: Term, size_bound: int,
                        exact_only: bool = False) -> SearchResult:
    """Least derivation size for t within size_bound, by nondecreasing
    skeleton size; with exact_only, only typings with no positive empty
    multiset (exact type, exact context) are accepted."""
    t = ensure_variable_convention(t)
    memo: dict = {}
    supply = AtomSupply()
    explored = 0
    for sk in enumerate_skeletons(t, size_bound):
        explored += 1
        for ctx, ty, d in _infer_all(t, sk, supply, memo):
            if exact_only and not (is_exact_context(ctx) and is_exact(ty)):
                continue
            return SearchResult("found", skeleton_node_count(sk), d,
                                (ctx, ty), explored)
    return SearchResult("exhausted_bound", explored=explored)


def has_typing(t: Term, ctx: Context, ty: TypeExpr, size_bound: int) -> bool:
    """Whether some derivation within size_bound concludes exactly the given
    typing, up to canonical atom renaming."""
    from .system_r import canonical_typing
    t = ensure_variable_convention(t)
    target = canonical_typing(ctx, ty)
    memo: dict = {}
    supply = AtomSupply()
    for sk in enumerate_skeletons(t, size_bound):
        for gctx, gty, _ in _infer_all(t, sk, supply, memo):
            for sigma in _match_typing(gctx, gty, *target):
                return True
    return False


def _match_typing(gctx: Context, gty: TypeExpr, ctx: Context,
                  ty: TypeExpr) -> Iterator[Substitution]:
    """One-sided: substitutions on the general typing's atoms reaching the
    target typing, whose atoms are treated as rigid constants."""
    from .semantics import match_all
    if set(gctx.names()) != set(ctx.names()):
        return
    pattern = nested_arrow([gctx.get(x) for x in sorted(gctx.names())], gty)
    rigid = nested_arrow([ctx.get(x) for x in sorted(ctx.names())], ty)
    yield from match_all(pattern, rigid)


# --- extraction from machine runs --------------------------------------------

@dataclass(frozen=True)
class ExtractionResult:
    derivation: Derivation          # plain root (initial env and stack empty)
    state_derivation: StateDerivation
    context: Context
    type: TypeExpr
    size: int
    steps: int


def _merge_env_parts(parts_list):
    merged: dict = {}
    for parts in parts_list:
        for name, ds in parts:
            merged[name] = merged.get(name, ()) + ds
    return tuple(sorted(merged.items()))


def _pop_env_part(parts, name):
    got = ()
    kept = []
    for x, ds in parts:
        if x == name:
            got = ds
        else:
            kept.append((x, ds))
    return got, tuple(kept)


def _extract_state(s: State, machine: str, supply: AtomSupply) -> StateDerivation:
    """Derivation of the state whose size equals the remaining step count of
    the chosen machine, by the case analysis of the transition relation."""
    outcome = step_state(s)
    term = s.head.term
    if isinstance(outcome, Next):
        sub = _extract_state(outcome.state, machine, supply)
        if isinstance(term, App):
            # push: fold the first stack part back into an application node
            arg_parts = sub.stack_parts[0]
            root = AppNode(sub.head.root, tuple(p.root for p in arg_parts),
                           term.arg)
            env_part = _merge_env_parts(
                [sub.head.env_part] + [p.env_part for p in arg_parts])
            return StateDerivation(ClosureDerivation(root, env_part),
                                   sub.stack_parts[1:])
        if isinstance(term, Var):
            # lookup: the whole head part becomes the environment entry
            ty = conclusion(sub.head.root)[2]
            head = ClosureDerivation(AxNode(term.name, ty),
                                     ((term.name, (sub.head,)),))
            return StateDerivation(head, sub.stack_parts)
        # bind: the binder's environment entries become the first stack part
        parts, env_part = _pop_env_part(sub.head.env_part, term.binder)
        head = ClosureDerivation(AbsNode(term.binder, sub.head.root), env_part)
        return StateDerivation(head, (parts,) + sub.stack_parts)
    if isinstance(outcome, StuckAbsEmptyStack):
        inner = State(Closure(term.body, s.head.env), ())
        sub = _extract_state(inner, machine, supply)
        head = ClosureDerivation(AbsNode(term.binder, sub.head.root),
                                 sub.head.env_part)
        return StateDerivation(head, ())
    # stuck free variable with stack c1..cq
    if machine == "head":
        ty = nested_arrow([EMPTY_MULTISET] * len(s.stack), supply.fresh())
        head = ClosureDerivation(AxNode(term.name, ty), ())
        return StateDerivation(head, tuple(() for _ in s.stack))
    subs = [_extract_state(State(c, ()), machine, supply) for c in s.stack]
    arg_tys = [sub.head.judgement()[1] for sub in subs]
    ty = nested_arrow([Multiset.of([a]) for a in arg_tys], supply.fresh())
    head = ClosureDerivation(AxNode(term.name, ty), ())
    return StateDerivation(head, tuple((sub.head,) for sub in subs))


def _extract(t: Term, machine: str, fuel: Optional[int]) -> Optional[ExtractionResult]:
    report = run(t, machine, fuel)
    if report.status != "finished":
        return None
    t = ensure_variable_convention(t)
    sd = _extract_state(State(Closure(t, EMPTY_ENV), ()), machine, AtomSupply())
    root = sd.head.root
    ctx, _, ty = conclusion(root)
    return ExtractionResult(root, sd, ctx, ty, derivation_size(sd),
                            report.steps)


def extract_derivation_head(t: Term, fuel: Optional[int] = None) -> Optional[ExtractionResult]:
    """Derivation of t of size exactly the head machine's step count, or
    None if the run does not finish within the fuel."""
    return _extract(t, "head", fuel)


def extract_derivation_beta(t: Term, fuel: Optional[int] = None) -> Optional[ExtractionResult]:
    """As extract_derivation_head for the beta machine; the root typing is a
    1-typing of the normal form (fresh pairwise-distinct atoms make it a
    principal instance)."""
    return _extract(t, "beta", fuel)
