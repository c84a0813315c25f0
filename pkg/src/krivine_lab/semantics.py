"""Relational semantics: bounded interpretations, application on point
sets, and exact step prediction through unification of most-general points.

Atoms act as unification variables. A type of bounded size can still carry
arbitrarily large negative multisets (negative atom occurrences are free in
the size measure), so bounded enumerations use the total occurrence weight
type_size + type_aux as the finiteness guard.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, FrozenSet, Iterator, List, Optional, Set, Tuple

from .lambda_core import (
    Term, free_vars, head_reduce, is_normal, leftmost_reduce, pretty,
)
from .system_r import (
    Arrow, Atom, Context, EMPTY_MULTISET, Multiset, Substitution, TypeExpr,
    atoms_of, canonical_point, canonical_renaming, canonical_typing,
    format_multiset, format_type, is_exact, nested_arrow, type_aux,
    type_key, type_size, typing_size,
)


# --- unification -------------------------------------------------------------

def _apply_binding(binding: dict, t):
    if not binding:
        return t
    return Substitution.of(binding).apply(t)


def _solve(constraints: list, binding: dict,
           bindable: Optional[frozenset]) -> Iterator[dict]:
    """All solutions of a list of type-pair constraints; `bindable` limits
    which atom ids may be substituted (None means all of them)."""
    if not constraints:
        yield dict(binding)
        return
    (x, y), rest = constraints[0], constraints[1:]
    x = _apply_binding(binding, x)
    y = _apply_binding(binding, y)
    if x == y:
        yield from _solve(rest, binding, bindable)
        return
    if isinstance(x, Atom) and (bindable is None or x.id in bindable):
        yield from _bind_atom(x, y, rest, binding, bindable)
        return
    if isinstance(y, Atom) and (bindable is None or y.id in bindable):
        yield from _bind_atom(y, x, rest, binding, bindable)
        return
    if not (isinstance(x, Arrow) and isinstance(y, Arrow)):
        return
    xs, ys = x.args.elements, y.args.elements
    if len(xs) != len(ys):
        return
    if not xs:
        yield from _solve([(x.res, y.res)] + rest, binding, bindable)
        return
    # match the first left element against each distinct right element,
    # failing branches prune before the remaining elements are expanded
    tried = set()
    for j, yj in enumerate(ys):
        if yj in tried:
            continue
        tried.add(yj)
        remaining = (Arrow(Multiset(xs[1:]), x.res),
                     Arrow(Multiset(ys[:j] + ys[j + 1:]), y.res))
        yield from _solve([(xs[0], yj), remaining] + rest, binding, bindable)


def _bind_atom(atom: Atom, ty, rest, binding, bindable) -> Iterator[dict]:
    if atom.id in atoms_of(ty):
        return  # occurs check: no infinite types
    single = {atom.id: ty}
    updated = {k: _apply_binding(single, v) for k, v in binding.items()}
    updated[atom.id] = ty
    yield from _solve(rest, updated, bindable)


def _dedupe_substitutions(solutions: Iterator[dict],
                          ids: list) -> Iterator[Substitution]:
    """Prune unifier branches equal up to renaming of the result atoms."""
    seen = set()
    for binding in solutions:
        sigma = Substitution.of(binding)
        images = [sigma.apply(Atom(i)) for i in ids]
        rho = canonical_renaming(images)
        key = tuple(rho.apply(im) for im in images)
        if key not in seen:
            seen.add(key)
            yield sigma


def unify_all(s: TypeExpr, t: TypeExpr) -> Iterator[Substitution]:
    """Every most-general-unifier branch for s = t (branches arise from the
    bijections chosen between multiset elements)."""
    ids = sorted(atoms_of(s) | atoms_of(t))
    yield from _dedupe_substitutions(_solve([(s, t)], {}, None), ids)


def unify_types(s: TypeExpr, t: TypeExpr) -> Optional[Substitution]:
    return next(unify_all(s, t), None)


def unify_multisets(a: Multiset, b: Multiset) -> Iterator[Substitution]:
    if len(a) != len(b):
        return  # substitution preserves multiset cardinality
    probe = Atom(max(atoms_of(a) | atoms_of(b), default=-1) + 1)
    yield from unify_all(Arrow(a, probe), Arrow(b, probe))


def _shift(ty, offset: int):
    if isinstance(ty, Atom):
        return Atom(ty.id + offset)
    if isinstance(ty, Arrow):
        return Arrow(Multiset.of(_shift(e, offset) for e in ty.args),
                     _shift(ty.res, offset))
    if isinstance(ty, Multiset):
        return Multiset.of(_shift(e, offset) for e in ty)
    if isinstance(ty, Context):
        return Context.of({x: _shift(a, offset) for x, a in ty.bindings})
    raise TypeError(ty)


def match_all(pattern: TypeExpr, rigid: TypeExpr) -> Iterator[Substitution]:
    """One-sided unification: substitutions over the pattern's atoms with
    sigma(pattern) = rigid; the rigid side's atoms are constants. The two
    atom spaces may overlap (the pattern is renamed apart internally)."""
    top = max(atoms_of(pattern) | atoms_of(rigid), default=-1) + 1
    shifted = _shift(pattern, top)
    bindable = frozenset(atoms_of(shifted))
    for binding in _solve([(shifted, rigid)], {}, bindable):
        yield Substitution.of(
            {i: _apply_binding(binding, Atom(i + top))
             for i in atoms_of(pattern)})


def matches(pattern: TypeExpr, rigid: TypeExpr) -> bool:
    return next(match_all(pattern, rigid), None) is not None


# --- bounded type universe ---------------------------------------------------

def type_weight(t) -> int:
    """Total atom occurrences plus twice the arrow count."""
    return type_size(t) + type_aux(t)


def _gen_types(budget: int, next_label: int):
    if budget >= 1:
        for lbl in range(next_label + 1):
            yield Atom(lbl), 1, max(next_label, lbl + 1)
    if budget >= 3:
        for elems, we, nl in _gen_multiset(budget - 3, next_label):
            for res, wr, nl2 in _gen_types(budget - 2 - we, nl):
                yield Arrow(Multiset.of(elems), res), we + wr + 2, nl2


def _gen_multiset(budget: int, next_label: int):
    yield (), 0, next_label
    if budget >= 1:
        for e, w, nl in _gen_types(budget, next_label):
            for rest, wr, nl2 in _gen_multiset(budget - w, nl):
                yield (e,) + rest, w + wr, nl2


@lru_cache(maxsize=None)
def canonical_type_pool(max_weight: int) -> Tuple[TypeExpr, ...]:
    """Every type of occurrence weight <= max_weight, one canonical
    representative per atom-renaming class, sorted small to large."""
    out = {canonical_point(t) for t, _, _ in _gen_types(max_weight, 0)}
    return tuple(sorted(out, key=lambda t: (type_weight(t), type_key(t))))


# --- most-general typings ----------------------------------------------------

def ground_typings(t: Term, size_budget: int,
                   fuel: Optional[int] = None) -> Iterator[Tuple[Context, TypeExpr]]:
    """Canonical most-general typings of t with combined size <= budget.
    Every derivable typing of t is a substitution instance of one of them.
    Terms without a head normal form (within fuel) yield nothing."""
    seen: set = set()
    for ctx, ty in _ground_typings(t, size_budget, fuel, depth=0):
        key = (ctx, ty)
        if key not in seen:
            seen.add(key)
            yield ctx, ty


def _ground_typings(t: Term, budget: int, fuel: Optional[int],
                    depth: int) -> Iterator[Tuple[Context, TypeExpr]]:
    if budget < 1 or depth > budget:
        return
    if is_normal(t):
        yield from _ground_typings_normal(t, budget)
        return
    lm = leftmost_reduce(t, fuel)
    if lm.status == "normalized":
        yield from _ground_typings_normal(lm.result, budget)
        return
    hd = head_reduce(t, fuel)
    if hd.status != "normalized":
        return  # no head normal form found: no typings within fuel
    yield from _ground_typings_hnf(hd.result, budget, fuel, depth)


def _ground_typings_normal(t: Term, budget: int):
    from .derivation_engine import _infer_all, enumerate_skeletons
    from .system_r import AtomSupply
    memo: dict = {}
    supply = AtomSupply()
    for sk in enumerate_skeletons(t, budget):
        for ctx, ty, _ in _infer_all(t, sk, supply, memo):
            if typing_size(ctx, ty) <= budget:
                yield canonical_typing(ctx, ty)


def _ground_typings_hnf(hnf: Term, budget: int, fuel: Optional[int],
                        depth: int):
    """Typings of a head normal form lx1...lxm.(z)t1...tp whose arguments
    may lack normal forms: pick a multiset of typings for each argument."""
    from .lambda_core import Abs, App, Var
    binders = []
    body = hnf
    while isinstance(body, Abs):
        binders.append(body.binder)
        body = body.body
    args = []
    while isinstance(body, App):
        args.append(body.arg)
        body = body.fun
    assert isinstance(body, Var)
    head = body.name
    args.reverse()

    arg_pools = [
        [(_shift(c, 0), ty) for c, ty in _ground_typings(a, budget - 1, fuel,
                                                         depth + 1)]
        for a in args
    ]

    def multisets(pool, budget_left):
        yield (), budget_left
        for ctx, ty in pool:
            cost = max(typing_size(ctx, ty), 1)
            if cost <= budget_left:
                for rest, rem in multisets(pool, budget_left - cost):
                    yield ((ctx, ty),) + rest, rem

    def assemble(i, chosen, budget_left):
        if i < len(args):
            for ms, rem in multisets(arg_pools[i], budget_left):
                yield from assemble(i + 1, chosen + [ms], rem)
            return
        offset = 0
        total_ctx = Context()
        arg_multisets = []
        for ms in chosen:
            tys = []
            for ctx, ty in ms:
                ctx = _shift(ctx, offset)
                ty = _shift(ty, offset)
                offset += max((a for a in atoms_of(ty) | _ctx_atoms(ctx)),
                              default=-1) + 1
                total_ctx = total_ctx + ctx
                tys.append(ty)
            arg_multisets.append(Multiset.of(tys))
        result_atom = Atom(offset)
        head_ty = nested_arrow(arg_multisets, result_atom)
        total_ctx = total_ctx + Context.of({head: Multiset.of([head_ty])})
        ty: TypeExpr = result_atom
        ctx = total_ctx
        for x in reversed(binders):
            ty = Arrow(ctx.get(x), ty)
            ctx = ctx.without(x)
        if typing_size(ctx, ty) <= budget:
            yield canonical_typing(ctx, ty)

    yield from assemble(0, [], budget)


def _ctx_atoms(ctx: Context) -> set:
    out: set = set()
    for _, a in ctx.bindings:
        out |= atoms_of(a)
    return out


_GROUND_POINT_CACHE: dict = {}


def ground_points(t: Term, size_budget: int) -> Iterator[TypeExpr]:
    """Most-general interpretation points of a closed normal term, in
    nondecreasing type size; every point of the interpretation is a
    substitution instance of a streamed one."""
    if not is_normal(t):
        raise ValueError(f"ground_points requires a normal term: {pretty(t)}")
    if free_vars(t):
        raise ValueError(f"ground_points requires a closed term: {pretty(t)}")
    key = (t, size_budget)
    if key not in _GROUND_POINT_CACHE:
        seen: set = set()
        out = []
        for ctx, ty in _ground_typings_normal(t, size_budget):
            assert ctx.is_empty()
            if ty not in seen:
                seen.add(ty)
                out.append(ty)
        _GROUND_POINT_CACHE[key] = tuple(out)
    yield from _GROUND_POINT_CACHE[key]


# --- interpretations ---------------------------------------------------------

@dataclass(frozen=True)
class SemSet:
    term: Term
    bound: int
    points: FrozenSet[TypeExpr]
    # canonical most-general (context, type) pairs; nonempty contexts occur
    # for open terms
    context_points: Tuple[Tuple[Context, TypeExpr], ...] = ()

    def as_strings(self) -> List[str]:
        return sorted(format_type(p) for p in self.points)


def interpret(t: Term, bound: int, fuel: Optional[int] = None) -> SemSet:
    """Derivable types of t, one canonical representative per renaming
    class, restricted to type_size <= bound and occurrence weight
    <= 2 * bound (the finiteness guard)."""
    grounds = list(ground_typings(t, 2 * bound, fuel))
    closed_grounds = [ty for ctx, ty in grounds if ctx.is_empty()]
    points = set()
    for cand in canonical_type_pool(2 * bound):
        if type_size(cand) > bound:
            continue
        if any(matches(g, cand) for g in closed_grounds):
            points.add(cand)
    return SemSet(t, bound, frozenset(points), tuple(grounds))


@dataclass(frozen=True)
class SemEnv:
    mapping: Tuple[Tuple[str, FrozenSet[TypeExpr]], ...]

    @staticmethod
    def of(mapping: Dict[str, Set[TypeExpr]]) -> "SemEnv":
        return SemEnv(tuple(sorted((x, frozenset(s))
                                   for x, s in mapping.items())))

    def get(self, name: str) -> FrozenSet[TypeExpr]:
        for x, s in self.mapping:
            if x == name:
                return s
        return frozenset()


def interpret_in_env(t: Term, rho: SemEnv, bound: int,
                     fuel: Optional[int] = None) -> FrozenSet[TypeExpr]:
    """Points of t under an environment assigning finite point sets to the
    free variables: the context multisets must draw their elements from the
    corresponding sets, literally (the environment's atoms are constants)."""
    results: set = set()
    for ctx, ty in ground_typings(t, 2 * bound + 2, fuel):
        for x, _ in ctx.bindings:
            if not rho.get(x):
                break
        else:
            results |= _env_matches(ctx, ty, rho, bound)
    return frozenset(results)


def _env_matches(ctx: Context, ty: TypeExpr, rho: SemEnv, bound: int) -> set:
    elems: list = []
    choices: list = []
    for x, a in ctx.bindings:
        for e in a:
            elems.append(e)
            choices.append(sorted(rho.get(x), key=type_key))
    out: set = set()
    probe_id = max(atoms_of(ty) | {i for e in elems for i in atoms_of(e)},
                   default=-1) + 1
    for targets in itertools.product(*choices):
        pattern = nested_arrow([Multiset.of([e]) for e in elems], ty)
        rigid_tail = Atom(probe_id)
        rigid = nested_arrow([Multiset.of([g]) for g in targets], rigid_tail)
        top = max(atoms_of(pattern) | atoms_of(rigid), default=-1) + 1
        shifted = _shift(pattern, top)
        bindable = frozenset(atoms_of(shifted)) | {probe_id}
        for binding in _solve([(shifted, rigid)], {}, bindable):
            alpha = _apply_binding(binding, _shift(ty, top))
            free = sorted(atoms_of(alpha) & bindable)
            out |= _instantiate_leftovers(alpha, free, bound)
    return out


def _instantiate_leftovers(alpha: TypeExpr, leftovers: list, bound: int) -> set:
    """Close over remaining unification variables by drawing from the
    bounded type universe; the environment's own atoms stay fixed."""
    if not leftovers:
        return {alpha} if type_size(alpha) <= bound else set()
    pool = [c for c in canonical_type_pool(min(2 * bound, 10))]
    out: set = set()
    for assignment in itertools.product(pool, repeat=min(len(leftovers), 3)):
        if len(leftovers) > 3:
            break
        sigma = Substitution.of(dict(zip(leftovers, assignment)))
        inst = sigma.apply(alpha)
        if type_size(inst) <= bound:
            out.add(inst)
    return out


def semantic_apply(d1: Set[TypeExpr], d2: Set[TypeExpr]) -> Set[TypeExpr]:
    """d1 * d2: results of arrow points of d1 whose argument multiset is
    supported by d2."""
    return {p.res for p in d1
            if isinstance(p, Arrow) and all(e in d2 for e in p.args)}


# --- step prediction via unification of point pairs ---------------------------

@dataclass(frozen=True)
class UnifPair:
    fun_point: Arrow      # (a, alpha), a most-general point of v
    arg_points: Multiset  # a', drawn from points of u, renamed apart
    unifier: Substitution
    cost: int             # |(a, alpha)| + |a'| + 1
    exact: bool           # is_exact(sigma(alpha)) for this unifier

    def to_dict(self) -> dict:
        return {
            "point": format_type(self.fun_point),
            "arguments": format_multiset(self.arg_points),
            "unifier": {f"γ{k}": format_type(v)
                        for k, v in self.unifier.mapping},
            "cost": self.cost,
            "exact": self.exact,
        }


def step_bound(point: TypeExpr) -> int:
    """2|a| + |alpha| + 2 for an arrow point (a, alpha)."""
    if not isinstance(point, Arrow):
        raise ValueError("step_bound needs an arrow point")
    return 2 * type_size(point.args) + type_size(point.res) + 2


def _require_normal_closed(t: Term, what: str) -> None:
    if not is_normal(t):
        raise ValueError(f"{what} must be a normal term: {pretty(t)}")
    if free_vars(t):
        raise ValueError(f"{what} must be closed: {pretty(t)}")


def _bounded_combos(points: list, sizes: list, card: int,
                    budget: int) -> Iterator[tuple]:
    """Multisets of `card` points (as tuples of nondecreasing index) whose
    sizes sum to at most `budget`; points must be sorted by size."""
    def rec(start: int, k: int, rem: int) -> Iterator[tuple]:
        if k == 0:
            yield ()
            return
        for i in range(start, len(points)):
            s = sizes[i]
            if s * k > rem:
                break
            for rest in rec(i, k - 1, rem - s):
                yield (points[i],) + rest
    return rec(0, card, budget)


def _pair_candidates(v: Term, u: Term, bound: int):
    """(point, argument multiset, cost) triples with cost ≤ bound, in
    nondecreasing cost, not yet tested for unifiability; atoms renamed
    apart between the sides."""
    _require_normal_closed(v, "function term")
    _require_normal_closed(u, "argument term")
    v_points = [p for p in ground_points(v, bound) if isinstance(p, Arrow)]
    u_points = sorted(ground_points(u, bound), key=type_size)
    u_sizes = [type_size(q) for q in u_points]
    triples = []
    for p in v_points:
        card = len(p.args)
        base = max(atoms_of(p), default=-1) + 1
        budget = bound - type_size(p) - 1
        if budget < 0:
            continue
        for combo in _bounded_combos(u_points, u_sizes, card, budget):
            offset = base
            renamed = []
            for q in combo:
                q2 = _shift(q, offset)
                offset = max(atoms_of(q2), default=offset - 1) + 1
                renamed.append(q2)
            a2 = Multiset.of(renamed)
            triples.append((p, a2, type_size(p) + type_size(a2) + 1))
    triples.sort(key=lambda pc: pc[2])
    return triples


def unifiable_pairs(v: Term, u: Term, bound: int) -> Iterator[UnifPair]:
    """All unifiable (function point, argument multiset) pairs over the
    most-general points of v and u within the size bound, in nondecreasing
    cost."""
    for p, a2, cost in _pair_candidates(v, u, bound):
        for sigma in unify_multisets(p.args, a2):
            yield UnifPair(p, a2, sigma, cost, is_exact(sigma.apply(p.res)))


def predict_report(v: Term, u: Term, mode: str = "head",
                   bound: Optional[int] = None,
                   bound_cap: int = 32) -> Optional[UnifPair]:
    """Cheapest unifiable pair (with the exactness side condition in beta
    mode); bound escalates by doubling up to bound_cap unless fixed."""
    if mode not in ("head", "beta"):
        raise ValueError(f"unknown mode {mode!r}")
    bounds = [bound] if bound is not None else []
    if bound is None:
        b = 8
        while b <= bound_cap:
            bounds.append(b)
            b *= 2
    best: Optional[UnifPair] = None
    for b in bounds:
        for p, a2, cost in _pair_candidates(v, u, b):
            if best is not None and cost >= best.cost:
                break  # candidates come in nondecreasing cost
            for sigma in unify_multisets(p.args, a2):
                exact = is_exact(sigma.apply(p.res))
                if mode == "beta" and not exact:
                    continue
                best = UnifPair(p, a2, sigma, cost, exact)
                break
        if best is not None and best.cost <= b:
            return best
    return best


def predict_steps(v: Term, u: Term, mode: str = "head",
                  bound: Optional[int] = None) -> Optional[int]:
    """Predicted machine step count for (v)u from the semantics alone:
    the least |(a, alpha)| + |a'| + 1 over unifiable point pairs."""
    pair = predict_report(v, u, mode, bound)
    return None if pair is None else pair.cost


def check_app_normalizability(v: Term, u: Term, bound: int) -> str:
    """Qualitative classification of (v)u from the semantics: yes_normal if
    an exact unifiable pair exists within the bound, yes_head if any pair
    does, unknown_within_bound otherwise."""
    _require_normal_closed(v, "function term")
    _require_normal_closed(u, "argument term")
    found_head = False
    for pair in unifiable_pairs(v, u, bound):
        if pair.exact:
            return "yes_normal"
        found_head = True
    return "yes_head" if found_head else "unknown_within_bound"
