"""Verification suites tying the machines, the type system and the
semantics together.

Each check exercises one of the quantitative laws the package is built
around (machine step counts versus minimal derivation sizes versus
unification-based predictions) on the built-in corpus and reports a
single pass/fail result with a short diagnostic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

from . import corpus as corpus_mod
from .corpus import (
    church,
    closed_normal_terms,
    default_corpus_size,
    identity,
    omega,
    triple_self_apply_omega,
)
from .derivation_engine import (
    extract_derivation_beta,
    extract_derivation_head,
    has_typing,
    min_derivation_size,
)
from .krivine_machine import realize, run
from .lambda_core import Abs, App, Term, Var, parse, pretty
from .semantics import (
    SemEnv,
    interpret,
    interpret_in_env,
    predict_report,
    predict_steps,
    step_bound,
    unifiable_pairs,
)
from .system_r import (
    Arrow,
    Atom,
    AbsNode,
    AppNode,
    AxNode,
    Context,
    Multiset,
    canonical_typing,
    conclusion,
    nested_arrow,
    parse_type,
    principal_typing,
    check_derivation,
    derivation_size,
    type_aux,
    type_size,
)

DEFAULT_FUEL = 10000


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return f"{status}  {self.name}: {self.detail}"


def _result(name: str, failures: list, detail_ok: str) -> CheckResult:
    if failures:
        shown = "; ".join(failures[:3])
        more = f" (+{len(failures) - 3} more)" if len(failures) > 3 else ""
        return CheckResult(name, False, shown + more)
    return CheckResult(name, True, detail_ok)


def check_golden_trace() -> CheckResult:
    """The worked head-machine run of (\\x.(x)x)\\y.y: 9 steps, result
    \\y.y, and the exact rule sequence of its trace."""
    t = parse(r"(\x.(x)x)\y.y")
    report = run(t, "head", want_trace=True)
    failures = []
    if report.status != "finished":
        failures.append(f"status {report.status}")
    if report.steps != 9:
        failures.append(f"steps {report.steps} != 9")
    final = pretty(realize(report.final))
    if final != r"\y.y":
        failures.append(f"final {final}")
    expected = ["push", "bind", "push", "lookup", "bind",
                "lookup", "lookup", "under-lambda", "stuck-var"]
    rules = [step.rule for step in report.trace]
    if rules != expected:
        failures.append(f"rules {rules}")
    return _result("golden-trace", failures, "9 steps, \\y.y, rule sequence matches")


def check_church_law(n_max: int = 6) -> CheckResult:
    """l_h((n)I) = 4(n+1) for Church numerals."""
    failures = []
    for n in range(1, n_max + 1):
        t = App(church(n), identity())
        report = run(t, "head")
        if report.status != "finished" or report.steps != 4 * (n + 1):
            failures.append(f"n={n}: steps {report.steps}")
    return _result("church-law", failures,
                   f"l_h((n)I) = 4(n+1) for n=1..{n_max}")


def _head_normalizing_corpus(corpus_size: int, fuel: int):
    for t in corpus_mod.corpus(corpus_size):
        report = run(t, "head", fuel=fuel)
        yield t, report


def check_head_theorem(corpus_size: Optional[int] = None,
                       fuel: int = DEFAULT_FUEL) -> CheckResult:
    """Head machine step count equals the minimal derivation size, and the
    search with bound l_h - 1 reports bound exhaustion, on every
    head-normalizing corpus term."""
    corpus_size = corpus_size or default_corpus_size()
    failures = []
    checked = 0
    for t, report in _head_normalizing_corpus(corpus_size, fuel):
        if report.status != "finished":
            continue
        checked += 1
        res = min_derivation_size(t, report.steps)
        if res.status != "found" or res.min_size != report.steps:
            failures.append(f"{pretty(t)}: min {res.status}/{res.min_size} "
                            f"vs steps {report.steps}")
            continue
        if report.steps > 1:
            res2 = min_derivation_size(t, report.steps - 1)
            if res2.status != "exhausted_bound":
                failures.append(f"{pretty(t)}: bound {report.steps - 1} "
                                f"gave {res2.status}")
    return _result("theorem-head", failures,
                   f"l_h = min derivation size on {checked} terms")


def check_beta_theorem(corpus_size: Optional[int] = None,
                       fuel: int = DEFAULT_FUEL) -> CheckResult:
    """Beta machine step count equals the minimal size over derivations
    with exact result types, on every normalizing corpus term."""
    corpus_size = corpus_size or default_corpus_size()
    failures = []
    checked = 0
    for t in corpus_mod.corpus(corpus_size):
        report = run(t, "beta", fuel=fuel)
        if report.status != "finished":
            continue
        checked += 1
        res = min_derivation_size(t, report.steps, exact_only=True)
        if res.status != "found" or res.min_size != report.steps:
            failures.append(f"{pretty(t)}: min {res.status}/{res.min_size} "
                            f"vs steps {report.steps}")
            continue
        if report.steps > 1:
            res2 = min_derivation_size(t, report.steps - 1, exact_only=True)
            if res2.status != "exhausted_bound":
                failures.append(f"{pretty(t)}: bound {report.steps - 1} "
                                f"gave {res2.status}")
    return _result("theorem-normal-bound", failures,
                   f"l_beta = min exact derivation size on {checked} terms")


def check_extraction(corpus_size: Optional[int] = None,
                     fuel: int = DEFAULT_FUEL) -> CheckResult:
    """Derivations read off machine runs are valid, have size equal to the
    step count, and (beta) conclude with a principal typing of the normal
    form."""
    corpus_size = corpus_size or default_corpus_size()
    failures = []
    checked = 0
    for t in corpus_mod.corpus(corpus_size):
        head = extract_derivation_head(t, fuel=fuel)
        if head is not None:
            checked += 1
            ctx, term, ty = check_derivation(head.derivation)
            steps = run(t, "head", fuel=fuel).steps
            if head.size != steps or derivation_size(head.derivation) != steps:
                failures.append(f"head {pretty(t)}: size {head.size} vs "
                                f"steps {steps}")
        beta = extract_derivation_beta(t, fuel=fuel)
        if beta is None:
            continue
        check_derivation(beta.derivation)
        report = run(t, "beta", fuel=fuel)
        if beta.size != report.steps:
            failures.append(f"beta {pretty(t)}: size {beta.size} vs "
                            f"steps {report.steps}")
            continue
        nf = realize(report.final)
        pctx, pty, _ = principal_typing(nf)
        if canonical_typing(beta.context, beta.type) != canonical_typing(pctx, pty):
            failures.append(f"beta {pretty(t)}: typing is not the principal "
                            f"typing of {pretty(nf)}")
    return _result("extraction", failures,
                   f"extracted derivations valid with size = steps "
                   f"on {checked} terms")


def check_qualitative(corpus_size: Optional[int] = None,
                      fuel: int = DEFAULT_FUEL,
                      untypable_bound: int = 20) -> CheckResult:
    """Head-normalizing corpus terms are typable within their step count;
    the divergent ones (including the two named divergent families) admit
    no derivation up to the untypability bound."""
    corpus_size = corpus_size or default_corpus_size()
    failures = []
    typable = divergent = 0
    terms = corpus_mod.corpus(corpus_size)
    for extra in (omega(), triple_self_apply_omega()):
        if extra not in terms:
            terms.append(extra)
    for t in terms:
        report = run(t, "head", fuel=fuel)
        if report.status == "finished":
            typable += 1
            res = min_derivation_size(t, report.steps)
            if res.status != "found":
                failures.append(f"{pretty(t)}: normalizing but search "
                                f"gave {res.status}")
        else:
            divergent += 1
            res = min_derivation_size(t, untypable_bound)
            if res.status != "exhausted_bound":
                failures.append(f"{pretty(t)}: divergent but search "
                                f"gave {res.status}")
    return _result("qualitative", failures,
                   f"{typable} normalizing terms typable, {divergent} "
                   f"divergent terms untypable to bound {untypable_bound}")


def check_semantic_bound(pair_size: int = 7, pair_bound: int = 8,
                         fuel: int = DEFAULT_FUEL) -> CheckResult:
    """Every unifiable point pair gives an instantiated point (a, alpha)
    with l_h((v)u) <= 2|a| + |alpha| + 2; exact pairs bound l_beta the
    same way."""
    failures = []
    pairs_checked = 0
    terms = closed_normal_terms(pair_size)
    for v, u in itertools.product(terms, terms):
        found = list(unifiable_pairs(v, u, pair_bound))
        if not found:
            continue
        app = App(v, u)
        head = run(app, "head", fuel=fuel)
        beta = None
        for pair in found:
            pairs_checked += 1
            inst = Arrow(pair.unifier.apply_multiset(pair.fun_point.args),
                         pair.unifier.apply(pair.fun_point.res))
            bound = step_bound(inst)
            if head.status != "finished":
                failures.append(f"({pretty(v)}){pretty(u)}: unifiable pair "
                                f"but head machine did not finish")
                break
            if head.steps > bound:
                failures.append(f"({pretty(v)}){pretty(u)}: l_h {head.steps} "
                                f"> bound {bound}")
            if pair.exact:
                if beta is None:
                    beta = run(app, "beta", fuel=fuel)
                if beta.status != "finished":
                    failures.append(f"({pretty(v)}){pretty(u)}: exact pair "
                                    f"but beta machine did not finish")
                elif beta.steps > bound:
                    failures.append(f"({pretty(v)}){pretty(u)}: l_beta "
                                    f"{beta.steps} > bound {bound}")
    return _result("semantic-bound", failures,
                   f"step bounds hold on {pairs_checked} unifiable pairs")


def check_predictor(pair_size: int = 7, fuel: int = DEFAULT_FUEL,
                    bound_cap: int = 32) -> CheckResult:
    """The unification predictor reproduces the head machine step count
    exactly: on the worked example with the expected witness sizes, on
    (n)I for small Church numerals, and across all corpus pairs where
    both the predictor and the machine produce an answer."""
    failures = []
    delta = parse(r"\x.(x)x")
    report = predict_report(delta, identity(), mode="head")
    if report is None or report.cost != 9:
        failures.append(f"delta/I predicted "
                        f"{None if report is None else report.cost} != 9")
    else:
        fun_size = type_size(report.fun_point)
        arg_size = type_size(report.arg_points)
        if (fun_size, arg_size) != (4, 4):
            failures.append(f"delta/I witness sizes ({fun_size}, {arg_size}) "
                            f"!= (4, 4)")
    for n in (1, 2, 3):
        got = predict_steps(church(n), identity(), mode="head")
        if got != 4 * (n + 1):
            failures.append(f"(church {n})I predicted {got}")
    pairs_checked = 0
    terms = closed_normal_terms(pair_size)
    for v, u in itertools.product(terms, terms):
        machine = run(App(v, u), "head", fuel=fuel)
        if machine.status != "finished":
            continue
        predicted = predict_steps(v, u, mode="head")
        if predicted is None:
            continue
        pairs_checked += 1
        if predicted != machine.steps:
            failures.append(f"({pretty(v)}){pretty(u)}: predicted "
                            f"{predicted}, machine {machine.steps}")
    return _result("predictor", failures,
                   f"predictions exact on worked examples and "
                   f"{pairs_checked} corpus pairs")


def check_non_idempotency(bound: int = 10) -> CheckResult:
    """Multiplicities matter: \\z.\\x.(z)x admits the typings where the
    argument multiset of z is used consistently, but not the mixed one."""
    t = parse(r"\z.\x.(z)x")
    empty = Context(())
    cases = [
        ("([([g0],g0)],([g0],g0))", True),
        ("([([g0,g0],g0)],([g0,g0],g0))", True),
        ("([([g0],g0)],([g0,g0],g0))", False),
    ]
    failures = []
    for text, expected in cases:
        ty = parse_type(text)
        got = has_typing(t, empty, ty, bound)
        if got != expected:
            failures.append(f"{text}: typable={got}, expected {expected}")
    return _result("non-idempotency", failures,
                   "[a]a and [a,a](a,a) derivable, mixed typing is not")


def check_lambda_model(bound: int = 4) -> CheckResult:
    """(y)x and (z)x have the same interpretation in every environment
    tried, yet \\x.(y)x and \\x.(z)x differ, so the semantics is not a
    lambda-model."""
    t1 = App(Var("y"), Var("x"))
    t2 = App(Var("z"), Var("x"))
    gamma0 = Atom(0)
    alpha = Arrow(Multiset.of([gamma0]), gamma0)
    failures = []
    pools = [
        [gamma0],
        [alpha],
        [gamma0, alpha],
        [Arrow(Multiset.of([gamma0, gamma0]), gamma0)],
        [gamma0, Arrow(Multiset.of([]), gamma0)],
    ]
    for pool in pools:
        rho = SemEnv.of({"x": pool, "y": [alpha], "z": [alpha]})
        s1 = interpret_in_env(t1, rho, bound)
        s2 = interpret_in_env(t2, rho, bound)
        if s1 != s2:
            failures.append(f"environment case split on pool size "
                            f"{len(pool)}")
    rho = SemEnv.of({"y": [alpha], "z": [alpha]})
    a1 = interpret_in_env(Abs("x", t1), rho, bound)
    a2 = interpret_in_env(Abs("x", t2), rho, bound)
    if a1 == a2:
        failures.append("abstractions \\x.(y)x and \\x.(z)x agree "
                        "but should differ")
    return _result("lambda-model", failures,
                   "applications agree in all environments, "
                   "abstractions differ")


def _judgements(d) -> Iterator[tuple]:
    yield conclusion(d)
    if isinstance(d, AbsNode):
        yield from _judgements(d.premise)
    elif isinstance(d, AppNode):
        yield from _judgements(d.fun_premise)
        for p in d.arg_premises:
            yield from _judgements(p)


def check_sizes(corpus_size: Optional[int] = None,
                fuel: int = DEFAULT_FUEL) -> CheckResult:
    """|gamma| = 1, the ([a..a], a) family has size 2n+3, and on every
    judgement of every extracted derivation the nested-arrow size of the
    typing equals its auxiliary measure."""
    failures = []
    corpus_size = corpus_size or default_corpus_size()
    if type_size(Atom(0)) != 1:
        failures.append("|gamma| != 1")
    gamma = Atom(0)
    alpha = Arrow(Multiset.of([gamma]), gamma)
    for n in range(6):
        point = Arrow(Multiset.of([alpha] * n), alpha)
        if type_size(point) != 2 * n + 3:
            failures.append(f"family n={n}: size {type_size(point)}")
    judgements = 0
    for t in corpus_mod.corpus(corpus_size):
        ex = extract_derivation_head(t, fuel=fuel)
        if ex is None:
            continue
        for ctx, _term, ty in _judgements(ex.derivation):
            judgements += 1
            full = nested_arrow([a for _n, a in ctx.bindings], ty)
            if type_size(full) != type_aux(full):
                failures.append(f"{pretty(t)}: size/aux mismatch on "
                                f"a judgement")
                break
    return _result("sizes", failures,
                   f"size laws hold; size = aux on {judgements} judgements")


SUITES: dict[str, Callable[[], CheckResult]] = {
    "golden-trace": check_golden_trace,
    "church-law": check_church_law,
    "theorem-head": check_head_theorem,
    "theorem-normal-bound": check_beta_theorem,
    "extraction": check_extraction,
    "qualitative": check_qualitative,
    "semantic-bound": check_semantic_bound,
    "predictor": check_predictor,
    "non-idempotency": check_non_idempotency,
    "lambda-model": check_lambda_model,
    "sizes": check_sizes,
}


def run_suites(names: Optional[list[str]] = None) -> list[CheckResult]:
    selected = names or list(SUITES)
    results = []
    for name in selected:
        if name not in SUITES:
            raise KeyError(name)
        results.append(SUITES[name]())
    return results
