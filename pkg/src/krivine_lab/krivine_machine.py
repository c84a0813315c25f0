"""Two Krivine machine variants over closures, stacks and extended forms.

The machine configurations are:

* states: a head closure plus a stack of argument closures;
* head forms: a variable applied to a sequence of arguments (terms or
  configurations);
* abstractions over configurations.

``run(t, "head", ...)`` counts the steps to the principal head normal form,
``run(t, "beta", ...)`` the steps to the beta-normal form. One transition
performs at most one substitution.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional, Union

from .lambda_core import (
    Abs, App, Term, Var, ensure_variable_convention, pretty, substitute,
)


@dataclass(frozen=True)
class Env:
    """Persistent environment: a shared-tail chain of single bindings."""
    name: Optional[str] = None
    closure: Optional["Closure"] = None
    parent: Optional["Env"] = None

    def lookup(self, name: str) -> Optional["Closure"]:
        env: Optional[Env] = self
        while env is not None and env.name is not None:
            if env.name == name:
                return env.closure
            env = env.parent
        return None

    def bind(self, name: str, closure: "Closure") -> "Env":
        return Env(name, closure, self)

    def domain(self) -> list:
        seen = []
        env: Optional[Env] = self
        while env is not None and env.name is not None:
            if env.name not in seen:
                seen.append(env.name)
            env = env.parent
        return seen

    def is_empty(self) -> bool:
        return self.name is None


EMPTY_ENV = Env()


@dataclass(frozen=True)
class Closure:
    term: Term
    env: Env


@dataclass(frozen=True)
class State:
    head: Closure
    stack: tuple  # tuple[Closure, ...]


# Extended configurations: states, head forms, abstractions over them.

@dataclass(frozen=True)
class St:
    state: State


@dataclass(frozen=True)
class HVar:
    name: str


@dataclass(frozen=True)
class HApp:
    fun: "KForm"       # restricted to HVar/HApp
    arg: Union[Term, "KForm"]


@dataclass(frozen=True)
class KAbs:
    binder: str
    body: "KForm"


KForm = Union[St, HVar, HApp, KAbs]


def is_hform(k: KForm) -> bool:
    return isinstance(k, (HVar, HApp))


# Stuck outcomes of the plain state transition.

@dataclass(frozen=True)
class Next:
    state: State


@dataclass(frozen=True)
class StuckFreeVar:
    pass


@dataclass(frozen=True)
class StuckAbsEmptyStack:
    pass


@dataclass(frozen=True)
class RunReport:
    status: str  # "finished" | "fuel_exhausted"
    steps: int
    final: Optional[KForm]
    trace: Optional[tuple] = None  # tuple[TraceStep, ...]

    @property
    def finished(self) -> bool:
        return self.status == "finished"


@dataclass(frozen=True)
class TraceStep:
    index: int
    rule: str
    form: KForm


def realize(k) -> Term:
    """Flatten a configuration back to a lambda-term (the map k -> k-bar)."""
    if isinstance(k, Closure):
        if k.env.is_empty():
            return k.term
        subst = {x: realize(k.env.lookup(x)) for x in k.env.domain()}
        return substitute(k.term, subst)
    if isinstance(k, State):
        t = realize(k.head)
        for c in k.stack:
            t = App(t, realize(c))
        return t
    if isinstance(k, St):
        return realize(k.state)
    if isinstance(k, HVar):
        return Var(k.name)
    if isinstance(k, HApp):
        arg = k.arg if isinstance(k.arg, (Var, Abs, App)) else realize(k.arg)
        return App(realize(k.fun), arg)
    if isinstance(k, KAbs):
        return Abs(k.binder, realize(k.body))
    # Plain terms realize to themselves.
    return k


def step_state(s: State):
    """The five cases of the basic state transition."""
    t, e = s.head.term, s.head.env
    if isinstance(t, Var):
        c = e.lookup(t.name)
        if c is None:
            return StuckFreeVar()
        return Next(State(c, s.stack))
    if isinstance(t, Abs):
        if not s.stack:
            return StuckAbsEmptyStack()
        c, rest = s.stack[0], s.stack[1:]
        return Next(State(Closure(t.body, e.bind(t.binder, c)), rest))
    return Next(State(Closure(t.fun, e), (Closure(t.arg, e),) + s.stack))


def _state_rule(s: State) -> str:
    t = s.head.term
    if isinstance(t, Var):
        return "lookup" if s.head.env.lookup(t.name) is not None else "stuck-var"
    if isinstance(t, Abs):
        return "bind" if s.stack else "under-lambda"
    return "push"


def _happ_of(head: KForm, args) -> KForm:
    k = head
    for a in args:
        k = HApp(k, a)
    return k


def step_h(k: KForm) -> Optional[KForm]:
    """One head-machine transition, or None on head forms (no rule applies)."""
    if isinstance(k, St):
        s = k.state
        outcome = step_state(s)
        if isinstance(outcome, Next):
            return St(outcome.state)
        if isinstance(outcome, StuckFreeVar):
            # Collapse stack arguments to realized lambda-terms.
            x = s.head.term.name
            result = _happ_of(HVar(x), [realize(c) for c in s.stack])
            return result
        # Abstraction with empty stack: move under the lambda.
        t = s.head.term
        return KAbs(t.binder, St(State(Closure(t.body, s.head.env), ())))
    if isinstance(k, KAbs):
        body = step_h(k.body)
        return None if body is None else KAbs(k.binder, body)
    return None  # head forms are terminal


def step_beta(k: KForm) -> Optional[KForm]:
    """One beta-machine transition; differs from the head machine only at a
    stuck free variable, where stack closures are re-launched as states and
    then reduced left to right."""
    if isinstance(k, St):
        s = k.state
        outcome = step_state(s)
        if isinstance(outcome, Next):
            return St(outcome.state)
        if isinstance(outcome, StuckFreeVar):
            x = s.head.term.name
            args = [St(State(c, ())) for c in s.stack]
            return _happ_of(HVar(x), args)
        t = s.head.term
        return KAbs(t.binder, St(State(Closure(t.body, s.head.env), ())))
    if isinstance(k, KAbs):
        body = step_beta(k.body)
        return None if body is None else KAbs(k.binder, body)
    if isinstance(k, HApp):
        fun = step_beta(k.fun)
        if fun is not None:
            return HApp(fun, k.arg)
        if not isinstance(k.arg, (Var, Abs, App)):
            arg = step_beta(k.arg)
            if arg is not None:
                return HApp(k.fun, arg)
        return None
    return None  # HVar


def _step_rule(k: KForm, machine: str) -> str:
    """Name of the rule the next transition applies, for traces."""
    if isinstance(k, St):
        return _state_rule(k.state)
    if isinstance(k, KAbs):
        return _step_rule(k.body, machine)
    if isinstance(k, HApp):
        if machine == "beta":
            if step_beta(k.fun) is not None:
                return _step_rule(k.fun, machine)
            return "arg-descent"
        return "none"
    return "none"


def initial_form(t: Term) -> KForm:
    return St(State(Closure(t, EMPTY_ENV), ()))


def default_fuel() -> int:
    """Step budget, overridable through the KRIVINE_LAB_FUEL variable."""
    return int(os.environ.get("KRIVINE_LAB_FUEL", "100000"))


def run(t: Term, machine: str, fuel: Optional[int] = None,
        want_trace: bool = False) -> RunReport:
    """Iterate the chosen machine from (t, empty-env) . empty-stack."""
    if machine not in ("head", "beta"):
        raise ValueError(f"unknown machine {machine!r}")
    if fuel is None:
        fuel = default_fuel()
    step = step_h if machine == "head" else step_beta
    k = initial_form(ensure_variable_convention(t))
    trace: list = []
    steps = 0
    while steps < fuel:
        rule = _step_rule(k, machine) if want_trace else None
        nxt = step(k)
        if nxt is None:
            return RunReport("finished", steps, k, tuple(trace) if want_trace else None)
        steps += 1
        k = nxt
        if want_trace:
            trace.append(TraceStep(steps, rule, k))
    if step(k) is None:
        return RunReport("finished", steps, k, tuple(trace) if want_trace else None)
    return RunReport("fuel_exhausted", steps, None, tuple(trace) if want_trace else None)


def _canon_closure(c: Closure, free_vars_of, memo: dict, resolve: bool = True):
    """Hashable closure serialization with variable-chain closures in the
    environment resolved, so environments that only differ by indirection
    compare equal. The head term itself is kept literal (resolve=False) so
    that a lookup transition changes the serialization."""
    key = (c, resolve)
    if key in memo:
        return memo[key]
    if resolve:
        while isinstance(c.term, Var):
            target = c.env.lookup(c.term.name)
            if target is None:
                break
            c = target
    entries = tuple((x, _canon_closure(c.env.lookup(x), free_vars_of, memo))
                    for x in sorted(free_vars_of(c.term))
                    if c.env.lookup(x) is not None)
    result = (c.term, entries)
    memo[key] = result
    return result


def _canon_form(k: KForm, free_vars_of, memo: dict):
    if isinstance(k, St):
        s = k.state
        return ("st", _canon_closure(s.head, free_vars_of, memo, resolve=False),
                tuple(_canon_closure(c, free_vars_of, memo) for c in s.stack))
    if isinstance(k, KAbs):
        return ("abs", k.binder, _canon_form(k.body, free_vars_of, memo))
    if isinstance(k, HApp):
        arg = (_canon_form(k.arg, free_vars_of, memo)
               if isinstance(k.arg, (St, HVar, HApp, KAbs)) else k.arg)
        return ("app", _canon_form(k.fun, free_vars_of, memo), arg)
    return ("var", k.name)


def detect_cycle(t: Term, machine: str, fuel: int) -> bool:
    """True if the run revisits a canonical configuration within `fuel`
    steps; loops like the one of (\\x.(x)x)\\x.(x)x grow their environments
    without changing the canonical serialization."""
    from .lambda_core import free_vars
    step = step_h if machine == "head" else step_beta
    k = initial_form(ensure_variable_convention(t))
    memo: dict = {}
    seen = {_canon_form(k, free_vars, memo)}
    for _ in range(fuel):
        nxt = step(k)
        if nxt is None:
            return False
        k = nxt
        canon = _canon_form(k, free_vars, memo)
        if canon in seen:
            return True
        seen.add(canon)
    return False


# Trace rendering: the tabular layout (output / current subterm /
# environment / stack) plus a structured JSON form.

def _env_str(e: Env) -> str:
    names = e.domain()
    if not names:
        return "{}"
    items = ", ".join(f"{x} -> {_closure_str(e.lookup(x))}" for x in names)
    return "{" + items + "}"


def _closure_str(c: Closure) -> str:
    return f"({pretty(c.term)}, {_env_str(c.env)})"


def _form_row(k: KForm, output: str = "") -> tuple:
    """(output, current subterm, environment, stack) for one trace line."""
    if isinstance(k, KAbs):
        return _form_row(k.body, output + f"\\{k.binder}.")
    if isinstance(k, St):
        s = k.state
        stack = ", ".join(_closure_str(c) for c in s.stack)
        return (output, pretty(s.head.term), _env_str(s.head.env), stack)
    return (output + pretty(realize(k)), "", "", "")


def trace_table(report: RunReport) -> str:
    if report.trace is None:
        raise ValueError("run was executed without want_trace")
    lines = ["step | rule | output | current subterm | environment | stack"]
    for entry in report.trace:
        out, cur, env, stack = _form_row(entry.form)
        lines.append(f"{entry.index} | {entry.rule} | {out} | {cur} | {env} | {stack}")
    return "\n".join(lines)


def trace_json(report: RunReport) -> str:
    if report.trace is None:
        raise ValueError("run was executed without want_trace")
    records = [
        {"step": entry.index, "rule": entry.rule,
         "realized": pretty(realize(entry.form))}
        for entry in report.trace
    ]
    return json.dumps(records, indent=2)
