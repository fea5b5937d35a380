"""Type checking by unique-derivation reconstruction.

A derivable judgment has exactly one derivation, and the checker finds
it without search: the global maximum depth over main *and* scalar terms
says which rule came last (depth 0: the identity rule, otherwise a
generator rule whose applications are the maximal-depth terms), and the
maximal-depth terms group into applications by their argument tuples.
The reconstruction peels one layer per depth level, so a judgment with
maximum depth d yields an identity node under d generator nodes.

``check_derivation`` replays a derivation tree back into its judgment,
validating every side condition; ``check`` and ``check_derivation`` are
mutually inverse on valid inputs.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Optional, Union

from .terms import App, Judgment, Term, Var, depth, is_subterm
from .theories import Signature


class CheckError(Exception):
    """Base class for checker diagnostics.  ``span`` is attached by the
    frontend when the judgment came from source text."""

    span = None

    def __init__(self, message: str):
        super().__init__(message)


class UnknownGenerator(CheckError):
    def __init__(self, gen: str):
        self.gen = gen
        super().__init__(f"unknown generator {gen}")


class ArityMismatch(CheckError):
    pass


class TypeMismatch(CheckError):
    def __init__(self, position: int, expected: str, got: str):
        self.position, self.expected, self.got = position, expected, got
        super().__init__(
            f"position {position + 1}: term has type {expected} but {got} is declared"
        )


class VariableUsage(CheckError):
    def __init__(self, var: str, count: int):
        self.var, self.count = var, count
        super().__init__(f"variable {var} used {count} times (need exactly 1)")


class IncompleteComponentGroup(CheckError):
    def __init__(self, gen: str, missing: list):
        self.gen, self.missing = gen, missing
        super().__init__(f"application of {gen} is missing components {missing}")


class DuplicateComponent(CheckError):
    def __init__(self, gen: str, index):
        self.gen, self.index = gen, index
        super().__init__(f"component {index} of {gen} occurs twice")


class LabelClash(CheckError):
    def __init__(self, label: str):
        self.label = label
        super().__init__(f"label {label} is attached to two different generators")


class MisplacedLabel(CheckError):
    pass


class SharedArgument(CheckError):
    def __init__(self, term: Term):
        self.term = term
        super().__init__(f"term {term} consumed twice")


class ScalarAtomInMainPosition(CheckError):
    def __init__(self, term: Term, position: int):
        self.term = term
        super().__init__(
            f"position {position + 1}: {term} has empty codomain, it belongs right of the bar"
        )


class NotDerivable(CheckError):
    pass


@dataclass(frozen=True)
class Activeness:
    """Mask over codomain positions; a position is active iff its term's
    head depth attains the global maximum over mains and scalars."""

    mask: tuple[bool, ...]

    def positions(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.mask) if b)


@dataclass(frozen=True)
class GenApp:
    gen: str
    arg_positions: tuple[int, ...]


@dataclass(frozen=True)
class IdentityNode:
    context: tuple[tuple[str, str], ...]
    labeled_gens: tuple[tuple[str, str], ...]
    scalar_gens: tuple[str, ...]
    sigma: tuple[int, ...]


@dataclass(frozen=True)
class GeneratorNode:
    premise: "Derivation"
    apps: tuple[GenApp, ...]
    scalar_apps: tuple[GenApp, ...]
    sigma: tuple[int, ...]
    tau: tuple[int, ...]


Derivation = Union[IdentityNode, GeneratorNode]


def max_depth(j: Judgment) -> int:
    depths = [depth(t) for t in (*j.main_terms, *j.scalars)]
    return max(depths, default=0)


def infer_activeness(sig: Signature, j: Judgment) -> Activeness:
    d = max_depth(j)
    return Activeness(tuple(depth(t) == d for t in j.main_terms))


def assert_distinct_subterms(j: Judgment) -> None:
    """Lemma-style invariant of derivable judgments: no main term is a
    subterm of a different main term."""
    for i, a in enumerate(j.main_terms):
        for k, b in enumerate(j.main_terms):
            if i != k and is_subterm(a, b):
                raise NotDerivable(
                    f"main term {i + 1} ({a}) is a subterm of main term {k + 1} ({b})"
                )


def _generator_arity(sig: Signature, gen: str) -> tuple[tuple[str, ...], tuple[str, ...]]:
    if gen not in sig.generators:
        raise UnknownGenerator(gen)
    return sig.generators[gen]


def _prevalidate_term(sig: Signature, ctx: dict, t: Term, typed: bool) -> None:
    """Arity well-formedness: known names, argument counts, label and
    index placement, and no empty-codomain term where a typed term is
    required (``typed``)."""
    if isinstance(t, Var):
        if t.name not in ctx:
            raise NotDerivable(f"unknown variable {t.name}")
        return
    dom, cod = _generator_arity(sig, t.gen)
    if len(t.args) != len(dom):
        raise ArityMismatch(f"{t.gen} takes {len(dom)} arguments, got {len(t.args)}")
    needs_label = not dom and cod
    if (t.label is not None) != bool(needs_label):
        if t.label is not None:
            raise MisplacedLabel(f"label on {t.gen}, which has nonempty domain or empty codomain")
        raise MisplacedLabel(f"missing label on nullary-domain generator {t.gen}")
    if len(cod) >= 2:
        if t.index is None:
            raise ArityMismatch(f"{t.gen} has {len(cod)} outputs, a component index is required")
        if not 1 <= t.index <= len(cod):
            raise ArityMismatch(f"component index {t.index} out of range for {t.gen}")
    elif t.index is not None:
        raise ArityMismatch(f"{t.gen} has at most one output, no component index allowed")
    if typed and not cod:
        raise NotDerivable(f"{t} has empty codomain but is used where a typed term is required")
    for a in t.args:
        _prevalidate_term(sig, ctx, a, typed=True)


def _term_type(sig: Signature, ctx: dict, t: Term) -> Optional[str]:
    if isinstance(t, Var):
        return ctx[t.name]
    cod = sig.generators[t.gen][1]
    if not cod:
        return None
    return cod[t.index - 1] if t.index is not None else cod[0]


def check(sig: Signature, j: Judgment) -> Derivation:
    """Reconstruct the unique derivation of ``j`` or raise a diagnostic."""
    ctx = dict(j.context)
    if len(ctx) != len(j.context):
        raise NotDerivable("duplicate context variable")
    for i, t in enumerate(j.main_terms):
        if isinstance(t, App):
            cod = _generator_arity(sig, t.gen)[1]
            if not cod:
                raise ScalarAtomInMainPosition(t, i)
        _prevalidate_term(sig, ctx, t, typed=True)
    for s in j.scalars:
        if isinstance(s, Var):
            raise NotDerivable(f"variable {s} in scalar position")
        if _generator_arity(sig, s.gen)[1]:
            raise NotDerivable(f"{s} has a type, it cannot be a scalar term")
        _prevalidate_term(sig, ctx, s, typed=False)
    return _peel(sig, j.context, ctx, j.main_terms, j.main_types, j.scalars)


def _peel(
    sig: Signature,
    context: tuple[tuple[str, str], ...],
    ctx: dict,
    mains: tuple[Term, ...],
    mtypes: tuple[str, ...],
    scalars: tuple[Term, ...],
) -> Derivation:
    d = max((depth(t) for t in (*mains, *scalars)), default=0)
    if d == 0:
        return _identity_layer(sig, context, ctx, mains, mtypes, scalars)

    new_main = [i for i, t in enumerate(mains) if depth(t) == d]
    new_scal = [i for i, s in enumerate(scalars) if depth(s) == d]

    # Group the maximal-depth terms into applications: components with the
    # same generator and argument tuple are one application.
    main_groups: dict[tuple, dict] = {}
    order_key: dict[tuple, int] = {}
    for pos in new_main:
        t = mains[pos]
        cod = sig.generators[t.gen][1]
        comp_ty = cod[t.index - 1] if t.index is not None else cod[0]
        if comp_ty != mtypes[pos]:
            raise TypeMismatch(pos, comp_ty, mtypes[pos])
        key = (t.gen, t.args)
        group = main_groups.setdefault(key, {})
        idx = t.index if t.index is not None else 1
        if idx in group:
            raise DuplicateComponent(t.gen, t.index)
        group[idx] = pos
        if idx == 1:
            order_key[key] = pos
    for (gen, args), group in main_groups.items():
        n = len(sig.generators[gen][1])
        missing = sorted(set(range(1, n + 1)) - group.keys())
        if missing:
            raise IncompleteComponentGroup(gen, missing)
    ordered_main = sorted(main_groups, key=lambda k: order_key[k])

    scal_groups: dict[tuple, int] = {}
    for pos in new_scal:
        s = scalars[pos]
        key = (s.gen, s.args)
        if key in scal_groups:
            raise SharedArgument(s)
        scal_groups[key] = pos
    ordered_scal = sorted(scal_groups, key=lambda k: scal_groups[k])

    # Premise: consumed arguments first (in application order), then the
    # untouched terms in their given order.
    apps: list[GenApp] = []
    scalar_apps: list[GenApp] = []
    premise_mains: list[Term] = []
    premise_types: list[str] = []
    seen_args: set[Term] = set()
    cursor = 0
    for key in (*ordered_main, *ordered_scal):
        gen, args = key
        dom = sig.generators[gen][0]
        for a, ty in zip(args, dom):
            if a in seen_args:
                raise SharedArgument(a)
            seen_args.add(a)
            premise_mains.append(a)
            premise_types.append(ty)
        app = GenApp(gen, tuple(range(cursor, cursor + len(dom))))
        cursor += len(dom)
        (apps if key in main_groups else scalar_apps).append(app)

    new_main_set = set(new_main)
    old_main = [i for i in range(len(mains)) if i not in new_main_set]
    for i in old_main:
        if mains[i] in seen_args:
            raise SharedArgument(mains[i])
        premise_mains.append(mains[i])
        premise_types.append(mtypes[i])
    new_scal_set = set(new_scal)
    old_scal = [i for i in range(len(scalars)) if i not in new_scal_set]
    premise_scalars = tuple(scalars[i] for i in old_scal)

    premise = _peel(
        sig, context, ctx, tuple(premise_mains), tuple(premise_types), premise_scalars
    )

    # Depth stratification: the peeled layer removed exactly one level.
    pd = max(
        (depth(t) for t in (*premise_mains, *premise_scalars)), default=0
    )
    assert pd == d - 1, "peeling did not lower the maximum depth by one"

    sigma: list[int] = []
    for key in ordered_main:
        gen, _ = key
        n = len(sig.generators[gen][1])
        group = main_groups[key]
        sigma.extend(group[k] for k in range(1, n + 1))
    sigma.extend(old_main)
    tau = [scal_groups[key] for key in ordered_scal] + old_scal
    return GeneratorNode(premise, tuple(apps), tuple(scalar_apps), tuple(sigma), tuple(tau))


def _identity_layer(
    sig: Signature,
    context: tuple[tuple[str, str], ...],
    ctx: dict,
    mains: tuple[Term, ...],
    mtypes: tuple[str, ...],
    scalars: tuple[Term, ...],
) -> IdentityNode:
    var_pos: dict[str, int] = {}
    var_count: Counter = Counter()
    groups: dict[tuple[str, str], dict] = {}
    label_owner: dict[str, str] = {}
    order_key: dict[tuple[str, str], int] = {}
    for pos, (t, ty) in enumerate(zip(mains, mtypes)):
        if isinstance(t, Var):
            if ctx[t.name] != ty:
                raise TypeMismatch(pos, ctx[t.name], ty)
            var_count[t.name] += 1
            var_pos[t.name] = pos
            continue
        assert not t.args, "depth-0 application with arguments"
        dom, cod = sig.generators[t.gen]
        if dom:
            raise NotDerivable(f"{t.gen} needs arguments")
        comp_ty = cod[t.index - 1] if t.index is not None else cod[0]
        if comp_ty != ty:
            raise TypeMismatch(pos, comp_ty, ty)
        if t.label in label_owner and label_owner[t.label] != t.gen:
            raise LabelClash(t.label)
        label_owner[t.label] = t.gen
        group = groups.setdefault((t.gen, t.label), {})
        idx = t.index if t.index is not None else 1
        if idx in group:
            raise DuplicateComponent(t.gen, t.index)
        group[idx] = pos
        if idx == 1:
            order_key[(t.gen, t.label)] = pos
    for name in ctx:
        if var_count[name] != 1:
            raise VariableUsage(name, var_count[name])
    for (gen, label), group in groups.items():
        n = len(sig.generators[gen][1])
        missing = sorted(set(range(1, n + 1)) - group.keys())
        if missing:
            raise IncompleteComponentGroup(gen, missing)
    for s in scalars:
        dom, cod = sig.generators[s.gen]
        if dom or cod:
            raise NotDerivable(f"{s} is not a scalar atom")

    ordered = sorted(groups, key=lambda k: order_key[k])
    sigma = [var_pos[name] for name, _ in context]
    for key in ordered:
        gen, _ = key
        n = len(sig.generators[gen][1])
        sigma.extend(groups[key][k] for k in range(1, n + 1))
    return IdentityNode(
        context, tuple(ordered), tuple(s.gen for s in scalars), tuple(sigma)
    )


class InvalidDerivation(CheckError):
    pass


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise InvalidDerivation(message)


def _is_permutation(p: tuple[int, ...]) -> bool:
    return sorted(p) == list(range(len(p)))


def check_derivation(sig: Signature, d: Derivation) -> Judgment:
    """Replay ``d`` through the typing rules, validating every side
    condition, and return the concluded judgment.  Round trip law:
    ``check(sig, check_derivation(sig, d)) == d``."""
    if isinstance(d, IdentityNode):
        canonical: list[Term] = [Var(v) for v, _ in d.context]
        ctypes: list[str] = [t for _, t in d.context]
        first_comp_idx: list[int] = []
        seen_labels: set[str] = set()
        for gen, label in d.labeled_gens:
            dom, cod = _generator_arity(sig, gen)
            _require(not dom and cod, f"{gen} cannot appear in the identity rule")
            _require(label not in seen_labels, f"label {label} repeated")
            seen_labels.add(label)
            first_comp_idx.append(len(canonical))
            if len(cod) == 1:
                canonical.append(App(gen, label=label))
            else:
                canonical.extend(
                    App(gen, label=label, index=k) for k in range(1, len(cod) + 1)
                )
            ctypes.extend(cod)
        _require(_is_permutation(d.sigma), "sigma is not a permutation")
        _require(len(d.sigma) == len(canonical), "sigma has the wrong size")
        firsts = [d.sigma[i] for i in first_comp_idx]
        _require(firsts == sorted(firsts), "sigma reorders first components")
        mains: list = [None] * len(canonical)
        mtypes: list = [None] * len(canonical)
        for i, t in enumerate(canonical):
            mains[d.sigma[i]] = t
            mtypes[d.sigma[i]] = ctypes[i]
        for gen in d.scalar_gens:
            dom, cod = _generator_arity(sig, gen)
            _require(not dom and not cod, f"{gen} is not a scalar atom")
        scalars = tuple(App(gen) for gen in d.scalar_gens)
        return Judgment(d.context, tuple(mains), tuple(mtypes), scalars)

    premise = check_derivation(sig, d.premise)
    _require(len(d.apps) + len(d.scalar_apps) > 0, "generator node applies nothing")
    prem_depths = [depth(t) for t in (*premise.main_terms, *premise.scalars)]
    prem_max = max(prem_depths, default=0)
    active = {
        i for i, t in enumerate(premise.main_terms) if depth(t) == prem_max
    }
    cursor = 0
    outputs: list[Term] = []
    otypes: list[str] = []
    first_comp_idx = []
    tagged = [(a, False) for a in d.apps] + [(a, True) for a in d.scalar_apps]
    for app, is_scalar in tagged:
        dom, cod = _generator_arity(sig, app.gen)
        _require(len(dom) >= 1, f"{app.gen} has empty domain, it belongs in the identity rule")
        _require(
            bool(cod) != is_scalar,
            f"{app.gen} listed on the wrong side of the rule",
        )
        _require(
            app.arg_positions == tuple(range(cursor, cursor + len(dom))),
            "argument positions are not the canonical front blocks",
        )
        cursor += len(dom)
        args = tuple(premise.main_terms[p] for p in app.arg_positions)
        _require(
            tuple(premise.main_types[p] for p in app.arg_positions) == dom,
            f"argument types do not match the domain of {app.gen}",
        )
        _require(
            any(p in active for p in app.arg_positions),
            f"application of {app.gen} has no active input",
        )
        if not is_scalar:
            first_comp_idx.append(len(outputs))
            if len(cod) == 1:
                outputs.append(App(app.gen, args=args))
            else:
                outputs.extend(
                    App(app.gen, index=k, args=args) for k in range(1, len(cod) + 1)
                )
            otypes.extend(cod)
    olds = list(range(cursor, len(premise.main_terms)))
    canonical = outputs + [premise.main_terms[p] for p in olds]
    ctypes = otypes + [premise.main_types[p] for p in olds]
    _require(_is_permutation(d.sigma) and len(d.sigma) == len(canonical), "bad sigma")
    firsts = [d.sigma[i] for i in first_comp_idx]
    _require(firsts == sorted(firsts), "sigma reorders first components")
    inert = [d.sigma[i] for i in range(len(outputs), len(canonical))]
    _require(inert == sorted(inert), "sigma reorders inert positions")
    mains = [None] * len(canonical)
    mtypes = [None] * len(canonical)
    for i, t in enumerate(canonical):
        mains[d.sigma[i]] = t
        mtypes[d.sigma[i]] = ctypes[i]
    new_scalars = [
        App(app.gen, args=tuple(premise.main_terms[p] for p in app.arg_positions))
        for app in d.scalar_apps
    ]
    cscalars = new_scalars + list(premise.scalars)
    _require(_is_permutation(d.tau) and len(d.tau) == len(cscalars), "bad tau")
    news = [d.tau[i] for i in range(len(new_scalars))]
    _require(news == sorted(news), "tau reorders new scalar terms")
    oldss = [d.tau[i] for i in range(len(new_scalars), len(cscalars))]
    _require(oldss == sorted(oldss), "tau reorders old scalar terms")
    scalars = [None] * len(cscalars)
    for i, s in enumerate(cscalars):
        scalars[d.tau[i]] = s
    out = Judgment(premise.context, tuple(mains), tuple(mtypes), tuple(scalars))
    assert max_depth(out) == prem_max + 1, "generator node did not raise the depth by one"
    return out
