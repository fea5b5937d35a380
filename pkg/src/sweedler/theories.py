"""Signatures and presentations of props.

A signature is a set of generating objects plus generators with
list-valued domains and codomains.  A presentation adds equality axioms
(pairs of derivable judgments over the same context and codomain),
named definitions used as macros by the frontend, and the sugar
registrations (one comultiplication/counit pair per object, one dual
pair per object) that make Sweedler and duality notation unambiguous.

Builtin theories live in :mod:`sweedler.builtins`; this module owns the
constructors, validation and the generic signature augmentations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional

from .terms import App, Judgment, Term, Var


class TheoryError(ValueError):
    """A presentation failed validation; ``problems`` has one entry per item."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


@dataclass(frozen=True)
class Signature:
    objects: frozenset[str]
    generators: Mapping[str, tuple[tuple[str, ...], tuple[str, ...]]]

    def __post_init__(self) -> None:
        problems = []
        for name, (dom, cod) in self.generators.items():
            if name in self.objects:
                problems.append(f"generator {name} shadows an object")
            for ty in (*dom, *cod):
                if ty not in self.objects:
                    problems.append(f"generator {name} uses undeclared object {ty}")
        if problems:
            raise TheoryError(problems)

    def dom(self, gen: str) -> tuple[str, ...]:
        return self.generators[gen][0]

    def cod(self, gen: str) -> tuple[str, ...]:
        return self.generators[gen][1]

    def extended(
        self,
        objects: Iterable[str] = (),
        generators: Mapping[str, tuple[tuple[str, ...], tuple[str, ...]]] | None = None,
    ) -> "Signature":
        new_objects = set(self.objects) | set(objects)
        new_gens = dict(self.generators)
        for name, arity in (generators or {}).items():
            if name in new_gens or name in new_objects:
                raise TheoryError([f"name collision on {name}"])
            new_gens[name] = arity
        return Signature(frozenset(new_objects), new_gens)


@dataclass(frozen=True)
class Axiom:
    """``context |- lhs = rhs : cod_types`` with both sides derivable.

    Scalar tuples of the two sides may differ in length.  Axioms are
    stored directionless; a proof step picks the direction.  ``note``
    carries provenance flags such as ``assumed-from-reference``.
    """

    name: str
    context: tuple[tuple[str, str], ...]
    lhs: tuple[tuple[Term, ...], tuple[Term, ...]]
    rhs: tuple[tuple[Term, ...], tuple[Term, ...]]
    cod_types: tuple[str, ...]
    note: str = ""

    def side(self, which: str) -> Judgment:
        mains, scalars = self.lhs if which == "lhs" else self.rhs
        return Judgment(self.context, mains, self.cod_types, scalars)


@dataclass(frozen=True)
class Definition:
    """A named macro: ``name(params) := body``.

    The body is a judgment over the parameter context.  Term-position
    use requires a single main term; the body's scalars are hoisted into
    the enclosing judgment on expansion.
    """

    name: str
    params: tuple[tuple[str, str], ...]
    body: Judgment


@dataclass(frozen=True)
class Presentation:
    name: str
    signature: Signature
    axioms: tuple[Axiom, ...] = ()
    definitions: tuple[Definition, ...] = ()
    # object -> (comult generator, counit generator)
    sweedler: Mapping[str, tuple[str, str]] = field(default_factory=dict)
    # object -> (dual object, eta generator, eps generator)
    duals: Mapping[str, tuple[str, str, str]] = field(default_factory=dict)

    def axiom(self, name: str) -> Axiom:
        for ax in self.axioms:
            if ax.name == name:
                return ax
        raise KeyError(name)

    def definition(self, name: str) -> Optional[Definition]:
        for d in self.definitions:
            if d.name == name:
                return d
        return None


def validate_presentation(p: Presentation) -> Presentation:
    """Check every axiom side and definition body against the type
    checker, and the shape of the sugar registrations.  Returns ``p``
    unchanged on success, raises :class:`TheoryError` with per-item
    diagnostics otherwise."""
    from . import checker

    problems: list[str] = []
    for ax in p.axioms:
        for which in ("lhs", "rhs"):
            try:
                checker.check(p.signature, ax.side(which))
            except (checker.CheckError, ValueError) as e:
                problems.append(f"axiom {ax.name} ({which}): {e}")
    for d in p.definitions:
        try:
            checker.check(p.signature, d.body)
        except (checker.CheckError, ValueError) as e:
            problems.append(f"def {d.name}: {e}")
    for obj, (comult, counit) in p.sweedler.items():
        if p.signature.generators.get(comult) != ((obj,), (obj, obj)):
            problems.append(f"sweedler comultiplication {comult} is not {obj} -> ({obj}, {obj})")
        if p.signature.generators.get(counit) != ((obj,), ()):
            problems.append(f"sweedler counit {counit} is not {obj} -> ()")
    for obj, (dual, eta, eps) in p.duals.items():
        if p.signature.generators.get(eta) != ((), (obj, dual)):
            problems.append(f"duality unit {eta} is not () -> ({obj}, {dual})")
        if p.signature.generators.get(eps) != ((dual, obj), ()):
            problems.append(f"duality counit {eps} is not ({dual}, {obj}) -> ()")
    if problems:
        raise TheoryError(problems)
    return p


def builtin_theory(name: str) -> Presentation:
    from .builtins import builtin_theory as _builtin

    return _builtin(name)


def _dual_axioms(obj: str, dual: str, eta: str, eps: str) -> list[Axiom]:
    x, w = Var("x"), Var("w")
    e1 = App(eta, label="u", index=1)
    e2 = App(eta, label="u", index=2)
    beta = Axiom(
        f"beta_{obj}",
        ((  "x", obj),),
        ((e1,), (App(eps, args=(e2, x)),)),
        ((x,), ()),
        (obj,),
    )
    eta_law = Axiom(
        f"eta_{obj}_law",
        (("w", dual),),
        ((e2,), (App(eps, args=(w, e1)),)),
        ((w,), ()),
        (dual,),
    )
    return [beta, eta_law]


def augment_compact_closed(base: Signature | Presentation) -> Presentation:
    """Add a dual ``A*`` with unit/counit and both zigzag axioms for every
    object.  Existing axioms of a presentation carry over."""
    if isinstance(base, Presentation):
        sig, axioms, defs = base.signature, list(base.axioms), list(base.definitions)
        sweedler, duals = dict(base.sweedler), dict(base.duals)
        name = base.name + "_cc"
    else:
        sig, axioms, defs, sweedler, duals = base, [], [], {}, {}
        name = "compact_closed"
    gens: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {}
    originals = sorted(sig.objects)
    new_objects = []
    for obj in originals:
        dual = obj + "*"
        if dual in sig.objects:
            raise TheoryError([f"dual name {dual} already an object"])
        new_objects.append(dual)
        gens[f"eta_{obj}"] = ((), (obj, dual))
        gens[f"eps_{obj}"] = ((dual, obj), ())
        axioms.extend(_dual_axioms(obj, dual, f"eta_{obj}", f"eps_{obj}"))
        duals[obj] = (dual, f"eta_{obj}", f"eps_{obj}")
    out_sig = sig.extended(new_objects, gens)
    return validate_presentation(
        Presentation(name, out_sig, tuple(axioms), tuple(defs), sweedler, duals)
    )


def _frobenius_family(obj: str, m: str, e: str, comult: str, counit: str) -> list[Axiom]:
    """Commutative, cocommutative, special Frobenius laws on one object."""
    x, y, z = Var("x"), Var("y"), Var("z")
    ctx1 = (("x", obj),)
    ctx2 = (("x", obj), ("y", obj))
    ctx3 = (("x", obj), ("y", obj), ("z", obj))

    def mul(a: Term, b: Term) -> Term:
        return App(m, args=(a, b))

    def d1(t: Term) -> Term:
        return App(comult, index=1, args=(t,))

    def d2(t: Term) -> Term:
        return App(comult, index=2, args=(t,))

    def eps(t: Term) -> Term:
        return App(counit, args=(t,))

    unit = App(e, label="u")
    tag = f"_{obj}"
    return [
        Axiom(f"assoc{tag}", ctx3, ((mul(mul(x, y), z),), ()), ((mul(x, mul(y, z)),), ()), (obj,)),
        Axiom(f"unit_r{tag}", ctx1, ((mul(x, unit),), ()), ((x,), ()), (obj,)),
        Axiom(f"unit_l{tag}", ctx1, ((mul(unit, x),), ()), ((x,), ()), (obj,)),
        Axiom(
            f"coassoc{tag}",
            ctx1,
            ((d1(d1(x)), d2(d1(x)), d2(x)), ()),
            ((d1(x), d1(d2(x)), d2(d2(x))), ()),
            (obj, obj, obj),
        ),
        Axiom(f"counit_r{tag}", ctx1, ((d1(x),), (eps(d2(x)),)), ((x,), ()), (obj,)),
        Axiom(f"counit_l{tag}", ctx1, ((d2(x),), (eps(d1(x)),)), ((x,), ()), (obj,)),
        Axiom(
            f"frobenius{tag}",
            ctx2,
            ((d1(x), mul(d2(x), y)), ()),
            ((mul(x, d1(y)), d2(y)), ()),
            (obj, obj),
        ),
        Axiom(f"comm{tag}", ctx2, ((mul(x, y),), ()), ((mul(y, x),), ()), (obj,)),
        Axiom(f"cocomm{tag}", ctx1, ((d1(x), d2(x)), ()), ((d2(x), d1(x)), ()), (obj, obj)),
        Axiom(f"special{tag}", ctx1, ((mul(d1(x), d2(x)),), ()), ((x,), ()), (obj,)),
    ]


def augment_hypergraph(base: Signature | Presentation) -> Presentation:
    """Add a commutative, cocommutative, special Frobenius structure
    (multiplication, unit, comultiplication, counit) on every object."""
    if isinstance(base, Presentation):
        sig, axioms, defs = base.signature, list(base.axioms), list(base.definitions)
        sweedler, duals = dict(base.sweedler), dict(base.duals)
        name = base.name + "_hy"
    else:
        sig, axioms, defs, sweedler, duals = base, [], [], {}, {}
        name = "hypergraph"
    gens: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {}
    for obj in sorted(sig.objects):
        m, e = f"m_{obj}", f"e_{obj}"
        comult, counit = f"comult_{obj}", f"counit_{obj}"
        gens[m] = ((obj, obj), (obj,))
        gens[e] = ((), (obj,))
        gens[comult] = ((obj,), (obj, obj))
        gens[counit] = ((obj,), ())
        axioms.extend(_frobenius_family(obj, m, e, comult, counit))
        sweedler[obj] = (comult, counit)
    out_sig = sig.extended((), gens)
    return validate_presentation(
        Presentation(name, out_sig, tuple(axioms), tuple(defs), sweedler, duals)
    )


def augment_tensor_type(base: Signature | Presentation, a: str, b: str) -> Presentation:
    """Add a formal tensor-product object for ``a`` and ``b`` with
    pairing/projection generators and their two axioms."""
    if isinstance(base, Presentation):
        sig, axioms, defs = base.signature, list(base.axioms), list(base.definitions)
        sweedler, duals = dict(base.sweedler), dict(base.duals)
        name = base.name
    else:
        sig, axioms, defs, sweedler, duals = base, [], [], {}, {}
        name = "tensor_type"
    for obj in (a, b):
        if obj not in sig.objects:
            raise TheoryError([f"unknown object {obj}"])
    prod = f"tensor_{a}_{b}"
    pair = f"pair_{a}_{b}"
    proj = f"proj_{a}_{b}"
    out_sig = sig.extended(
        [prod], {pair: ((a, b), (prod,)), proj: ((prod,), (a, b))}
    )
    x, y, p = Var("x"), Var("y"), Var("p")

    def pr(k: int, t: Term) -> Term:
        return App(proj, index=k, args=(t,))

    paired = App(pair, args=(x, y))
    axioms = list(axioms) + [
        Axiom(
            f"pair_beta_{a}_{b}",
            (("x", a), ("y", b)),
            ((x, y), ()),
            ((pr(1, paired), pr(2, paired)), ()),
            (a, b),
        ),
        Axiom(
            f"pair_eta_{a}_{b}",
            (("p", prod),),
            ((p,), ()),
            ((App(pair, args=(pr(1, p), pr(2, p))),), ()),
            (prod,),
        ),
    ]
    return validate_presentation(
        Presentation(name, out_sig, tuple(axioms), tuple(defs), sweedler, duals)
    )
