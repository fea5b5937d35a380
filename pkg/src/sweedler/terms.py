"""Term and judgment syntax for prop morphisms.

Terms are immutable trees.  A term is either a context variable or a
generator form: an applied component ``f.k(args)``, a labeled component
``f^a.k`` of a generator with empty domain, or a bare scalar atom ``f``
for generators with empty domain and codomain.  Judgments pair a context
with a tuple of main terms (one per codomain type) and a tuple of scalar
terms (morphisms into the unit).

Structural equality and hashing come from the dataclasses, so grouping
terms by syntactic identity is a dict lookup.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional, Union


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class App:
    """One component of a generator application.

    ``label`` is present iff the generator has empty domain and nonempty
    codomain; ``index`` is present iff the codomain has length >= 2 (then
    ``1 <= index``).  Scalar atoms (empty domain and codomain) carry
    neither.  Components of the same application share the ``args`` tuple
    syntactically.
    """

    gen: str
    label: Optional[str] = None
    index: Optional[int] = None
    args: tuple["Term", ...] = ()

    def __str__(self) -> str:
        out = self.gen
        if self.label is not None:
            out += f"^{self.label}"
        if self.index is not None:
            out += f".{self.index}"
        if self.args:
            out += "(" + ", ".join(str(a) for a in self.args) + ")"
        return out


Term = Union[Var, App]

# A location is ("main"|"scalar", tuple index, argument path).
Location = tuple[str, int, tuple[int, ...]]


@dataclass(frozen=True)
class Judgment:
    """``context |- (main_terms | scalars) : main_types``.

    Construction only enforces shape invariants (matching lengths,
    distinct context variables); derivability is the checker's job.
    Activeness annotations are never stored, they are recomputed from
    term depths.
    """

    context: tuple[tuple[str, str], ...]
    main_terms: tuple[Term, ...]
    main_types: tuple[str, ...]
    scalars: tuple[Term, ...] = ()

    def __post_init__(self) -> None:
        if len(self.main_terms) != len(self.main_types):
            raise ValueError(
                f"{len(self.main_terms)} main terms for "
                f"{len(self.main_types)} codomain types"
            )
        names = [v for v, _ in self.context]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate context variable in {names}")

    @property
    def context_types(self) -> tuple[str, ...]:
        return tuple(ty for _, ty in self.context)

    def __str__(self) -> str:
        ctx = ", ".join(f"{v}:{t}" for v, t in self.context)
        left = ctx + " |- " if ctx else "|- "
        mains = ", ".join(str(t) for t in self.main_terms)
        if self.scalars:
            body = f"({mains} | " + ", ".join(str(s) for s in self.scalars) + ")"
        else:
            body = f"({mains})"
        types = "(" + ", ".join(self.main_types) + ")"
        return f"{left}{body} : {types}"


def depth(t: Term) -> int:
    """Rank of the head symbol in the syntax tree.

    Variables and argument-free generator forms have depth 0; an applied
    component has depth one more than the maximum depth of its arguments.
    """
    if isinstance(t, Var) or not t.args:
        return 0
    return 1 + max(depth(a) for a in t.args)


def substitute(t: Term, binding: Mapping[str, Term]) -> Term:
    """Simultaneous (non-iterated) substitution; unbound variables stay."""
    if isinstance(t, Var):
        return binding.get(t.name, t)
    if not t.args:
        return t
    return App(t.gen, t.label, t.index, tuple(substitute(a, binding) for a in t.args))


def substitute_judgment(j: Judgment, binding: Mapping[str, Term]) -> tuple[tuple[Term, ...], tuple[Term, ...]]:
    return (
        tuple(substitute(m, binding) for m in j.main_terms),
        tuple(substitute(s, binding) for s in j.scalars),
    )


def subterms(t: Term) -> Iterator[tuple[Term, tuple[int, ...]]]:
    """All subterm occurrences of ``t`` in pre-order, with argument paths."""
    stack: list[tuple[Term, tuple[int, ...]]] = [(t, ())]
    while stack:
        cur, path = stack.pop()
        yield cur, path
        if isinstance(cur, App):
            for i in range(len(cur.args) - 1, -1, -1):
                stack.append((cur.args[i], path + (i,)))


def head_occurrences(j: Judgment) -> list[tuple[Term, Location]]:
    """Every subterm occurrence across mains and scalars, left to right,
    each tree in pre-order.  The ordering is total and stable."""
    out: list[tuple[Term, Location]] = []
    for i, m in enumerate(j.main_terms):
        for t, path in subterms(m):
            out.append((t, ("main", i, path)))
    for i, s in enumerate(j.scalars):
        for t, path in subterms(s):
            out.append((t, ("scalar", i, path)))
    return out


def term_labels(t: Term) -> set[str]:
    return {sub.label for sub, _ in subterms(t) if isinstance(sub, App) and sub.label is not None}


def labels_of(j: Judgment) -> set[str]:
    out: set[str] = set()
    for t in (*j.main_terms, *j.scalars):
        out |= term_labels(t)
    return out


def term_vars(t: Term) -> list[str]:
    """Variable leaves in pre-order (with multiplicity)."""
    return [sub.name for sub, _ in subterms(t) if isinstance(sub, Var)]


class RelabelError(ValueError):
    pass


def relabel_term(t: Term, sigma: Mapping[str, str]) -> Term:
    if isinstance(t, Var):
        return t
    label = t.label
    if label is not None:
        if label not in sigma:
            raise RelabelError(f"no image for label {label!r}")
        label = sigma[label]
    return App(t.gen, label, t.index, tuple(relabel_term(a, sigma) for a in t.args))


def relabel(j: Judgment, sigma: Mapping[str, str]) -> Judgment:
    """Rename every label through ``sigma``; all other structure is kept.

    ``sigma`` must be defined and injective on the labels occurring in
    ``j`` (it may be partial elsewhere).
    """
    occurring = labels_of(j)
    images = [sigma[a] for a in occurring if a in sigma]
    if len(occurring - sigma.keys()) > 0:
        missing = sorted(occurring - sigma.keys())
        raise RelabelError(f"labels without image: {missing}")
    if len(set(images)) != len(images):
        raise RelabelError("label map is not injective on occurring labels")
    return Judgment(
        j.context,
        tuple(relabel_term(m, sigma) for m in j.main_terms),
        j.main_types,
        tuple(relabel_term(s, sigma) for s in j.scalars),
    )


def term_key(t: Term):
    """Fixed total order on terms: Var < App, then lexicographic on
    (name, label, index, args).  Shared by canonicalization and printing
    so there is a single ordering in the artifact."""
    if isinstance(t, Var):
        return (0, t.name)
    return (
        1,
        t.gen,
        t.label is not None,
        t.label or "",
        t.index or 0,
        tuple(term_key(a) for a in t.args),
    )


def is_subterm(small: Term, big: Term) -> bool:
    if small == big:
        return True
    if isinstance(big, App):
        return any(is_subterm(small, a) for a in big.args)
    return False


def fresh_names(base: str, taken: set[str]) -> Iterator[str]:
    """Candidate names ``base``, ``base'``, ``base''``, ... not in ``taken``."""
    cand = base
    while True:
        if cand not in taken:
            yield cand
            taken = taken | {cand}
        cand += "'"
