"""Equality of prop morphisms and equational proof checking.

Two derivable judgments denote the same morphism of the free prop iff
they agree up to a bijective renaming of labels and a permutation of the
scalar tuple; ``free_equal`` decides this and returns the witness.
``canonicalize`` picks a canonical representative of the equivalence
class so equality becomes string comparison.

Over a presented prop, equality is generated by the presentation's
axioms under reflexivity, symmetry, transitivity and congruence with
composition and tensor.  A proof script is a chain of judgments, each
obtained from the previous by one axiom application with explicit
witnesses: the step provides U and V such that

    previous  ==  U ; (id_Phi (x) axiom_from_side) ; V      (up to free equality)
    next      ==  U ; (id_Phi (x) axiom_to_side) ; V

``apply_axiom_step`` re-assembles both sides with the kernel operations
and verifies the free equalities, so a checked proof never trusts the
search that produced the witnesses.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

from . import algebra
from .checker import CheckError, check
from .terms import (
    App,
    Judgment,
    Term,
    Var,
    fresh_names,
    head_occurrences,
    is_subterm,
    labels_of,
    relabel,
    subterms,
    term_key,
)
from .theories import Axiom, Presentation, Signature

DEFAULT_CANON_BOUND = 40320  # 8! label assignments per ambiguity class
DEFAULT_SEARCH_BOUND = 200_000


class SearchBoundExceeded(Exception):
    pass


@dataclass(frozen=True)
class EqualityWitness:
    """``relabel(j1, sigma)`` with scalar i moved to position ``rho[i]``
    is syntactically identical to ``j2``."""

    sigma: tuple[tuple[str, str], ...]
    rho: tuple[int, ...]


def _unify_terms(a: Term, b: Term, sigma: dict, image: set) -> bool:
    """Extend ``sigma`` (labels of ``a`` to labels of ``b``) so the two
    terms become identical; ``image`` tracks injectivity."""
    if isinstance(a, Var) or isinstance(b, Var):
        return a == b
    if a.gen != b.gen or a.index != b.index or len(a.args) != len(b.args):
        return False
    if (a.label is None) != (b.label is None):
        return False
    if a.label is not None:
        if a.label in sigma:
            if sigma[a.label] != b.label:
                return False
        else:
            if b.label in image:
                return False
            sigma[a.label] = b.label
            image.add(b.label)
    return all(_unify_terms(x, y, sigma, image) for x, y in zip(a.args, b.args))


def free_equal(
    j1: Judgment, j2: Judgment, bound: int = DEFAULT_SEARCH_BOUND
) -> Optional[EqualityWitness]:
    """Witness for the label-renaming/scalar-permutation equality, or
    ``None``.  Complete within ``bound`` backtracking nodes."""
    if (
        j1.context != j2.context
        or j1.main_types != j2.main_types
        or len(j1.main_terms) != len(j2.main_terms)
        or len(j1.scalars) != len(j2.scalars)
    ):
        return None
    sigma: dict = {}
    image: set = set()
    for a, b in zip(j1.main_terms, j2.main_terms):
        if not _unify_terms(a, b, sigma, image):
            return None

    n = len(j1.scalars)
    rho: list[Optional[int]] = [None] * n
    used = [False] * n
    nodes = 0

    def go(i: int, sig_: dict, img: set) -> Optional[dict]:
        nonlocal nodes
        if i == n:
            return sig_
        for k in range(n):
            if used[k]:
                continue
            nodes += 1
            if nodes > bound:
                raise SearchBoundExceeded(f"free_equal exceeded {bound} nodes")
            trial = dict(sig_)
            trial_img = set(img)
            if _unify_terms(j1.scalars[i], j2.scalars[k], trial, trial_img):
                used[k] = True
                rho[i] = k
                out = go(i + 1, trial, trial_img)
                if out is not None:
                    return out
                used[k] = False
                rho[i] = None
        return None

    final = go(0, sigma, image)
    if final is None:
        return None
    for lab in labels_of(j1) - final.keys():
        final[lab] = lab  # pragma: no cover - mains/scalars cover all labels
    return EqualityWitness(tuple(sorted(final.items())), tuple(rho))


# ---------------------------------------------------------------------------
# Canonical representatives


def _rename_map(j: Judgment, assignment: dict) -> Judgment:
    return relabel(j, assignment)


def _masked_key(t: Term, unforced: set) -> tuple:
    if isinstance(t, Var):
        return (0, t.name)
    lab = t.label
    masked = "?" if lab in unforced else (lab or "")
    return (1, t.gen, masked, t.index or 0, tuple(_masked_key(a, unforced) for a in t.args))


def _label_paths(t: Term, label: str) -> list[tuple[int, ...]]:
    return [path for sub, path in subterms(t) if isinstance(sub, App) and sub.label == label]


def canonicalize(j: Judgment, bound: int = DEFAULT_CANON_BOUND) -> Judgment:
    """Canonical representative of the free-equality class: labels become
    %1, %2, ... in order of first occurrence in the main terms, scalars
    are sorted by the term order, and labels occurring only in scalars
    are assigned by exact brute force over each residual ambiguity class
    (bounded by ``bound`` assignments)."""
    forced: dict[str, str] = {}
    counter = itertools.count(1)
    for t, _loc in head_occurrences(j):
        if isinstance(t, App) and t.label is not None and t.label not in forced:
            if _loc[0] == "main":
                forced[t.label] = f"%{next(counter)}"
    remaining = sorted(labels_of(j) - forced.keys())
    if not remaining:
        out = relabel(j, {**forced, **{a: a for a in labels_of(j) - forced.keys()}})
        scal = tuple(sorted(out.scalars, key=term_key))
        return Judgment(out.context, out.main_terms, out.main_types, scal)

    # Partition the scalar-only labels into classes indistinguishable by
    # label-masked structure.
    unforced = set(remaining)
    half = relabel(
        j, {**forced, **{a: a for a in unforced}}
    )
    signature: dict[str, tuple] = {}
    for lab in remaining:
        occ = []
        for s in half.scalars:
            paths = _label_paths(s, lab)
            if paths:
                occ.append((_masked_key(s, unforced), tuple(sorted(paths))))
        for m in half.main_terms:  # pragma: no cover - scalar-only by construction
            paths = _label_paths(m, lab)
            if paths:
                occ.append((("main", _masked_key(m, unforced)), tuple(sorted(paths))))
        signature[lab] = tuple(sorted(occ))
    classes: dict[tuple, list[str]] = {}
    for lab in remaining:
        classes.setdefault(signature[lab], []).append(lab)
    ordered_classes = [classes[k] for k in sorted(classes)]

    total = 1
    for cls in ordered_classes:
        for i in range(2, len(cls) + 1):
            total *= i
        if total > bound:
            raise SearchBoundExceeded(
                f"label-ambiguity classes need {total}+ assignments (bound {bound})"
            )

    slots: list[list[str]] = []
    base = next(counter) - 1
    cursor = base
    for cls in ordered_classes:
        slots.append([f"%{cursor + i + 1}" for i in range(len(cls))])
        cursor += len(cls)

    best = None
    for perms in itertools.product(
        *[itertools.permutations(cls) for cls in ordered_classes]
    ):
        assignment = dict(forced)
        for cls_perm, names in zip(perms, slots):
            assignment.update(zip(cls_perm, names))
        out = relabel(half, {**{v: v for v in forced.values()}, **{
            a: assignment[a] for a in remaining
        }})
        scal = tuple(sorted(out.scalars, key=term_key))
        key = tuple(term_key(s) for s in scal)
        if best is None or key < best[0]:
            best = (key, Judgment(out.context, out.main_terms, out.main_types, scal))
    return best[1]


# ---------------------------------------------------------------------------
# Proof steps over a presentation


class ProofError(Exception):
    pass


class UnknownAxiom(ProofError):
    pass


class InterfaceMismatch(ProofError):
    pass


class LhsMismatch(ProofError):
    pass


class RhsMismatch(ProofError):
    pass


@dataclass(frozen=True)
class ProofStep:
    """One application of a named axiom.

    ``pre`` (U) maps the ambient context onto bystander wires plus the
    axiom's inputs; ``post`` (V) consumes the bystander wires plus the
    axiom's outputs.  ``reverse`` applies the axiom right to left.
    ``gives`` is the judgment claimed for the next line; ``None`` on
    either witness means it is to be found by :func:`search_step`.
    """

    axiom: str
    reverse: bool = False
    pre: Optional[Judgment] = None
    post: Optional[Judgment] = None
    gives: Optional[Judgment] = None


@dataclass(frozen=True)
class ProofScript:
    name: str
    theory: str
    initial: Judgment
    steps: tuple[ProofStep, ...]
    claim: Optional[Judgment] = None


@dataclass
class StepReport:
    index: int
    axiom: str
    ok: bool
    message: str = ""


@dataclass
class ProofReport:
    name: str
    ok: bool
    steps: list[StepReport] = field(default_factory=list)
    message: str = ""


def _mid_factor(sig: Signature, phi: tuple[str, ...], side: Judgment) -> Judgment:
    taken = {v for v, _ in side.context}
    names = []
    for i, _ty in enumerate(phi):
        cand = f"i{i}"
        while cand in taken:
            cand += "'"
        taken.add(cand)
        names.append(cand)
    return algebra.tensor(sig, algebra.identity_of(tuple(zip(names, phi))), side)


def apply_axiom_step(p: Presentation, current: Judgment, step: ProofStep) -> Judgment:
    """Verify one Fig-style congruence step and return the next line."""
    try:
        ax = p.axiom(step.axiom)
    except KeyError:
        raise UnknownAxiom(step.axiom) from None
    if step.pre is None or step.post is None:
        raise ProofError(f"step {step.axiom}: missing pre/post witness")
    sig = p.signature
    from_side = ax.side("rhs" if step.reverse else "lhs")
    to_side = ax.side("lhs" if step.reverse else "rhs")
    k = len(ax.context)
    u_types = step.pre.main_types
    if k and u_types[len(u_types) - k :] != ax.side("lhs").context_types:
        raise InterfaceMismatch(
            f"pre-witness codomain does not end with the axiom context "
            f"{ax.side('lhs').context_types}"
        )
    phi = u_types[: len(u_types) - k] if k else u_types
    try:
        assembled_from = algebra.compose(
            sig, algebra.compose(sig, step.pre, _mid_factor(sig, phi, from_side)), step.post
        )
    except (algebra.OperationError, CheckError, ValueError) as e:
        raise InterfaceMismatch(f"assembly failed: {e}") from None
    if free_equal(assembled_from, current) is None:
        raise LhsMismatch(
            f"axiom {ax.name} {'(reversed) ' if step.reverse else ''}does not "
            f"rewrite the current line;\n  current:   {current}\n  assembled: {assembled_from}"
        )
    assembled_to = algebra.compose(
        sig, algebra.compose(sig, step.pre, _mid_factor(sig, phi, to_side)), step.post
    )
    if step.gives is not None:
        if free_equal(assembled_to, step.gives) is None:
            raise RhsMismatch(
                f"step result differs from the stated line;\n  stated:    "
                f"{step.gives}\n  assembled: {assembled_to}"
            )
        return step.gives
    return assembled_to


def check_proof(p: Presentation, script: ProofScript) -> ProofReport:
    """Run every step; the report carries one entry per step and fails at
    the first non-verifying one."""
    report = ProofReport(script.name, ok=True)
    try:
        check(p.signature, script.initial)
    except CheckError as e:
        report.ok = False
        report.message = f"initial judgment not derivable: {e}"
        return report
    current = script.initial
    for i, step in enumerate(script.steps):
        filled = step
        try:
            if step.pre is None or step.post is None:
                found = search_step(
                    p, current, step.gives, step.axiom, reverse=step.reverse
                )
                if found is None:
                    raise ProofError(
                        f"no witness found for axiom {step.axiom}"
                        f"{' (reversed)' if step.reverse else ''}"
                    )
                filled = replace(found, gives=step.gives)
            current = apply_axiom_step(p, current, filled)
            report.steps.append(StepReport(i, step.axiom, True))
        except (ProofError, CheckError, algebra.OperationError) as e:
            report.steps.append(StepReport(i, step.axiom, False, str(e)))
            report.ok = False
            report.message = f"step {i + 1} ({step.axiom}): {e}"
            return report
    if script.claim is not None and free_equal(current, script.claim) is None:
        report.ok = False
        report.message = (
            f"final line does not match the claim;\n  final: {current}\n  claim: {script.claim}"
        )
    return report


def proved_axiom(script: ProofScript, final: Judgment, note: str = "lemma") -> Axiom:
    """Package a verified script as an axiom (its initial and final lines
    are equal over the presentation), for use as a named lemma."""
    return Axiom(
        script.name,
        script.initial.context,
        (script.initial.main_terms, script.initial.scalars),
        (final.main_terms, final.scalars),
        script.initial.main_types,
        note=note,
    )


# ---------------------------------------------------------------------------
# Witness search: find (U, V) by matching the axiom side inside the line


def _typed_subterms(sig: Signature, j: Judgment) -> list[tuple[Term, str]]:
    ctx = dict(j.context)
    seen = []
    seen_set = set()
    for t, _ in head_occurrences(j):
        if t in seen_set:
            continue
        if isinstance(t, App) and not sig.generators[t.gen][1]:
            continue  # scalar-typed, never a wire
        ty = ctx[t.name] if isinstance(t, Var) else None
        if ty is None:
            cod = sig.generators[t.gen][1]
            ty = cod[t.index - 1] if t.index is not None else cod[0]
        seen.append((t, ty))
        seen_set.add(t)
    return seen


def _pattern_match(
    sig: Signature,
    pattern: Term,
    t: Term,
    theta: dict,
    lam: dict,
    lam_img: set,
    param_types: dict,
    ty: Optional[str],
) -> bool:
    """Match an axiom-side pattern against a concrete term, binding the
    axiom's context variables (theta) and labels (lam)."""
    if isinstance(pattern, Var):
        if param_types.get(pattern.name) != ty:
            return False
        if pattern.name in theta:
            return theta[pattern.name] == t
        theta[pattern.name] = t
        return True
    if isinstance(t, Var) or pattern.gen != t.gen or pattern.index != t.index:
        return False
    if (pattern.label is None) != (t.label is None):
        return False
    if pattern.label is not None:
        if pattern.label in lam:
            if lam[pattern.label] != t.label:
                return False
        else:
            if t.label in lam_img:
                return False
            lam[pattern.label] = t.label
            lam_img.add(t.label)
    if len(pattern.args) != len(t.args):
        return False
    arg_types = sig.generators[t.gen][0]
    return all(
        _pattern_match(sig, pa, ta, theta, lam, lam_img, param_types, dty)
        for pa, ta, dty in zip(pattern.args, t.args, arg_types)
    )


def _replace_all(t: Term, table: dict) -> Term:
    if t in table:
        return table[t]
    if isinstance(t, Var) or not t.args:
        return t
    return App(t.gen, t.label, t.index, tuple(_replace_all(a, table) for a in t.args))


def _contains_any(t: Term, names: set) -> bool:
    return any(isinstance(s, Var) and s.name in names for s, _ in subterms(t))


def search_step(
    p: Presentation,
    current: Judgment,
    target: Optional[Judgment],
    axiom_name: str,
    reverse: Optional[bool] = None,
    bound: int = DEFAULT_SEARCH_BOUND,
) -> Optional[ProofStep]:
    """Best-effort enumeration of (U, V) witnesses for one axiom
    application on ``current``.  Sound: every returned step passes
    :func:`apply_axiom_step`; incomplete beyond ``bound``."""
    try:
        ax = p.axiom(axiom_name)
    except KeyError:
        raise UnknownAxiom(axiom_name) from None
    sig = p.signature
    directions = [reverse] if reverse is not None else [False, True]
    budget = [bound]
    for rev in directions:
        for match in _instances(sig, ax, current, rev, budget):
            step = _build_step(sig, ax, current, rev, *match)
            if step is None:
                continue
            try:
                result = apply_axiom_step(p, current, step)
            except ProofError:
                continue
            if target is None or free_equal(result, target) is not None:
                return replace(step, gives=result if target is None else target)
    return None


def _instances(
    sig: Signature, ax: Axiom, current: Judgment, reverse: bool, budget: list
) -> Iterator[tuple]:
    side = ax.side("rhs" if reverse else "lhs")
    param_types = dict(ax.context)
    candidates = _typed_subterms(sig, current)

    def match_mains(i, theta, lam, lam_img, picked):
        if budget[0] <= 0:
            return
        if i == len(side.main_terms):
            yield from match_scalars(0, dict(theta), dict(lam), set(lam_img), list(picked), [])
            return
        pat = side.main_terms[i]
        for t, ty in candidates:
            if ty != side.main_types[i] or t in picked:
                continue
            budget[0] -= 1
            if budget[0] <= 0:
                return
            th, lm, im = dict(theta), dict(lam), set(lam_img)
            if _pattern_match(sig, pat, t, th, lm, im, param_types, ty):
                yield from match_mains(i + 1, th, lm, im, picked + [t])

    def match_scalars(k, theta, lam, lam_img, picked, scal_idx):
        if budget[0] <= 0:
            return
        if k == len(side.scalars):
            yield theta, lam, picked, list(scal_idx)
            return
        pat = side.scalars[k]
        for idx, s in enumerate(current.scalars):
            if idx in scal_idx:
                continue
            budget[0] -= 1
            if budget[0] <= 0:
                return
            th, lm, im = dict(theta), dict(lam), set(lam_img)
            if _pattern_match(sig, pat, s, th, lm, im, param_types, None):
                yield from match_scalars(k + 1, th, lm, im, picked, scal_idx + [idx])

    yield from match_mains(0, {}, {}, set(), [])


def _build_step(
    sig: Signature,
    ax: Axiom,
    current: Judgment,
    reverse: bool,
    theta: dict,
    lam: dict,
    picked: list,
    scal_idx: list,
) -> Optional[ProofStep]:
    # Every axiom input must be bound (free-standing inputs cannot occur
    # in a linear side, so theta is total when matching succeeded).
    for v, _ in ax.context:
        if v not in theta:
            return None
    # Acyclicity: no matched output may feed an axiom input or another
    # matched output.
    for i, t in enumerate(picked):
        for k, other in enumerate(picked):
            if i != k and is_subterm(t, other):
                return None
        for v, _ in ax.context:
            if is_subterm(t, theta[v]):
                return None

    taken = {v for v, _ in current.context}
    y_stream = fresh_names("y0", set())
    y_names = []
    used = set(taken)
    for i in range(len(picked)):
        cand = f"y{i}"
        while cand in used:
            cand += "'"
        used.add(cand)
        y_names.append(cand)
    table = {t: Var(y) for t, y in zip(picked, y_names)}
    y_set = set(y_names)

    v_mains = [_replace_all(t, table) for t in current.main_terms]
    v_scalars = []
    u_scalars = []
    for idx, s in enumerate(current.scalars):
        if idx in scal_idx:
            continue
        s2 = _replace_all(s, table)
        if _contains_any(s2, y_set):
            v_scalars.append(s2)
        else:
            u_scalars.append(s)

    wires: list[tuple[str, Term, str]] = []
    wire_of: dict[Term, str] = {}

    def cut(t: Term) -> Term:
        if isinstance(t, Var) and t.name in y_set:
            return t
        if not _contains_any(t, y_set):
            if t not in wire_of:
                name = f"w{len(wires)}"
                while name in used:
                    name += "'"
                used.add(name)
                ty = _wire_type(sig, current, t)
                wires.append((name, t, ty))
                wire_of[t] = name
            return Var(wire_of[t])
        assert isinstance(t, App)
        return App(t.gen, t.label, t.index, tuple(cut(a) for a in t.args))

    v_mains = [cut(t) for t in v_mains]
    v_scalars = [cut(s) for s in v_scalars]

    u = Judgment(
        current.context,
        tuple(t for _, t, _ in wires) + tuple(theta[v] for v, _ in ax.context),
        tuple(ty for _, _, ty in wires) + tuple(ty for _, ty in ax.context),
        tuple(u_scalars),
    )
    v = Judgment(
        tuple((n, ty) for n, _, ty in wires) + tuple(zip(y_names, ax.cod_types)),
        tuple(v_mains),
        current.main_types,
        tuple(v_scalars),
    )
    try:
        check(sig, u)
        check(sig, v)
    except CheckError:
        return None
    return ProofStep(ax.name, reverse, pre=u, post=v)


def _wire_type(sig: Signature, j: Judgment, t: Term) -> str:
    if isinstance(t, Var):
        return dict(j.context)[t.name]
    cod = sig.generators[t.gen][1]
    return cod[t.index - 1] if t.index is not None else cod[0]
