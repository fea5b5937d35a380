"""Admissible structural operations on derivable judgments.

Exchange, generator postcomposition, composition/substitution, tensor,
identity и symmetry.  Each operation is implemented as surgery on
derivation trees, following the inductive constructions that make the
rules admissible: exchange composes with the stored permutations and
pushes the remainder into the premise; postcomposition either opens a
new rule, joins the last rule, or recurses, depending on where the
consumed positions are active; composition recurses over the second
derivation, replaying its rule applications on top of the first.

A pure judgment-level implementation (substitute, concatenate scalars,
re-check) is kept alongside as an oracle; the two must agree, and in
checked mode every surgery result is re-checked.
"""

from __future__ import annotations

import random
from typing import Iterable, Optional, Sequence

from .checker import (
    Derivation,
    GenApp,
    GeneratorNode,
    IdentityNode,
    check,
    check_derivation,
    infer_activeness,
    max_depth,
)
from .terms import (
    App,
    Judgment,
    Term,
    Var,
    depth,
    fresh_names,
    labels_of,
    relabel,
    substitute,
)
from .theories import Signature

# When true, every surgery result is replayed and re-checked against the
# unique derivation of its judgment.  Costs a constant factor; the whole
# artifact is fast enough to leave it on.
CHECKED = True


class OperationError(ValueError):
    pass


def _result(sig: Signature, d: Derivation) -> Judgment:
    j = check_derivation(sig, d)
    if CHECKED:
        assert check(sig, j) == d, "surgery produced a non-canonical derivation"
    return j


def _perm_ok(rho: Sequence[int], n: int) -> None:
    if sorted(rho) != list(range(n)):
        raise OperationError(f"not a permutation of {n} positions: {rho}")


# ---------------------------------------------------------------------------
# Exchange


def _app_spans(sig: Signature, apps: Sequence[GenApp]) -> list[tuple[int, int]]:
    """(start, length) of each application's output block in the canonical
    output list."""
    spans = []
    start = 0
    for app in apps:
        n = len(sig.cod(app.gen))
        spans.append((start, n))
        start += n
    return spans


def exchange_cod_deriv(sig: Signature, d: Derivation, rho: Sequence[int]) -> Derivation:
    """Permute the codomain: position p of the conclusion moves to
    rho[p].  Scalars are untouched."""
    if isinstance(d, IdentityNode):
        _perm_ok(rho, len(d.sigma))
        pi = [rho[p] for p in d.sigma]
        m = len(d.context)
        spans = []
        start = m
        for gen, _ in d.labeled_gens:
            n = len(sig.cod(gen))
            spans.append((start, n))
            start += n
        order = sorted(range(len(spans)), key=lambda gi: pi[spans[gi][0]])
        sigma = list(pi[:m])
        for gi in order:
            s, n = spans[gi]
            sigma.extend(pi[s : s + n])
        gens = tuple(d.labeled_gens[gi] for gi in order)
        return IdentityNode(d.context, gens, d.scalar_gens, tuple(sigma))

    _perm_ok(rho, len(d.sigma))
    pi = [rho[p] for p in d.sigma]
    spans = _app_spans(sig, d.apps)
    n_out = sum(n for _, n in spans)
    n_old = len(d.sigma) - n_out
    order = sorted(range(len(d.apps)), key=lambda ai: pi[spans[ai][0]])
    old_order = sorted(range(n_old), key=lambda j: pi[n_out + j])

    # Rearrange the premise: argument blocks follow the new application
    # order, untouched positions follow their new conclusion order.
    total_args = sum(len(a.arg_positions) for a in (*d.apps, *d.scalar_apps))
    rho_p = [0] * (total_args + n_old)
    cursor = 0
    for ai in order:
        for p in d.apps[ai].arg_positions:
            rho_p[p] = cursor
            cursor += 1
    for app in d.scalar_apps:
        for p in app.arg_positions:
            rho_p[p] = cursor
            cursor += 1
    rank = {j: r for r, j in enumerate(old_order)}
    for j in range(n_old):
        rho_p[total_args + j] = cursor + rank[j]
    premise = exchange_cod_deriv(sig, d.premise, rho_p)

    apps = []
    cursor = 0
    for ai in order:
        m = len(d.apps[ai].arg_positions)
        apps.append(GenApp(d.apps[ai].gen, tuple(range(cursor, cursor + m))))
        cursor += m
    scalar_apps = []
    for app in d.scalar_apps:
        m = len(app.arg_positions)
        scalar_apps.append(GenApp(app.gen, tuple(range(cursor, cursor + m))))
        cursor += m
    sigma = []
    for ai in order:
        s, n = spans[ai]
        sigma.extend(pi[s : s + n])
    sigma.extend(sorted(pi[n_out:]))
    return GeneratorNode(premise, tuple(apps), tuple(scalar_apps), tuple(sigma), d.tau)


def exchange_dom_deriv(sig: Signature, d: Derivation, rho: Sequence[int]) -> Derivation:
    """Permute the context: variable at position i moves to rho[i]."""
    if isinstance(d, IdentityNode):
        _perm_ok(rho, len(d.context))
        ctx = [None] * len(d.context)
        for i, binding in enumerate(d.context):
            ctx[rho[i]] = binding
        m = len(d.context)
        sigma = [0] * len(d.sigma)
        for i in range(m):
            sigma[rho[i]] = d.sigma[i]
        sigma[m:] = d.sigma[m:]
        return IdentityNode(tuple(ctx), d.labeled_gens, d.scalar_gens, tuple(sigma))
    return GeneratorNode(
        exchange_dom_deriv(sig, d.premise, rho), d.apps, d.scalar_apps, d.sigma, d.tau
    )


# ---------------------------------------------------------------------------
# Pass-through wires (tensoring with identities)


def insert_wires(
    sig: Signature,
    d: Derivation,
    new_vars: tuple[tuple[str, str], ...],
    ctx_at: int,
    main_at: int,
) -> Derivation:
    """Add fresh context variables as untouched wires: the context gains
    ``new_vars`` at ``ctx_at`` and every conclusion carries them as a
    block starting at ``main_at`` of the final conclusion."""
    v = len(new_vars)
    if isinstance(d, IdentityNode):
        ctx = d.context[:ctx_at] + new_vars + d.context[ctx_at:]
        shifted = [s + v if s >= main_at else s for s in d.sigma]
        m = len(d.context)
        sigma = (
            shifted[:ctx_at]
            + list(range(main_at, main_at + v))
            + shifted[ctx_at:m]
            + shifted[m:]
        )
        return IdentityNode(ctx, d.labeled_gens, d.scalar_gens, tuple(sigma))

    spans = _app_spans(sig, d.apps)
    n_out = sum(n for _, n in spans)
    n_old = len(d.sigma) - n_out
    total_args = sum(len(a.arg_positions) for a in (*d.apps, *d.scalar_apps))
    slot = sum(1 for j in range(n_old) if d.sigma[n_out + j] < main_at)
    premise = insert_wires(sig, d.premise, new_vars, ctx_at, total_args + slot)
    shifted = [s + v if s >= main_at else s for s in d.sigma]
    sigma = (
        shifted[:n_out]
        + shifted[n_out : n_out + slot]
        + list(range(main_at, main_at + v))
        + shifted[n_out + slot :]
    )
    return GeneratorNode(premise, d.apps, d.scalar_apps, tuple(sigma), d.tau)


# ---------------------------------------------------------------------------
# Postcomposition with a single generator (admissible one-cut rule)


def _add_nullary(sig: Signature, d: Derivation, gen: str, label: Optional[str]) -> Derivation:
    """Postcompose with a nullary-domain generator by extending the
    identity rule at the leaf.  Positive-codomain components are appended
    at the end of the main tuple; a scalar atom is placed first in the
    scalar tuple."""
    dom, cod = sig.generators[gen]
    assert not dom
    if isinstance(d, IdentityNode):
        if cod:
            n = len(d.sigma)
            sigma = d.sigma + tuple(range(n, n + len(cod)))
            return IdentityNode(
                d.context, d.labeled_gens + ((gen, label),), d.scalar_gens, sigma
            )
        return IdentityNode(d.context, d.labeled_gens, (gen,) + d.scalar_gens, d.sigma)

    premise = _add_nullary(sig, d.premise, gen, label)
    if cod:
        n = len(d.sigma)
        sigma = d.sigma + tuple(range(n, n + len(cod)))
        return GeneratorNode(premise, d.apps, d.scalar_apps, sigma, d.tau)
    k = len(d.scalar_apps)
    tau = (
        tuple(t + 1 for t in d.tau[:k]) + (0,) + tuple(t + 1 for t in d.tau[k:])
    )
    return GeneratorNode(premise, d.apps, d.scalar_apps, d.sigma, tau)


def _tail_exchange(n: int, positions: Sequence[int]) -> list[int]:
    """Permutation sending ``positions`` (in order) to the last slots and
    keeping everything else in relative order at the front."""
    chosen = set(positions)
    rho = [0] * n
    cursor = 0
    for p in range(n):
        if p not in chosen:
            rho[p] = cursor
            cursor += 1
    for i, p in enumerate(positions):
        rho[p] = n - len(positions) + i
    return rho


def _postcompose_tail(
    sig: Signature, d: Derivation, gen: str, scalar_pos: int
) -> Derivation:
    """Apply ``gen`` to the last ``len(dom)`` main positions.  Outputs are
    appended at the end of the main tuple; for a nullary codomain the new
    scalar lands at ``scalar_pos`` of the conclusion scalar tuple."""
    dom, cod = sig.generators[gen]
    t = len(dom)
    assert t >= 1
    j = check_derivation(sig, d)
    n = len(j.main_terms)
    if j.main_types[n - t :] != dom:
        raise OperationError(
            f"cannot apply {gen}: expected codomain tail {dom}, "
            f"found {j.main_types[n - t:]}"
        )
    mask = infer_activeness(sig, j).mask
    if any(mask[p] for p in range(n - t, n)):
        # The generator's output is one level deeper than anything here:
        # open a fresh rule, with the arguments brought to the front.
        rho_front = [p + t for p in range(n - t)] + list(range(t))
        d2 = exchange_cod_deriv(sig, d, rho_front)
        if cod:
            sigma = tuple(range(n - t, n - t + len(cod))) + tuple(range(n - t))
            return GeneratorNode(
                d2, (GenApp(gen, tuple(range(t))),), (), sigma, tuple(range(len(j.scalars)))
            )
        tau = (scalar_pos,) + tuple(
            i if i < scalar_pos else i + 1 for i in range(len(j.scalars))
        )
        return GeneratorNode(
            d2, (), (GenApp(gen, tuple(range(t))),), tuple(range(n - t)), tau
        )

    assert isinstance(d, GeneratorNode), "identity conclusions are all active"
    pj = check_derivation(sig, d.premise)
    np_ = len(pj.main_terms)
    total_args = sum(len(a.arg_positions) for a in (*d.apps, *d.scalar_apps))
    main_args = sum(len(a.arg_positions) for a in d.apps)
    assert np_ - t >= total_args, "consumed positions must be untouched by the last rule"
    p_mask = infer_activeness(sig, pj).mask
    spans = _app_spans(sig, d.apps)
    n_out = sum(ln for _, ln in spans)
    n_old = len(d.sigma) - n_out

    if any(p_mask[q] for q in range(np_ - t, np_)):
        # The arguments are active one level down: join this rule.
        if cod:
            insert_at = main_args
        else:
            # scalar applications are ordered by where their terms land
            k = len(d.scalar_apps)
            app_idx = sum(1 for i in range(k) if d.tau[i] < scalar_pos)
            insert_at = main_args + sum(
                len(d.scalar_apps[i].arg_positions) for i in range(app_idx)
            )
        rho_p = [0] * np_
        for q in range(np_ - t):
            rho_p[q] = q if q < insert_at else q + t
        for i, q in enumerate(range(np_ - t, np_)):
            rho_p[q] = insert_at + i
        premise = exchange_cod_deriv(sig, d.premise, rho_p)
        block = tuple(range(insert_at, insert_at + t))
        if cod:
            apps = d.apps + (GenApp(gen, block),)
            scalar_apps = tuple(
                GenApp(a.gen, tuple(p + t for p in a.arg_positions))
                for a in d.scalar_apps
            )
            # survivors keep their positions (the consumed ones were the tail)
            sigma = (
                d.sigma[:n_out]
                + tuple(range(n - t, n - t + len(cod)))
                + d.sigma[n_out : n_out + (n_old - t)]
            )
            return GeneratorNode(premise, apps, scalar_apps, sigma, d.tau)
        scalar_apps = (
            d.scalar_apps[:app_idx]
            + (GenApp(gen, block),)
            + tuple(
                GenApp(a.gen, tuple(p + t for p in a.arg_positions))
                for a in d.scalar_apps[app_idx:]
            )
        )
        sigma = d.sigma[:n_out] + d.sigma[n_out : n_out + (n_old - t)]

        def shift(v: int) -> int:
            return v if v < scalar_pos else v + 1

        tau = (
            tuple(shift(d.tau[i]) for i in range(app_idx))
            + (scalar_pos,)
            + tuple(shift(d.tau[i]) for i in range(app_idx, len(d.tau)))
        )
        return GeneratorNode(premise, d.apps, scalar_apps, sigma, tau)

    # Neither level owns the arguments yet: push the cut into the premise.
    k = len(d.scalar_apps)
    if cod:
        q_prime = 0
    else:
        q_prime = sum(1 for i in range(k, len(d.tau)) if d.tau[i] < scalar_pos)
    premise = _postcompose_tail(sig, d.premise, gen, q_prime)
    if cod:
        nc = len(cod)
        sigma = (
            d.sigma[:n_out]
            + d.sigma[n_out : n_out + (n_old - t)]
            + tuple(range(n - t, n - t + nc))
        )
        return GeneratorNode(premise, d.apps, d.scalar_apps, sigma, d.tau)
    sigma = d.sigma[:n_out] + d.sigma[n_out : n_out + (n_old - t)]

    def shift(v: int) -> int:
        return v if v < scalar_pos else v + 1

    tau = [shift(d.tau[i]) for i in range(k)]
    n_prem_scal = len(d.tau) - k
    for r in range(n_prem_scal + 1):
        if r == q_prime:
            tau.append(scalar_pos)
        else:
            j_orig = r if r < q_prime else r - 1
            tau.append(shift(d.tau[k + j_orig]))
    return GeneratorNode(premise, d.apps, d.scalar_apps, sigma, tuple(tau))


def _postcompose_at(
    sig: Signature,
    d: Derivation,
    gen: str,
    positions: Sequence[int],
    scalar_pos: int = 0,
) -> Derivation:
    """Consume the given conclusion positions (in domain order) with one
    generator application."""
    j_len = len(check_derivation(sig, d).main_terms)
    if len(set(positions)) != len(positions):
        raise OperationError("a codomain position was selected twice")
    d2 = exchange_cod_deriv(sig, d, _tail_exchange(j_len, positions))
    return _postcompose_tail(sig, d2, gen, scalar_pos)


# ---------------------------------------------------------------------------
# Public operations (judgment level, surgery inside)


def identity_of(context: Iterable[tuple[str, str]]) -> Judgment:
    ctx = tuple(context)
    return Judgment(ctx, tuple(Var(v) for v, _ in ctx), tuple(t for _, t in ctx))


def identity_derivation(context: tuple[tuple[str, str], ...]) -> IdentityNode:
    return IdentityNode(context, (), (), tuple(range(len(context))))


def symmetry(
    ctx1: Iterable[tuple[str, str]], ctx2: Iterable[tuple[str, str]]
) -> Judgment:
    a, b = tuple(ctx1), tuple(ctx2)
    return Judgment(
        a + b,
        tuple(Var(v) for v, _ in b) + tuple(Var(v) for v, _ in a),
        tuple(t for _, t in b) + tuple(t for _, t in a),
    )


def exchange_cod(sig: Signature, j: Judgment, rho: Sequence[int]) -> Judgment:
    d = exchange_cod_deriv(sig, check(sig, j), rho)
    return _result(sig, d)


def exchange_dom(sig: Signature, j: Judgment, rho: Sequence[int]) -> Judgment:
    d = exchange_dom_deriv(sig, check(sig, j), rho)
    return _result(sig, d)


def postcompose_gen(
    sig: Signature, j: Judgment, gen: str, at: Sequence[int] = ()
) -> Judgment:
    """Apply ``gen`` to the main terms at the selected codomain positions.
    Outputs are appended to the main tuple, or placed first among the
    scalars when the codomain is empty."""
    if gen not in sig.generators:
        raise OperationError(f"unknown generator {gen}")
    dom, cod = sig.generators[gen]
    at = tuple(at)
    if len(at) != len(dom):
        raise OperationError(f"{gen} needs {len(dom)} positions, got {len(at)}")
    if tuple(j.main_types[p] for p in at) != dom:
        raise OperationError(
            f"selected types {tuple(j.main_types[p] for p in at)} "
            f"do not match the domain of {gen}"
        )
    d = check(sig, j)
    if not dom:
        label = None
        if cod:
            label = next(fresh_names("u", labels_of(j)))
        out = _add_nullary(sig, d, gen, label)
    else:
        out = _postcompose_at(sig, d, gen, at)
    return _result(sig, out)


def _freshen_labels(
    j: Judgment, taken: set[str]
) -> Judgment:
    mine = labels_of(j)
    clashes = mine & taken
    if not clashes:
        return j
    sigma = {a: a for a in mine}
    used = set(taken) | mine
    for a in sorted(clashes):
        new = next(fresh_names(a + "'", used))
        used.add(new)
        sigma[a] = new
    return relabel(j, sigma)


def compose_by_substitution(sig: Signature, j1: Judgment, j2: Judgment) -> Judgment:
    """Oracle implementation of composition: substitute the main terms of
    ``j1`` for the context variables of ``j2`` and concatenate scalars,
    then re-check."""
    if j1.main_types != j2.context_types:
        raise OperationError(
            f"interface mismatch: {j1.main_types} vs {j2.context_types}"
        )
    j2 = _freshen_labels(j2, labels_of(j1))
    binding = {v: m for (v, _), m in zip(j2.context, j1.main_terms)}
    mains = tuple(substitute(t, binding) for t in j2.main_terms)
    scalars = tuple(substitute(s, binding) for s in j2.scalars) + j1.scalars
    out = Judgment(j1.context, mains, j2.main_types, scalars)
    check(sig, out)
    return out


def _compose_deriv(sig: Signature, d1: Derivation, d2: Derivation) -> Derivation:
    if isinstance(d2, IdentityNode):
        d = d1
        for gen in reversed(d2.scalar_gens):
            d = _add_nullary(sig, d, gen, None)
        for gen, label in d2.labeled_gens:
            d = _add_nullary(sig, d, gen, label)
        return exchange_cod_deriv(sig, d, d2.sigma)

    c = _compose_deriv(sig, d1, d2.premise)
    np2 = len(check_derivation(sig, d2.premise).main_terms)
    track: list[Optional[int]] = list(range(np2))
    n_cur = len(check_derivation(sig, c).main_terms)

    out_pos: list[list[int]] = []

    def consume(app: GenApp, scalar_pos: int) -> None:
        nonlocal c, n_cur
        pos = [track[q] for q in app.arg_positions]
        assert all(p is not None for p in pos)
        cod = sig.cod(app.gen)
        c = _postcompose_at(sig, c, app.gen, pos, scalar_pos)
        chosen = set(pos)
        for q in range(np2):
            v = track[q]
            if v is None:
                continue
            if v in chosen:
                track[q] = None
            else:
                track[q] = v - sum(1 for p in chosen if p < v)
        base = n_cur - len(pos)
        out_pos.append(list(range(base, base + len(cod))))
        n_cur = base + len(cod)
        for marks in out_pos[:-1]:
            for i, v in enumerate(marks):
                marks[i] = v - sum(1 for p in chosen if p < v)

    for app in d2.apps:
        consume(app, 0)
    for si, app in enumerate(d2.scalar_apps):
        consume(app, d2.tau[si])

    # Final arrangement per the stored permutation of the last rule.
    rho = [0] * n_cur
    cursor = 0
    for ai in range(len(d2.apps)):
        for i, p in enumerate(out_pos[ai]):
            rho[p] = d2.sigma[cursor]
            cursor += 1
    olds = [q for q in range(np2) if track[q] is not None]
    for q in olds:
        rho[track[q]] = d2.sigma[cursor]
        cursor += 1
    return exchange_cod_deriv(sig, c, rho)


def compose(sig: Signature, j1: Judgment, j2: Judgment) -> Judgment:
    """Composition along the shared interface: the unique derivable
    judgment whose terms are the simultaneous substitution of ``j1``'s
    mains into ``j2``, with ``j2``'s scalar terms first."""
    if j1.main_types != j2.context_types:
        raise OperationError(
            f"interface mismatch: {j1.main_types} vs {j2.context_types}"
        )
    j2 = _freshen_labels(j2, labels_of(j1))
    d = _compose_deriv(sig, check(sig, j1), check(sig, j2))
    out = _result(sig, d)
    if CHECKED:
        assert out == compose_by_substitution(sig, j1, j2), "surgery disagrees with substitution"
    return out


def tensor_by_substitution(sig: Signature, j1: Judgment, j2: Judgment) -> Judgment:
    j2 = _freshen_vars(j2, {v for v, _ in j1.context})
    j2 = _freshen_labels(j2, labels_of(j1))
    out = Judgment(
        j1.context + j2.context,
        j1.main_terms + j2.main_terms,
        j1.main_types + j2.main_types,
        j2.scalars + j1.scalars,
    )
    check(sig, out)
    return out


def _freshen_vars(j: Judgment, taken: set[str]) -> Judgment:
    mine = {v for v, _ in j.context}
    clashes = mine & taken
    if not clashes:
        return j
    mapping = {}
    used = set(taken) | mine
    for v in sorted(clashes):
        new = next(fresh_names(v + "'", used))
        used.add(new)
        mapping[v] = new
    binding = {v: Var(w) for v, w in mapping.items()}
    return Judgment(
        tuple((mapping.get(v, v), t) for v, t in j.context),
        tuple(substitute(t, binding) for t in j.main_terms),
        j.main_types,
        tuple(substitute(s, binding) for s in j.scalars),
    )


def tensor(sig: Signature, j1: Judgment, j2: Judgment) -> Judgment:
    """Tensor product: contexts, mains and codomains concatenate; the
    second factor's scalars come first.  Variables and labels of the
    second factor are renamed if they clash."""
    j2 = _freshen_vars(j2, {v for v, _ in j1.context})
    j2 = _freshen_labels(j2, labels_of(j1))
    d1 = check(sig, j1)
    d2 = check(sig, j2)
    d1x = insert_wires(
        sig, d1, j2.context, ctx_at=len(j1.context), main_at=len(j1.main_terms)
    )
    names = _wire_names(len(j1.main_types), {v for v, _ in j2.context})
    interface = tuple(zip(names, j1.main_types))
    d2x = insert_wires(sig, d2, interface, ctx_at=0, main_at=0)
    d = _compose_deriv(sig, d1x, d2x)
    out = _result(sig, d)
    if CHECKED:
        assert out == tensor_by_substitution(sig, j1, j2), "surgery disagrees with concatenation"
    return out


def _wire_names(n: int, taken: set[str]) -> list[str]:
    names = []
    used = set(taken)
    for i in range(n):
        cand = f"w{i}"
        while cand in used:
            cand += "'"
        used.add(cand)
        names.append(cand)
    return names


# ---------------------------------------------------------------------------
# Random derivable judgments for property testing


def random_derivation(sig: Signature, budget: int, seed: int) -> Judgment:
    """A random derivable judgment, deterministic in ``seed``.  Exercises
    labeled generators, scalar atoms, multi-application rules and
    arbitrary permutations; every output passes ``check``."""
    rng = random.Random(seed)
    nullary_pos = [g for g, (dm, cd) in sig.generators.items() if not dm and cd]
    nullary_zero = [g for g, (dm, cd) in sig.generators.items() if not dm and not cd]
    applicable = [g for g, (dm, cd) in sig.generators.items() if dm]
    objects = sorted(sig.objects)

    ctx = tuple(
        (f"v{i}", rng.choice(objects)) for i in range(rng.randint(0, 3))
    )
    items: list[tuple[Term, str]] = [(Var(v), t) for v, t in ctx]
    scalars: list[Term] = []
    label_counter = 0
    for _ in range(rng.randint(0, 2)):
        if nullary_pos and rng.random() < 0.8:
            g = rng.choice(sorted(nullary_pos))
            label_counter += 1
            label = f"a{label_counter}"
            cod = sig.cod(g)
            if len(cod) == 1:
                items.append((App(g, label=label), cod[0]))
            else:
                items.extend(
                    (App(g, label=label, index=k), cod[k - 1])
                    for k in range(1, len(cod) + 1)
                )
        elif nullary_zero:
            scalars.append(App(rng.choice(sorted(nullary_zero))))
    rng.shuffle(items)

    spent = len(items) + len(scalars)
    while spent < budget:
        r = rng.random()
        if r < 0.30:
            break
        if r < 0.50 or not applicable:
            # grow the identity leaf: a fresh pass-through wire
            name = f"v{len(ctx)}"
            ty = rng.choice(objects)
            ctx = ctx + ((name, ty),)
            items.insert(rng.randrange(len(items) + 1), (Var(name), ty))
            spent += 1
            continue
        cur_depth = max(
            [depth(t) for t, _ in items] + [depth(s) for s in scalars], default=0
        )
        if cur_depth >= 8:
            break
        layer = _random_layer(sig, rng, items, scalars, applicable)
        if layer == 0:
            break
        spent += layer

    mains = tuple(t for t, _ in items)
    mtypes = tuple(ty for _, ty in items)
    out = Judgment(ctx, mains, mtypes, tuple(scalars))
    check(sig, out)
    return out


def _random_layer(sig, rng, items, scalars, applicable) -> int:
    cur_depth = max(
        [depth(t) for t, _ in items] + [depth(s) for s in scalars], default=0
    )
    active = [i for i, (t, _) in enumerate(items) if depth(t) == cur_depth]
    if not active:
        return 0
    consumed: set[int] = set()
    new_items: list[tuple[Term, str]] = []
    new_scalars: list[Term] = []
    n_apps = rng.randint(1, 3)
    made = 0
    for _ in range(n_apps * 4):
        if made >= n_apps:
            break
        g = rng.choice(sorted(applicable))
        dom, cod = sig.generators[g]
        free_active = [i for i in active if i not in consumed]
        rng.shuffle(free_active)
        anchor = next(
            (i for i in free_active if items[i][1] in dom), None
        )
        if anchor is None:
            continue
        slots: list[Optional[int]] = [None] * len(dom)
        anchor_slot = rng.choice([k for k, ty in enumerate(dom) if ty == items[anchor][1]])
        slots[anchor_slot] = anchor
        used = {anchor}
        ok = True
        for k, ty in enumerate(dom):
            if slots[k] is not None:
                continue
            pool = [
                i
                for i, (t, ity) in enumerate(items)
                if ity == ty and i not in consumed and i not in used
            ]
            if not pool:
                ok = False
                break
            slots[k] = rng.choice(pool)
            used.add(slots[k])
        if not ok:
            continue
        args = tuple(items[i][0] for i in slots)
        consumed |= used
        if cod:
            if len(cod) == 1:
                new_items.append((App(g, args=args), cod[0]))
            else:
                new_items.extend(
                    (App(g, index=k, args=args), cod[k - 1])
                    for k in range(1, len(cod) + 1)
                )
        else:
            new_scalars.append(App(g, args=args))
        made += 1
    if made == 0:
        return 0
    survivors = [items[i] for i in range(len(items)) if i not in consumed]
    merged = survivors + new_items
    rng.shuffle(merged)
    items[:] = merged
    for s in new_scalars:
        scalars.insert(rng.randrange(len(scalars) + 1), s)
    return made
