"""Natural-deduction type theory for props (symmetric monoidal categories
with free object monoids): judgment checking, admissible structural
operations, free equality, and equational proofs over presented props."""

from .terms import App, Judgment, Term, Var, depth, head_occurrences, relabel, substitute
from .theories import Axiom, Definition, Presentation, Signature

__all__ = [
    "App",
    "Axiom",
    "Definition",
    "Judgment",
    "Presentation",
    "Signature",
    "Term",
    "Var",
    "depth",
    "head_occurrences",
    "relabel",
    "substitute",
]
