"""Monte Carlo reduced loss/gain integrals against their closed-form constants."""
import numpy as np

from enskog.forces import LinearPlusTimeField, PhaseState, TimeOnlyField, affine_time_force
from enskog.lemmas import LemmaScheme, verify_lemma5, verify_lemma6

fields = {"time_only": TimeOnlyField(affine_time_force(["t", "0", "0"])), "linear": LinearPlusTimeField(1.0)}
base = PhaseState(1.0, np.zeros(3), np.zeros(3))
scheme = LemmaScheme(samples=1_000_000, seed=0)
for name, field in fields.items():
    for fn in (verify_lemma5, verify_lemma6):
        c = fn(np.zeros(3), np.zeros(3), 1.0, base, field, a=0.1, scheme=scheme)
        print(f"{name:9s} {c.lemma}: {c.lhs.value:8.4f} +- {c.lhs.stderr:.4f}  <=  {c.bound:.4f}  {c.passed}")
