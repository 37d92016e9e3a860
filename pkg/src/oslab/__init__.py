"""oslab: a desk-scale numerical laboratory for one-scale H-distributions.

Subpackages cover the compactified dual geometry (dualgeom), symbol calculus
with Mihlin constants (symcalc), the discrete multiplier engine (fourmult),
canonical weakly-null sequences (seqgen), the pairing estimator and its
closed forms (oschd), t-quantisation and Wigner identities (semiclass), the
localisation principle (locprinc), and a configuration-driven CLI (cli).
"""

__version__ = "0.1.0"
