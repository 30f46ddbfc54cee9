"""heightlab: computable pieces of the averaged Colmez formula.

Local Whittaker functions with an exact first-principles oracle, incoherent
Eisenstein coefficients via orbital integrals, Weil representations on
discriminant forms, CM-type class functions, and the averaged CM height.
"""

__version__ = "0.1.0"
