"""Physical constants (CODATA 2018) used for parameter derivation.

All quadrature/variance algebra elsewhere in the package is carried out in
hbar = 1 units (variances numerically in "units of hbar"); the SI values
below enter only circuit-parameter derivation and temperature conversions.
"""

PHI0 = 2.067833848e-15      # magnetic flux quantum, Wb
HBAR = 1.054571817e-34      # reduced Planck constant, J s
KB = 1.380649e-23           # Boltzmann constant, J/K
