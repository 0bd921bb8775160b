"""Physical constants used throughout the package (CODATA 2018 / exact SI)."""

G_NEWTON = 6.67430e-11  # gravitational constant, m^3 kg^-1 s^-2
HBAR = 1.054571817e-34  # reduced Planck constant, J s
K_BOLTZMANN = 1.380649e-23  # Boltzmann constant, J/K (exact since 2019 SI)
