"""Orbital-free DFT with statevector-simulated quantum ground-state subroutines.

Desk-scale engine: a dense statevector register holds sqrt(density),
imaginary-time contraction steps (exact or via the one-ancilla circuit)
drive it toward the ground state of the orbital-free Hamiltonian inside a
self-consistent field loop, and Bayesian phase estimation reads out the
ground energy. Classical reference solvers (dense diagonalization, LOBPCG
with a shifted-inverse preconditioner) provide the oracles everything is
validated against.
"""

__version__ = "0.1.0"
