"""Coupled nonlinear two-level oscillators: simulation and signal analysis.

Two magnon condensates (bulk and surface) exchange population through a
weak coupling while the bulk frequency depends on its own population.  The
package integrates the amplitude equations, synthesizes the resulting coil
signal, extracts spectral ridges and recovers the coupling and the
Landau-Zener transfer from them.
"""

__version__ = "0.1.0"
