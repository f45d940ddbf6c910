"""Lattice Boltzmann kernels: the D2Q9 set, the flow solver and the advection-diffusion solver"""

from .d2q9 import D2Q9, equilibrium
from .utility import ConvergenceInfo
