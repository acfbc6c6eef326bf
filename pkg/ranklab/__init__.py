"""
ranklab: numerical laboratory for spacetime convexity and constant rank
theorems of fully nonlinear parabolic equations.
"""

__version__ = "0.1.0"
