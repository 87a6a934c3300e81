"""
lepspec: spectral toolkit for dissipative linear bosonic systems.
"""

__version__ = "0.4.0"
