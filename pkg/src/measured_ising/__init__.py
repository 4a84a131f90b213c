"""
Hybrid Monte Carlo and boundary-MPS simulation of long-range order created by weak
measurements
"""
__version__ = "1.0.0"
