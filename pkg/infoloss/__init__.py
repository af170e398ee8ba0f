"""
infoloss

Information loss H(X|Y) of continuous random variables passed through
piecewise strictly monotone functions: quadrature, bounds, Monte Carlo and
histogram estimators, cascades and tight-function synthesis.
"""

__version__ = "1.0.0"
