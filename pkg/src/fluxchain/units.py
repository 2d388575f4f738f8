"""Physical constants and flux-angle helpers.

All fluxes in this package are dimensionless, in units of the flux quantum
Phi0; every other quantity is SI.
"""

import math

# Superconducting flux quantum h/2e, in Wb.
PHI0 = 2.067833848e-15

TWO_PI = 2.0 * math.pi


def cospi(x):
    """cos(pi*x), exact at half-integer x and bit-exact in its symmetries.

    math.cos(math.pi/2) is ~6e-17 rather than 0; screening parameters must
    vanish identically at half-integer flux. The argument is folded into
    [0, 1/2] (exactly, by Sterbenz subtraction) so evenness and periodicity
    hold to the last bit.
    """
    r = math.fmod(x, 2.0)
    if r < 0.0:
        r += 2.0
    sign = 1.0
    if r > 1.0:
        r = 2.0 - r
    if r > 0.5:
        r = 1.0 - r
        sign = -1.0
    if r == 0.5:
        return 0.0
    if r == 0.0:
        return sign
    return sign * math.cos(math.pi * r)


def sinpi(x):
    """sin(pi*x), exact at half-integer and integer x."""
    return cospi(x - 0.5)


def mphi0(x):
    """Convert a flux in Phi0 units to milli-Phi0."""
    return 1e3 * x
