"""Physical constants used across the circuit model."""

import math

# Magnetic flux quantum h/2e in Wb. The only unit-bearing constant in the
# package; every flux-quantization statement is expressed in multiples of it.
PHI0 = 2.067833848e-15

# Phase-to-flux conversion: V = PHI0_2PI * dphi/dt, branch flux = PHI0_2PI * phase.
PHI0_2PI = PHI0 / (2.0 * math.pi)
