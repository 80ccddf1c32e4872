"""Shared closed-form constants for the sech-family integrands.

SECH6_X2 was computed once by adaptive quadrature to 1e-12 (see
scripts/make_goldens.py); the others are classical closed forms.
"""

import math

# integrals of sech^k and y^2 sech^k over the real line
SECH2_L1 = 2.0
SECH2_X2 = math.pi ** 2 / 6.0
SECH4_L1 = 4.0 / 3.0
SECH4_X2 = (math.pi ** 2 - 6.0) / 9.0
SECH6_L1 = 16.0 / 15.0
SECH6_X2 = 0.2106315023190541

# the two ratio constants of the large-variance expansion
LAMBDA0 = (math.pi ** 2 - 3.0) / (6.0 * math.sqrt(2.0 * math.pi))
LAMBDA1 = (math.pi ** 2 - 6.0) / (18.0 * math.sqrt(2.0 * math.pi))

# decay/regularity constants of the driving kernel
# Psi(x, y) = (4 sech^3 y - 6 sech^5 y) sech x:
#   |Psi| <= PSI_C1 exp(-||x||_2 / sqrt(2))  (grid sup ~2.6374, padded)
#   Lip(Psi) <= PSI_LIP                      (grid sup ~4.1255, padded)
PSI_C2 = 1.0 / math.sqrt(2.0)
PSI_C1 = 2.70
PSI_LIP = 4.20
