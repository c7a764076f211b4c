"""Physical constants (SI units)."""

C_LIGHT = 2.99792458e8  # speed of light, m/s

# Classical electron radius. 2.82e-15 m is the value used throughout the
# rotation-angle calibration; keeping it at this precision keeps predicted
# rotation noise aligned with the standard D1 Faraday-rotation convention.
R_ELECTRON = 2.82e-15  # m
