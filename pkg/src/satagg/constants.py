"""Physical constants shared across modules. Lengths in km unless noted."""

EARTH_RADIUS_KM = 6371.0
EARTH_MU_KM3_S2 = 398600.4418
SPEED_OF_LIGHT_M_S = 299792458.0
GEO_ALTITUDE_KM = 35786.0
SIDEREAL_DAY_S = 86164.0
BOLTZMANN_J_PER_K = 1.38e-23
