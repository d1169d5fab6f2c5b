"""
Constants for the analytical disk engine.
Centralized location for physical defaults and numerical thresholds.
"""

# Engine step (one Bullet-style tick)
DEFAULT_DT = 1.0 / 240.0

GRAVITY = 9.81

# Pusher cylinder radius in meters
PUSHER_RADIUS = 0.0048

# Mass of the dynamic pusher in the direct-force setup (kg)
DIRECT_FORCE_PUSHER_MASS = 0.1

# Below these speeds ground friction is not applied
VELOCITY_DEADBAND = 1e-6
SPIN_DEADBAND = 1e-6

# Overlap deeper than this multiple of the tolerance counts as deep penetration
DEEP_PENETRATION_FACTOR = 10.0

# Surface modes
SURFACE_UNIFORM = 'uniform'
SURFACE_SPATIAL_FIELD = 'spatial_field'
SURFACE_MODES = [SURFACE_UNIFORM, SURFACE_SPATIAL_FIELD]
