"""nsac constants"""
import math

__version__ = "0.4.0"

SNAPSHOT_MAGIC = b"NSAC1"
CHECKPOINT_FORMAT_VERSION = 1

SQRT2 = math.sqrt(2.0)
SIGMA = 2.0 * SQRT2 / 3.0
"""Surface tension of the quartic double well, ``∫ √(2W)`` over ``[-1, 1]``."""

ARCTAN_SUPREMUM = math.pi / 2
ARCTAN_LAMBDA = 1.0
ARCTAN_DELTA0 = 0.9
ARCTAN_GAMMA = 2.0
ARCTAN_C_ELL = 1.0

REACTION_SAFETY = 0.25
THREADS_ENV = "NSAC_THREADS"
