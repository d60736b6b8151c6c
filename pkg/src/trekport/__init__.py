"""Dense simulator for concatenated teleportation with low-dimensional pulses."""

__version__ = "0.1.0"

import logging

logging.getLogger(__name__).addHandler(logging.NullHandler())
