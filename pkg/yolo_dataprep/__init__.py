__version__ = "1.0.20261017.1"

import logging

logging.getLogger(__package__).setLevel(logging.DEBUG)
