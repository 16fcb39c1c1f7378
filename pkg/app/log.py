#!/usr/bin/python3
# -----------------------------------------------------------
# Define logger
# -----------------------------------------------------------
import logging


logging.basicConfig(level=logging.INFO, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
logger = logging.getLogger("nrff")  # pylint: disable=C0103


def set_verbose(verbose):
    """
    switch the project logger to DEBUG when `verbose` is set
    """
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)
