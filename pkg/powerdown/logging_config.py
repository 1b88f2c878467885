import logging
import sys


def setup_logging(verbose: bool = False):
    """
    Configures the logging for the command-line tools.

    This function sets up a basic configuration for logging on stdout and,
    when ``verbose`` is set, lowers the ``powerdown`` loggers to DEBUG so
    policy decisions and oracle choices show up.
    """
    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(sys.stdout)
        ]
    )

    logging.getLogger('powerdown').setLevel(logging.DEBUG if verbose else logging.INFO)
