import os, sys
sys.path.append(os.path.join(os.path.dirname(os.path.abspath(__file__)), ".."))

import logging
import logging.config
from cmctorus import cli

LOGGING_CONF = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "logging.conf")

def main():
    return cli.main()

if __name__ == "__main__":
    logging.config.fileConfig(LOGGING_CONF)
    sys.exit(main())
