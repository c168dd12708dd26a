import logging.config
from pathlib import Path
import asyncio
import logging
import sys

logging.config.fileConfig(Path(__file__).parent.joinpath("logging.ini"), disable_existing_loggers=False)

from cat_metrology.app import MainApp  # noqa

logger = logging.getLogger("cat_metrology")


if __name__ == "__main__":
    app = MainApp()
    try:
        sys.exit(asyncio.run(app.run(sys.argv[1:])))
    except KeyboardInterrupt:
        logger.info("Interrupted.")
        sys.exit(1)
