#!/usr/bin/env python3
"""
Database initialization script.
Run this script to:
1. Create the run-record tables if they don't exist
2. Import run records from `--json` result files given on the command line
"""

import logging
import sys
from pathlib import Path

# Add parent directory to sys.path
current_dir = Path(__file__).parent
parent_dir = current_dir.parent
sys.path.append(str(parent_dir))

from polsynth.config import Settings, configure_logging
from polsynth.storage import configure_storage, import_run_records

logger = logging.getLogger("init_db")


def main(paths):
    """Initialize the database and import the given JSON record files."""
    settings = Settings()
    configure_logging(settings, verbosity=1)
    logger.info("initializing database at %s", settings.database_url)
    configure_storage(settings.database_url)

    total = 0
    for path in paths:
        if not Path(path).exists():
            logger.warning("no such file: %s", path)
            continue
        count = import_run_records(path)
        logger.info("imported %d record(s) from %s", count, path)
        total += count

    print(f"Database ready; {total} run record(s) imported.")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
