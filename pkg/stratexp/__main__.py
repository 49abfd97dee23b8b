import sys

from stratexp.cli import main

sys.exit(main())
