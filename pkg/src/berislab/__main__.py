import sys

from berislab.cli import main

sys.exit(main())
