import sys

from fairdegrade.cli import main

sys.exit(main())
