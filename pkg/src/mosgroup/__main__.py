import sys

from mosgroup.cli import main

sys.exit(main())
