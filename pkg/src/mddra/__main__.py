import sys

from mddra.cli import main

sys.exit(main())
