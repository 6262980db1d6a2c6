import sys

from cqexp.cli import main

sys.exit(main())
