import sys

from bankgcn.cli import main

sys.exit(main())
