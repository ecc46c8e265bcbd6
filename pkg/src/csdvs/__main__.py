import sys

from csdvs.cli import main

sys.exit(main())
