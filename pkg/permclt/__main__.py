import sys

from permclt.main import main

sys.exit(main())
