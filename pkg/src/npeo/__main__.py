import sys

from npeo.cli import main

sys.exit(main())
