import sys

from reqtest.cli import main

sys.exit(main())
