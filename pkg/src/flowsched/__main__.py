import sys

from flowsched.harness.cli import main

sys.exit(main())
