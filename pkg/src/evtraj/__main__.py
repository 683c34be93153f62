import sys

from evtraj.cli import main

sys.exit(main())
